"""A/B assignment, outcome logging, CTR / runtime aggregation and reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import threading
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .core import InvalidParams, RecoError, RecordError, Surface, load_records, write_jsonl
from .stats import DegenerateTable, InsufficientSample, chi_squared_2x2, welch_t_test
from .strategies import HOMEPAGE_STRATEGIES, SIMILAR_STRATEGIES, StrategyId

ARMS = ("A", "B")
HASH_VERSION = "sha256-v1"
SIGNIFICANT = 0.05
HIGHLY_SIGNIFICANT = 0.0005


class EmptyArm(RecoError):
    code = "empty_arm"


@dataclass
class ExperimentConfig:
    """Two-arm experiment on one surface.

    ``decay_a`` / ``decay_b`` override the activation decay for BLL arms.
    Identical strategies on both arms are rejected unless ``aa_test`` is set.
    """

    experiment_id: str
    surface: Surface
    arm_a: StrategyId
    arm_b: StrategyId
    start: int = 0
    end: int = 2**62
    salt: str = ""
    decay_a: float | None = None
    decay_b: float | None = None
    aa_test: bool = False
    hash_version: str = HASH_VERSION

    def __post_init__(self):
        if not self.experiment_id:
            raise InvalidParams("experiment_id must be non-empty", "experiment_id")
        try:
            self.surface = Surface(self.surface)
            self.arm_a, self.arm_b = StrategyId(self.arm_a), StrategyId(self.arm_b)
        except ValueError as exc:
            raise InvalidParams(str(exc), "arm") from None
        allowed = SIMILAR_STRATEGIES if self.surface is Surface.SIMILAR_JOBS else HOMEPAGE_STRATEGIES
        for name in ("arm_a", "arm_b"):
            if getattr(self, name) not in allowed:
                raise InvalidParams(f"{getattr(self, name).value} cannot serve "
                                    f"{self.surface.value}", name)
        same = self.arm_a is self.arm_b and self.decay_a == self.decay_b
        if same and not self.aa_test:
            raise InvalidParams("arms must differ (set aa_test for an A/A run)", "arm_b")
        if self.hash_version != HASH_VERSION:
            raise InvalidParams(f"unsupported hash version {self.hash_version!r}", "hash_version")
        if not self.salt:
            self.salt = self.experiment_id

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidParams(f"bad experiment config: {exc}", "experiments") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["surface"] = self.surface.value
        d["arm_a"], d["arm_b"] = self.arm_a.value, self.arm_b.value
        return d

    def strategy(self, arm: str) -> tuple[StrategyId, float | None]:
        return (self.arm_a, self.decay_a) if arm == "A" else (self.arm_b, self.decay_b)

    def label(self, arm: str) -> str:
        strategy, decay = self.strategy(arm)
        return strategy.value if decay is None else f"{strategy.value}_d={decay:g}"

    def running(self, t: int) -> bool:
        return self.start <= t < self.end


def stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def assign(user_id: str, salt: str) -> str:
    """Arm for ``user_id``: "A" when the salted hash is even, else "B"."""
    return "A" if stable_hash(salt + user_id) % 2 == 0 else "B"


@dataclass
class OutcomeRecord:
    experiment_id: str
    arm: str
    user_id: str
    items: list[str]
    served_at: int
    latency_ms: float
    clicked_items: list[str] = field(default_factory=list)
    slate_id: str = ""

    def __post_init__(self):
        if self.arm not in ARMS:
            raise InvalidParams(f"arm must be one of {ARMS}", "arm")
        if not set(self.clicked_items) <= set(self.items):
            raise InvalidParams("clicked items must be part of the slate", "clicked_items")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict, line: int = 0) -> "OutcomeRecord":
        try:
            return cls(
                experiment_id=str(obj["experiment_id"]), arm=obj["arm"],
                user_id=str(obj["user_id"]), items=list(obj["items"]),
                served_at=int(obj["served_at"]), latency_ms=float(obj["latency_ms"]),
                clicked_items=list(obj.get("clicked_items", [])),
                slate_id=str(obj.get("slate_id", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordError(f"bad outcome record ({exc!r})", line) from None
        except InvalidParams as exc:
            raise RecordError(exc.message, line, exc.field) from None


def ctr(records: Iterable[OutcomeRecord]) -> float:
    """Clicked items over served items; 0 for no items."""
    clicks = items = 0
    for r in records:
        clicks += len(set(r.clicked_items))
        items += len(r.items)
    return clicks / items if items else 0.0


def utc_day(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%d")


def daily_ctr(records: Iterable[OutcomeRecord]) -> dict[str, float]:
    by_day: dict[str, list[OutcomeRecord]] = defaultdict(list)
    for r in records:
        by_day[utc_day(r.served_at)].append(r)
    return {day: ctr(rs) for day, rs in sorted(by_day.items())}


def relative_increase(best: float, other: float) -> float | None:
    return (best - other) / other if other else None


def relative_decrease(slow: float, fast: float) -> float | None:
    return (slow - fast) / slow if slow else None


def significance_mark(p: float | None) -> str:
    if p is None:
        return ""
    if p < HIGHLY_SIGNIFICANT:
        return "**"
    if p < SIGNIFICANT:
        return "*"
    return ""


@dataclass
class ArmSummary:
    arm: str
    strategy: str
    user_count: int
    reco_count: int
    item_count: int
    click_count: int
    ctr: float
    mean_runtime_ms: float


@dataclass
class ExperimentReport:
    experiment_id: str
    surface: str
    arms: dict[str, ArmSummary]
    best_ctr_arm: str
    fastest_arm: str
    relative_ctr_increase: float | None
    relative_runtime_decrease: float | None
    chi2_statistic: float | None
    chi2_p_value: float | None
    ttest_statistic: float | None
    ttest_p_value: float | None
    ctr_mark: str
    runtime_mark: str
    daily_ctr: dict[str, dict[str, float]]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        """Table-style summary; marks sit on the winning arm of each metric."""
        head = (f"{'arm':<4}{'approach':<14}{'users':>8}{'slates':>9}{'items':>10}"
                f"{'CTR':>11}{'up':>9}{'runtime ms':>13}{'down':>9}")
        lines = [f"experiment {self.experiment_id} ({self.surface})", head, "-" * len(head)]
        for arm in ARMS:
            s = self.arms[arm]
            c = f"{s.ctr:.4f}" + (self.ctr_mark if arm == self.best_ctr_arm else "")
            r = f"{s.mean_runtime_ms:.1f}" + (self.runtime_mark if arm == self.fastest_arm else "")
            up = _pct(self.relative_ctr_increase) if arm == self.best_ctr_arm else ""
            down = _pct(self.relative_runtime_decrease) if arm == self.fastest_arm else ""
            lines.append(f"{arm:<4}{s.strategy:<14}{s.user_count:>8}{s.reco_count:>9}"
                         f"{s.item_count:>10}{c:>11}{up:>9}{r:>13}{down:>9}")
        lines.append(f"chi2 = {_num(self.chi2_statistic)}  p = {_num(self.chi2_p_value)};  "
                     f"welch t = {_num(self.ttest_statistic)}  p = {_num(self.ttest_p_value)}")
        return "\n".join(lines)

    def daily_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["day", "arm", "strategy", "ctr"])
        for arm in ARMS:
            for day, value in self.daily_ctr.get(arm, {}).items():
                w.writerow([day, arm, self.arms[arm].strategy, f"{value:.6f}"])
        return buf.getvalue()


def _pct(x: float | None) -> str:
    return "n/a" if x is None else f"{100 * x:.2f}%"


def _num(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.4g}"


def summarize(arm: str, strategy: str, records: Sequence[OutcomeRecord]) -> ArmSummary:
    latencies = [r.latency_ms for r in records]
    return ArmSummary(
        arm=arm,
        strategy=strategy,
        user_count=len({r.user_id for r in records}),
        reco_count=len(records),
        item_count=sum(len(r.items) for r in records),
        click_count=sum(len(set(r.clicked_items)) for r in records),
        ctr=ctr(records),
        mean_runtime_ms=sum(latencies) / len(latencies) if latencies else 0.0,
    )


def report(config: ExperimentConfig, records: Iterable[OutcomeRecord],
           allow_empty: bool = False) -> ExperimentReport:
    """Aggregate one experiment's outcomes into a two-arm comparison.

    The CTR increase is reported for the arm with the higher CTR relative to
    the other; the runtime decrease for the faster arm relative to the slower.
    Both arms must have at least one record unless ``allow_empty`` is set, in
    which case an empty arm gets a zero summary and no test is run.
    """
    by_arm: dict[str, list[OutcomeRecord]] = {a: [] for a in ARMS}
    for r in records:
        if r.experiment_id == config.experiment_id:
            by_arm[r.arm].append(r)
    for arm in ARMS:
        if not by_arm[arm] and not allow_empty:
            raise EmptyArm(f"arm {arm} of {config.experiment_id!r} has no outcomes", "arm")
    s = {arm: summarize(arm, config.label(arm), by_arm[arm]) for arm in ARMS}
    both = bool(by_arm["A"] and by_arm["B"])
    best = "A" if s["A"].ctr >= s["B"].ctr else "B"
    other = "B" if best == "A" else "A"
    fast = "A" if s["A"].mean_runtime_ms <= s["B"].mean_runtime_ms else "B"
    slow = "B" if fast == "A" else "A"
    try:
        chi2, chi2_p = chi_squared_2x2(s["A"].click_count, s["A"].item_count,
                                       s["B"].click_count, s["B"].item_count)
    except DegenerateTable:
        chi2 = chi2_p = None
    try:
        if not both:
            raise InsufficientSample("an arm has no outcomes")
        t, t_p = welch_t_test([r.latency_ms for r in by_arm["A"]],
                              [r.latency_ms for r in by_arm["B"]])
    except InsufficientSample:
        t = t_p = None
    return ExperimentReport(
        experiment_id=config.experiment_id,
        surface=config.surface.value,
        arms=s,
        best_ctr_arm=best,
        fastest_arm=fast,
        relative_ctr_increase=relative_increase(s[best].ctr, s[other].ctr) if both else None,
        relative_runtime_decrease=relative_decrease(s[slow].mean_runtime_ms,
                                                    s[fast].mean_runtime_ms) if both else None,
        chi2_statistic=chi2,
        chi2_p_value=chi2_p,
        ttest_statistic=t,
        ttest_p_value=t_p,
        ctr_mark=significance_mark(chi2_p),
        runtime_mark=significance_mark(t_p),
        daily_ctr={arm: daily_ctr(by_arm[arm]) for arm in ARMS},
    )


class OutcomeLog:
    """Thread-safe append-only store of served slates and their clicks."""

    def __init__(self):
        self._records: list[OutcomeRecord] = []
        self._by_slate: dict[str, OutcomeRecord] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    def append(self, record: OutcomeRecord) -> None:
        with self._lock:
            self._records.append(record)
            if record.slate_id:
                self._by_slate[record.slate_id] = record

    def get(self, slate_id: str) -> OutcomeRecord | None:
        return self._by_slate.get(slate_id)

    def add_clicks(self, slate_id: str, clicked: Iterable[str]) -> OutcomeRecord:
        """Attach clicks to a served slate; raises ``KeyError`` for unknown ids."""
        with self._lock:
            rec = self._by_slate[slate_id]
            clicked = list(clicked)
            if not set(clicked) <= set(rec.items):
                raise InvalidParams("clicked items must be part of the slate", "clicked_items")
            for j in clicked:
                if j not in rec.clicked_items:
                    rec.clicked_items.append(j)
            return rec

    def snapshot(self, experiment_id: str | None = None) -> list[OutcomeRecord]:
        with self._lock:
            return [OutcomeRecord(**r.to_dict()) for r in self._records
                    if experiment_id is None or r.experiment_id == experiment_id]

    def dump_jsonl(self, path) -> int:
        return write_jsonl(path, (r.to_dict() for r in self.snapshot()))

    def load_jsonl(self, path, strict: bool = True) -> tuple[int, list[RecordError]]:
        return load_records(path, lambda obj, line: self.append(OutcomeRecord.from_dict(obj, line)),
                            strict)
