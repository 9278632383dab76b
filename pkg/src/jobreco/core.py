"""Domain types, errors, validation, clocks and JSONL record helpers."""

from __future__ import annotations

import enum
import json
import threading
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from typing import Iterable, Iterator

import numpy as np

DEFAULT_DIMENSION = 100


class RecoError(Exception):
    """Base class for every engine error.

    ``code`` is a stable machine-readable name and ``field`` names the offending
    input field when there is one.
    """

    code = "error"

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field
        self.message = message

    def to_dict(self) -> dict:
        return {"code": self.code, "field": self.field, "message": self.message}


class ValidationFailed(RecoError):
    code = "validation_failed"


class DimensionMismatch(ValidationFailed):
    code = "dimension_mismatch"


class EmptyIdentifier(ValidationFailed):
    code = "empty_identifier"


class NonFiniteValue(ValidationFailed):
    code = "non_finite_value"


class ZeroVector(ValidationFailed):
    code = "zero_vector"


class EmptyDocument(ValidationFailed):
    code = "empty_document"


class UnknownJob(RecoError):
    code = "unknown_job"


class MissingEmbedding(RecoError):
    code = "missing_embedding"


class EmptyHistory(RecoError):
    code = "empty_history"


class NonPositiveDecay(RecoError):
    code = "non_positive_decay"


class ColdStartUser(RecoError):
    code = "cold_start_user"


class InvalidParams(RecoError):
    code = "invalid_params"


class InteractionKind(str, enum.Enum):
    VIEW = "view"
    CLICK = "click"
    APPLY = "apply"

    @property
    def engaged(self) -> bool:
        """Only clicks and applications count as engagement for CTR."""
        return self is not InteractionKind.VIEW


class Surface(str, enum.Enum):
    SIMILAR_JOBS = "similar_jobs"
    HOMEPAGE = "homepage"


@dataclass(frozen=True)
class JobPosting:
    job_id: str
    title: str = ""
    description: str = ""
    active: bool = True
    created_at: int = 0


@dataclass(frozen=True)
class Interaction:
    user_id: str
    job_id: str
    session_id: str
    timestamp: int
    kind: InteractionKind = InteractionKind.VIEW

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


@dataclass(frozen=True)
class SlateRequest:
    surface: Surface
    user_id: str
    session_id: str
    requested_at: int
    anchor_job_id: str | None = None

    def __post_init__(self):
        if self.surface is Surface.SIMILAR_JOBS and not self.anchor_job_id:
            raise EmptyIdentifier("similar_jobs requests need an anchor job", "anchor_job_id")


def as_vector(values: Iterable[float] | np.ndarray, dim: int | None = None,
              field: str = "vector") -> np.ndarray:
    """Convert to a float64 array, checking length and finiteness."""
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationFailed(f"{field} is not numeric: {exc}", field) from None
    if arr.ndim != 1:
        raise DimensionMismatch(f"{field} must be one-dimensional", field)
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"{field} has length {arr.shape[0]}, expected {dim}", field)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{field} contains NaN or infinite entries", field)
    return arr


def validate_job(job: JobPosting, dim: int, embedding=None) -> None:
    """Raise a :class:`ValidationFailed` subclass if ``job`` is not acceptable."""
    if not isinstance(job.job_id, str) or not job.job_id:
        raise EmptyIdentifier("job_id must be a non-empty string", "job_id")
    if embedding is not None:
        as_vector(embedding, dim, "embedding")
    elif not job.description.strip():
        raise EmptyDocument("description may only be empty when an embedding is supplied",
                            "description")
    if not isinstance(job.created_at, int) or isinstance(job.created_at, bool):
        raise ValidationFailed("created_at must be integer seconds", "created_at")


def validate_interaction(ev: Interaction) -> None:
    for name in ("user_id", "job_id", "session_id"):
        value = getattr(ev, name)
        if not isinstance(value, str) or (not value and name != "session_id"):
            raise EmptyIdentifier(f"{name} must be a non-empty string", name)
    if not isinstance(ev.timestamp, int) or isinstance(ev.timestamp, bool) or ev.timestamp <= 0:
        raise ValidationFailed("timestamp must be a positive integer", "timestamp")
    if not isinstance(ev.kind, InteractionKind):
        raise ValidationFailed(f"unknown interaction kind {ev.kind!r}", "kind")


# -- clocks ------------------------------------------------------------------


class RealClock:
    """Wall clock in integer unix seconds, never running backwards in-process."""

    def __init__(self):
        self._last = 0
        self._lock = threading.Lock()

    def now(self) -> int:
        with self._lock:
            self._last = max(self._last, int(time.time()))
            return self._last


class ReplayClock:
    """Virtual clock fully controlled by the caller."""

    def __init__(self, start: int = 0):
        self._now = int(start)

    def now(self) -> int:
        return self._now

    def set(self, t: int) -> None:
        self._now = int(t)

    def advance(self, seconds: int) -> int:
        self._now += int(seconds)
        return self._now


_default_clock = RealClock()


def now_seconds(clock=None) -> int:
    return (clock or _default_clock).now()


# -- locking -----------------------------------------------------------------


class RWLock:
    """Readers-writer lock; writers get priority over newly arriving readers."""

    def __init__(self):
        self._cond = threading.Condition(threading.Lock())
        self._readers = 0
        self._writer = False
        self._waiting_writers = 0

    @contextmanager
    def read(self) -> Iterator[None]:
        with self._cond:
            while self._writer or self._waiting_writers:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if not self._readers:
                    self._cond.notify_all()

    @contextmanager
    def write(self) -> Iterator[None]:
        with self._cond:
            self._waiting_writers += 1
            while self._writer or self._readers:
                self._cond.wait()
            self._waiting_writers -= 1
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


class RowIds:
    """Dense row numbering for string ids plus their lexicographic rank.

    The rank array drives deterministic tie-breaking in the kernels and is
    rebuilt lazily after new ids arrive.
    """

    def __init__(self):
        self.ids: list[str] = []
        self.rows: dict[str, int] = {}
        self._rank: np.ndarray | None = np.empty(0, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, key: str) -> bool:
        return key in self.rows

    def get_or_add(self, key: str) -> int:
        row = self.rows.get(key)
        if row is None:
            row = len(self.ids)
            self.ids.append(key)
            self.rows[key] = row
            self._rank = None
        return row

    @property
    def rank(self) -> np.ndarray:
        if self._rank is None:
            order = sorted(range(len(self.ids)), key=self.ids.__getitem__)
            rank = np.empty(len(order), dtype=np.int64)
            rank[order] = np.arange(len(order), dtype=np.int64)
            self._rank = rank
        return self._rank


# -- JSONL records -----------------------------------------------------------


class RecordError(ValidationFailed):
    """A malformed line in a JSONL input file."""

    code = "malformed_record"

    def __init__(self, message: str, line: int, field: str | None = None):
        super().__init__(f"line {line}: {message}" if line else message, field)
        self.line = line
        self.detail = message


def _require(obj: dict, key: str, types, line: int):
    if key not in obj:
        raise RecordError(f"missing field {key!r}", line, key)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, types):
        raise RecordError(f"field {key!r} has wrong type {type(value).__name__}", line, key)
    return value


def _optional(obj: dict, key: str, types, default, line: int):
    if obj.get(key) is None:
        return default
    if types is not bool and isinstance(obj[key], bool) or not isinstance(obj[key], types):
        raise RecordError(f"field {key!r} has wrong type {type(obj[key]).__name__}", line, key)
    return obj[key]


def job_from_dict(obj: dict, line: int = 0) -> JobPosting:
    return JobPosting(
        job_id=_require(obj, "job_id", str, line),
        title=_optional(obj, "title", str, "", line),
        description=_optional(obj, "description", str, "", line),
        active=_optional(obj, "active", bool, True, line),
        created_at=_optional(obj, "created_at", int, 0, line),
    )


def job_to_dict(job: JobPosting) -> dict:
    return asdict(job)


def interaction_from_dict(obj: dict, line: int = 0) -> Interaction:
    kind = obj.get("kind", "view")
    try:
        kind = InteractionKind(kind)
    except ValueError:
        raise RecordError(f"unknown interaction kind {kind!r}", line, "kind") from None
    ev = Interaction(
        user_id=_require(obj, "user_id", str, line),
        job_id=_require(obj, "job_id", str, line),
        session_id=obj.get("session_id", "") or "",
        timestamp=_require(obj, "timestamp", int, line),
        kind=kind,
    )
    try:
        validate_interaction(ev)
    except ValidationFailed as exc:
        raise RecordError(exc.message, line, exc.field) from None
    return ev


def embedding_from_dict(obj: dict, line: int = 0) -> tuple[str, list[float]]:
    job_id = _require(obj, "job_id", str, line)
    if not job_id:
        raise RecordError("empty job_id", line, "job_id")
    return job_id, _require(obj, "vector", list, line)


def iter_jsonl(path) -> Iterator[tuple[int, str]]:
    """Yield ``(line_number, raw_line)`` for every non-blank line of ``path``."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if raw.strip():
                yield lineno, raw


def parse_json_line(raw: str, lineno: int) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise RecordError(f"invalid JSON ({exc.msg})", lineno) from None
    if not isinstance(obj, dict):
        raise RecordError("expected a JSON object", lineno)
    return obj


def load_records(path, apply, strict: bool = True) -> tuple[int, list[RecordError]]:
    """Parse each line of ``path`` and hand the object to ``apply(obj, lineno)``.

    Engine errors are re-raised as :class:`RecordError` carrying the line
    number. With ``strict`` the first failure raises; otherwise failures are
    collected and returned with the accepted count.
    """
    accepted, rejected = 0, []
    for lineno, raw in iter_jsonl(path):
        try:
            apply(parse_json_line(raw, lineno), lineno)
            accepted += 1
        except RecoError as exc:
            err = exc if isinstance(exc, RecordError) else RecordError(exc.message, lineno, exc.field)
            if strict:
                raise err from None
            rejected.append(err)
    return accepted, rejected


def write_jsonl(path, rows: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=False, separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


def check_positive(name: str, value, allow_float: bool = True) -> None:
    ok = isinstance(value, (int, float) if allow_float else int) and not isinstance(value, bool)
    if not ok or not value > 0:
        raise InvalidParams(f"{name} must be positive, got {value!r}", name)
