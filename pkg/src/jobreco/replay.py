"""Deterministic synthetic traffic and closed-loop A/B replay.

A world is a seeded catalog of topical jobs, their embeddings, and users with
topic preferences and browsing histories. Replay serves slates to simulated
requests in virtual time, samples clicks from a position-bias x affinity model,
and feeds the clicks back into the engine before the next request.
"""

from __future__ import annotations

import dataclasses
import json
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (Interaction, InteractionKind, InvalidParams, JobPosting, ReplayClock,
                   SlateRequest, Surface, job_to_dict, write_jsonl)
from .engine import Engine, EngineConfig
from .experiment import ExperimentConfig, ExperimentReport, OutcomeLog, OutcomeRecord, assign, report
from .strategies import Slate, StrategyId

DAY = 86_400
SESSION_GAP = 30 * 60
_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class WorldParams:
    """Generator and click-model settings.

    Embeddings are ``centroid + noise`` with ``|noise| <= noise_scale < 1``, so
    two jobs of the same topic always have cosine at least
    ``1 - 2 * noise_scale**2`` (0.28 at the default 0.6).

    A shown item at 0-based rank ``r`` is clicked with probability
    ``position_bias[r] * (base_click + affinity_weight * preference)``, where
    ``preference`` is the user's share of interest in the job's topic. With
    ``affinity_weight = 0`` clicks ignore content entirely.
    """

    seed: int = 0
    job_count: int = 2000
    user_count: int = 500
    topic_count: int = 10
    dimension: int = 100
    noise_scale: float = 0.6
    words_per_topic: int = 30
    common_words: int = 60
    description_words: tuple[int, int] = (15, 40)
    topic_word_share: float = 0.6
    inactive_fraction: float = 0.0
    topic_concentration: float = 0.5
    sessions_per_user: float = 3.0
    views_per_session: float = 4.0
    history_days: int = 30
    start_time: int = 1_700_000_000
    position_bias: tuple[float, ...] | None = None
    base_click: float = 0.01
    affinity_weight: float = 0.1
    new_session_prob: float = 0.25
    step_seconds: int = 30

    def __post_init__(self):
        self.description_words = tuple(self.description_words)
        if self.position_bias is not None:
            self.position_bias = tuple(float(x) for x in self.position_bias)
        self.validate()

    def validate(self) -> None:
        for name in ("job_count", "topic_count", "dimension", "words_per_topic", "history_days",
                     "step_seconds"):
            if int(getattr(self, name)) <= 0:
                raise InvalidParams(f"{name} must be positive", name)
        if self.words_per_topic < 2:
            raise InvalidParams("words_per_topic must be at least 2", "words_per_topic")
        if self.user_count < 0:
            raise InvalidParams("user_count must be non-negative", "user_count")
        if self.topic_count > self.job_count:
            raise InvalidParams("topic_count must not exceed job_count", "topic_count")
        if not 0 <= self.noise_scale < 1:
            raise InvalidParams("noise_scale must lie in [0, 1)", "noise_scale")
        lo, hi = self.description_words
        if not 1 <= lo <= hi:
            raise InvalidParams("description_words must be 1 <= lo <= hi", "description_words")
        for name in ("inactive_fraction", "topic_word_share", "new_session_prob", "base_click"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidParams(f"{name} must lie in [0, 1]", name)
        if self.affinity_weight < 0 or self.topic_concentration <= 0:
            raise InvalidParams("affinity_weight >= 0 and topic_concentration > 0 required",
                                "affinity_weight")

    def bias(self, rank: int) -> float:
        if self.position_bias is None:
            return 1.0 / (rank + 1)
        pb = self.position_bias
        return pb[rank] if rank < len(pb) else pb[-1]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["description_words"] = list(self.description_words)
        d["position_bias"] = None if self.position_bias is None else list(self.position_bias)
        return d


@dataclass
class SyntheticWorld:
    params: WorldParams
    jobs: list[JobPosting]
    embeddings: np.ndarray
    job_topic: dict[str, int]
    centroids: np.ndarray
    user_ids: list[str]
    user_affinity: np.ndarray
    interactions: list[Interaction]
    files: dict[str, Path] = field(default_factory=dict)

    @property
    def start_time(self) -> int:
        return self.params.start_time

    def affinity(self, user_index: int, job_id: str) -> float:
        p = self.params
        pref = self.user_affinity[user_index, self.job_topic[job_id]]
        return p.base_click + p.affinity_weight * float(pref)


def _vocabulary(rng: np.random.Generator, size: int, taken: set[str]) -> list[str]:
    words = []
    while len(words) < size:
        n = int(rng.integers(2, 5))
        w = "".join(_CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(n))
        if w not in taken:
            taken.add(w)
            words.append(w)
    return words


def generate_world(params: WorldParams, out_dir=None) -> SyntheticWorld:
    """Build a world from ``params``; with ``out_dir`` also write its JSONL files.

    The same parameters always give the same world and byte-identical files.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    p = params
    taken: set[str] = set()
    common = _vocabulary(rng, p.common_words, taken)
    topic_words = [_vocabulary(rng, p.words_per_topic, taken) for _ in range(p.topic_count)]

    centroids = rng.standard_normal((p.topic_count, p.dimension))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)

    topics = np.concatenate([np.arange(p.topic_count),
                             rng.integers(0, p.topic_count, p.job_count - p.topic_count)])
    directions = rng.standard_normal((p.job_count, p.dimension))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = p.noise_scale * rng.random(p.job_count)
    emb = centroids[topics] + directions * radii[:, None]
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)

    history_start = p.start_time - p.history_days * DAY
    jobs, job_topic = [], {}
    for j in range(p.job_count):
        t = int(topics[j])
        n_words = int(rng.integers(p.description_words[0], p.description_words[1] + 1))
        from_topic = rng.random(n_words) < p.topic_word_share
        tw = rng.integers(0, p.words_per_topic, n_words)
        cw = rng.integers(0, max(p.common_words, 1), n_words)
        words = [topic_words[t][tw[i]] if from_topic[i] or not common else common[cw[i]]
                 for i in range(n_words)]
        job_id = f"job{j:06d}"
        jobs.append(JobPosting(
            job_id=job_id,
            title=f"{topic_words[t][0]} {topic_words[t][1]}",
            description=" ".join(words),
            active=bool(rng.random() >= p.inactive_fraction),
            created_at=int(history_start + rng.integers(0, p.history_days * DAY)),
        ))
        job_topic[job_id] = t

    by_topic: list[list[str]] = [[] for _ in range(p.topic_count)]
    for job in jobs:
        if job.active:
            by_topic[job_topic[job.job_id]].append(job.job_id)

    user_ids = [f"user{u:06d}" for u in range(p.user_count)]
    affinity = (rng.dirichlet(np.full(p.topic_count, p.topic_concentration), p.user_count)
                if p.user_count else np.zeros((0, p.topic_count)))
    events: list[Interaction] = []
    for u, user in enumerate(user_ids):
        n_sessions = 1 + int(rng.poisson(max(p.sessions_per_user - 1, 0)))
        for s in range(n_sessions):
            t = int(history_start + rng.integers(0, p.history_days * DAY - 3600))
            for _ in range(1 + int(rng.poisson(max(p.views_per_session - 1, 0)))):
                pool = by_topic[int(rng.choice(p.topic_count, p=affinity[u]))]
                if not pool:
                    continue
                job_id = pool[int(rng.integers(len(pool)))]
                events.append(Interaction(user, job_id, f"{user}-h{s}", t, InteractionKind.VIEW))
                t += int(rng.integers(20, 300))
    events.sort(key=lambda e: (e.timestamp, e.user_id))

    world = SyntheticWorld(params, jobs, emb, job_topic, centroids, user_ids, affinity, events)
    if out_dir is not None:
        write_world(world, out_dir)
    return world


def write_world(world: SyntheticWorld, out_dir, remember: bool = True) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {name: out / f"{name}.jsonl" for name in ("jobs", "embeddings", "interactions")}
    write_jsonl(files["jobs"], (job_to_dict(j) for j in world.jobs))
    write_jsonl(files["embeddings"], ({"job_id": j.job_id, "vector": v.tolist()}
                                      for j, v in zip(world.jobs, world.embeddings)))
    write_jsonl(files["interactions"], (e.to_dict() for e in world.interactions))
    files["world"] = out / "world.json"
    files["world"].write_text(json.dumps({"params": world.params.to_dict()}, indent=2,
                                         sort_keys=True) + "\n")
    if remember:
        world.files = files
    return files


def load_engine(world: SyntheticWorld, config: EngineConfig | None = None,
                clock=None) -> Engine:
    """Materialize ``world`` into a fresh engine through the JSONL ingestion path."""
    config = config or EngineConfig(dimension=world.params.dimension)
    if config.dimension != world.params.dimension:
        raise InvalidParams("engine dimension differs from world dimension", "dimension")
    engine = Engine(config, clock or ReplayClock(world.start_time))
    with tempfile.TemporaryDirectory() as tmp:
        files = world.files
        if not files or not all(f.exists() for f in files.values()):
            files = write_world(world, tmp, remember=False)
        engine.load_jobs(files["jobs"])
        engine.load_embeddings(files["embeddings"])
        engine.load_interactions(files["interactions"])
    return engine


@dataclass
class Step:
    """One simulated request and what happened to it."""

    request: SlateRequest
    arm: str
    strategy: StrategyId
    slate: Slate
    clicked: list[str]
    seen_before: set[str]
    record: OutcomeRecord


class Replay:
    """Closed-loop request simulator bound to one engine and one experiment.

    ``latency="virtual"`` logs the slate's deterministic cost estimate so that
    reports are reproducible; ``"measured"`` logs wall-clock time.
    """

    def __init__(self, world: SyntheticWorld, config: ExperimentConfig,
                 engine: Engine | None = None, engine_config: EngineConfig | None = None,
                 latency: str = "virtual"):
        if latency not in ("virtual", "measured"):
            raise InvalidParams("latency must be 'virtual' or 'measured'", "latency")
        if not world.user_ids:
            raise InvalidParams("replay needs at least one user", "user_count")
        self.world = world
        self.config = config
        self.latency = latency
        self.clock = ReplayClock(world.start_time)
        self.engine = engine or load_engine(world, engine_config, self.clock)
        if engine is not None:
            self.clock = engine.clock
        self.rng = np.random.default_rng([world.params.seed, 7919])
        self.log = OutcomeLog()
        self._sessions: dict[int, tuple[str, int, int]] = {}
        self._round = 0
        self._active_by_topic: list[list[str]] | None = None

    def _session(self, u: int, now: int) -> str:
        state = self._sessions.get(u)
        if (state is None or now - state[1] > SESSION_GAP
                or self.rng.random() < self.world.params.new_session_prob):
            n = 0 if state is None else state[2] + 1
            sid = f"{self.world.user_ids[u]}-r{n}"
        else:
            sid, _, n = state
        self._sessions[u] = (sid, now, n)
        return sid

    def _pick_anchor(self, u: int, seen: set[str]) -> str:
        w = self.world
        engine = self.engine
        t = int(self.rng.choice(w.params.topic_count, p=w.user_affinity[u]))
        pool = [j for j in self._topic_pool(t) if engine.is_active(j)]
        if not pool:
            pool = [j for j in engine.jobs_by_recency() if engine.is_active(j)]
        if not pool:
            raise InvalidParams("no active jobs to browse", "job_count")
        fresh = [j for j in pool if j not in seen]
        choices = fresh or pool
        return choices[int(self.rng.integers(len(choices)))]

    def _topic_pool(self, t: int) -> list[str]:
        if self._active_by_topic is None:
            pools: list[list[str]] = [[] for _ in range(self.world.params.topic_count)]
            for job in self.world.jobs:
                pools[self.world.job_topic[job.job_id]].append(job.job_id)
            self._active_by_topic = pools
        return self._active_by_topic[t]

    def step(self, surface: Surface | None = None, strategy: StrategyId | None = None,
             d: float | None = None) -> Step:
        """Serve one request; ``surface``/``strategy`` override the experiment's."""
        w, engine = self.world, self.engine
        surface = Surface(surface or self.config.surface)
        now = self.clock.now()
        u = int(self.rng.integers(len(w.user_ids)))
        user = w.user_ids[u]
        sid = self._session(u, now)
        anchor = None
        if surface is Surface.SIMILAR_JOBS:
            anchor = self._pick_anchor(u, engine.interactions.session_seen(user, sid))
            engine.record(Interaction(user, anchor, sid, now, InteractionKind.VIEW))
        seen = engine.interactions.session_seen(user, sid)
        arm = assign(user, self.config.salt)
        arm_strategy, arm_d = self.config.strategy(arm)
        if strategy is None:
            strategy, d = arm_strategy, arm_d
        req = SlateRequest(surface, user, sid, now, anchor)
        slate = engine.recommend(req, strategy, d)
        draws = self.rng.random(len(slate.items))
        clicked = [j for r, j in enumerate(slate.items)
                   if draws[r] < min(1.0, w.params.bias(r) * w.affinity(u, j))]
        latency = slate.virtual_latency_ms if self.latency == "virtual" else slate.latency_ms
        record = OutcomeRecord(self.config.experiment_id, arm, user, list(slate.items), now,
                               latency, list(clicked), slate_id=f"r{self._round}")
        self.log.append(record)
        for j in clicked:
            engine.record(Interaction(user, j, sid, now, InteractionKind.CLICK))
        self._round += 1
        self.clock.advance(w.params.step_seconds)
        return Step(req, arm, StrategyId(strategy), slate, clicked, seen, record)

    def run(self, rounds: int) -> ExperimentReport:
        for _ in range(rounds):
            self.step()
        return report(self.config, self.log.snapshot(), allow_empty=True)


def run_experiment(world: SyntheticWorld, config: ExperimentConfig, rounds: int,
                   **kwargs) -> ExperimentReport:
    """Replay ``rounds`` requests against a fresh engine and report the outcome."""
    return Replay(world, config, **kwargs).run(rounds)
