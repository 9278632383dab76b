"""Latency benchmark over a synthetic catalog."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import SlateRequest, Surface
from .engine import EngineConfig
from .replay import WorldParams, generate_world, load_engine
from .strategies import HOMEPAGE_STRATEGIES, SIMILAR_STRATEGIES, StrategyId

BENCH_CASES: tuple[tuple[Surface, StrategyId], ...] = tuple(
    [(Surface.SIMILAR_JOBS, s) for s in sorted(SIMILAR_STRATEGIES, key=lambda s: s.value)]
    + [(Surface.HOMEPAGE, s) for s in sorted(HOMEPAGE_STRATEGIES, key=lambda s: s.value)])


@dataclass(frozen=True)
class LatencySummary:
    surface: str
    strategy: str
    requests: int
    p50_ms: float
    p95_ms: float
    p99_ms: float
    max_ms: float

    def line(self) -> str:
        return (f"{self.surface:<13} {self.strategy:<8} n={self.requests:<5d} "
                f"p50={self.p50_ms:8.3f}ms p95={self.p95_ms:8.3f}ms p99={self.p99_ms:8.3f}ms")


def summarize_latencies(surface: str, strategy: str, samples) -> LatencySummary:
    arr = np.asarray(samples, dtype=float)
    p50, p95, p99 = np.percentile(arr, [50, 95, 99])
    return LatencySummary(surface, strategy, int(arr.size), float(p50), float(p95), float(p99),
                          float(arr.max()))


def run_bench(jobs: int = 10_000, dim: int = 100, users: int = 5_000, requests: int = 200,
              seed: int = 0, topics: int = 20, backend: str | None = None,
              cases=BENCH_CASES) -> list[LatencySummary]:
    """Time ``engine.recommend`` end to end for each (surface, strategy) case."""
    if backend is not None:
        kernels.use_backend(backend)
    world = generate_world(WorldParams(seed=seed, job_count=jobs, user_count=users,
                                       topic_count=min(topics, jobs), dimension=dim))
    engine = load_engine(world, EngineConfig(dimension=dim))
    rng = np.random.default_rng(seed)
    job_ids = [j.job_id for j in world.jobs if j.active]
    now = engine.clock.now()
    out = []
    for surface, strategy in cases:
        samples = []
        for i in range(requests):
            user = world.user_ids[int(rng.integers(len(world.user_ids)))] if users else f"b{i}"
            anchor = job_ids[int(rng.integers(len(job_ids)))] if surface is Surface.SIMILAR_JOBS \
                else None
            req = SlateRequest(surface, user, f"bench-{i}", now, anchor)
            t0 = time.perf_counter()
            engine.recommend(req, strategy)
            samples.append((time.perf_counter() - t0) * 1000.0)
        out.append(summarize_latencies(surface.value, strategy.value, samples))
    return out
