import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jobreco.core import Interaction, InteractionKind, JobPosting, ReplayClock
from jobreco.engine import Engine, EngineConfig

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

T0 = 1_700_000_000


def make_engine(vectors: dict[str, list[float]] | None = None, texts: dict[str, str] | None = None,
                dim: int | None = None, now: int = T0, **config) -> Engine:
    """Engine over a hand-built catalog; jobs get ``created_at`` from their insertion order."""
    vectors = vectors or {}
    texts = texts or {}
    if dim is None:
        dim = len(next(iter(vectors.values()))) if vectors else 3
    engine = Engine(EngineConfig(dimension=dim, **config), ReplayClock(now))
    for i, job_id in enumerate(sorted(set(vectors) | set(texts))):
        engine.add_job(JobPosting(job_id, description=texts.get(job_id, ""), created_at=i),
                       vectors.get(job_id))
    return engine


def view(user, job, ts, session="s", kind=InteractionKind.VIEW):
    return Interaction(user, job, session, ts, kind)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def engine_factory():
    return make_engine


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
