"""Base-level learning activation and the softmax-weighted reference vector.

A user's activation for a job combines how often and how recently they
interacted with it::

    activation = ln( sum_i max(ts_ref - ts_i, 1) ** -d )

Activations over the distinct jobs in a history are turned into weights with a
softmax, and the weighted sum of the jobs' embeddings becomes the query vector
for content retrieval.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import EmptyHistory, Interaction, NonPositiveDecay

DEFAULT_DECAY = 0.5


def bll_value(timestamps: Sequence[int], ts_ref: int, d: float = DEFAULT_DECAY) -> float:
    """Activation of one job given the timestamps of every interaction with it.

    Deltas below one second (including same-second and future timestamps) are
    clamped to 1 so each term is at most 1 and the log stays finite.
    """
    if not timestamps:
        raise EmptyHistory("no interactions to score", "timestamps")
    if not d > 0:
        raise NonPositiveDecay(f"decay must be positive, got {d!r}", "d")
    return math.log(math.fsum(max(ts_ref - t, 1) ** -d for t in timestamps))


def softmax(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    e = np.exp(v - v.max())
    return e / e.sum()


@dataclass
class BllProfile:
    user_id: str
    d: float
    values: dict[str, float] = field(default_factory=dict)
    weights: dict[str, float] = field(default_factory=dict)
    reference: np.ndarray | None = None


def bll_values(history: Sequence[Interaction], ts_ref: int,
               d: float = DEFAULT_DECAY) -> dict[str, float]:
    """Activation per distinct job in ``history`` (first-seen order)."""
    stamps: dict[str, list[int]] = defaultdict(list)
    for ev in history:
        stamps[ev.job_id].append(ev.timestamp)
    return {j: bll_value(ts, ts_ref, d) for j, ts in stamps.items()}


def build_profile(user_id: str, history: Sequence[Interaction], embeddings, ts_ref: int,
                  d: float = DEFAULT_DECAY) -> BllProfile:
    """Build the user's activation profile and reference vector.

    ``embeddings`` is anything with a ``get_many(job_ids)`` method returning
    the resolvable ids and their stacked vectors (a :class:`VectorStore`).
    Jobs without an embedding are dropped before the softmax.
    """
    if not d > 0:
        raise NonPositiveDecay(f"decay must be positive, got {d!r}", "d")
    values = bll_values(history, ts_ref, d)
    jobs, matrix = embeddings.get_many(values)
    if not jobs:
        raise EmptyHistory(f"no interaction of {user_id!r} resolves to an embedding", "user_id")
    acts = [values[j] for j in jobs]
    w = softmax(acts)
    reference = w @ matrix
    return BllProfile(
        user_id=user_id,
        d=d,
        values={j: values[j] for j in jobs},
        weights=dict(zip(jobs, w.tolist())),
        reference=reference,
    )
