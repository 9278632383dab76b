"""User-based collaborative filtering over an item -> users inverted index."""

from __future__ import annotations

import heapq
import math
from collections import Counter, defaultdict
from typing import Callable, Iterable

from .core import ColdStartUser

DEFAULT_NEIGHBORS = 10


def _snap(x: float) -> float:
    return round(x, 12)


class CfIndex:
    """Binary user-item sets kept as two exactly inverse maps.

    Candidate neighbors are only gathered through shared items, so the cost of
    a query scales with the target's history rather than the user base.
    """

    def __init__(self):
        self.user_items: dict[str, set[str]] = defaultdict(set)
        self.item_users: dict[str, set[str]] = defaultdict(set)

    def add(self, user_id: str, job_id: str) -> None:
        self.user_items[user_id].add(job_id)
        self.item_users[job_id].add(user_id)

    def neighbors(self, user_id: str, k_n: int = DEFAULT_NEIGHBORS) -> list[tuple[str, float]]:
        """Top ``k_n`` users by binary cosine ``|A & B| / sqrt(|A| |B|)``."""
        items = self.user_items.get(user_id)
        if not items:
            raise ColdStartUser(f"user {user_id!r} has no interactions", "user_id")
        overlap: Counter[str] = Counter()
        for j in items:
            overlap.update(self.item_users[j])
        overlap.pop(user_id, None)
        n = len(items)
        sims = ((v, c / math.sqrt(n * len(self.user_items[v]))) for v, c in overlap.items())
        # rank on snapped values, but hand back raw ones so summed scores snap once
        best = heapq.nsmallest(k_n, ((-_snap(s), v, s) for v, s in sims))
        return [(v, s) for _, v, s in best]

    def recommend(self, user_id: str, k: int, exclude: Iterable[str] = (),
                  k_n: int = DEFAULT_NEIGHBORS,
                  is_active: Callable[[str], bool] | None = None) -> list[tuple[str, float]]:
        """Jobs held by the nearest neighbors, scored by summed neighbor similarity.

        The target's own items and ``exclude`` are never returned; inactive jobs
        are dropped from the final candidates only.
        """
        nbrs = self.neighbors(user_id, k_n)
        own = self.user_items[user_id]
        exclude = set(exclude)
        contrib: dict[str, list[float]] = defaultdict(list)
        for v, s in nbrs:
            for j in self.user_items[v]:
                if j not in own and j not in exclude:
                    contrib[j].append(s)
        if is_active is not None:
            contrib = {j: c for j, c in contrib.items() if is_active(j)}
        # fsum is order-independent, so equal neighbor sets give bit-equal scores.
        best = heapq.nsmallest(k, ((-_snap(math.fsum(c)), j) for j, c in contrib.items()))
        return [(j, -neg) for neg, j in best]
