"""Append-only interaction log with histories, session sets and popularity."""

from __future__ import annotations

import bisect
import dataclasses
import heapq
import threading
from collections import Counter, defaultdict
from typing import Callable, Iterable

from .cf import CfIndex
from .core import (Interaction, RecordError, RWLock, interaction_from_dict,
                   load_records, now_seconds, validate_interaction, write_jsonl)

DAY = 86_400
DEFAULT_WINDOW_DAYS = 14
SESSION_GAP_SECONDS = 30 * 60


class _History:
    __slots__ = ("events", "stamps")

    def __init__(self):
        self.events: list[Interaction] = []
        self.stamps: list[int] = []

    def insert(self, ev: Interaction) -> None:
        # bisect_right keeps insertion order among equal timestamps
        if not self.stamps or ev.timestamp >= self.stamps[-1]:
            self.events.append(ev)
            self.stamps.append(ev.timestamp)
        else:
            pos = bisect.bisect_right(self.stamps, ev.timestamp)
            self.events.insert(pos, ev)
            self.stamps.insert(pos, ev.timestamp)


class _WindowedCounts:
    """Per-job counts of events with ``timestamp > now - window``."""

    def __init__(self, window_seconds: int):
        self.window = window_seconds
        self.counts: Counter[str] = Counter()
        self._heap: list[tuple[int, int, str]] = []
        self._cutoff: int | None = None
        self._seq = 0

    def add(self, ts: int, job_id: str) -> None:
        if self._cutoff is not None and ts <= self._cutoff:
            return
        self._seq += 1
        heapq.heappush(self._heap, (ts, self._seq, job_id))
        self.counts[job_id] += 1

    def advance(self, now: int, log: list[Interaction]) -> None:
        cutoff = now - self.window
        if self._cutoff is not None and cutoff < self._cutoff:
            # clock moved backwards: recount from the log
            self.counts.clear()
            self._heap.clear()
            self._cutoff = None
            for ev in log:
                self.add(ev.timestamp, ev.job_id)
        heap, counts = self._heap, self.counts
        while heap and heap[0][0] <= cutoff:
            _, _, job = heapq.heappop(heap)
            counts[job] -= 1
            if not counts[job]:
                del counts[job]
        self._cutoff = cutoff


class InteractionStore:
    """Every recorded interaction, indexed for the recommenders.

    Parameters
    ----------
    clock:
        Object with ``now()`` returning unix seconds; defines the popularity
        window's trailing edge.
    window_days:
        Popularity window length.
    is_active:
        Predicate used to keep inactive jobs out of popularity rankings.
    """

    def __init__(self, clock=None, window_days: int = DEFAULT_WINDOW_DAYS,
                 is_active: Callable[[str], bool] | None = None):
        self.clock = clock
        self.window_days = window_days
        self.is_active = is_active or (lambda job_id: True)
        self._log: list[Interaction] = []
        self._histories: dict[str, _History] = defaultdict(_History)
        self._sessions: dict[tuple[str, str], set[str]] = defaultdict(set)
        self._last_auto: dict[str, tuple[int, str, int]] = {}
        self._pop = _WindowedCounts(window_days * DAY)
        self._pop_lock = threading.Lock()
        self.cf = CfIndex()
        self._lock = RWLock()

    def __len__(self) -> int:
        return len(self._log)

    def _assign_session(self, ev: Interaction) -> Interaction:
        last = self._last_auto.get(ev.user_id)
        if last is not None and ev.timestamp - last[0] <= SESSION_GAP_SECONDS:
            last_ts, sid, n = last
            stamp = max(last_ts, ev.timestamp)
        else:
            n = 0 if last is None else last[2] + 1
            sid, stamp = f"{ev.user_id}~auto{n}", ev.timestamp
        self._last_auto[ev.user_id] = (stamp, sid, n)
        return dataclasses.replace(ev, session_id=sid)

    def record(self, ev: Interaction) -> Interaction:
        """Validate and append ``ev``; returns the stored event.

        Events without a session id are assigned one that rolls over after 30
        minutes of user inactivity.
        """
        validate_interaction(ev)
        with self._lock.write():
            if not ev.session_id:
                ev = self._assign_session(ev)
            self._log.append(ev)
            self._histories[ev.user_id].insert(ev)
            self._sessions[(ev.user_id, ev.session_id)].add(ev.job_id)
            self.cf.add(ev.user_id, ev.job_id)
            with self._pop_lock:
                self._pop.add(ev.timestamp, ev.job_id)
        return ev

    def history(self, user_id: str) -> list[Interaction]:
        with self._lock.read():
            h = self._histories.get(user_id)
            return list(h.events) if h else []

    def session_seen(self, user_id: str, session_id: str) -> set[str]:
        with self._lock.read():
            return set(self._sessions.get((user_id, session_id), ()))

    def users(self) -> list[str]:
        with self._lock.read():
            return list(self._histories)

    def popularity(self, now: int | None = None) -> dict[str, int]:
        """Windowed interaction counts of active jobs."""
        now = now_seconds(self.clock) if now is None else now
        with self._lock.read(), self._pop_lock:
            self._pop.advance(now, self._log)
            return {j: c for j, c in self._pop.counts.items() if self.is_active(j)}

    def popular_size(self) -> int:
        return len(self._pop.counts)

    def most_popular(self, k: int, exclude: Iterable[str] = (),
                     now: int | None = None) -> list[str]:
        """Top-``k`` active jobs by windowed count, ties by ascending job id."""
        now = now_seconds(self.clock) if now is None else now
        exclude = set(exclude)
        with self._lock.read(), self._pop_lock:
            self._pop.advance(now, self._log)
            active = self.is_active
            cand = ((-c, j) for j, c in self._pop.counts.items()
                    if j not in exclude and active(j))
            return [j for _, j in heapq.nsmallest(k, cand)]

    def recommend_cf(self, user_id: str, k: int, exclude: Iterable[str] = (),
                     k_n: int = 10) -> list[tuple[str, float]]:
        with self._lock.read():
            return self.cf.recommend(user_id, k, exclude, k_n, self.is_active)

    # -- JSONL ---------------------------------------------------------------

    def load_jsonl(self, path, strict: bool = True) -> tuple[int, list[RecordError]]:
        return load_records(path, lambda obj, line: self.record(interaction_from_dict(obj, line)),
                            strict)

    def dump_jsonl(self, path) -> int:
        with self._lock.read():
            rows = [ev.to_dict() for ev in self._log]
        return write_jsonl(path, rows)
