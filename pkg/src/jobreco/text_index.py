"""TF-IDF inverted index over job descriptions.

Weights are raw term counts times a smoothed idf,
``idf(t) = ln((1 + N) / (1 + df(t))) + 1``, and documents are compared by
cosine similarity. Document norms depend on every idf, so they are recomputed
lazily on the first query after a mutation.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from contextlib import contextmanager
from typing import Iterable, Iterator

import numpy as np

from . import kernels
from .core import EmptyDocument, RowIds, RWLock, UnknownJob

_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop terms shorter than 2."""
    return [t for t in _SPLIT.split(text.lower()) if len(t) >= 2]


class TfIdfIndex:
    def __init__(self):
        self._ids = RowIds()
        self._docs: list[Counter | None] = []
        self.postings: dict[str, dict[int, int]] = {}
        self._active = bytearray()
        self._n_docs = 0
        self._arrays: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._norms: np.ndarray | None = None
        self._idf: dict[str, float] = {}
        self._lock = RWLock()

    @property
    def doc_count(self) -> int:
        return self._n_docs

    @property
    def doc_freq(self) -> dict[str, int]:
        return {t: len(p) for t, p in self.postings.items()}

    def __contains__(self, job_id: str) -> bool:
        row = self._ids.rows.get(job_id)
        return row is not None and self._docs[row] is not None

    def index_job(self, job_id: str, description: str) -> None:
        terms = Counter(tokenize(description))
        if not terms:
            raise EmptyDocument(f"description of {job_id!r} has no indexable terms",
                                "description")
        with self._lock.write():
            row = self._ids.get_or_add(job_id)
            if row == len(self._docs):
                self._docs.append(None)
                self._active.append(1)
            old = self._docs[row]
            if old is None:
                self._n_docs += 1
            if old is not None:
                for t in old:
                    post = self.postings[t]
                    del post[row]
                    if not post:
                        del self.postings[t]
                    self._arrays.pop(t, None)
            for t, tf in terms.items():
                self.postings.setdefault(t, {})[row] = tf
                self._arrays.pop(t, None)
            self._docs[row] = terms
            self._norms = None

    def set_active(self, job_id: str, active: bool) -> None:
        with self._lock.write():
            row = self._ids.rows.get(job_id)
            if row is not None:
                self._active[row] = 1 if active else 0

    # -- scoring ---------------------------------------------------------------

    def _posting_arrays(self, term: str) -> tuple[np.ndarray, np.ndarray]:
        arrs = self._arrays.get(term)
        if arrs is None:
            post = self.postings[term]
            arrs = (np.fromiter(post.keys(), dtype=np.int64, count=len(post)),
                    np.fromiter(post.values(), dtype=np.float64, count=len(post)))
            self._arrays[term] = arrs
        return arrs

    def _refresh(self) -> None:
        if self._norms is not None:
            return
        n_docs = self.doc_count
        idf = {t: math.log((1 + n_docs) / (1 + len(p))) + 1.0 for t, p in self.postings.items()}
        norms_sq = np.zeros(len(self._docs), dtype=np.float64)
        for t, w in idf.items():
            rows, tfs = self._posting_arrays(t)
            norms_sq[rows] += (tfs * w) ** 2
        self._idf = idf
        self._norms = np.sqrt(norms_sq)

    def _scores(self, row: int) -> np.ndarray:
        # Caller holds the lock and has refreshed the norms.
        acc = np.zeros(len(self._docs), dtype=np.float64)
        for t, tf in self._docs[row].items():
            w = self._idf[t]
            rows, tfs = self._posting_arrays(t)
            acc[rows] += tfs * (tf * w * w)
        norms = self._norms
        denom = norms * norms[row]
        out = np.zeros_like(acc)
        np.divide(acc, denom, out=out, where=denom > 0)
        return out

    def _row(self, job_id: str) -> int:
        row = self._ids.rows.get(job_id)
        if row is None or self._docs[row] is None:
            raise UnknownJob(f"job {job_id!r} is not indexed", "job_id")
        return row

    @contextmanager
    def _fresh_read(self) -> Iterator[None]:
        # A writer may invalidate the norms between refresh and read; retry.
        while True:
            if self._norms is None:
                with self._lock.write():
                    self._refresh()
            with self._lock.read():
                if self._norms is not None:
                    yield
                    return

    def score(self, a: str, b: str) -> float:
        """Cosine similarity of two indexed documents."""
        with self._fresh_read():
            ra, rb = self._row(a), self._row(b)
            return float(self._scores(ra)[rb])

    def similar_to(self, anchor_job_id: str, k: int,
                   exclude: Iterable[str] = ()) -> list[tuple[str, float]]:
        """Top-``k`` active documents by TF-IDF cosine to the anchor.

        The anchor itself is always excluded. Documents sharing no term with
        the anchor are still eligible with score 0.
        """
        with self._fresh_read():
            row = self._row(anchor_job_id)
            if k <= 0:
                return []
            scores = self._scores(row)
            eligible = np.frombuffer(self._active, dtype=np.uint8).copy()
            eligible[self._norms == 0] = 0
            eligible[row] = 0
            for j in exclude:
                r = self._ids.rows.get(j)
                if r is not None:
                    eligible[r] = 0
            rows, vals = kernels.select_topk(scores, eligible, self._ids.rank, k)
            ids = self._ids.ids
            return [(ids[r], min(1.0, float(v))) for r, v in zip(rows, vals)]
