"""Exact cosine top-k search over unit-normalized job embeddings."""

from __future__ import annotations

import json
from typing import Iterable

import numpy as np

from . import kernels
from .core import (DEFAULT_DIMENSION, DimensionMismatch, RecordError, RowIds, RWLock,
                   ValidationFailed, ZeroVector, as_vector, embedding_from_dict, load_records)


def _norm(v: np.ndarray, field: str) -> float:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ZeroVector(f"{field} has zero norm", field)
    return n


def cosine(a, b) -> float:
    """Cosine similarity of two equal-length non-zero vectors."""
    a = as_vector(a, field="a")
    b = as_vector(b, a.shape[0], field="b")
    value = float(a @ b) / (_norm(a, "a") * _norm(b, "b"))
    return min(1.0, max(-1.0, value))


class VectorStore:
    """In-memory embedding store answering exact cosine top-k queries.

    Vectors are normalized on insert, so ranking by dot product equals ranking
    by cosine. Inactive jobs are tombstoned: their vectors stay retrievable via
    :meth:`get` but they never appear in query results.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._ids = RowIds()
        self._matrix = np.zeros((16, dimension), dtype=np.float64)
        self._active = np.zeros(16, dtype=np.uint8)
        self._present = np.zeros(16, dtype=bool)
        self._lock = RWLock()

    def __len__(self) -> int:
        return int(self._present[: len(self._ids)].sum())

    def __contains__(self, job_id: str) -> bool:
        row = self._ids.rows.get(job_id)
        return row is not None and bool(self._present[row])

    @property
    def tombstones(self) -> set[str]:
        n = len(self._ids)
        rows = np.flatnonzero(self._present[:n] & (self._active[:n] == 0))
        return {self._ids.ids[r] for r in rows}

    def _grow(self, need: int) -> None:
        cap = self._matrix.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        matrix = np.zeros((cap, self.dimension), dtype=np.float64)
        matrix[: self._matrix.shape[0]] = self._matrix
        active = np.zeros(cap, dtype=np.uint8)
        active[: self._active.shape[0]] = self._active
        present = np.zeros(cap, dtype=bool)
        present[: self._present.shape[0]] = self._present
        self._matrix, self._active, self._present = matrix, active, present

    def upsert(self, job_id: str, vector, active: bool | None = None) -> None:
        """Insert or replace the vector for ``job_id``.

        ``active`` defaults to keeping the current flag (new entries start active).
        """
        if not job_id:
            raise ValidationFailed("job_id must be non-empty", "job_id")
        v = as_vector(vector, self.dimension, "vector")
        unit = v / _norm(v, "vector")
        with self._lock.write():
            row = self._ids.rows.get(job_id)
            if row is None:
                self._grow(len(self._ids) + 1)
                row = self._ids.get_or_add(job_id)
                self._active[row] = 1
            self._matrix[row] = unit
            self._present[row] = True
            if active is not None:
                self._active[row] = 1 if active else 0

    def set_active(self, job_id: str, active: bool) -> None:
        with self._lock.write():
            row = self._ids.rows.get(job_id)
            if row is not None:
                self._active[row] = 1 if active else 0

    def get(self, job_id: str) -> np.ndarray | None:
        """Stored unit vector for ``job_id`` (tombstoned entries included)."""
        with self._lock.read():
            row = self._ids.rows.get(job_id)
            if row is None or not self._present[row]:
                return None
            return self._matrix[row].copy()

    def get_many(self, job_ids: Iterable[str]) -> tuple[list[str], np.ndarray]:
        """Resolve the ids that have vectors; returns them with a stacked matrix."""
        with self._lock.read():
            found, rows = [], []
            for j in job_ids:
                row = self._ids.rows.get(j)
                if row is not None and self._present[row]:
                    found.append(j)
                    rows.append(row)
            return found, self._matrix[rows].copy()

    def top_k(self, reference, k: int, exclude: Iterable[str] = ()) -> list[tuple[str, float]]:
        """The ``k`` active entries most cosine-similar to ``reference``.

        Ranked by descending score with ties broken by ascending job id.
        """
        q = as_vector(reference, self.dimension, "reference")
        q = q / _norm(q, "reference")
        with self._lock.read():
            n = len(self._ids)
            if n == 0 or k <= 0:
                return []
            eligible = self._active[:n] & self._present[:n]
            excluded = [self._ids.rows[j] for j in exclude if j in self._ids.rows]
            if excluded:
                eligible[excluded] = 0
            rows, scores = kernels.topk_dense(self._matrix, n, q, eligible, self._ids.rank, k)
            ids = self._ids.ids
            return [(ids[r], min(1.0, max(-1.0, float(s)))) for r, s in zip(rows, scores)]

    def active_count(self) -> int:
        n = len(self._ids)
        return int((self._active[:n] & self._present[:n]).sum())

    # -- JSONL ---------------------------------------------------------------

    def load_jsonl(self, path, strict: bool = True) -> tuple[int, list[RecordError]]:
        """Bulk load ``{"job_id", "vector"}`` lines; see :func:`core.load_records`."""
        def apply(obj, lineno):
            self.upsert(*embedding_from_dict(obj, lineno))

        return load_records(path, apply, strict)

    def dump_jsonl(self, path) -> int:
        with self._lock.read(), open(path, "w", encoding="utf-8") as fh:
            n = 0
            for row, job_id in enumerate(self._ids.ids):
                if self._present[row]:
                    fh.write(json.dumps({"job_id": job_id,
                                         "vector": self._matrix[row].tolist()}) + "\n")
                    n += 1
            return n


__all__ = ["VectorStore", "cosine", "DimensionMismatch", "ZeroVector"]
