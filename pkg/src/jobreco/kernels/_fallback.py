"""Pure numpy implementation of the ranking kernels."""

import numpy as np

# Scores are snapped to this many decimals before ranking so that
# float reassociation cannot split mathematically equal scores.
SNAP_DECIMALS = 12


def select_topk(scores, eligible, rank, k):
    """Return ``(rows, scores)`` of the ``k`` best eligible rows.

    Order is descending score, then ascending ``rank``.
    """
    scores = np.round(np.asarray(scores, dtype=np.float64), SNAP_DECIMALS)
    rows = np.flatnonzero(eligible)
    if k <= 0 or rows.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    cand = scores[rows]
    if k < rows.size:
        kth = np.partition(cand, rows.size - k)[rows.size - k]
        keep = cand >= kth
        rows, cand = rows[keep], cand[keep]
    order = np.lexsort((rank[rows], -cand))[:k]
    return rows[order].astype(np.int64), cand[order]


def topk_dense(matrix, n, query, eligible, rank, k):
    """Score the first ``n`` rows of ``matrix`` against ``query`` by dot product."""
    if n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    scores = matrix[:n] @ query
    return select_topk(scores, eligible[:n], rank, k)
