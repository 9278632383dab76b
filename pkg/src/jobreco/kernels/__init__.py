"""Ranking kernels with a compiled core and a numpy fallback.

The compiled extension is used when it was built; set ``JOBRECO_KERNELS=python``
to force the fallback. Both backends share one contract:

``select_topk(scores, eligible, rank, k)``
    best ``k`` eligible rows by descending score, ties by ascending rank.
``topk_dense(matrix, n, query, eligible, rank, k)``
    same selection over dot products of the first ``n`` matrix rows.

Scores are snapped to 1e-12 before comparison in both backends.
"""

import os

from . import _fallback

try:
    from . import _scan as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

backend = "python"
select_topk = _fallback.select_topk
topk_dense = _fallback.topk_dense


def use_backend(name: str) -> None:
    """Switch the module-level kernels to ``name`` ("compiled" or "python")."""
    global backend, select_topk, topk_dense
    if name not in BACKENDS:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}")
    mod = BACKENDS[name]
    backend, select_topk, topk_dense = name, mod.select_topk, mod.topk_dense


use_backend(os.environ.get("JOBRECO_KERNELS") or ("compiled" if _compiled else "python"))
