"""Brute-force reference implementations used only by the tests.

Each one recomputes its answer from raw inputs with the plainest possible
formula, sharing no code with the package under test.
"""

import math
from collections import Counter


def snap(x: float) -> float:
    return round(x, 12)


def cosine_topk(vectors: dict[str, list[float]], query, k, exclude=(), inactive=()):
    qn = math.sqrt(sum(q * q for q in query))
    scored = []
    for job_id, v in vectors.items():
        if job_id in exclude or job_id in inactive:
            continue
        dot = sum(a * b for a, b in zip(v, query))
        vn = math.sqrt(sum(a * a for a in v))
        scored.append((job_id, dot / (vn * qn)))
    scored.sort(key=lambda p: (-snap(p[1]), p[0]))
    return scored[:k]


def _terms(text):
    out, word = [], []
    for ch in text.lower() + " ":
        if ch.isascii() and ch.isalnum():
            word.append(ch)
        else:
            if len(word) >= 2:
                out.append("".join(word))
            word = []
    return out


def tfidf_similar(docs: dict[str, str], anchor, k, exclude=(), inactive=()):
    bags = {j: Counter(_terms(t)) for j, t in docs.items()}
    bags = {j: b for j, b in bags.items() if b}
    n = len(bags)
    df = Counter(t for b in bags.values() for t in b)
    idf = {t: math.log((1 + n) / (1 + c)) + 1 for t, c in df.items()}
    vecs = {j: {t: c * idf[t] for t, c in b.items()} for j, b in bags.items()}

    def norm(v):
        return math.sqrt(sum(x * x for x in v.values()))

    a = vecs[anchor]
    out = []
    for j, v in vecs.items():
        if j == anchor or j in exclude or j in inactive:
            continue
        dot = sum(w * v.get(t, 0.0) for t, w in a.items())
        out.append((j, dot / (norm(a) * norm(v))))
    out.sort(key=lambda p: (-snap(p[1]), p[0]))
    return out[:k]


def user_cf(user_items: dict[str, set], target, k, k_n=10, exclude=(), inactive=()):
    mine = user_items[target]
    sims = []
    for v, items in user_items.items():
        if v == target or not items:
            continue
        inter = len(mine & items)
        if inter:
            sims.append((v, inter / math.sqrt(len(mine) * len(items))))
    sims.sort(key=lambda p: (-snap(p[1]), p[0]))
    nbrs = sims[:k_n]
    scores: dict[str, list[float]] = {}
    for v, s in nbrs:
        for j in user_items[v]:
            if j in mine or j in exclude or j in inactive:
                continue
            scores.setdefault(j, []).append(s)
    ranked = sorted(((j, math.fsum(ss)) for j, ss in scores.items()),
                    key=lambda p: (-snap(p[1]), p[0]))
    return ranked[:k]


def bll_activation(timestamps, ts_ref, d):
    """Activation evaluated with mpmath at 50 significant digits."""
    import mpmath

    with mpmath.workdps(50):
        total = mpmath.fsum(mpmath.power(max(ts_ref - t, 1), -mpmath.mpf(d)) for t in timestamps)
        return float(mpmath.log(total))
