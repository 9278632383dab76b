"""Significance tests for A/B outcomes.

Tail probabilities come from the regularized incomplete gamma and beta
functions, evaluated by series / continued-fraction expansions.
"""

from __future__ import annotations

import math
from typing import Sequence

from .core import RecoError

_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 10_000


class DegenerateTable(RecoError):
    code = "degenerate_table"


class InsufficientSample(RecoError):
    code = "insufficient_sample"


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 1.0
    log_front = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        # lower series, then complement
        term = total = 1.0 / a
        ap = a
        for _ in range(_MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                break
        return max(0.0, 1.0 - total * math.exp(log_front))
    # modified Lentz continued fraction for Q
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = _TINY if abs(d) < _TINY else d
        c = b + an / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return min(1.0, math.exp(log_front) * h)


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = _TINY if abs(d) < _TINY else d
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def chi2_sf(statistic: float, df: float) -> float:
    """Upper tail probability of the chi-square distribution."""
    if statistic <= 0:
        return 1.0
    return gammaincc(df / 2.0, statistic / 2.0)


def t_two_sided(t: float, df: float) -> float:
    if not math.isfinite(t):
        return 0.0
    t2 = t * t
    if t2 < df:
        # df / (df + t^2) rounds to 1 for tiny t; use the complementary argument
        return max(0.0, 1.0 - betainc(0.5, df / 2.0, t2 / (df + t2)))
    return min(1.0, betainc(df / 2.0, 0.5, df / (df + t2)))


def chi_squared_2x2(clicks_a: int, n_a: int, clicks_b: int, n_b: int) -> tuple[float, float]:
    """Pearson chi-square on the engaged / not-engaged table, no continuity correction."""
    for name, c, n in (("a", clicks_a, n_a), ("b", clicks_b, n_b)):
        if not 0 <= c <= n:
            raise ValueError(f"arm {name}: clicks must lie in [0, n]")
    total = n_a + n_b
    clicks = clicks_a + clicks_b
    if n_a == 0 or n_b == 0 or clicks == 0 or clicks == total:
        raise DegenerateTable("a row or column of the 2x2 table sums to zero")
    stat = 0.0
    for obs_click, n in ((clicks_a, n_a), (clicks_b, n_b)):
        exp_click = n * clicks / total
        exp_skip = n - exp_click
        stat += (obs_click - exp_click) ** 2 / exp_click
        stat += ((n - obs_click) - exp_skip) ** 2 / exp_skip
    return stat, chi2_sf(stat, 1)


def _mean_var(xs: Sequence[float]) -> tuple[float, float]:
    n = len(xs)
    mean = math.fsum(xs) / n
    return mean, math.fsum((x - mean) ** 2 for x in xs) / (n - 1)


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Welch's unequal-variance t-test; returns ``(t, two_sided_p)``.

    Identical samples give ``(0.0, 1.0)``.
    """
    if len(a) < 2 or len(b) < 2:
        raise InsufficientSample("each sample needs at least two points")
    ma, va = _mean_var(a)
    mb, vb = _mean_var(b)
    if va == 0 and vb == 0:
        if ma == mb:
            return 0.0, 1.0
        raise InsufficientSample("both samples have zero variance")
    sa, sb = va / len(a), vb / len(b)
    t = (ma - mb) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa * sa / (len(a) - 1) + sb * sb / (len(b) - 1))
    return t, t_two_sided(t, df)


def welch_df(a: Sequence[float], b: Sequence[float]) -> float:
    _, va = _mean_var(a)
    _, vb = _mean_var(b)
    sa, sb = va / len(a), vb / len(b)
    return (sa + sb) ** 2 / (sa * sa / (len(a) - 1) + sb * sb / (len(b) - 1))
