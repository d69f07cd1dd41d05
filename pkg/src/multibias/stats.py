"""Self-contained statistics: paired t-test, Pearson r, Spearman rho.

Student-t tail probabilities come from the regularized incomplete beta
function evaluated with a continued fraction (modified Lentz, 1e-12
convergence), so no statistics library is required. For degrees of
freedom df and statistic t, the two-sided p-value is
``I_x(df/2, 1/2)`` at ``x = df / (df + t^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

_CF_EPS = 1e-12
_CF_FPMIN = 1e-300
_CF_MAX_ITERS = 500


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p_two_sided: float
    n: int


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_FPMIN:
        d = _CF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITERS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise DataError("no-convergence", f"incomplete beta continued fraction stalled (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise DataError("bad-parameter", f"incomplete beta needs a, b > 0, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise DataError("bad-parameter", f"incomplete beta needs x in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # The continued fraction converges fast only below the distribution mean;
    # use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) on the other side.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for T Student-t distributed with df degrees of freedom."""
    if df <= 0:
        raise DataError("bad-parameter", f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def student_t_sf(t: float, df: float) -> float:
    """Survival function P(T > t)."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    half = student_t_two_sided_p(t, df) / 2.0
    return half if t >= 0 else 1.0 - half


def _as_sample_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    yv = np.asarray(y, dtype=np.float64).reshape(-1)
    if xv.size != yv.size:
        raise DataError("length-mismatch", f"samples have lengths {xv.size} and {yv.size}")
    if xv.size < 2:
        raise DataError("too-few-samples", f"need at least 2 paired observations, got {xv.size}")
    return xv, yv


def paired_t_test(x, y) -> TTestResult:
    """Paired two-sided t-test on the differences x - y.

    A constant difference vector is a genuine zero-variance case: the
    statistic is 0 (p = 1) when the constant is zero and +/-inf (p = 0)
    otherwise.
    """
    xv, yv = _as_sample_pair(x, y)
    d = xv - yv
    n = d.size
    df = n - 1
    if d.max() == d.min():
        if d[0] == 0.0:
            return TTestResult(0.0, df, 1.0, n)
        return TTestResult(math.copysign(math.inf, d[0]), df, 0.0, n)
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, df, student_t_two_sided_p(t, df), n)


def pearson_r(x, y) -> float:
    """Product-moment correlation; constant input is an error (undefined)."""
    xv, yv = _as_sample_pair(x, y)
    if xv.max() == xv.min() or yv.max() == yv.min():
        raise DataError("constant-input", "correlation undefined for a constant sample")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    r = float((dx @ dy) / math.sqrt((dx @ dx) * (dy @ dy)))
    return min(1.0, max(-1.0, r))


def rank_average_ties(values) -> np.ndarray:
    """1-based ranks; tied values all get the mean of their rank range."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(x, y) -> float:
    """Pearson correlation of the rank vectors, with average ranks on ties."""
    xv, yv = _as_sample_pair(x, y)
    return pearson_r(rank_average_ties(xv), rank_average_ties(yv))
