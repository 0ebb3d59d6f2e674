"""Two-sample Student t machinery with a self-contained t distribution.

The two-sided p-value of a t statistic with df degrees of freedom is
I_x(df/2, 1/2) with x = df/(df + t^2), where I is the regularized
incomplete beta function, evaluated here with the standard continued
fraction (modified Lentz iteration). Quantiles are recovered by bisection
on the monotone p(t) map.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError, DegenerateInputError

_CF_MAX_ITER = 300
_CF_TINY = 1e-30
_CF_EPS = 1e-15


def _beta_continued_fraction(x: float, a: float, b: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction failed for x={x}, a={a}, b={b}")


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ConfigurationError("beta parameters must be positive")
    if x < 0.0 or x > 1.0:
        raise ConfigurationError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # use the expansion on the side where it converges fast
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(x, a, b) / a
    return 1.0 - front * _beta_continued_fraction(1.0 - x, b, a) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for T Student-t distributed with df degrees of freedom."""
    if df <= 0:
        raise ConfigurationError("degrees of freedom must be positive")
    if not math.isfinite(t):
        raise ConfigurationError("t statistic must be finite")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(x, df / 2.0, 0.5)


def student_t_two_sided_quantile(alpha: float, df: float) -> float:
    """The t >= 0 with P(|T| >= t) = alpha, by bisection to ~1e-12."""
    if not (0.0 < alpha < 1.0):
        raise ConfigurationError("alpha must lie in (0, 1)")
    lo, hi = 0.0, 1.0
    while student_t_two_sided_p(hi, df) > alpha:
        hi *= 2.0
        if hi > 1e18:
            raise ArithmeticError("quantile bisection failed to bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if student_t_two_sided_p(mid, df) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def t_test_two_tailed(sample_a, sample_b) -> tuple[float, float]:
    """Independent two-sample Student t-test with pooled (equal) variance.

    Returns (t, two-sided p). Degrees of freedom are n_a + n_b - 2.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise DegenerateInputError("each sample needs at least 2 values")
    df = a.size + b.size - 2
    ss_a = float(np.sum((a - a.mean()) ** 2))
    ss_b = float(np.sum((b - b.mean()) ** 2))
    pooled_var = (ss_a + ss_b) / df
    if pooled_var <= 0.0:
        raise DegenerateInputError("pooled variance is zero; t statistic undefined")
    se = math.sqrt(pooled_var * (1.0 / a.size + 1.0 / b.size))
    t = (float(a.mean()) - float(b.mean())) / se
    return t, student_t_two_sided_p(t, df)
