"""Distribution functions shared by the detectors.

Chi-square probabilities are computed from the regularized incomplete gamma
function (series below ``a + 1``, Lentz continued fraction above), following
the classic Numerical Recipes split. Kolmogorov and Anderson-Darling tails are
the asymptotic (large-n) forms.

All logarithms are natural logarithms.
"""
from __future__ import annotations

import math
import sys

from scipy.optimize import brentq

__all__ = [
    "regularized_gamma_p",
    "regularized_gamma_q",
    "chi_square_cdf",
    "chi_square_sf",
    "chi_square_quantile",
    "chi_square_isf",
    "normal_cdf",
    "normal_sf",
    "normal_isf",
    "kolmogorov_sf",
    "anderson_darling_cdf",
    "anderson_darling_sf",
]

_EPS = 1e-16
_TINY = sys.float_info.min / _EPS
_MAX_ITER = 100_000


def _check_df(df) -> None:
    if isinstance(df, bool) or int(df) != df or df < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {df!r}")


def _gamma_prefactor(a: float, x: float) -> float:
    # exp(-x) x^a / Gamma(a), in log space to survive large a and x
    return math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_series(a: float, x: float) -> float:
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * _gamma_prefactor(a, x)
    raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_continued_fraction(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * _gamma_prefactor(a, x)
    raise ArithmeticError(f"incomplete gamma fraction did not converge (a={a}, x={x})")


def regularized_gamma_p(a: float, x: float) -> float:
    """Lower regularized incomplete gamma P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_continued_fraction(a, x))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x), without cancellation."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return min(1.0, _gamma_continued_fraction(a, x))


def chi_square_cdf(x: float, df: int) -> float:
    """P(X <= x) for X ~ chi-square with ``df`` degrees of freedom."""
    _check_df(df)
    if not x >= 0:
        raise ValueError(f"x must be non-negative, got {x!r}")
    return regularized_gamma_p(df / 2.0, x / 2.0)


def chi_square_sf(x: float, df: int) -> float:
    """Upper tail P(X > x); accurate far into the tail where ``1 - cdf`` is not."""
    _check_df(df)
    if not x >= 0:
        raise ValueError(f"x must be non-negative, got {x!r}")
    return regularized_gamma_q(df / 2.0, x / 2.0)


def _upper_bracket(f, start: float) -> float:
    hi = start
    while f(hi) < 0:
        hi *= 2.0
    return hi


def chi_square_quantile(p: float, df: int) -> float:
    """Inverse of :func:`chi_square_cdf`.

    The critical value ``chi2_{alpha, df}`` used by the decision rules is
    ``chi_square_quantile(1 - alpha, df)``, or better ``chi_square_isf(alpha, df)``.
    """
    _check_df(df)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p!r}")

    def f(x):
        return chi_square_cdf(x, df) - p

    hi = _upper_bracket(f, max(1.0, 2.0 * df))
    return brentq(f, 0.0, hi, xtol=1e-300, rtol=4 * sys.float_info.epsilon, maxiter=2000)


def chi_square_isf(q: float, df: int) -> float:
    """Inverse of :func:`chi_square_sf`: the x with upper-tail mass ``q``."""
    _check_df(df)
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie strictly inside (0, 1), got {q!r}")

    def f(x):
        return q - chi_square_sf(x, df)

    hi = _upper_bracket(f, max(1.0, 2.0 * df))
    return brentq(f, 0.0, hi, xtol=1e-300, rtol=4 * sys.float_info.epsilon, maxiter=2000)


def normal_cdf(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def normal_isf(q: float) -> float:
    """z with ``normal_sf(z) == q``."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie strictly inside (0, 1), got {q!r}")
    return brentq(lambda z: normal_sf(z) - q, -40.0, 40.0, xtol=1e-14, rtol=4 * sys.float_info.epsilon)


def kolmogorov_sf(t: float) -> float:
    """Asymptotic Kolmogorov tail ``P(sqrt(n) D > t)``.

    Sums ``2 * sum_{j>=1} (-1)^(j-1) exp(-2 j^2 t^2)`` until a term drops
    below 1e-12. For small ``t`` the alternating series converges too slowly,
    so the equivalent Jacobi-theta form of the CDF is used instead.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return 1.0
    if t < 0.6:
        # CDF = sqrt(2 pi)/t * sum_{j>=1} exp(-(2j-1)^2 pi^2 / (8 t^2))
        total = 0.0
        j = 1
        while True:
            term = math.exp(-((2 * j - 1) ** 2) * math.pi**2 / (8.0 * t * t))
            total += term
            if term < 1e-16 * max(total, _TINY) or j > 1000:
                break
            j += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / t * total))
    total = 0.0
    j = 1
    while True:
        term = math.exp(-2.0 * j * j * t * t)
        total += term if j % 2 else -term
        if term < 1e-12:
            break
        j += 1
    return min(1.0, max(0.0, 2.0 * total))


def anderson_darling_cdf(a2: float) -> float:
    """Asymptotic CDF of the Anderson-Darling A^2 statistic.

    Marsaglia & Marsaglia (2004), "Evaluating the Anderson-Darling
    Distribution", J. Stat. Software 9(2): the two-piece ``adinf`` rational /
    exponential approximation, stated there to be accurate to about 2e-6.
    """
    if a2 < 0:
        raise ValueError("a2 must be non-negative")
    z = a2
    if z == 0:
        return 0.0
    if z < 2.0:
        poly = 2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z
        return min(1.0, math.exp(-1.2337141 / z) / math.sqrt(z) * poly)
    inner = 1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z
    return min(1.0, max(0.0, math.exp(-math.exp(inner))))


def anderson_darling_sf(a2: float) -> float:
    """Asymptotic upper-tail probability of A^2 (see :func:`anderson_darling_cdf`)."""
    return min(1.0, max(0.0, 1.0 - anderson_darling_cdf(a2)))
