"""In-flight randomization validation.

Checks whether per-bucket sample counts are consistent with a uniform
multinomial split. The main test is ``PSI_k``: the population stability index
between the observed bucket shares and a synthetic uniform reference of size
``k * n``, compared against a scaled chi-square critical value. Pearson
chi-square, Kolmogorov-Smirnov and Anderson-Darling tests are provided as
baselines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .stat_core import anderson_darling_sf, chi_square_isf, chi_square_sf, kolmogorov_sf

__all__ = [
    "METHODS",
    "ZERO_POLICIES",
    "DEFAULT_ALPHA",
    "DEFAULT_K",
    "BucketCounts",
    "ValidationConfig",
    "ValidationResult",
    "psi_statistic",
    "psi_two_sample_test",
    "psi_k_threshold",
    "psi_k_uniform_test",
    "pearson_chi2_uniform_test",
    "ks_uniform_test",
    "ad_uniform_test",
    "validate",
]

METHODS = ("psi_k", "pearson_chi2", "ks", "ad")
ZERO_POLICIES = ("infinite_statistic", "smoothing")
DEFAULT_ALPHA = 0.001
DEFAULT_K = 2
SMOOTHING_PSEUDOCOUNT = 0.5


class BucketCounts:
    """Per-bucket sample counts for one experiment on one plane.

    Parameters
    ----------
    counts : sequence of int
        ``counts[b]`` is the number of samples hashed into bucket ``b``.
    """

    __slots__ = ("_counts",)

    def __init__(self, counts: Sequence[int]):
        arr = np.asarray(counts)
        if arr.ndim != 1:
            raise ValueError("bucket counts must be one-dimensional")
        if arr.size < 2:
            raise ValueError(f"need at least 2 buckets, got {arr.size}")
        if arr.dtype.kind == "f":
            if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
                raise ValueError("bucket counts must be integers")
        elif arr.dtype.kind not in "iu":
            raise ValueError(f"bucket counts must be integers, got dtype {arr.dtype}")
        arr = arr.astype(np.int64)
        if np.any(arr < 0):
            raise ValueError("bucket counts must be non-negative")
        arr.setflags(write=False)
        self._counts = arr

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def B(self) -> int:
        return int(self._counts.size)

    @property
    def n(self) -> int:
        return int(self._counts.sum())

    def shares(self) -> np.ndarray:
        return self._counts / self.n

    def __len__(self) -> int:
        return self.B

    def __eq__(self, other) -> bool:
        return isinstance(other, BucketCounts) and np.array_equal(self._counts, other._counts)

    def __repr__(self) -> str:
        return f"BucketCounts(B={self.B}, n={self.n})"


@dataclass(frozen=True)
class ValidationConfig:
    method: str = "psi_k"
    alpha: float = DEFAULT_ALPHA
    k: int = DEFAULT_K
    min_total: Optional[int] = None  # None -> 10 * B
    zero_policy: str = "infinite_statistic"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.min_total is not None and self.min_total < 0:
            raise ValueError("min_total must be non-negative")
        if self.zero_policy not in ZERO_POLICIES:
            raise ValueError(f"unknown zero_policy {self.zero_policy!r}")

    def resolved_min_total(self, B: int) -> int:
        return 10 * B if self.min_total is None else int(self.min_total)


@dataclass
class ValidationResult:
    """Outcome of one uniformity test.

    ``threshold`` is set for the PSI tests (alert iff statistic > threshold);
    baselines alert iff ``p_value < alpha``. ``evaluated`` is False when the
    sample was too small to reach a verdict.
    """

    method: str
    statistic: float
    alert: bool
    alpha: float
    threshold: Optional[float] = None
    p_value: Optional[float] = None
    per_bucket_deviation: np.ndarray = field(default_factory=lambda: np.zeros(0))
    evaluated: bool = True
    k: Optional[int] = None
    conservative_discrete: bool = False
    n: int = 0

    def to_dict(self) -> dict:
        def num(v):
            if v is None:
                return None
            v = float(v)
            return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")

        return {
            "method": self.method,
            "evaluated": self.evaluated,
            "alert": bool(self.alert),
            "alpha": self.alpha,
            "k": self.k,
            "n": self.n,
            "statistic": num(self.statistic),
            "threshold": num(self.threshold),
            "p_value": num(self.p_value),
            "conservative_discrete": self.conservative_discrete,
            "per_bucket_deviation": [float(d) for d in self.per_bucket_deviation],
        }


def _as_counts(c) -> BucketCounts:
    return c if isinstance(c, BucketCounts) else BucketCounts(c)


def _deviation(counts: BucketCounts) -> np.ndarray:
    if counts.n == 0:
        return np.zeros(counts.B)
    return counts.shares() - 1.0 / counts.B


def _psi_terms(p_hat: np.ndarray, q_hat: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = (p_hat - q_hat) * (np.log(p_hat) - np.log(q_hat))
    # both shares zero contributes nothing; one share zero is an infinite divergence
    both_zero = (p_hat == 0) & (q_hat == 0)
    one_zero = (p_hat == 0) ^ (q_hat == 0)
    terms = np.where(both_zero, 0.0, terms)
    if np.any(one_zero):
        return math.inf
    return float(max(0.0, terms.sum()))


def psi_statistic(p, q, zero_policy: str = "infinite_statistic") -> float:
    """Population stability index ``sum_b (p_b - q_b) ln(p_b / q_b)`` of two count vectors.

    Counts are converted to shares before comparison. With the default zero
    policy an empty bucket on one side only yields ``inf``; ``"smoothing"``
    adds 0.5 to every bucket of both inputs first.
    """
    p, q = _as_counts(p), _as_counts(q)
    if p.B != q.B:
        raise ValueError(f"bucket cardinality mismatch: {p.B} vs {q.B}")
    if p.n == 0 or q.n == 0:
        raise ValueError("PSI needs positive totals on both sides")
    if zero_policy not in ZERO_POLICIES:
        raise ValueError(f"unknown zero_policy {zero_policy!r}")
    pc = p.counts.astype(float)
    qc = q.counts.astype(float)
    if zero_policy == "smoothing":
        pc = pc + SMOOTHING_PSEUDOCOUNT
        qc = qc + SMOOTHING_PSEUDOCOUNT
    return _psi_terms(pc / pc.sum(), qc / qc.sum())


def psi_two_sample_test(p, q, alpha: float = DEFAULT_ALPHA,
                        zero_policy: str = "infinite_statistic") -> ValidationResult:
    """Two-sample PSI test: ``PSI / (1/n + 1/m)`` is approximately chi-square(B-1)."""
    p, q = _as_counts(p), _as_counts(q)
    psi = psi_statistic(p, q, zero_policy)
    scaled = psi / (1.0 / p.n + 1.0 / q.n)
    critical = chi_square_isf(alpha, p.B - 1)
    p_value = 0.0 if math.isinf(scaled) else chi_square_sf(scaled, p.B - 1)
    return ValidationResult(
        method="psi_two_sample",
        statistic=scaled,
        threshold=critical,
        p_value=p_value,
        alert=bool(scaled > critical),
        alpha=alpha,
        per_bucket_deviation=p.shares() - q.shares(),
        n=p.n,
    )


def psi_k_threshold(n: int, B: int, k: int, alpha: float) -> float:
    """Alert threshold ``(k + 1) / (k n) * chi2_{alpha, B-1}`` for ``PSI_k``."""
    return (k + 1) / (k * n) * chi_square_isf(alpha, B - 1)


def psi_k_uniform_test(counts, k: int = DEFAULT_K, alpha: float = DEFAULT_ALPHA,
                       config: Optional[ValidationConfig] = None) -> ValidationResult:
    """PSI_k test of observed bucket counts against the uniform split.

    Alerts when ``sum_b (n_b/n - 1/B)(ln(n_b/n) - ln(1/B))`` exceeds
    ``(k+1)/(k n) * chi2_{alpha, B-1}``. Larger ``k`` lowers the threshold.

    When ``counts.n`` is below the configured minimum the result is returned
    with ``evaluated=False`` and no alert.
    """
    counts = _as_counts(counts)
    config = config or ValidationConfig(method="psi_k", alpha=alpha, k=k)
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    B, n = counts.B, counts.n
    min_total = config.resolved_min_total(B)
    if n == 0 or n < min_total:
        return ValidationResult(method="psi_k", statistic=math.nan, alert=False, alpha=alpha,
                                evaluated=False, k=k, per_bucket_deviation=_deviation(counts), n=n)

    c = counts.counts.astype(float)
    if config.zero_policy == "smoothing":
        c = c + SMOOTHING_PSEUDOCOUNT
    shares = c / c.sum()
    uniform = np.full(B, 1.0 / B)
    statistic = _psi_terms(shares, uniform)
    threshold = psi_k_threshold(n, B, k, alpha)
    return ValidationResult(
        method="psi_k",
        statistic=statistic,
        threshold=threshold,
        alert=bool(statistic > threshold),
        alpha=alpha,
        k=k,
        per_bucket_deviation=_deviation(counts),
        n=n,
    )


def _require_positive_total(counts: BucketCounts) -> None:
    if counts.n == 0:
        raise ValueError("test undefined for zero total count")


def pearson_chi2_uniform_test(counts, alpha: float = DEFAULT_ALPHA) -> ValidationResult:
    """Pearson chi-square goodness-of-fit against equal bucket shares."""
    counts = _as_counts(counts)
    _require_positive_total(counts)
    expected = counts.n / counts.B
    t = float(((counts.counts - expected) ** 2).sum() / expected)
    p_value = chi_square_sf(t, counts.B - 1)
    return ValidationResult(method="pearson_chi2", statistic=t, p_value=p_value,
                            alert=bool(p_value < alpha), alpha=alpha,
                            per_bucket_deviation=_deviation(counts), n=counts.n)


def _ecdf_and_uniform(counts: BucketCounts):
    ecdf = np.cumsum(counts.counts) / counts.n
    uniform = np.arange(1, counts.B + 1) / counts.B
    return ecdf, uniform


def ks_uniform_test(counts, alpha: float = DEFAULT_ALPHA) -> ValidationResult:
    """Kolmogorov-Smirnov test on the bucket-index ECDF.

    Uses the continuous asymptotic distribution, which is conservative for
    discrete data; the result carries ``conservative_discrete=True``.
    """
    counts = _as_counts(counts)
    _require_positive_total(counts)
    ecdf, uniform = _ecdf_and_uniform(counts)
    d = float(np.max(np.abs(ecdf - uniform)))
    p_value = kolmogorov_sf(math.sqrt(counts.n) * d)
    return ValidationResult(method="ks", statistic=d, p_value=p_value,
                            alert=bool(p_value < alpha), alpha=alpha,
                            per_bucket_deviation=_deviation(counts),
                            conservative_discrete=True, n=counts.n)


def ad_uniform_test(counts, alpha: float = DEFAULT_ALPHA) -> ValidationResult:
    """Discrete one-sample Anderson-Darling test against equal bucket shares.

    ``A^2 = n * sum_{b=0}^{B-2} (Fhat(b) - F(b))^2 (F(b+1) - F(b)) / (F(b)(1 - F(b)))``
    with ``F(b) = (b + 1) / B``; the p-value uses the asymptotic A^2 law.
    """
    counts = _as_counts(counts)
    _require_positive_total(counts)
    if counts.B < 3:
        raise ValueError("Anderson-Darling test needs at least 3 buckets")
    ecdf, F = _ecdf_and_uniform(counts)
    Fb = F[:-1]
    weights = (F[1:] - Fb) / (Fb * (1.0 - Fb))
    a2 = float(counts.n * np.sum((ecdf[:-1] - Fb) ** 2 * weights))
    p_value = anderson_darling_sf(a2)
    return ValidationResult(method="ad", statistic=a2, p_value=p_value,
                            alert=bool(p_value < alpha), alpha=alpha,
                            per_bucket_deviation=_deviation(counts), n=counts.n)


def validate(counts, config: ValidationConfig = ValidationConfig()) -> ValidationResult:
    """Run the validator named by ``config.method``."""
    counts = _as_counts(counts)
    if config.method == "psi_k":
        return psi_k_uniform_test(counts, k=config.k, alpha=config.alpha, config=config)
    if config.method == "pearson_chi2":
        return pearson_chi2_uniform_test(counts, config.alpha)
    if config.method == "ks":
        return ks_uniform_test(counts, config.alpha)
    return ad_uniform_test(counts, config.alpha)
