"""Simulator for hash-based traffic bucketing and labeled benchmark datasets.

Users are hashed into ``B`` buckets with MD5 and ``mod``. Benchmark cases are
drawn from multinomial models with optional anomalies injected into a few
buckets; SRM series are cumulative daily test/control counts with an optional
shift of the test share.

Every random draw comes from ``numpy.random.Generator(PCG64)`` seeded through
``SeedSequence`` with an entropy tuple derived from ``(rng_seed, stream, index)``,
so each case is reproducible on its own and independent of generation order.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .rand_validate import BucketCounts
from .srm_sequential import SrmSnapshot

__all__ = [
    "RNG_ALGORITHM",
    "Plane",
    "ExperimentDef",
    "BucketDatasetSpec",
    "BucketCase",
    "SrmSeriesSpec",
    "SrmSeries",
    "case_rng",
    "assign_bucket",
    "assign_buckets",
    "anomaly_probabilities",
    "generate_bucket_case",
    "generate_bucket_dataset",
    "generate_noise_sweep",
    "generate_srm_series",
    "generate_srm_suite",
    "inject_ghost_leakage",
    "simulate_plane_traffic",
]

RNG_ALGORITHM = "numpy.random.PCG64 seeded via SeedSequence((rng_seed, stream, index))"

# stream tags keep negative, positive and series draws in disjoint RNG streams
_NEGATIVE_STREAM = 0
_POSITIVE_STREAM = 1
_SRM_STREAM = 2
_LEAK_STREAM = 3
_SUITE_STREAM = 4

BASE_NOISE = 0.0005  # 0.05% extra share per anomalous bucket
NOISE_STEP = 0.0001  # 0.01% per unit of the Poisson draw


def case_rng(rng_seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(rng_seed), stream, int(index)])))


def _hash_u64(user_id: str, seed: str) -> int:
    digest = hashlib.md5(f"{user_id}:{seed}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def assign_bucket(user_id: str, seed: str, B: int = 100) -> int:
    """Bucket of ``user_id`` on the plane keyed by ``seed``.

    First 8 bytes of ``MD5(user_id + ":" + seed)`` read as a big-endian
    unsigned integer, reduced mod ``B``.
    """
    if B < 1:
        raise ValueError("bucket count must be positive")
    if not user_id or not seed:
        raise ValueError("user_id and seed must be non-empty")
    return _hash_u64(str(user_id), str(seed)) % B


def assign_buckets(user_ids: Iterable[str], seed: str, B: int = 100) -> np.ndarray:
    return np.fromiter((assign_bucket(u, seed, B) for u in user_ids), dtype=np.int64)


@dataclass(frozen=True)
class Plane:
    seed: str
    bucket_count: int = 100

    def __post_init__(self):
        if self.bucket_count < 2:
            raise ValueError("a plane needs at least 2 buckets")
        if not self.seed:
            raise ValueError("plane seed must be non-empty")

    def bucket_of(self, user_id: str) -> int:
        return assign_bucket(user_id, self.seed, self.bucket_count)


@dataclass(frozen=True)
class ExperimentDef:
    plane: Plane
    test_buckets: frozenset
    control_buckets: frozenset
    trigger_rate: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "test_buckets", frozenset(self.test_buckets))
        object.__setattr__(self, "control_buckets", frozenset(self.control_buckets))
        B = self.plane.bucket_count
        if self.test_buckets & self.control_buckets:
            raise ValueError("test and control bucket sets overlap")
        if any(not 0 <= b < B for b in self.test_buckets | self.control_buckets):
            raise ValueError(f"bucket indices must lie in [0, {B})")
        if not 0.0 <= self.trigger_rate <= 1.0:
            raise ValueError("trigger_rate must be a probability")

    def variant_of(self, user_id: str) -> Optional[str]:
        b = self.plane.bucket_of(user_id)
        if b in self.test_buckets:
            return "test"
        if b in self.control_buckets:
            return "control"
        return None


def simulate_plane_traffic(experiment: ExperimentDef, user_ids: Sequence[str], rng_seed: int = 0):
    """Assign and trigger ``user_ids`` under ``experiment``.

    Returns ``(assigned_bucket_counts, triggered_test, triggered_control)``
    where triggering is a Bernoulli(trigger_rate) draw per assigned user.
    """
    B = experiment.plane.bucket_count
    buckets = assign_buckets(user_ids, experiment.plane.seed, B)
    counts = np.bincount(buckets, minlength=B)
    rng = case_rng(rng_seed, _SUITE_STREAM, 0)
    triggered = rng.random(buckets.size) < experiment.trigger_rate
    in_test = np.isin(buckets, list(experiment.test_buckets))
    in_control = np.isin(buckets, list(experiment.control_buckets))
    return (BucketCounts(counts), int(np.sum(triggered & in_test)), int(np.sum(triggered & in_control)))


@dataclass(frozen=True)
class BucketDatasetSpec:
    """Recipe for a labeled bucket-count dataset (defaults give the 500/100 simulation)."""

    negatives: int = 500
    positives: int = 100
    B: int = 100
    mean_total: float = 3e6
    noise_lambda: float = 4.0
    max_anomalous_buckets: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if self.negatives < 0 or self.positives < 0:
            raise ValueError("case counts must be non-negative")
        if self.B < 2:
            raise ValueError("B must be at least 2")
        if self.mean_total <= 0:
            raise ValueError("mean_total must be positive")
        if self.noise_lambda < 0:
            raise ValueError("noise_lambda must be non-negative")
        if not 1 <= self.max_anomalous_buckets <= self.B:
            raise ValueError("max_anomalous_buckets must lie in [1, B]")

    def to_dict(self) -> dict:
        return {
            "negatives": self.negatives,
            "positives": self.positives,
            "B": self.B,
            "mean_total": self.mean_total,
            "noise_lambda": self.noise_lambda,
            "max_anomalous_buckets": self.max_anomalous_buckets,
            "rng_seed": self.rng_seed,
        }


@dataclass(frozen=True)
class BucketCase:
    counts: BucketCounts
    label: bool
    case_index: int
    probabilities: np.ndarray
    anomalous_buckets: Tuple[int, ...] = ()


def anomaly_probabilities(B: int, anomalous: Sequence[int], extra: Sequence[float]) -> np.ndarray:
    """Bucket probabilities with ``1/B + extra[i]`` on ``anomalous[i]``.

    The injected mass is taken from the other buckets in proportion to their
    share, so the vector sums to one.
    """
    probs = np.full(B, 1.0 / B)
    anomalous = np.asarray(anomalous, dtype=np.int64)
    extra = np.asarray(extra, dtype=float)
    if anomalous.size:
        probs[anomalous] += extra
        injected = extra.sum()
        rest = np.ones(B, dtype=bool)
        rest[anomalous] = False
        rest_mass = rest.sum() / B
        if injected >= rest_mass:
            raise ValueError("injected probability mass leaves nothing for the other buckets")
        probs[rest] *= (rest_mass - injected) / rest_mass
    if np.any(probs > 1.0) or np.any(probs < 0.0):
        raise ValueError("anomaly produced an invalid probability vector")
    return probs / probs.sum()


def generate_bucket_case(positive: bool, spec: BucketDatasetSpec, case_index: int) -> BucketCase:
    """Draw one labeled bucket-count case.

    ``n ~ Poisson(mean_total)``; negatives are multinomial over equal shares.
    Positives pick ``m ~ Uniform{1..max_anomalous_buckets}`` distinct buckets
    and raise each one's share by ``0.05% + x * 0.01%``, ``x ~ Poisson(noise_lambda)``
    drawn per bucket.
    """
    stream = _POSITIVE_STREAM if positive else _NEGATIVE_STREAM
    rng = case_rng(spec.rng_seed, stream, case_index)
    n = int(rng.poisson(spec.mean_total))
    anomalous: Tuple[int, ...] = ()
    if positive:
        m = int(rng.integers(1, spec.max_anomalous_buckets + 1))
        picked = rng.choice(spec.B, size=m, replace=False)
        x = rng.poisson(spec.noise_lambda, size=m)
        extra = BASE_NOISE + NOISE_STEP * x
        probs = anomaly_probabilities(spec.B, picked, extra)
        anomalous = tuple(int(b) for b in picked)
    else:
        probs = np.full(spec.B, 1.0 / spec.B)
    counts = rng.multinomial(n, probs)
    return BucketCase(BucketCounts(counts), bool(positive), int(case_index), probs, anomalous)


def generate_bucket_dataset(spec: BucketDatasetSpec) -> List[BucketCase]:
    """All negatives (indices ``0..negatives-1``) then all positives."""
    cases = [generate_bucket_case(False, spec, i) for i in range(spec.negatives)]
    cases += [generate_bucket_case(True, spec, spec.negatives + i) for i in range(spec.positives)]
    return cases


def generate_noise_sweep(lambdas: Sequence[float], base_spec: BucketDatasetSpec):
    """One dataset per noise level.

    Streams depend only on ``(rng_seed, label, case_index)``, not on the
    noise level, so every dataset shares its negatives and the positives
    differ only in the size of the injected anomaly (common random numbers).
    """
    return {float(lam): generate_bucket_dataset(replace(base_spec, noise_lambda=float(lam)))
            for lam in lambdas}


@dataclass(frozen=True)
class SrmSeriesSpec:
    days: int = 29
    daily_volume: float = 1e5
    p0: float = 0.5
    injected_shift: float = 0.0
    shift_start_day: int = 1
    rng_seed: int = 0
    series_index: int = 0

    def __post_init__(self):
        if self.days < 1:
            raise ValueError("days must be at least 1")
        if self.daily_volume < 0:
            raise ValueError("daily_volume must be non-negative")
        if not 0.0 < self.p0 < 1.0:
            raise ValueError("p0 must lie in (0, 1)")
        if not 0.0 < self.p0 + self.injected_shift < 1.0:
            raise ValueError("shifted test share must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "days": self.days,
            "daily_volume": self.daily_volume,
            "p0": self.p0,
            "injected_shift": self.injected_shift,
            "shift_start_day": self.shift_start_day,
            "rng_seed": self.rng_seed,
            "series_index": self.series_index,
        }


@dataclass(frozen=True)
class SrmSeries:
    spec: SrmSeriesSpec
    snapshots: Tuple[SrmSnapshot, ...]
    truth: bool


def generate_srm_series(spec: SrmSeriesSpec) -> SrmSeries:
    """Cumulative daily test/control counts.

    Each day draws ``Poisson(daily_volume)`` triggered users and splits them
    binomially with test share ``p0`` (``p0 + injected_shift`` from
    ``shift_start_day`` on). The truth label is ``injected_shift != 0``.
    """
    rng = case_rng(spec.rng_seed, _SRM_STREAM, spec.series_index)
    totals = rng.poisson(spec.daily_volume, size=spec.days)
    day = np.arange(1, spec.days + 1)
    share = np.where(day >= spec.shift_start_day, spec.p0 + spec.injected_shift, spec.p0)
    test = rng.binomial(totals, share)
    x_t = np.cumsum(test)
    x_c = np.cumsum(totals - test)
    snaps = tuple(SrmSnapshot(int(d), int(t), int(c)) for d, t, c in zip(day, x_t, x_c))
    return SrmSeries(spec, snaps, spec.injected_shift != 0)


def generate_srm_suite(count: int = 500, rng_seed: int = 0, days: int = 29, p0: float = 0.5,
                       volume_range: Tuple[float, float] = (1e2, 1e5),
                       shifts: Sequence[float] = (0.0025, 0.005, 0.01, 0.02),
                       null_fraction: float = 0.5) -> List[SrmSeries]:
    """Mixed suite of null and shifted series with log-uniform daily volumes.

    A ``null_fraction`` of series carry no shift; the rest draw a shift
    magnitude from ``shifts`` with a random sign and a random start day in
    the first half of the window.
    """
    series = []
    lo, hi = np.log10(volume_range[0]), np.log10(volume_range[1])
    for i in range(count):
        rng = case_rng(rng_seed, _SUITE_STREAM, i)
        volume = float(10 ** rng.uniform(lo, hi))
        if rng.random() < null_fraction:
            shift, start = 0.0, 1
        else:
            shift = float(rng.choice(shifts)) * (1 if rng.random() < 0.5 else -1)
            start = int(rng.integers(1, days // 2 + 1))
        spec = SrmSeriesSpec(days=days, daily_volume=volume, p0=p0, injected_shift=shift,
                             shift_start_day=start, rng_seed=rng_seed, series_index=i)
        series.append(generate_srm_series(spec))
    return series


def inject_ghost_leakage(counts, leak_fraction: float, rng: np.random.Generator,
                         target_buckets: Iterable[int]) -> BucketCounts:
    """Add ``round(leak_fraction * n)`` extra samples spread uniformly over ``target_buckets``.

    Models users whose tracked id differs from the id that was randomized, so
    they show up a second time in the recorded buckets.
    """
    counts = counts if isinstance(counts, BucketCounts) else BucketCounts(counts)
    if not 0.0 <= leak_fraction < 1.0:
        raise ValueError("leak_fraction must lie in [0, 1)")
    targets = np.unique(np.asarray(list(target_buckets), dtype=np.int64))
    if targets.size == 0:
        raise ValueError("target bucket subset is empty")
    if targets.min() < 0 or targets.max() >= counts.B:
        raise ValueError("target bucket out of range")
    extra = int(round(leak_fraction * counts.n))
    out = counts.counts.copy()
    if extra:
        out[targets] += rng.multinomial(extra, np.full(targets.size, 1.0 / targets.size))
    return BucketCounts(out)
