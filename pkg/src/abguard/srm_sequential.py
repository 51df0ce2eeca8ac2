"""Sample ratio mismatch (SRM) detection on cumulative test/control counts.

Two one-sided SPRTs run side by side on every snapshot:

* Test A: ``H0: p = p0`` vs ``HA: p >= p0 + delta`` (test arm inflated)
* Test B: ``H0: p = p0`` vs ``HA: p <= p0 - delta`` (test arm deflated)

Each log-likelihood ratio is compared with the Wald bound ``ln((1-beta)/alpha)``.
The first crossing raises an alert and monitoring of that experiment stops.
The ``gaussian`` variant uses the normal approximation with plug-in variance,
the ``exact`` variant the binomial likelihood.

A per-snapshot z-test and Pearson chi-square are kept as baselines, together
with the 1% rule used to label benchmark data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .stat_core import chi_square_sf, normal_sf

__all__ = [
    "OUTCOMES",
    "DEFAULT_MIN_TOTAL",
    "ExpectedSplit",
    "SrmSnapshot",
    "SprtConfig",
    "SprtDecision",
    "MonitorState",
    "MonitorReport",
    "SegmentedReport",
    "SequencingError",
    "default_delta",
    "resolve_delta",
    "wald_thresholds",
    "gaussian_llr",
    "exact_llr",
    "sprt_gaussian_stats",
    "sprt_exact_stats",
    "sprt_step",
    "t_test_detector",
    "chi2_detector",
    "z_statistic",
    "chi2_statistic",
    "srm_label_rule",
    "monitor_series",
    "aggregate_series",
    "segmented_monitor",
]

OUTCOMES = ("alert_high", "alert_low", "continue", "not_evaluated")
DEFAULT_MIN_TOTAL = 100
ALL_SEGMENTS = "all"


class SequencingError(ValueError):
    """Snapshots arrived out of day order or with shrinking cumulative counts."""


@dataclass(frozen=True)
class ExpectedSplit:
    """Designed traffic shares of the test and control arms."""

    r_t: float
    r_c: float

    def __post_init__(self):
        if not (self.r_t > 0 and self.r_c > 0):
            raise ValueError("traffic shares must be positive")

    @property
    def p0(self) -> float:
        return self.r_t / (self.r_t + self.r_c)


@dataclass(frozen=True)
class SrmSnapshot:
    """Cumulative arm counts observed up to ``day``."""

    day: int
    x_t: int
    x_c: int

    def __post_init__(self):
        if self.x_t < 0 or self.x_c < 0:
            raise ValueError("counts must be non-negative")

    @property
    def n(self) -> int:
        return self.x_t + self.x_c

    @property
    def p_hat(self) -> float:
        return self.x_t / self.n if self.n else math.nan


@dataclass(frozen=True)
class SprtConfig:
    delta: Optional[float] = None  # None -> default_delta(split)
    alpha: float = 0.05
    beta: float = 0.0
    variant: str = "gaussian"
    min_total: int = DEFAULT_MIN_TOTAL

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.alpha + self.beta >= 1.0:
            raise ValueError("alpha + beta must be below 1")
        if self.variant not in ("gaussian", "exact"):
            raise ValueError(f"unknown SPRT variant {self.variant!r}")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.min_total < 0:
            raise ValueError("min_total must be non-negative")


@dataclass(frozen=True)
class SprtDecision:
    day: int
    t_a: float
    t_b: float
    upper_threshold: float
    lower_threshold: float
    outcome: str

    def to_dict(self) -> dict:
        def num(v):
            return v if math.isfinite(v) else None if math.isnan(v) else ("inf" if v > 0 else "-inf")

        return {"day": self.day, "t_a": num(self.t_a), "t_b": num(self.t_b),
                "upper_threshold": num(self.upper_threshold),
                "lower_threshold": num(self.lower_threshold), "outcome": self.outcome}


@dataclass(frozen=True)
class MonitorState:
    fired: bool = False
    first_alert_day: Optional[int] = None
    direction: Optional[str] = None
    last_day: Optional[int] = None

    def __post_init__(self):
        if self.fired != (self.first_alert_day is not None):
            raise ValueError("fired must coincide with first_alert_day being set")
        if self.direction not in (None, "high", "low"):
            raise ValueError("direction must be 'high', 'low' or None")

    def to_dict(self) -> dict:
        return {"fired": self.fired, "first_alert_day": self.first_alert_day,
                "direction": self.direction, "last_day": self.last_day}

    @classmethod
    def from_dict(cls, d: Mapping) -> "MonitorState":
        return cls(fired=bool(d["fired"]), first_alert_day=d.get("first_alert_day"),
                   direction=d.get("direction"), last_day=d.get("last_day"))


@dataclass
class MonitorReport:
    fired: bool = False
    first_alert_day: Optional[int] = None
    direction: Optional[str] = None
    decisions: List[SprtDecision] = field(default_factory=list)
    final_x_t: int = 0
    final_x_c: int = 0
    delta: Optional[float] = None

    @property
    def state(self) -> MonitorState:
        last = self.decisions[-1].day if self.decisions else None
        return MonitorState(self.fired, self.first_alert_day, self.direction, last)

    def to_dict(self) -> dict:
        return {"fired": self.fired, "first_alert_day": self.first_alert_day,
                "direction": self.direction, "delta": self.delta,
                "final_x_t": self.final_x_t, "final_x_c": self.final_x_c,
                "decisions": [d.to_dict() for d in self.decisions]}


def default_delta(split: ExpectedSplit) -> float:
    """Default tolerance ``min(1%, 5% * min(p0, 1 - p0))``."""
    p0 = split.p0
    return min(0.01, 0.05 * min(p0, 1.0 - p0))


def resolve_delta(split: ExpectedSplit, config: SprtConfig) -> float:
    delta = default_delta(split) if config.delta is None else config.delta
    p0 = split.p0
    if not 0.0 < delta < min(p0, 1.0 - p0):
        raise ValueError(f"delta={delta} must lie in (0, min(p0, 1-p0)) for p0={p0}")
    return delta


def wald_thresholds(alpha: float, beta: float = 0.0) -> Tuple[float, float]:
    """Wald's ``(lower, upper) = (ln(beta/(1-alpha)), ln((1-beta)/alpha))``.

    With ``beta == 0`` the lower bound is ``-inf``: the test never accepts
    H0 and only distinguishes alert from continue.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    if alpha + beta >= 1.0:
        raise ValueError("alpha + beta must be below 1, otherwise the bounds collapse")
    upper = math.log((1.0 - beta) / alpha)
    lower = -math.inf if beta == 0 else math.log(beta / (1.0 - alpha))
    return lower, upper


def gaussian_llr(x_t, x_c, p0: float, delta: float):
    """Gaussian log-likelihood ratios ``(t_a, t_b)``.

    ``t_a = -(delta^2 - 2 delta (p_hat - p0)) / (2 sigma^2)`` and the mirror
    for ``t_b``, with ``sigma^2 = p_hat (1 - p_hat) / n``. Accepts scalars or
    arrays; entries with a degenerate variance (``p_hat`` in {0, 1} or
    ``n == 0``) come back as NaN.
    """
    x_t = np.asarray(x_t, dtype=float)
    x_c = np.asarray(x_c, dtype=float)
    n = x_t + x_c
    with np.errstate(divide="ignore", invalid="ignore"):
        p_hat = x_t / n
        var = p_hat * (1.0 - p_hat) / n
        ok = var > 0
        var = np.where(ok, var, np.nan)
        diff = p_hat - p0
        t_a = -(delta * delta - 2.0 * delta * diff) / (2.0 * var)
        t_b = -(delta * delta + 2.0 * delta * diff) / (2.0 * var)
    if t_a.ndim == 0:
        return float(t_a), float(t_b)
    return t_a, t_b


def exact_llr(x_t, x_c, p0: float, delta: float):
    """Binomial log-likelihood ratios ``(t_a, t_b)``.

    ``t_a = x_t ln((p0+delta)/p0) + x_c ln((1-p0-delta)/(1-p0))`` and
    ``t_b = x_t ln((p0-delta)/p0) + x_c ln((1-p0+delta)/(1-p0))``.
    """
    if not 0.0 < delta < min(p0, 1.0 - p0):
        raise ValueError(f"delta={delta} must lie in (0, min(p0, 1-p0)) for p0={p0}")
    x_t = np.asarray(x_t, dtype=float)
    x_c = np.asarray(x_c, dtype=float)
    t_a = x_t * math.log((p0 + delta) / p0) + x_c * math.log((1.0 - p0 - delta) / (1.0 - p0))
    t_b = x_t * math.log((p0 - delta) / p0) + x_c * math.log((1.0 - p0 + delta) / (1.0 - p0))
    if t_a.ndim == 0:
        return float(t_a), float(t_b)
    return t_a, t_b


def sprt_gaussian_stats(snapshot: SrmSnapshot, split: ExpectedSplit,
                        delta: float) -> Tuple[float, float]:
    """Gaussian ``(t_a, t_b)`` for one snapshot; NaN pair when the variance is degenerate."""
    return gaussian_llr(snapshot.x_t, snapshot.x_c, split.p0, delta)


def sprt_exact_stats(snapshot: SrmSnapshot, split: ExpectedSplit,
                     delta: float) -> Tuple[float, float]:
    return exact_llr(snapshot.x_t, snapshot.x_c, split.p0, delta)


def _snapshot_stats(snapshot: SrmSnapshot, p0: float, delta: float, config: SprtConfig):
    """``(t_a, t_b)`` or ``None`` when the snapshot cannot be evaluated."""
    if snapshot.n == 0 or snapshot.n < config.min_total:
        return None
    if config.variant == "exact":
        return exact_llr(snapshot.x_t, snapshot.x_c, p0, delta)
    t_a, t_b = gaussian_llr(snapshot.x_t, snapshot.x_c, p0, delta)
    if math.isnan(t_a):
        return None
    return t_a, t_b


def sprt_step(state: MonitorState, snapshot: SrmSnapshot, split: ExpectedSplit,
              config: SprtConfig = SprtConfig()) -> Tuple[MonitorState, SprtDecision]:
    """Advance one experiment's monitor by one snapshot.

    Statistics are recomputed from the cumulative counts, so the state only
    needs the absorbing alert flag. Once fired, later snapshots echo the
    original alert (``first_alert_day`` and direction never change).
    """
    if state.last_day is not None and snapshot.day <= state.last_day:
        raise SequencingError(f"day {snapshot.day} does not follow day {state.last_day}")
    delta = resolve_delta(split, config)
    lower, upper = wald_thresholds(config.alpha, config.beta)
    stats = _snapshot_stats(snapshot, split.p0, delta, config)
    t_a, t_b = stats if stats is not None else (math.nan, math.nan)

    if state.fired:
        outcome = "alert_high" if state.direction == "high" else "alert_low"
        new_state = replace(state, last_day=snapshot.day)
    elif stats is None:
        outcome = "not_evaluated"
        new_state = replace(state, last_day=snapshot.day)
    elif t_a > upper:
        outcome = "alert_high"
        new_state = MonitorState(True, snapshot.day, "high", snapshot.day)
    elif t_b > upper:
        outcome = "alert_low"
        new_state = MonitorState(True, snapshot.day, "low", snapshot.day)
    else:
        outcome = "continue"
        new_state = replace(state, last_day=snapshot.day)
    return new_state, SprtDecision(snapshot.day, t_a, t_b, upper, lower, outcome)


def z_statistic(x_t, x_c, p0: float):
    """One-proportion z ``(p_hat - p0) / sqrt(p0 (1 - p0) / n)``; NaN where ``n == 0``."""
    x_t = np.asarray(x_t, dtype=float)
    n = x_t + np.asarray(x_c, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (x_t / n - p0) / np.sqrt(p0 * (1.0 - p0) / n)
    return float(z) if z.ndim == 0 else z


def chi2_statistic(x_t, x_c, p0: float):
    """Pearson statistic against expected counts ``(n p0, n (1 - p0))``."""
    x_t = np.asarray(x_t, dtype=float)
    x_c = np.asarray(x_c, dtype=float)
    n = x_t + x_c
    with np.errstate(divide="ignore", invalid="ignore"):
        e_t, e_c = n * p0, n * (1.0 - p0)
        t = (x_t - e_t) ** 2 / e_t + (x_c - e_c) ** 2 / e_c
    return float(t) if t.ndim == 0 else t


def t_test_detector(snapshot: SrmSnapshot, split: ExpectedSplit, alpha: float = 0.01,
                    min_total: int = DEFAULT_MIN_TOTAL) -> Optional[bool]:
    """Two-sided one-proportion z-test; ``None`` when not evaluated."""
    if snapshot.n == 0 or snapshot.n < min_total:
        return None
    z = z_statistic(snapshot.x_t, snapshot.x_c, split.p0)
    return bool(2.0 * normal_sf(abs(z)) < alpha)


def chi2_detector(snapshot: SrmSnapshot, split: ExpectedSplit, alpha: float = 0.01,
                  min_total: int = DEFAULT_MIN_TOTAL) -> Optional[bool]:
    """Pearson chi-square test with one degree of freedom; ``None`` when not evaluated."""
    if snapshot.n == 0 or snapshot.n < min_total:
        return None
    t = chi2_statistic(snapshot.x_t, snapshot.x_c, split.p0)
    return bool(chi_square_sf(t, 1) < alpha)


def srm_label_rule(snapshot: SrmSnapshot, split: Optional[ExpectedSplit] = None) -> Optional[bool]:
    """Rule-based SRM label: relative count gap above 1%.

    Without a split (or for an even split) this is ``|x_t - x_c| / x_c > 0.01``.
    For uneven designs the counts are first normalized by the designed shares:
    ``|x_t r_c - x_c r_t| / (x_c r_t) > 0.01``. Returns ``None`` when both
    counts are zero and ``True`` when only the control count is zero.
    """
    if snapshot.x_c == 0:
        return None if snapshot.x_t == 0 else True
    if split is None or split.r_t == split.r_c:
        return abs(snapshot.x_t - snapshot.x_c) > 0.01 * snapshot.x_c
    return abs(snapshot.x_t * split.r_c - snapshot.x_c * split.r_t) > 0.01 * snapshot.x_c * split.r_t


def monitor_series(snapshots: Sequence[SrmSnapshot], split: ExpectedSplit,
                   config: SprtConfig = SprtConfig(),
                   state: Optional[MonitorState] = None) -> MonitorReport:
    """Fold :func:`sprt_step` over an ordered series of cumulative snapshots."""
    state = state or MonitorState()
    report = MonitorReport(delta=resolve_delta(split, config))
    prev = None
    for snap in snapshots:
        if prev is not None and (snap.x_t < prev.x_t or snap.x_c < prev.x_c):
            raise SequencingError(f"cumulative counts decrease at day {snap.day}")
        state, decision = sprt_step(state, snap, split, config)
        report.decisions.append(decision)
        prev = snap
    report.fired = state.fired
    report.first_alert_day = state.first_alert_day
    report.direction = state.direction
    if prev is not None:
        report.final_x_t, report.final_x_c = prev.x_t, prev.x_c
    return report


def aggregate_series(series_by_segment: Mapping[str, Sequence[SrmSnapshot]]) -> List[SrmSnapshot]:
    """Sum cumulative counts across segments day by day.

    A segment missing a day contributes its latest earlier cumulative count.
    """
    days = sorted({s.day for snaps in series_by_segment.values() for s in snaps})
    latest: Dict[str, Tuple[int, int]] = {}
    by_day = {seg: {s.day: s for s in snaps} for seg, snaps in series_by_segment.items()}
    out = []
    for d in days:
        for seg, table in by_day.items():
            if d in table:
                latest[seg] = (table[d].x_t, table[d].x_c)
        out.append(SrmSnapshot(d, sum(v[0] for v in latest.values()), sum(v[1] for v in latest.values())))
    return out


@dataclass
class SegmentedReport:
    aggregate: MonitorReport
    segments: Dict[str, MonitorReport]
    divergent: List[str]
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"aggregate": self.aggregate.to_dict(),
                "segments": {k: v.to_dict() for k, v in sorted(self.segments.items())},
                "divergent_segments": list(self.divergent), "notes": list(self.notes)}


def segmented_monitor(rows: Mapping[str, Sequence[SrmSnapshot]], split: ExpectedSplit,
                      config: SprtConfig = SprtConfig()) -> SegmentedReport:
    """Monitor every segment separately and the summed ``"all"`` series.

    Segments whose alert status differs from the aggregate are listed in
    ``divergent``: an SRM concentrated in one site or channel shows up as a
    single firing segment.
    """
    notes = []
    usable = {}
    for seg in sorted(rows):
        if not rows[seg]:
            notes.append(f"segment {seg!r} has no snapshots; omitted")
        else:
            usable[seg] = list(rows[seg])
    per_segment = {seg: monitor_series(snaps, split, config) for seg, snaps in usable.items()}
    aggregate = monitor_series(aggregate_series(usable), split, config)
    divergent = [seg for seg, rep in per_segment.items() if rep.fired != aggregate.fired]
    return SegmentedReport(aggregate, per_segment, divergent, notes)
