"""Detector-quality metrics and benchmark tables.

Randomization validators are scored per case on labeled bucket datasets.
SRM detectors are scored on simulated series in two ways:

* cell level: every evaluated ``(series, day)`` snapshot is one prediction,
  labeled by the 1% rule on that day's cumulative counts. Baselines predict
  from that snapshot alone; the SPRT variants predict "already fired by this
  day", since their alerts are absorbing.
* series level: one prediction per series (ever alerted), labeled on the
  final snapshot. Recall-by-size bins are computed at this level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import rand_validate as rv
from .srm_sequential import (
    DEFAULT_MIN_TOTAL,
    ExpectedSplit,
    SprtConfig,
    chi2_statistic,
    exact_llr,
    gaussian_llr,
    resolve_delta,
    srm_label_rule,
    wald_thresholds,
    z_statistic,
)
from .stat_core import chi_square_isf, normal_isf
from .traffic_sim import BucketCase, BucketDatasetSpec, RNG_ALGORITHM, SrmSeries, generate_noise_sweep

__all__ = [
    "NA",
    "BENCHMARK_ALPHA",
    "VALIDATOR_METHODS",
    "SRM_DETECTORS",
    "SRM_DEFAULT_ALPHAS",
    "ConfusionMatrix",
    "MetricsReport",
    "MethodScore",
    "SrmEvaluation",
    "score",
    "fmt_metric",
    "run_validator",
    "evaluate_validators",
    "k_sweep",
    "alert_sets_nested",
    "noise_sweep_eval",
    "series_detector_trace",
    "evaluate_srm_detectors",
    "render_validator_table",
    "render_k_sweep",
    "render_noise_sweep",
    "render_srm_table",
    "recall_bins_csv",
    "metadata",
]

NA = "n/a"
# Significance level at which the baselines reproduce the reported ~10% chi-square FPR.
BENCHMARK_ALPHA = 0.1
VALIDATOR_METHODS = ("pearson_chi2", "ad", "ks", "psi_k")
SRM_DETECTORS = ("chi2", "t_test", "sprt", "sprt_exact")
SRM_DEFAULT_ALPHAS = {"chi2": 0.01, "t_test": 0.01, "sprt": 0.05, "sprt_exact": 0.05}

_METHOD_LABELS = {"pearson_chi2": "chi2 test", "ad": "AD test", "ks": "KS test", "psi_k": "PSI_k test",
                  "chi2": "chi2 test", "t_test": "t-test", "sprt": "SPRT", "sprt_exact": "SPRT-EXACT"}


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int = 0
    fp: int = 0
    fn: int = 0
    tp: int = 0

    def __post_init__(self):
        if min(self.tn, self.fp, self.fn, self.tp) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    def to_dict(self) -> dict:
        return {"tn": self.tn, "fp": self.fp, "fn": self.fn, "tp": self.tp}


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


@dataclass(frozen=True)
class MetricsReport:
    """Rates derived from a confusion matrix; ``None`` marks an undefined rate."""

    fpr: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    f_score: Optional[float]

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix) -> "MetricsReport":
        precision = _ratio(cm.tp, cm.tp + cm.fp)
        recall = _ratio(cm.tp, cm.tp + cm.fn)
        if precision is None or recall is None or precision + recall == 0:
            f_score = None
        else:
            f_score = 2 * precision * recall / (precision + recall)
        return cls(_ratio(cm.fp, cm.fp + cm.tn), precision, recall, f_score)

    def to_dict(self) -> dict:
        return {k: (NA if v is None else v) for k, v in
                (("fpr", self.fpr), ("precision", self.precision),
                 ("recall", self.recall), ("f_score", self.f_score))}


def score(predictions: Sequence[bool], labels: Sequence[bool]) -> Tuple[ConfusionMatrix, MetricsReport]:
    """Confusion matrix and metrics of boolean ``predictions`` against ``labels``."""
    pred = np.asarray(predictions, dtype=bool)
    lab = np.asarray(labels, dtype=bool)
    if pred.shape != lab.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {lab.size} labels")
    cm = ConfusionMatrix(
        tn=int(np.sum(~pred & ~lab)),
        fp=int(np.sum(pred & ~lab)),
        fn=int(np.sum(~pred & lab)),
        tp=int(np.sum(pred & lab)),
    )
    return cm, MetricsReport.from_confusion(cm)


def fmt_metric(value: Optional[float], digits: int = 2) -> str:
    return NA if value is None else f"{100 * value:.{digits}f}%"


@dataclass
class MethodScore:
    name: str
    confusion: ConfusionMatrix
    metrics: MetricsReport
    predictions: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, dtype=bool))

    def to_dict(self) -> dict:
        return {"method": self.name, "confusion": self.confusion.to_dict(),
                "metrics": self.metrics.to_dict()}


def run_validator(method: str, counts, alpha: float, k: int = 1) -> bool:
    config = rv.ValidationConfig(method=method, alpha=alpha, k=k, min_total=0)
    return rv.validate(counts, config).alert


def _labels(dataset: Sequence[BucketCase]) -> np.ndarray:
    return np.array([case.label for case in dataset], dtype=bool)


def evaluate_validators(dataset: Sequence[BucketCase], methods: Iterable[str] = VALIDATOR_METHODS,
                        alpha: float = BENCHMARK_ALPHA, k: int = 1) -> Dict[str, MethodScore]:
    """Run each validator on every case and score it against the case labels."""
    methods = list(methods)
    if not dataset:
        return {}
    labels = _labels(dataset)
    out = {}
    for method in methods:
        preds = np.array([run_validator(method, case.counts, alpha, k) for case in dataset], dtype=bool)
        cm, metrics = score(preds, labels)
        name = f"psi_k{k}" if method == "psi_k" else method
        out[name] = MethodScore(name, cm, metrics, preds)
    return out


def k_sweep(dataset: Sequence[BucketCase], ks: Iterable[int] = range(1, 8),
            alpha: float = BENCHMARK_ALPHA) -> Dict[int, MethodScore]:
    """PSI_k scores for each ``k``.

    The statistic does not depend on ``k``; only the threshold factor
    ``(k + 1) / k`` does, so the statistic is computed once per case.
    """
    ks = [int(k) for k in ks]
    if not dataset:
        return {}
    labels = _labels(dataset)
    stats = []
    for case in dataset:
        res = rv.psi_k_uniform_test(case.counts, k=1, alpha=alpha,
                                    config=rv.ValidationConfig(alpha=alpha, k=1, min_total=0))
        stats.append((res.statistic, case.counts.n, case.counts.B))
    out = {}
    for k in ks:
        preds = np.array([s > rv.psi_k_threshold(n, B, k, alpha) for s, n, B in stats], dtype=bool)
        cm, metrics = score(preds, labels)
        out[k] = MethodScore(f"psi_k{k}", cm, metrics, preds)
    return out


def alert_sets_nested(sweep: Mapping[int, MethodScore]) -> bool:
    """True when every case alerting at ``k`` also alerts at each larger ``k``."""
    ordered = [sweep[k].predictions for k in sorted(sweep)]
    return all(bool(np.all(~a | b)) for a, b in zip(ordered, ordered[1:]))


def noise_sweep_eval(lambdas: Iterable[float], base_spec: BucketDatasetSpec,
                     methods: Iterable[str] = VALIDATOR_METHODS, alpha: float = BENCHMARK_ALPHA,
                     k: int = 1) -> Dict[float, Dict[str, MethodScore]]:
    """Validator scores per noise level ``lambda``."""
    methods = list(methods)
    datasets = generate_noise_sweep(list(lambdas), base_spec)
    return {lam: evaluate_validators(ds, methods, alpha, k) for lam, ds in datasets.items()}


def series_detector_trace(x_t: np.ndarray, x_c: np.ndarray, split: ExpectedSplit, detector: str,
                          alpha: float, beta: float = 0.0, delta: Optional[float] = None,
                          min_total: int = DEFAULT_MIN_TOTAL) -> Tuple[np.ndarray, np.ndarray]:
    """Per-day ``(evaluated, alert)`` arrays for one cumulative series.

    For the SPRT detectors ``alert`` is the absorbing fired flag, matching
    :func:`abguard.srm_sequential.monitor_series`.
    """
    x_t = np.asarray(x_t, dtype=float)
    x_c = np.asarray(x_c, dtype=float)
    n = x_t + x_c
    evaluated = (n > 0) & (n >= min_total)
    p0 = split.p0
    if detector == "t_test":
        z = z_statistic(x_t, x_c, p0)
        alert = evaluated & (np.abs(np.nan_to_num(z)) > normal_isf(alpha / 2.0))
    elif detector == "chi2":
        t = chi2_statistic(x_t, x_c, p0)
        alert = evaluated & (np.nan_to_num(t) > chi_square_isf(alpha, 1))
    elif detector in ("sprt", "sprt_exact"):
        d = resolve_delta(split, SprtConfig(delta=delta, alpha=alpha, beta=beta))
        _, upper = wald_thresholds(alpha, beta)
        llr = exact_llr if detector == "sprt_exact" else gaussian_llr
        t_a, t_b = llr(x_t, x_c, p0, d)
        t_a, t_b = np.atleast_1d(t_a), np.atleast_1d(t_b)
        if detector == "sprt":
            evaluated = evaluated & np.isfinite(t_a)
        cross = evaluated & ((np.nan_to_num(t_a, nan=-np.inf) > upper) | (np.nan_to_num(t_b, nan=-np.inf) > upper))
        alert = np.logical_or.accumulate(cross)
    else:
        raise ValueError(f"unknown SRM detector {detector!r}")
    return evaluated, alert


def size_bin_edges(sizes: Sequence[float], n_bins: int) -> np.ndarray:
    """Equal-count bin edges over final sample sizes."""
    sizes = np.asarray(sizes, dtype=float)
    return np.quantile(sizes, np.linspace(0.0, 1.0, n_bins + 1))


@dataclass
class SrmEvaluation:
    detectors: List[str]
    alphas: Dict[str, float]
    label_source: str
    cell_scores: Dict[str, MethodScore]
    series_scores: Dict[str, MethodScore]
    bin_edges: List[float]
    recall_by_bin: Dict[str, List[Optional[float]]]
    positives_by_bin: List[int]
    series_fired: Dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    n_series: int = 0
    n_cells: int = 0

    def sprt_agreement(self) -> Optional[float]:
        if "sprt" not in self.series_fired or "sprt_exact" not in self.series_fired:
            return None
        a, b = self.series_fired["sprt"], self.series_fired["sprt_exact"]
        return float(np.mean(a == b)) if a.size else None

    def to_dict(self) -> dict:
        return {
            "protocol": ("cell level: one prediction per evaluated (series, day), baselines per snapshot, "
                         "SPRT as absorbing fired-by-day flag; series level: one prediction per series, "
                         "labeled on the final snapshot"),
            "label_source": self.label_source,
            "alphas": dict(self.alphas),
            "n_series": self.n_series,
            "n_cells": self.n_cells,
            "cell_level": {d: self.cell_scores[d].to_dict() for d in self.detectors},
            "series_level": {d: self.series_scores[d].to_dict() for d in self.detectors},
            "sprt_agreement": self.sprt_agreement(),
            "recall_by_size": {
                "bin_edges": list(self.bin_edges),
                "positives": list(self.positives_by_bin),
                "recall": {d: [NA if r is None else r for r in self.recall_by_bin[d]] for d in self.detectors},
            },
        }


def evaluate_srm_detectors(series_set: Sequence[SrmSeries], detectors: Iterable[str] = SRM_DETECTORS,
                           alphas: Optional[Mapping[str, float]] = None, beta: float = 0.0,
                           delta: Optional[float] = None, label_source: str = "rule",
                           n_bins: int = 4, min_total: int = DEFAULT_MIN_TOTAL,
                           split: Optional[ExpectedSplit] = None) -> SrmEvaluation:
    """Score SRM detectors on labeled series.

    ``label_source="rule"`` labels with the 1% rule on cumulative counts,
    ``"truth"`` with the simulator's injected-shift flag.
    """
    detectors = list(detectors)
    if label_source not in ("rule", "truth"):
        raise ValueError("label_source must be 'rule' or 'truth'")
    merged = dict(SRM_DEFAULT_ALPHAS)
    merged.update(alphas or {})
    alphas = {d: merged[d] for d in detectors}

    cell_pred = {d: [] for d in detectors}
    cell_lab: List[bool] = []
    series_pred = {d: [] for d in detectors}
    series_lab: List[bool] = []
    sizes: List[int] = []
    for s in series_set:
        sp = split or ExpectedSplit(s.spec.p0, 1.0 - s.spec.p0)
        x_t = np.array([snap.x_t for snap in s.snapshots], dtype=float)
        x_c = np.array([snap.x_c for snap in s.snapshots], dtype=float)
        n = x_t + x_c
        if label_source == "truth":
            day_labels = [s.truth] * len(s.snapshots)
        else:
            day_labels = [srm_label_rule(snap, sp) for snap in s.snapshots]
        usable = np.array([lab is not None for lab in day_labels]) & (n > 0) & (n >= min_total)
        traces = {d: series_detector_trace(x_t, x_c, sp, d, alphas[d], beta, delta, min_total)
                  for d in detectors}
        for i in np.flatnonzero(usable):
            cell_lab.append(bool(day_labels[i]))
            for d in detectors:
                cell_pred[d].append(bool(traces[d][1][i]))
        final_label = day_labels[-1] if s.snapshots else None
        if final_label is None or not usable.any():
            continue
        series_lab.append(bool(final_label))
        sizes.append(int(n[-1]))
        for d in detectors:
            series_pred[d].append(bool(traces[d][1].any()))

    cell_scores, series_scores, fired = {}, {}, {}
    for d in detectors:
        cm, m = score(cell_pred[d], cell_lab)
        cell_scores[d] = MethodScore(d, cm, m, np.asarray(cell_pred[d], dtype=bool))
        cm, m = score(series_pred[d], series_lab)
        fired[d] = np.asarray(series_pred[d], dtype=bool)
        series_scores[d] = MethodScore(d, cm, m, fired[d])

    labels = np.asarray(series_lab, dtype=bool)
    sizes_arr = np.asarray(sizes, dtype=float)
    recall_by_bin = {d: [] for d in detectors}
    positives = []
    edges = size_bin_edges(sizes_arr, n_bins) if sizes else np.zeros(0)
    if sizes:
        bin_idx = np.clip(np.searchsorted(edges, sizes_arr, side="right") - 1, 0, n_bins - 1)
        for b in range(n_bins):
            mask = (bin_idx == b) & labels
            positives.append(int(mask.sum()))
            for d in detectors:
                recall_by_bin[d].append(float(fired[d][mask].mean()) if mask.any() else None)
    return SrmEvaluation(detectors, alphas, label_source, cell_scores, series_scores,
                         [float(e) for e in edges], recall_by_bin, positives, fired,
                         n_series=len(series_lab), n_cells=len(cell_lab))


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    line = lambda r: "  ".join(str(c).rjust(w) if i else str(c).ljust(w) for i, (c, w) in enumerate(zip(r, widths)))
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), sep, *(line(r) for r in rows)])


def _label(name: str) -> str:
    if name.startswith("psi_k") and name != "psi_k":
        return f"PSI_{name[5:]} test"
    return _METHOD_LABELS.get(name, name)


def _confusion_rows(scores: Mapping[str, MethodScore], with_fpr: bool = True):
    names = list(scores)
    rows = [
        ["True label 0 -> 0/1"] + [f"{scores[m].confusion.tn}/{scores[m].confusion.fp}" for m in names],
        ["True label 1 -> 0/1"] + [f"{scores[m].confusion.fn}/{scores[m].confusion.tp}" for m in names],
    ]
    if with_fpr:
        rows.append(["FPR"] + [fmt_metric(scores[m].metrics.fpr) for m in names])
    rows += [
        ["Precision"] + [fmt_metric(scores[m].metrics.precision) for m in names],
        ["Recall"] + [fmt_metric(scores[m].metrics.recall) for m in names],
        ["F-score"] + [fmt_metric(scores[m].metrics.f_score) for m in names],
    ]
    return ["", *(_label(m) for m in names)], rows


def render_validator_table(scores: Mapping[str, MethodScore]) -> str:
    if not scores:
        return "(empty dataset)"
    header, rows = _confusion_rows(scores)
    return _table(header, rows)


def render_k_sweep(sweep: Mapping[int, MethodScore]) -> str:
    ks = sorted(sweep)
    header = ["PSI_k test", *(f"k={k}" for k in ks)]
    rows = [
        ["False Positive Rate", *(fmt_metric(sweep[k].metrics.fpr) for k in ks)],
        ["Precision", *(fmt_metric(sweep[k].metrics.precision) for k in ks)],
        ["Recall", *(fmt_metric(sweep[k].metrics.recall) for k in ks)],
    ]
    return _table(header, rows)


def render_noise_sweep(results: Mapping[float, Mapping[str, MethodScore]], metric: str = "recall") -> str:
    lams = sorted(results)
    if not lams:
        return "(empty sweep)"
    methods = list(results[lams[0]])
    header = ["noise", *(_label(m) for m in methods)]
    rows = []
    for lam in lams:
        noise = 0.05 + 0.01 * lam
        rows.append([f"{noise:.2f}% (lambda={lam:g})",
                     *(fmt_metric(getattr(results[lam][m].metrics, metric)) for m in methods)])
    return _table(header, rows)


def render_srm_table(ev: SrmEvaluation, level: str = "cell") -> str:
    scores = ev.cell_scores if level == "cell" else ev.series_scores
    header, rows = _confusion_rows({d: scores[d] for d in ev.detectors}, with_fpr=False)
    header = ["", *(f"{_label(d)} (alpha={100 * ev.alphas[d]:g}%)" for d in ev.detectors)]
    return _table(header, rows)


def recall_bins_csv(ev: SrmEvaluation) -> str:
    """Plot-ready CSV: one row per size bin, one recall column per detector."""
    lines = ["bin,size_low,size_high,positives," + ",".join(f"recall_{d}" for d in ev.detectors)]
    for b, pos in enumerate(ev.positives_by_bin):
        vals = [ev.recall_by_bin[d][b] for d in ev.detectors]
        lines.append(",".join([str(b), f"{ev.bin_edges[b]:.0f}", f"{ev.bin_edges[b + 1]:.0f}", str(pos),
                               *(NA if v is None else f"{v:.6f}" for v in vals)]))
    return "\n".join(lines) + "\n"


def metadata(**extra) -> dict:
    return {"rng": RNG_ALGORITHM, **extra}
