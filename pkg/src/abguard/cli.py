"""Command-line interface: ``abguard {validate,monitor,simulate,evaluate}``.

Exit codes: 0 no alert / success, 2 alert raised, 1 error.

Environment overrides for defaults (flags still win): ``ABGUARD_ALPHA`` and
``ABGUARD_K`` for ``validate``; ``ABGUARD_SRM_ALPHA`` and ``ABGUARD_DELTA``
for ``monitor``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from . import eval_harness as eh
from .rand_validate import DEFAULT_ALPHA, DEFAULT_K, BucketCounts, ValidationConfig, validate
from .srm_sequential import (
    ExpectedSplit,
    MonitorState,
    SprtConfig,
    SrmSnapshot,
    aggregate_series,
    monitor_series,
    sprt_step,
    MonitorReport,
)
from .traffic_sim import (
    RNG_ALGORITHM,
    BucketDatasetSpec,
    SrmSeries,
    SrmSeriesSpec,
    generate_bucket_dataset,
    generate_srm_suite,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ALERT = 2

ALL = "all"
STATE_VERSION = 1
_METHOD_ALIASES = {"psi": "psi_k", "chi2": "pearson_chi2", "ks": "ks", "ad": "ad"}


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""


# ---------------------------------------------------------------- parsing


def parse_bucket_csv(path, B: Optional[int] = None) -> BucketCounts:
    """Read a ``bucket,count`` CSV into :class:`BucketCounts`.

    Buckets absent from the file count as zero. Without an explicit ``B`` the
    cardinality is one more than the largest bucket index present.
    """
    counts: Dict[int, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["bucket", "count"]:
            raise ParseError(f"{path}:1: expected header 'bucket,count'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                b, c = int(row[0]), int(row[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer field in {row!r}") from None
            if b < 0:
                raise ParseError(f"{path}:{lineno}: negative bucket index {b}")
            if c < 0:
                raise ParseError(f"{path}:{lineno}: negative count {c}")
            if b in counts:
                raise ParseError(f"{path}:{lineno}: duplicate bucket {b}")
            if B is not None and b >= B:
                raise ParseError(f"{path}:{lineno}: bucket {b} outside [0, {B})")
            counts[b] = c
    if B is None:
        if not counts:
            raise ParseError(f"{path}: no bucket rows")
        B = max(counts) + 1
    arr = np.zeros(B, dtype=np.int64)
    for b, c in counts.items():
        arr[b] = c
    return BucketCounts(arr)


def write_bucket_csv(path, counts: BucketCounts) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("bucket,count\n")
        for b, c in enumerate(counts.counts):
            fh.write(f"{b},{int(c)}\n")


@dataclass
class ExperimentSeries:
    experiment_id: str
    split: ExpectedSplit
    segments: Dict[str, List[SrmSnapshot]] = field(default_factory=dict)
    aggregate: List[SrmSnapshot] = field(default_factory=list)

    @property
    def segmented(self) -> bool:
        return bool(self.segments)


def parse_snapshot_jsonl(path) -> Dict[str, ExperimentSeries]:
    """Read cumulative SRM snapshots, one JSON object per line.

    Required fields: ``experiment_id``, ``day``, ``x_t``, ``x_c``, ``r_t``,
    ``r_c``; optional ``segment``. Rows are grouped by experiment and segment
    and sorted by day. Segmented experiments also get a summed ``"all"`` series.
    """
    rows: Dict[str, Dict[Optional[str], list]] = {}
    splits: Dict[str, tuple] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ParseError(f"{path}:{lineno}: expected a JSON object")
            missing = [k for k in ("experiment_id", "day", "x_t", "x_c", "r_t", "r_c") if k not in obj]
            if missing:
                raise ParseError(f"{path}:{lineno}: missing field(s) {', '.join(missing)}")
            exp = obj["experiment_id"]
            if not isinstance(exp, str) or not exp:
                raise ParseError(f"{path}:{lineno}: experiment_id must be a non-empty string")
            for key in ("day", "x_t", "x_c"):
                v = obj[key]
                if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                    raise ParseError(f"{path}:{lineno}: {key} must be a non-negative integer")
            if obj["day"] < 1:
                raise ParseError(f"{path}:{lineno}: day must be positive")
            for key in ("r_t", "r_c"):
                v = obj[key]
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
                    raise ParseError(f"{path}:{lineno}: {key} must be a positive number")
            seg = obj.get("segment")
            if seg is not None and (not isinstance(seg, str) or not seg or seg == ALL):
                raise ParseError(f"{path}:{lineno}: segment must be a non-empty string other than {ALL!r}")
            split = (float(obj["r_t"]), float(obj["r_c"]))
            if splits.setdefault(exp, split) != split:
                raise ParseError(f"{path}:{lineno}: experiment {exp!r} changes its expected split")
            rows.setdefault(exp, {}).setdefault(seg, []).append((lineno, obj))

    out = {}
    for exp in sorted(rows):
        groups = rows[exp]
        if None in groups and len(groups) > 1:
            line = min(ln for key, g in groups.items() if key is not None for ln, _ in g)
            raise ParseError(f"{path}:{line}: experiment {exp!r} mixes segmented and unsegmented rows")
        series = ExperimentSeries(exp, ExpectedSplit(*splits[exp]))
        for seg, items in groups.items():
            items.sort(key=lambda item: item[1]["day"])
            snaps = []
            for (lineno, obj) in items:
                if snaps and obj["day"] == snaps[-1].day:
                    raise ParseError(f"{path}:{lineno}: experiment {exp!r} repeats day {obj['day']}")
                if snaps and (obj["x_t"] < snaps[-1].x_t or obj["x_c"] < snaps[-1].x_c):
                    raise ParseError(f"{path}:{lineno}: experiment {exp!r} cumulative counts decrease "
                                     f"at day {obj['day']}")
                snaps.append(SrmSnapshot(obj["day"], obj["x_t"], obj["x_c"]))
            if seg is None:
                series.aggregate = snaps
            else:
                series.segments[seg] = snaps
        if series.segments:
            series.aggregate = aggregate_series(series.segments)
        out[exp] = series
    return out


# ---------------------------------------------------------------- state


def load_state(path) -> Dict[str, Dict[str, MonitorState]]:
    """Load persisted monitor state; a missing file is an empty state."""
    p = Path(path)
    if not p.exists():
        return {}
    try:
        doc = json.loads(p.read_text())
        if doc.get("version") != STATE_VERSION or not isinstance(doc.get("experiments"), dict):
            raise ValueError("unsupported state document")
        return {exp: {key: MonitorState.from_dict(v) for key, v in entries.items()}
                for exp, entries in doc["experiments"].items()}
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"{path}: corrupt monitor state ({exc})") from None


def dump_state(state: Dict[str, Dict[str, MonitorState]]) -> str:
    doc = {"version": STATE_VERSION,
           "experiments": {exp: {key: st.to_dict() for key, st in sorted(entries.items())}
                           for exp, entries in sorted(state.items())}}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_state(path, state) -> None:
    atomic_write(path, dump_state(state))


# ---------------------------------------------------------------- helpers


def _env_float(name: str, default):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    if raw == "auto":
        return None
    return float(raw)


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    return default if raw in (None, "") else int(raw)


def _parse_int_list(text: str) -> List[int]:
    """``"1..7"`` or ``"1,2,5"`` to a list of ints."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def _parse_float_list(text: str) -> List[float]:
    text = text.strip()
    if ".." in text:
        return [float(v) for v in _parse_int_list(text)]
    return [float(t) for t in text.split(",") if t.strip()]


def _json_dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(doc, out: Optional[str]) -> None:
    text = _json_dump(doc)
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _err(msg: str) -> int:
    print(f"abguard: error: {msg}", file=sys.stderr)
    return EXIT_ERROR


# ---------------------------------------------------------------- validate


def cmd_validate(args) -> int:
    method = _METHOD_ALIASES[args.method]
    alpha = args.alpha if args.alpha is not None else _env_float("ABGUARD_ALPHA", DEFAULT_ALPHA)
    k = args.k if args.k is not None else _env_int("ABGUARD_K", DEFAULT_K)
    try:
        config = ValidationConfig(method=method, alpha=alpha, k=k, min_total=args.min_total,
                                  zero_policy=args.zero_policy)
        counts = parse_bucket_csv(args.path, args.buckets)
        result = validate(counts, config)
    except (OSError, ValueError) as exc:
        return _err(str(exc))
    report = {
        "command": "validate",
        "config": {"path": str(args.path), "method": method, "alpha": alpha, "k": k,
                   "min_total": config.resolved_min_total(counts.B), "zero_policy": args.zero_policy,
                   "buckets": counts.B},
        "result": result.to_dict(),
    }
    if result.alert:
        dev = result.per_bucket_deviation
        order = np.argsort(-np.abs(dev), kind="stable")[:10]
        report["top_deviations"] = [{"bucket": int(b), "deviation": float(dev[b])} for b in order]
    _emit(report, args.out)
    return EXIT_ALERT if result.alert else EXIT_OK


# ---------------------------------------------------------------- monitor


def resume_series(snapshots: Sequence[SrmSnapshot], split: ExpectedSplit, config: SprtConfig,
                  prior: Optional[MonitorState]) -> MonitorReport:
    """Monitor a full series while honouring a previously persisted alert.

    Statistics depend only on cumulative counts, so re-evaluating days already
    seen gives the same answers; the persisted alert still wins so that a
    fired experiment keeps its original first alert day.
    """
    if prior is None or not prior.fired:
        report = monitor_series(snapshots, split, config)
    else:
        report = monitor_series([], split, config)
        state = MonitorState()
        for snap in snapshots:
            if not state.fired and snap.day >= prior.first_alert_day:
                state = MonitorState(True, prior.first_alert_day, prior.direction, state.last_day)
            state, decision = sprt_step(state, snap, split, config)
            report.decisions.append(decision)
        if snapshots:
            report.final_x_t, report.final_x_c = snapshots[-1].x_t, snapshots[-1].x_c
        report.fired, report.first_alert_day, report.direction = True, prior.first_alert_day, prior.direction
    return report


def _merged_state(report: MonitorReport, prior: Optional[MonitorState]) -> MonitorState:
    days = [d.day for d in report.decisions]
    if prior is not None and prior.last_day is not None:
        days.append(prior.last_day)
    return MonitorState(report.fired, report.first_alert_day, report.direction, max(days) if days else None)


def cmd_monitor(args) -> int:
    alpha = args.alpha if args.alpha is not None else _env_float("ABGUARD_SRM_ALPHA", 0.05)
    if args.delta is None:
        delta = _env_float("ABGUARD_DELTA", None)
    else:
        delta = None if args.delta == "auto" else float(args.delta)
    try:
        config = SprtConfig(delta=delta, alpha=alpha, beta=args.beta, variant=args.variant,
                            min_total=args.min_total)
        state = load_state(args.state) if args.state else {}
        experiments = parse_snapshot_jsonl(args.path)
    except (OSError, ValueError) as exc:
        return _err(str(exc))

    any_fired = False
    out_exps = {}
    new_state = {exp: dict(entries) for exp, entries in state.items()}
    try:
        for exp, series in experiments.items():
            prior = state.get(exp, {})
            keys = [ALL]
            if args.by_segment:
                keys += sorted(series.segments)
            reports = {}
            for key in keys:
                snaps = series.aggregate if key == ALL else series.segments[key]
                rep = resume_series(snaps, series.split, config, prior.get(key))
                reports[key] = rep
                new_state.setdefault(exp, {})[key] = _merged_state(rep, prior.get(key))
                any_fired |= rep.fired
            entry = {"split": {"r_t": series.split.r_t, "r_c": series.split.r_c, "p0": series.split.p0},
                     "aggregate": reports[ALL].to_dict()}
            if args.by_segment and series.segmented:
                entry["segments"] = {k: reports[k].to_dict() for k in keys if k != ALL}
                entry["divergent_segments"] = [k for k in keys if k != ALL
                                               and reports[k].fired != reports[ALL].fired]
            out_exps[exp] = entry
    except ValueError as exc:
        return _err(str(exc))

    report = {
        "command": "monitor",
        "config": {"path": str(args.path), "variant": args.variant, "alpha": alpha, "beta": args.beta,
                   "delta": "auto" if delta is None else delta, "min_total": args.min_total,
                   "by_segment": bool(args.by_segment)},
        "experiments": out_exps,
        "fired": sorted(exp for exp, e in out_exps.items()
                        if e["aggregate"]["fired"] or any(s["fired"] for s in e.get("segments", {}).values())),
    }
    try:
        if args.state:
            save_state(args.state, new_state)
        _emit(report, args.out)
    except OSError as exc:
        return _err(str(exc))
    return EXIT_ALERT if any_fired else EXIT_OK


# ---------------------------------------------------------------- simulate


def _write_bucket_dataset(out: Path, spec: BucketDatasetSpec) -> dict:
    cases_dir = out / "cases"
    cases_dir.mkdir(parents=True, exist_ok=True)
    dataset = generate_bucket_dataset(spec)
    lines = ["case_id,file,label"]
    files = []
    for case in dataset:
        name = f"cases/case_{case.case_index:04d}.csv"
        write_bucket_csv(out / name, case.counts)
        lines.append(f"{case.case_index},{name},{int(case.label)}")
        files.append(name)
    (out / "labels.csv").write_text("\n".join(lines) + "\n")
    manifest = {"kind": "buckets", "spec": spec.to_dict(), "rng": RNG_ALGORITHM,
                "labels": "labels.csv", "n_cases": len(dataset), "files": files,
                "generator": f"abguard {__version__}"}
    (out / "manifest.json").write_text(_json_dump(manifest))
    return manifest


def cmd_simulate(args) -> int:
    out = Path(args.out)
    try:
        if args.kind in ("buckets", "noise-sweep"):
            base = BucketDatasetSpec(negatives=args.negatives, positives=args.positives, B=args.buckets,
                                     mean_total=args.mean_total, noise_lambda=args.lam,
                                     max_anomalous_buckets=args.max_anomalous, rng_seed=args.seed)
            if args.kind == "buckets":
                _write_bucket_dataset(out, base)
            else:
                lambdas = _parse_float_list(args.lambdas)
                subsets = []
                for lam in lambdas:
                    sub = f"lambda_{lam:g}"
                    spec = BucketDatasetSpec(**{**base.to_dict(), "noise_lambda": lam})
                    _write_bucket_dataset(out / sub, spec)
                    subsets.append({"noise_lambda": lam, "manifest": f"{sub}/manifest.json"})
                manifest = {"kind": "noise-sweep", "base_spec": base.to_dict(), "rng": RNG_ALGORITHM,
                            "datasets": subsets, "generator": f"abguard {__version__}"}
                (out / "manifest.json").write_text(_json_dump(manifest))
        else:
            suite = generate_srm_suite(count=args.count, rng_seed=args.seed, days=args.days, p0=args.p0,
                                       volume_range=(args.volume_min, args.volume_max),
                                       shifts=_parse_float_list(args.shifts), null_fraction=args.null_fraction)
            out.mkdir(parents=True, exist_ok=True)
            lines, labels = [], ["experiment_id,truth"]
            for s in suite:
                exp = f"exp_{s.spec.series_index:04d}"
                for snap in s.snapshots:
                    lines.append(json.dumps({"experiment_id": exp, "day": snap.day, "x_t": snap.x_t,
                                             "x_c": snap.x_c, "r_t": s.spec.p0, "r_c": 1.0 - s.spec.p0},
                                            sort_keys=True))
                labels.append(f"{exp},{int(s.truth)}")
            (out / "snapshots.jsonl").write_text("\n".join(lines) + "\n")
            (out / "labels.csv").write_text("\n".join(labels) + "\n")
            manifest = {"kind": "srm-series", "rng": RNG_ALGORITHM, "snapshots": "snapshots.jsonl",
                        "labels": "labels.csv", "seed": args.seed,
                        "series": {f"exp_{s.spec.series_index:04d}": s.spec.to_dict() for s in suite},
                        "generator": f"abguard {__version__}"}
            (out / "manifest.json").write_text(_json_dump(manifest))
    except (OSError, ValueError) as exc:
        return _err(str(exc))
    return EXIT_OK


# ---------------------------------------------------------------- evaluate


class ManifestError(ValueError):
    pass


def load_bucket_manifest(path) -> list:
    """Rebuild labeled bucket cases from a ``buckets`` manifest."""
    from .traffic_sim import BucketCase

    path = Path(path)
    manifest = json.loads(path.read_text())
    if manifest.get("kind") != "buckets":
        raise ManifestError(f"{path}: not a buckets manifest")
    root = path.parent
    B = manifest["spec"]["B"]
    with open(root / manifest["labels"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != manifest["n_cases"] or len(rows) != len(manifest["files"]):
        raise ManifestError(f"{path}: manifest lists {manifest['n_cases']} cases, labels file has {len(rows)}")
    cases = []
    for row, name in zip(rows, manifest["files"]):
        if row["file"] != name:
            raise ManifestError(f"{path}: labels file and manifest disagree on {name}")
        f = root / name
        if not f.exists():
            raise ManifestError(f"{path}: missing case file {name}")
        counts = parse_bucket_csv(f, B)
        cases.append(BucketCase(counts, row["label"] == "1", int(row["case_id"]), np.full(B, 1.0 / B)))
    return cases


def load_srm_manifest(path) -> List[SrmSeries]:
    path = Path(path)
    manifest = json.loads(path.read_text())
    if manifest.get("kind") != "srm-series":
        raise ManifestError(f"{path}: not an srm-series manifest")
    experiments = parse_snapshot_jsonl(path.parent / manifest["snapshots"])
    specs = manifest["series"]
    if set(specs) != set(experiments):
        raise ManifestError(f"{path}: manifest and snapshot file list different experiments")
    out = []
    for exp in sorted(specs):
        spec = SrmSeriesSpec(**specs[exp])
        out.append(SrmSeries(spec, tuple(experiments[exp].aggregate), spec.injected_shift != 0))
    return out


def _bucket_report(cases, args) -> tuple:
    methods = [_METHOD_ALIASES[m] for m in args.methods.split(",")]
    scores = eh.evaluate_validators(cases, methods, args.alpha, args.k)
    doc = {"validators": {name: s.to_dict() for name, s in scores.items()}}
    text = [eh.render_validator_table(scores)]
    if args.k_sweep:
        sweep = eh.k_sweep(cases, _parse_int_list(args.k_sweep), args.alpha)
        doc["k_sweep"] = {str(k): s.to_dict() for k, s in sweep.items()}
        doc["k_sweep_nested"] = eh.alert_sets_nested(sweep)
        text.append(eh.render_k_sweep(sweep))
    return doc, text


def cmd_evaluate(args) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text())
        kind = manifest.get("kind")
        config = {"manifest": str(path), "kind": kind}
        if kind == "buckets":
            cases = load_bucket_manifest(path)
            config.update(methods=args.methods, alpha=args.alpha, k=args.k, k_sweep=args.k_sweep)
            doc, text = _bucket_report(cases, args)
        elif kind == "noise-sweep":
            config.update(methods=args.methods, alpha=args.alpha, k=args.k)
            results = {}
            doc = {"noise_sweep": {}}
            for entry in manifest["datasets"]:
                cases = load_bucket_manifest(path.parent / entry["manifest"])
                methods = [_METHOD_ALIASES[m] for m in args.methods.split(",")]
                scores = eh.evaluate_validators(cases, methods, args.alpha, args.k)
                results[float(entry["noise_lambda"])] = scores
                doc["noise_sweep"][f"{entry['noise_lambda']:g}"] = {n: s.to_dict() for n, s in scores.items()}
            text = ["Recall", eh.render_noise_sweep(results, "recall"),
                    "Precision", eh.render_noise_sweep(results, "precision")]
        elif kind == "srm-series":
            series = load_srm_manifest(path)
            detectors = args.detectors.split(",")
            alphas = {d: (args.alpha_sprt if d.startswith("sprt") else args.alpha_baseline) for d in detectors}
            delta = None if args.delta in (None, "auto") else float(args.delta)
            config.update(detectors=detectors, alphas=alphas, beta=args.beta, delta=args.delta or "auto",
                          label_source=args.label_source, bins=args.bins)
            ev = eh.evaluate_srm_detectors(series, detectors, alphas, args.beta, delta,
                                           args.label_source, args.bins)
            doc = {"srm": ev.to_dict()}
            text = ["Cell level (series x day)", eh.render_srm_table(ev, "cell"),
                    "Series level", eh.render_srm_table(ev, "series"),
                    "Recall by final sample size", eh.recall_bins_csv(ev).rstrip()]
            if args.bins_csv:
                atomic_write(args.bins_csv, eh.recall_bins_csv(ev))
        else:
            raise ManifestError(f"{path}: unknown manifest kind {kind!r}")
    except (OSError, ValueError, KeyError, TypeError) as exc:
        return _err(str(exc))
    report = {"command": "evaluate", "config": config, "metadata": eh.metadata(), **doc}
    try:
        if args.out:
            atomic_write(args.out, _json_dump(report))
        else:
            sys.stdout.write(_json_dump(report))
        if args.out:
            print("\n\n".join(text))
    except OSError as exc:
        return _err(str(exc))
    return EXIT_OK


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    # usage errors must not collide with the alert exit code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="abguard", description="A/B test quality checks")
    parser.add_argument("--version", action="version", version=f"abguard {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="test bucket counts for uniform randomization")
    p.add_argument("path", help="CSV with header bucket,count")
    p.add_argument("--method", choices=sorted(_METHOD_ALIASES), default="psi")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--buckets", type=int, default=None, help="declared bucket cardinality B")
    p.add_argument("--min-total", type=int, default=None)
    p.add_argument("--zero-policy", choices=["infinite_statistic", "smoothing"], default="infinite_statistic")
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("monitor", help="sequential SRM monitoring of cumulative counts")
    p.add_argument("path", help="JSONL snapshots")
    p.add_argument("--variant", choices=["gaussian", "exact"], default="gaussian")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--delta", default=None, help="tolerance or 'auto'")
    p.add_argument("--min-total", type=int, default=100)
    p.add_argument("--state", default=None, help="JSON state file to resume from and update")
    p.add_argument("--by-segment", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("simulate", help="write simulated benchmark datasets")
    p.add_argument("--kind", choices=["buckets", "noise-sweep", "srm-series"], required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--negatives", type=int, default=500)
    p.add_argument("--positives", type=int, default=100)
    p.add_argument("--buckets", type=int, default=100)
    p.add_argument("--mean-total", type=float, default=3e6)
    p.add_argument("--lam", type=float, default=4.0)
    p.add_argument("--max-anomalous", type=int, default=5)
    p.add_argument("--lambdas", default="0..10")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--days", type=int, default=29)
    p.add_argument("--p0", type=float, default=0.5)
    p.add_argument("--volume-min", type=float, default=1e2)
    p.add_argument("--volume-max", type=float, default=1e5)
    p.add_argument("--shifts", default="0.0025,0.005,0.01,0.02")
    p.add_argument("--null-fraction", type=float, default=0.5)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="benchmark detectors on a simulated dataset")
    p.add_argument("manifest")
    p.add_argument("--methods", default="chi2,ad,ks,psi")
    p.add_argument("--alpha", type=float, default=eh.BENCHMARK_ALPHA)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--k-sweep", default=None, help="e.g. 1..7")
    p.add_argument("--detectors", default=",".join(eh.SRM_DETECTORS))
    p.add_argument("--alpha-baseline", type=float, default=0.01)
    p.add_argument("--alpha-sprt", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--delta", default=None)
    p.add_argument("--label-source", choices=["rule", "truth"], default="rule")
    p.add_argument("--bins", type=int, default=4)
    p.add_argument("--bins-csv", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        return _err(str(exc))


if __name__ == "__main__":
    sys.exit(main())
