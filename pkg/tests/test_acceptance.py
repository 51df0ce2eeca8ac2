"""Acceptance suite: one PASS/FAIL line per criterion, printed uncaptured.

Run ``pytest tests/test_acceptance.py -v`` to see the summary lines.
"""
import csv
import math
import re
import time
from importlib import resources
from pathlib import Path

import mpmath
import numpy as np

from abguard import cli
from abguard.eval_harness import (
    BENCHMARK_ALPHA,
    alert_sets_nested,
    evaluate_srm_detectors,
    evaluate_validators,
    k_sweep,
    noise_sweep_eval,
    series_detector_trace,
)
from abguard.rand_validate import BucketCounts, pearson_chi2_uniform_test, psi_statistic
from abguard.srm_sequential import (
    ExpectedSplit,
    MonitorState,
    SprtConfig,
    SrmSnapshot,
    exact_llr,
    gaussian_llr,
    monitor_series,
    sprt_exact_stats,
    sprt_step,
)
from abguard.stat_core import chi_square_cdf, chi_square_isf, chi_square_quantile, chi_square_sf
from abguard.traffic_sim import (
    BucketDatasetSpec,
    SrmSeriesSpec,
    assign_bucket,
    assign_buckets,
    generate_bucket_dataset,
    generate_srm_series,
)

EVEN = ExpectedSplit(1, 1)


def verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def pct(x):
    return f"{100 * x:.2f}%"


def test_criterion_1_dataset3(capsys):
    start = time.perf_counter()
    dataset3 = generate_bucket_dataset(BucketDatasetSpec(rng_seed=0))
    scores = evaluate_validators(dataset3, ["psi_k", "pearson_chi2"], alpha=BENCHMARK_ALPHA, k=1)
    elapsed = time.perf_counter() - start
    psi, chi = scores["psi_k1"].metrics, scores["pearson_chi2"].metrics
    ok = psi.fpr <= 0.006 and psi.recall >= 0.95 and 0.07 <= chi.fpr <= 0.14 and elapsed < 60
    verdict(capsys, 1, ok, f"PSI_1 FPR {pct(psi.fpr)} (<= 0.6%), recall {pct(psi.recall)} (>= 95%), "
                           f"chi2 FPR {pct(chi.fpr)} (in [7%, 14%]), generate+score {elapsed:.1f}s (< 60s), alpha={BENCHMARK_ALPHA}")


def test_criterion_2_noise_sweep(capsys):
    start = time.perf_counter()
    results = noise_sweep_eval(range(11), BucketDatasetSpec(rng_seed=0), ["psi_k", "ks", "ad"],
                               alpha=BENCHMARK_ALPHA, k=1)
    elapsed = time.perf_counter() - start
    precision = {lam: r["psi_k1"].metrics.precision for lam, r in results.items()}
    dominated = {lam: (r["psi_k1"].metrics.recall >= r["ks"].metrics.recall and
                       r["psi_k1"].metrics.recall >= r["ad"].metrics.recall)
                 for lam, r in results.items() if lam >= 4}
    worst = min(precision.values())
    ok = all(p is not None and p >= 0.98 for p in precision.values()) and all(dominated.values()) \
        and elapsed < 300
    verdict(capsys, 2, ok, f"min PSI_1 precision over lambda 0..10 {pct(worst)} (>= 98%), "
                           f"PSI recall >= KS and AD recall at lambda >= 4: {all(dominated.values())}, "
                           f"{elapsed:.1f}s (< 300s)")


def test_criterion_3_k_sweep(dataset3, capsys):
    sweep = k_sweep(dataset3, range(1, 8), alpha=BENCHMARK_ALPHA)
    nested = alert_sets_nested(sweep)
    fprs = [sweep[k].metrics.fpr for k in range(1, 8)]
    ok = nested and all(f <= 0.006 for f in fprs[:4])
    verdict(capsys, 3, ok, f"nested alert sets: {nested}; FPR k=1..7: {', '.join(pct(f) for f in fprs)} "
                           f"(<= 0.6% for k <= 4)")


def test_criterion_4_desk_example(capsys):
    mpmath.mp.dps = 50
    oracle = float(2108 * mpmath.log(mpmath.mpf("0.98")) + 3183 * mpmath.log(mpmath.mpf("1.02")))
    snap = SrmSnapshot(1, 2108, 3183)
    _, t_b = sprt_exact_stats(snap, EVEN, 0.01)
    fired = {}
    for variant in ("gaussian", "exact"):
        state, decision = sprt_step(MonitorState(), snap, EVEN, SprtConfig(delta=0.01, alpha=0.05, beta=0.0,
                                                                          variant=variant))
        fired[variant] = (state.fired, state.direction)
    ok = abs(t_b - oracle) <= 1e-9 and t_b > math.log(20) and all(v == (True, "low") for v in fired.values())
    verdict(capsys, 4, ok, f"exact t_b {t_b:.12f} vs oracle {oracle:.12f} (|diff| {abs(t_b - oracle):.1e} <= 1e-9), "
                           f"> ln 20 = {math.log(20):.6f}; gaussian {fired['gaussian']}, exact {fired['exact']}")


def test_criterion_5_sequential_type_one(capsys):
    start = time.perf_counter()
    sprt_fired = ttest_flagged = 0
    runs = 1000
    for i in range(runs):
        s = generate_srm_series(SrmSeriesSpec(days=29, daily_volume=1e5, p0=0.5, rng_seed=7, series_index=i))
        sprt_fired += monitor_series(s.snapshots, EVEN, SprtConfig(alpha=0.05, beta=0.0)).fired
        x_t = [x.x_t for x in s.snapshots]
        x_c = [x.x_c for x in s.snapshots]
        ttest_flagged += bool(series_detector_trace(x_t, x_c, EVEN, "t_test", 0.01)[1].any())
    elapsed = time.perf_counter() - start
    ok = sprt_fired / runs <= 0.07 and ttest_flagged >= 3 * sprt_fired and elapsed < 120
    verdict(capsys, 5, ok, f"SPRT fired on {sprt_fired}/{runs} null series (<= 7%); per-day t-test flagged "
                           f"{ttest_flagged} (>= 3x); {elapsed:.1f}s (< 120s)")


def test_criterion_6_variant_agreement(srm_suite, capsys):
    agree = sum(monitor_series(s.snapshots, EVEN, SprtConfig(variant="gaussian")).fired ==
                monitor_series(s.snapshots, EVEN, SprtConfig(variant="exact")).fired for s in srm_suite)
    rate = agree / len(srm_suite)
    verdict(capsys, 6, rate >= 0.99, f"gaussian/exact fired agreement {agree}/{len(srm_suite)} = {pct(rate)} (>= 99%)")


def _property_checks(tmp_path):
    rng = np.random.Generator(np.random.PCG64(20240601))
    results = {}

    ok = True
    for _ in range(500):
        B = int(rng.integers(2, 60))
        p, q = rng.integers(1, 10_000, size=B), rng.integers(1, 10_000, size=B)
        a, b = psi_statistic(p, q), psi_statistic(q, p)
        ok &= a >= 0 and math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-15)
    results["PSI >= 0 and symmetric"] = ok

    ok = True
    for _ in range(500):
        x_t, x_c = int(rng.integers(1, 10**7)), int(rng.integers(1, 10**7))
        p0 = float(rng.uniform(0.05, 0.95))
        delta = min(0.01, 0.05 * min(p0, 1 - p0))
        t_a, t_b = gaussian_llr(x_t, x_c, p0, delta)
        p_hat = x_t / (x_t + x_c)
        target = -delta**2 / (p_hat * (1 - p_hat) / (x_t + x_c))
        ok &= math.isclose(t_a + t_b, target, rel_tol=1e-9)
    results["gaussian identity (1e-9)"] = ok

    ok = True
    for _ in range(500):
        x_t, x_c, c = (int(v) for v in rng.integers(1, 10**6, size=3))
        t = exact_llr(x_t, x_c, 0.5, 0.01)
        s = exact_llr(c * x_t, c * x_c, 0.5, 0.01)
        ok &= all(math.isclose(s[i], c * t[i], rel_tol=1e-12, abs_tol=1e-9) for i in range(2))
    results["exact linearity"] = ok

    ok, via_sf = True, []
    for x in (0.1, 1.0, 10.0, 100.0):
        for df in (1, 5, 99):
            p = chi_square_cdf(x, df)
            if p < 1.0:
                ok &= math.isclose(chi_square_quantile(p, df), x, rel_tol=1e-9)
            else:
                via_sf.append((x, df))
                ok &= math.isclose(chi_square_isf(chi_square_sf(x, df), df), x, rel_tol=1e-9)
    results["chi2 quantile round-trip (1e-9)"] = ok

    with resources.files("abguard").joinpath("data/hash_vectors.csv").open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    results["hash golden vectors"] = len(rows) == 50 and all(
        assign_bucket(r["user_id"], r["seed"], 100) == int(r["bucket"]) for r in rows)

    counts = np.bincount(assign_buckets((f"user{i}" for i in range(1_000_000)), "plane-1", 100), minlength=100)
    results["hash uniformity (alpha 1e-6, 1e6 ids)"] = not pearson_chi2_uniform_test(counts, alpha=1e-6).alert

    rejected = 0
    files = sorted((Path(__file__).parent / "data" / "malformed").iterdir())
    for f in files:
        parser = cli.parse_bucket_csv if f.suffix == ".csv" else cli.parse_snapshot_jsonl
        try:
            parser(f)
        except cli.ParseError as exc:
            rejected += re.search(rf"{re.escape(f.name)}:\d+:", str(exc)) is not None
    results[f"parser corpus ({len(files)} files)"] = rejected == len(files)

    uniform = tmp_path / "u.csv"
    cli.write_bucket_csv(uniform, BucketCounts([30_000] * 100))
    snaps = tmp_path / "s.jsonl"
    snaps.write_text('{"experiment_id": "desk", "day": 1, "x_t": 2108, "x_c": 3183, "r_t": 1, "r_c": 1}\n')
    state = tmp_path / "state.json"
    codes = [cli.main(["validate", str(uniform), "--out", str(tmp_path / "v.json")]),
             cli.main(["validate", str(tmp_path / "missing.csv")]),
             cli.main(["monitor", str(snaps), "--state", str(state), "--out", str(tmp_path / "m1.json")])]
    first_state = state.read_bytes()
    codes.append(cli.main(["monitor", str(snaps), "--state", str(state), "--out", str(tmp_path / "m2.json")]))
    idempotent = (state.read_bytes() == first_state and
                  (tmp_path / "m1.json").read_bytes() == (tmp_path / "m2.json").read_bytes())
    results["CLI exit codes and idempotence"] = codes == [0, 1, 2, 2] and idempotent
    return results, via_sf


def test_criterion_7_property_suites(tmp_path, capsys):
    results, via_sf = _property_checks(tmp_path)
    failed = [name for name, ok in results.items() if not ok]
    note = ""
    if via_sf:
        note = (f"; grid points with cdf == 1.0 in float64 {via_sf} checked through isf(sf(x)) "
                f"because quantile(1.0) is undefined")
    verdict(capsys, 7, not failed, f"{len(results) - len(failed)}/{len(results)} property groups green"
                                   f"{' (failed: ' + ', '.join(failed) + ')' if failed else ''}{note}")


def test_criterion_8_recall_by_size(srm_suite, capsys):
    ev = evaluate_srm_detectors(srm_suite, ["sprt"], n_bins=4)
    recall = ev.recall_by_bin["sprt"]
    ok = recall[0] is not None and recall[-1] is not None and recall[-1] > recall[0]
    verdict(capsys, 8, ok, f"SPRT recall by final-size quartile: "
                           f"{', '.join('n/a' if r is None else pct(r) for r in recall)} (top > bottom)")
