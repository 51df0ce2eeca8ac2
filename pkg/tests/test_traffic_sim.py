import csv
import hashlib
from importlib import resources
import struct

import numpy as np
import pytest

from abguard.eval_harness import BENCHMARK_ALPHA
from abguard.rand_validate import BucketCounts, pearson_chi2_uniform_test, psi_k_uniform_test
from abguard.stat_core import chi_square_sf
from abguard.traffic_sim import (
    BucketDatasetSpec,
    ExperimentDef,
    Plane,
    SrmSeriesSpec,
    anomaly_probabilities,
    assign_bucket,
    assign_buckets,
    case_rng,
    generate_bucket_case,
    generate_bucket_dataset,
    generate_noise_sweep,
    generate_srm_series,
    generate_srm_suite,
    inject_ghost_leakage,
    simulate_plane_traffic,
)


N_IDS = 1_000_000


def oracle_bucket(user_id, seed, B):
    digest = hashlib.md5((user_id + ":" + seed).encode()).digest()
    (value,) = struct.unpack(">Q", digest[:8])
    return value % B


@pytest.fixture(scope="module")
def million_ids():
    return [f"user{i}" for i in range(N_IDS)]


class TestHashing:
    def test_golden_vectors(self):
        with resources.files("abguard").joinpath("data/hash_vectors.csv").open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 50
        for row in rows:
            assert assign_bucket(row["user_id"], row["seed"], 100) == int(row["bucket"])
            assert oracle_bucket(row["user_id"], row["seed"], 100) == int(row["bucket"])

    def test_deterministic(self):
        assert assign_bucket("alice", "plane-1") == assign_bucket("alice", "plane-1")
        assert list(assign_buckets(["a", "b"], "s", 7)) == [assign_bucket("a", "s", 7), assign_bucket("b", "s", 7)]

    @pytest.mark.parametrize("B", [2, 10, 100, 1000])
    def test_matches_oracle(self, B):
        for i in range(200):
            assert assign_bucket(f"u{i}", "seed-x", B) == oracle_bucket(f"u{i}", "seed-x", B)

    def test_errors(self):
        with pytest.raises(ValueError):
            assign_bucket("a", "s", 0)
        with pytest.raises(ValueError):
            assign_bucket("", "s", 10)

    def test_uniform_over_million_ids(self, million_ids):
        counts = np.bincount(assign_buckets(million_ids, "plane-1", 100), minlength=100)
        assert counts.sum() == N_IDS
        assert not pearson_chi2_uniform_test(counts, alpha=1e-6).alert

    def test_planes_independent(self, million_ids):
        a = assign_buckets(million_ids, "plane-1", 100)
        b = assign_buckets(million_ids, "plane-2", 100)
        table = np.zeros((100, 100))
        np.add.at(table, (a, b), 1)
        expected = np.outer(table.sum(1), table.sum(0)) / N_IDS
        stat = float(((table - expected) ** 2 / expected).sum())
        assert chi_square_sf(stat, 99 * 99) > 1e-6


class TestPlanes:
    def test_experiment_def(self):
        plane = Plane("ui-2021")
        exp = ExperimentDef(plane, range(10, 20), range(0, 10))
        b = plane.bucket_of("user1")
        assert exp.variant_of("user1") == ("test" if 10 <= b < 20 else "control" if b < 10 else None)
        with pytest.raises(ValueError):
            ExperimentDef(plane, {1, 2}, {2, 3})
        with pytest.raises(ValueError):
            ExperimentDef(plane, {100}, {1})

    def test_simulate_plane_traffic(self):
        exp = ExperimentDef(Plane("p"), range(0, 50), range(50, 100), trigger_rate=0.5)
        counts, t, c = simulate_plane_traffic(exp, [f"id{i}" for i in range(20_000)], rng_seed=1)
        assert counts.n == 20_000
        assert abs(t - 5000) < 400 and abs(c - 5000) < 400


class TestBucketCases:
    def test_negative_concentration(self):
        spec = BucketDatasetSpec()
        worst = 0.0
        for i in range(500):
            case = generate_bucket_case(False, spec, i)
            n = case.counts.n
            dev = np.max(np.abs(case.counts.counts - n / 100)) / (n / 100)
            worst = max(worst, dev / (5 * np.sqrt(100 / n)))
            assert not case.label
        assert worst < 1.0

    def test_probabilities_sum_to_one(self):
        spec = BucketDatasetSpec()
        for i in range(50):
            case = generate_bucket_case(True, spec, 500 + i)
            assert case.probabilities.sum() == pytest.approx(1.0, abs=1e-15)
            assert 1 <= len(case.anomalous_buckets) <= 5
            assert case.label

    def test_lambda_zero_injects_base(self):
        spec = BucketDatasetSpec(noise_lambda=0.0)
        for i in range(20):
            case = generate_bucket_case(True, spec, i)
            for b in case.anomalous_buckets:
                assert case.probabilities[b] == pytest.approx(0.01 + 0.0005, abs=1e-15)

    def test_mean_noise_lambda_four(self):
        spec = BucketDatasetSpec(noise_lambda=4.0)
        extras = []
        for i in range(2000):
            case = generate_bucket_case(True, spec, i)
            extras += [case.probabilities[b] - 0.01 for b in case.anomalous_buckets]
        assert np.mean(extras) == pytest.approx(0.0009, abs=2e-5)

    def test_anomaly_mass_overflow(self):
        with pytest.raises(ValueError):
            anomaly_probabilities(4, [0, 1], [0.3, 0.3])

    def test_order_independent(self):
        spec = BucketDatasetSpec()
        a = generate_bucket_case(True, spec, 42)
        _ = generate_bucket_case(True, spec, 7)
        b = generate_bucket_case(True, spec, 42)
        assert a.counts == b.counts

    def test_invariants(self):
        for case in generate_bucket_dataset(BucketDatasetSpec(negatives=5, positives=5, mean_total=1e4)):
            assert case.counts.counts.min() >= 0
            assert case.counts.n == case.counts.counts.sum()


class TestDatasets:
    def test_shape(self, dataset3):
        assert len(dataset3) == 600
        assert sum(c.label for c in dataset3) == 100
        assert all(not c.label for c in dataset3[:500])
        assert all(c.counts.B == 100 for c in dataset3)

    def test_no_positives(self):
        ds = generate_bucket_dataset(BucketDatasetSpec(negatives=10, positives=0, mean_total=1e4))
        assert len(ds) == 10 and not any(c.label for c in ds)

    def test_byte_identical(self):
        spec = BucketDatasetSpec(negatives=20, positives=20)
        a = generate_bucket_dataset(spec)
        b = generate_bucket_dataset(spec)
        assert b"".join(c.counts.counts.tobytes() for c in a) == b"".join(c.counts.counts.tobytes() for c in b)

    def test_seed_matters(self):
        a = generate_bucket_case(False, BucketDatasetSpec(rng_seed=0), 0)
        b = generate_bucket_case(False, BucketDatasetSpec(rng_seed=1), 0)
        assert a.counts != b.counts

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            BucketDatasetSpec(max_anomalous_buckets=101)


class TestNoiseSweep:
    def test_eleven_datasets(self):
        base = BucketDatasetSpec(negatives=5, positives=5, mean_total=1e4)
        sweep = generate_noise_sweep(range(11), base)
        assert sorted(sweep) == [float(x) for x in range(11)]

    def test_average_noise_at_ten(self):
        spec = BucketDatasetSpec(noise_lambda=10.0)
        extras = [case.probabilities[b] - 0.01
                  for case in (generate_bucket_case(True, spec, i) for i in range(2000))
                  for b in case.anomalous_buckets]
        assert np.mean(extras) == pytest.approx(0.0015, abs=3e-5)

    def test_only_positive_magnitudes_differ(self):
        base = BucketDatasetSpec(negatives=10, positives=10)
        sweep = generate_noise_sweep([0.0, 5.0], base)
        lo, hi = sweep[0.0], sweep[5.0]
        for a, b in zip(lo[:10], hi[:10]):
            assert a.counts == b.counts
        for a, b in zip(lo[10:], hi[10:]):
            assert a.anomalous_buckets == b.anomalous_buckets
            assert a.counts.n == b.counts.n


class TestSrmSeries:
    def test_null_truth(self):
        s = generate_srm_series(SrmSeriesSpec())
        assert s.truth is False and len(s.snapshots) == 29
        days = [x.day for x in s.snapshots]
        assert days == list(range(1, 30))
        assert all(b.x_t >= a.x_t and b.x_c >= a.x_c for a, b in zip(s.snapshots, s.snapshots[1:]))

    def test_empty_series(self):
        s = generate_srm_series(SrmSeriesSpec(days=1, daily_volume=0))
        assert [(x.x_t, x.x_c) for x in s.snapshots] == [(0, 0)]

    def test_shift_moves_share(self):
        s = generate_srm_series(SrmSeriesSpec(daily_volume=1e5, injected_shift=0.02, shift_start_day=15))
        first = s.snapshots[13]
        last = s.snapshots[-1]
        late_share = (last.x_t - first.x_t) / (last.n - first.n)
        assert first.p_hat == pytest.approx(0.5, abs=0.005)
        assert late_share == pytest.approx(0.52, abs=0.005)
        assert s.truth

    def test_invalid_share(self):
        with pytest.raises(ValueError):
            SrmSeriesSpec(p0=0.5, injected_shift=0.6)
        with pytest.raises(ValueError):
            SrmSeriesSpec(days=0)

    def test_suite_deterministic(self):
        a = generate_srm_suite(20, rng_seed=4)
        b = generate_srm_suite(20, rng_seed=4)
        assert [s.snapshots for s in a] == [s.snapshots for s in b]
        assert 0 < sum(s.truth for s in a) < 20


class TestGhostLeakage:
    def test_zero_is_identity(self):
        counts = BucketCounts([100] * 10)
        assert inject_ghost_leakage(counts, 0.0, case_rng(0, 3, 0), range(3)) == counts

    def test_bookkeeping(self):
        counts = BucketCounts([1234] * 100)
        out = inject_ghost_leakage(counts, 0.003, case_rng(0, 3, 0), range(20))
        assert out.n == counts.n + round(0.003 * counts.n)
        assert np.array_equal(out.counts[20:], counts.counts[20:])

    def test_errors(self):
        with pytest.raises(ValueError):
            inject_ghost_leakage([1, 2, 3], 0.1, case_rng(0, 3, 0), [])
        with pytest.raises(ValueError):
            inject_ghost_leakage([1, 2, 3], 1.0, case_rng(0, 3, 0), [0])

    def test_case_one_scenario_detected(self):
        # 0.3% leakage into the 20 assigned buckets of a 10%-10% design, n ~ 3e6
        hits = 0
        runs = 200
        for i in range(runs):
            rng = case_rng(17, 3, i)
            base = BucketCounts(rng.multinomial(3_000_000, np.full(100, 0.01)))
            leaked = inject_ghost_leakage(base, 0.003, rng, range(20))
            hits += psi_k_uniform_test(leaked, k=2, alpha=BENCHMARK_ALPHA).alert
        assert hits / runs >= 0.85

    def test_case_one_scenario_large_sample(self):
        rng = case_rng(17, 3, 0)
        base = BucketCounts(rng.multinomial(30_000_000, np.full(100, 0.01)))
        leaked = inject_ghost_leakage(base, 0.003, rng, range(20))
        assert psi_k_uniform_test(leaked, k=2).alert
