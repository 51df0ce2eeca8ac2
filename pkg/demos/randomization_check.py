"""Hash users into a plane, leak some ghost traffic, and see which validators notice.

    python3 demos/randomization_check.py
"""
import numpy as np

from abguard.rand_validate import (
    BucketCounts,
    ad_uniform_test,
    ks_uniform_test,
    pearson_chi2_uniform_test,
    psi_k_uniform_test,
)
from abguard.traffic_sim import ExperimentDef, Plane, case_rng, inject_ghost_leakage, simulate_plane_traffic

plane = Plane("checkout-2024")
exp = ExperimentDef(plane, test_buckets=range(0, 10), control_buckets=range(10, 20))
users = [f"user{i}" for i in range(200_000)]
counts, n_test, n_control = simulate_plane_traffic(exp, users, rng_seed=1)
print(f"{counts.n} triggered users, test={n_test} control={n_control}")

# 0.3% of extra traffic lands only in the assigned buckets
rng = case_rng(1, 3, 0)
base = BucketCounts(rng.multinomial(30_000_000, np.full(100, 0.01)))
leaked = inject_ghost_leakage(base, 0.003, rng, range(20))

for name, counts_ in (("clean", base), ("leaked", leaked)):
    print(f"\n{name}: n={counts_.n}")
    for label, result in (
        ("PSI_2", psi_k_uniform_test(counts_, k=2)),
        ("chi2", pearson_chi2_uniform_test(counts_)),
        ("KS", ks_uniform_test(counts_)),
        ("AD", ad_uniform_test(counts_)),
    ):
        print(f"  {label:6s} alert={str(result.alert):5s} statistic={result.statistic:.3g}")
