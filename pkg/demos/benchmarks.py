"""Rebuild the benchmark tables on simulated data: validator table, k-sweep, noise sweep, SRM suite.

    python3 demos/benchmarks.py          # about 10 s
"""
from abguard.eval_harness import (
    evaluate_srm_detectors,
    evaluate_validators,
    k_sweep,
    noise_sweep_eval,
    recall_bins_csv,
    render_k_sweep,
    render_noise_sweep,
    render_srm_table,
    render_validator_table,
)
from abguard.traffic_sim import BucketDatasetSpec, generate_bucket_dataset, generate_srm_suite

spec = BucketDatasetSpec(rng_seed=0)
dataset = generate_bucket_dataset(spec)
print("Validators, 500 negatives / 100 positives, lambda=4\n")
print(render_validator_table(evaluate_validators(dataset, k=1)))
print("\nPSI_k for k = 1..7\n")
print(render_k_sweep(k_sweep(dataset)))

sweep = noise_sweep_eval(range(11), spec, k=1)
print("\nNoise sweep, recall\n")
print(render_noise_sweep(sweep, "recall"))
print("\nNoise sweep, precision\n")
print(render_noise_sweep(sweep, "precision"))

ev = evaluate_srm_detectors(generate_srm_suite(500, rng_seed=0))
print("\nSRM detectors, cell level\n")
print(render_srm_table(ev, "cell"))
print(f"\ngaussian/exact SPRT agreement: {ev.sprt_agreement():.3f}")
print("\nrecall by final sample size\n")
print(recall_bins_csv(ev))
