"""Daily SRM monitoring: a 2% share drift starting on day 10, watched by SPRT and a per-day t-test.

    python3 demos/srm_monitoring.py
"""
from abguard.srm_sequential import (
    ExpectedSplit,
    MonitorState,
    SprtConfig,
    SrmSnapshot,
    monitor_series,
    sprt_step,
    t_test_detector,
)
from abguard.traffic_sim import SrmSeriesSpec, generate_srm_series

split = ExpectedSplit(1, 1)
for shift in (0.0, 0.02):
    series = generate_srm_series(SrmSeriesSpec(days=29, daily_volume=2e4, injected_shift=shift,
                                               shift_start_day=10, rng_seed=11))
    report = monitor_series(series.snapshots, split, SprtConfig(alpha=0.05))
    t_days = [s.day for s in series.snapshots if t_test_detector(s, split, 0.01)]
    print(f"shift={shift:+.2f}: SPRT fired={report.fired} day={report.first_alert_day} "
          f"direction={report.direction}; t-test flagged days {t_days or 'none'}")
    for d in report.decisions[::7]:
        print(f"    day {d.day:2d} t_a={d.t_a:8.2f} t_b={d.t_b:8.2f} {d.outcome}")

# desk example: 2108 vs 3183 on a 50/50 split
for variant in ("gaussian", "exact"):
    state, decision = sprt_step(MonitorState(), SrmSnapshot(1, 2108, 3183), split, SprtConfig(variant=variant))
    print(f"desk {variant}: t_b={decision.t_b:.2f} -> {decision.outcome}")
