"""Randomization validation and sample-ratio-mismatch monitoring for A/B tests."""

__version__ = "0.1.0"

from .rand_validate import (  # noqa: E402
    BucketCounts,
    ValidationConfig,
    ValidationResult,
    ad_uniform_test,
    ks_uniform_test,
    pearson_chi2_uniform_test,
    psi_k_uniform_test,
    psi_statistic,
    psi_two_sample_test,
    validate,
)
from .srm_sequential import (  # noqa: E402
    ExpectedSplit,
    MonitorState,
    SprtConfig,
    SrmSnapshot,
    default_delta,
    monitor_series,
    segmented_monitor,
    sprt_step,
    wald_thresholds,
)
from .traffic_sim import assign_bucket  # noqa: E402
