from pathlib import Path

import pytest

from abguard.traffic_sim import BucketDatasetSpec, generate_bucket_dataset, generate_srm_suite

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def dataset3():
    """Seeded simulated analog: 500 negatives, 100 positives, B=100, n ~ Poisson(3e6), lambda=4."""
    return generate_bucket_dataset(BucketDatasetSpec(rng_seed=0))


@pytest.fixture(scope="session")
def srm_suite():
    return generate_srm_suite(count=500, rng_seed=0)
