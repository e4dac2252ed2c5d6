import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_lowrank(rng, m, n, r, scale=1.0):
    return scale * rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
