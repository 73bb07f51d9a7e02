import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lightray.manifold import MetricField, boundary_ray_grid, trace_geodesics

settings.register_profile("lightray", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lightray")


@pytest.fixture(scope="session")
def euclid():
    return MetricField.euclidean()


@pytest.fixture(scope="session")
def bump_metric():
    return MetricField.gaussian_bump(0.3, 0.4)


@pytest.fixture(scope="session")
def euclid_geos(euclid):
    return trace_geodesics(euclid, boundary_ray_grid(16, 16, euclid), step=0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
