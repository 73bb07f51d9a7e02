import numpy as np
import pytest
from sklearn.base import clone

from lightray.checks import reference_scalar_field
from lightray.estimators import GeodesicRayInverter, LightRayInverter
from lightray.exceptions import ConfigurationError
from lightray.fields import ScalarFieldM, SpaceTimeGrid
from lightray.inversion import TimeBasis, smooth_window
from lightray.manifold import MetricField, boundary_ray_grid, trace_geodesics
from lightray.transforms import light_sinogram, ray_transform


def test_params_and_clone():
    est = LightRayInverter(T=9.0, K=1)
    assert est.get_params()["T"] == 9.0
    c = clone(est)
    assert c.get_params() == est.get_params() and c is not est
    assert clone(GeodesicRayInverter(n=16)).n == 16


def test_unfitted():
    with pytest.raises(ConfigurationError):
        GeodesicRayInverter().predict()


def test_short_window():
    with pytest.raises(ConfigurationError):
        LightRayInverter(T=3.0).fit(None)


def test_geodesic_inverter_fit_score():
    m = MetricField.euclidean()
    geos = trace_geodesics(m, boundary_ray_grid(24, 24, m), 0.01)
    sino = ray_transform(lambda p: np.exp(-4 * np.sum(p ** 2, axis=1)), geos)
    est = GeodesicRayInverter(n=24, iters=300).fit(sino)
    assert isinstance(est.image_, ScalarFieldM)
    assert est.score(sino) > -0.05


def test_light_inverter_fit_score():
    m = MetricField.euclidean()
    est = LightRayInverter(n_t=24, n_x=24, iters=300)
    geos = trace_geodesics(m, boundary_ray_grid(24, 24, m), 0.01)
    grid = SpaceTimeGrid(8.0, 24, 24)
    basis = TimeBasis(grid.t, 2, window=smooth_window(2.0, 6.0), center=4.0, half_width=2.0)
    f = reference_scalar_field(grid, basis)
    L = light_sinogram(f, geos)
    est.fit(L)
    assert est.field_.values.shape == grid.shape
    # coarse grid: residual is dominated by discretization of the forward map
    assert est.score(L) > -0.1
