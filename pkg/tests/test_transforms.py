import numpy as np
from hypothesis import given, strategies as st
from scipy.integrate import quad

from lightray.checks import BumpPotential, smooth_bump
from lightray.fields import ScalarFieldM, SpaceTimeGrid, SpaceTimeOneForm, SpaceTimeScalar
from lightray.manifold import BoundaryRay, MetricField, trace_geodesic
from lightray.transforms import (geodesic_transform, geodesic_transform_oneform, light_sinogram,
                                 light_transform_oneform, light_transform_scalar,
                                 ray_transform, remainder_transform)

EUC = MetricField.euclidean()


def chord(b_angle=0.4, alpha=0.3, step=0.01):
    return trace_geodesic(EUC, BoundaryRay.from_angles(b_angle, alpha), step=step)


def ones(p):
    return np.ones(len(p))


def test_chord_length():
    g = chord(alpha=np.arcsin(0.5))
    assert abs(geodesic_transform(ones, g) - np.sqrt(3)) < 1e-12


def test_zero_field():
    assert geodesic_transform(lambda p: np.zeros(len(p)), chord()) == 0


def test_disjoint_bump():
    g = chord(0.0, 0.0)  # along the x axis
    f = lambda p: smooth_bump(np.hypot(p[:, 0], p[:, 1] - 0.7) / 0.2)
    assert abs(geodesic_transform(f, g)) <= 1e-12


def test_oneform_dx1():
    g = chord(1.1, -0.6)
    val = geodesic_transform_oneform(lambda p: np.stack([ones(p), 0 * ones(p)], axis=1), g)
    assert abs(val - (g.x[-1, 0] - g.x[0, 0])) < 1e-12


def test_oneform_exact_vanishes():
    g = chord(0.2, 0.5, step=0.002)
    # psi = (1 - |x|^2)^2 vanishes on the boundary
    grad = lambda p: (-4 * (1 - np.sum(p ** 2, axis=1)))[:, None] * p
    assert abs(geodesic_transform_oneform(grad, g)) < 1e-5


def test_remainder_closed_forms():
    g = chord(alpha=0.2)
    ell = g.exit_time
    assert abs(remainder_transform(1, ones, g) - 1j * ell ** 2 / 2) < 1e-4
    assert abs(remainder_transform(2, ones, g) + ell ** 3 / 3) < 1e-4
    assert remainder_transform(3, lambda p: 0 * ones(p), g) == 0


def test_remainder_bound():
    g = chord(alpha=0.5)
    f = lambda p: np.sin(3 * p[:, 0]) * np.cos(2 * p[:, 1])
    base = geodesic_transform(lambda p: np.abs(f(p)), g)
    for j in range(1, 4):
        assert abs(remainder_transform(j, f, g)) <= 2.0 ** j * base + 1e-14


def test_light_scalar_time_profile():
    grid = SpaceTimeGrid(6.0, 601, 16)
    phi = lambda t: smooth_bump((t - 3.0) / 1.0)
    f = SpaceTimeScalar.from_function(grid, lambda t, p: phi(t))
    g = chord(0.3, 0.25, step=0.002)
    for s in (0.5, 1.7, 2.9):
        ref = quad(lambda r: phi(r + s), 0, g.exit_time, epsabs=1e-12)[0]
        assert abs(light_transform_scalar(f, s, g) - ref) < 1e-6


def test_light_dt_component():
    grid = SpaceTimeGrid(6.0, 31, 16)
    B = SpaceTimeOneForm.from_function(grid, lambda t, p: np.stack([ones(p), 0 * t, 0 * t], 1))
    g = chord()
    assert abs(light_transform_oneform(B, 2.0, g) - g.exit_time) < 1e-12


def test_light_static_oneform_reduces():
    grid = SpaceTimeGrid(6.0, 31, 16)
    a = lambda p: np.stack([p[:, 1], np.sin(p[:, 0])], axis=1)
    B = SpaceTimeOneForm.from_function(grid, lambda t, p: np.concatenate([0 * t[:, None], a(p)], 1))
    g = chord(0.9, -0.2)
    assert abs(light_transform_oneform(B, 2.0, g) - geodesic_transform_oneform(a, g)) < 1e-12


def test_light_annihilation(euclid_geos):
    grid = SpaceTimeGrid(8.0, 33, 33)
    psi = BumpPotential(1.0, 4.0, 1.2, (0.1, 0.2), 0.5)
    B = SpaceTimeOneForm.from_function(grid, psi.gradient)
    L = light_sinogram(B, euclid_geos[::5], s=np.linspace(-2, 8, 21), exact=True)
    assert np.max(np.abs(L.values)) < 1e-5


def test_localization_and_shift(euclid_geos):
    grid = SpaceTimeGrid(6.0, 61, 24)
    f = SpaceTimeScalar.from_function(
        grid, lambda t, p: smooth_bump((t - 3) / 0.7) * (1 + p[:, 0]), keep_func=False)
    lo, hi = f.time_support()
    geos = euclid_geos[::9]
    s = np.arange(-40, 61) * grid.dt
    L = light_sinogram(f, geos, s=s)
    out = (s < lo - 2.0) | (s > hi)
    assert np.all(L.values[out] == 0)
    # grid-aligned time shift by 5 steps
    shifted = f.with_values(np.roll(f.values, 5, axis=0))
    L2 = light_sinogram(shifted, geos, s=s)
    np.testing.assert_allclose(L2.values[5:], L.values[:-5], atol=1e-13)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(alpha, beta):
    n = 21
    ax = np.linspace(-1, 1, n)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    f = ScalarFieldM(np.cos(X) * Y)
    h = ScalarFieldM(X ** 2)
    g = chord(0.5, 0.1)
    lhs = geodesic_transform(f * alpha + h * beta, g)
    rhs = alpha * geodesic_transform(f, g) + beta * geodesic_transform(h, g)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(alpha) + abs(beta))


def test_ray_transform_sinogram(euclid_geos):
    sino = ray_transform(ones, euclid_geos)
    assert sino.values.shape == (len(euclid_geos),)
    assert np.all(np.isfinite(sino.values))
