import numpy as np
from hypothesis import given, strategies as st

from lightray.checks import smooth_bump
from lightray.fields import SpaceTimeGrid, SpaceTimeScalar
from lightray.slicing import (moment_slice, sinogram_moment, slice_gap, slice_identity_rhs,
                              time_fourier)
from lightray.transforms import light_sinogram


def spacetime(T=6.0, n_t=601, n_x=17, func=None):
    grid = SpaceTimeGrid(T, n_t, n_x)
    return SpaceTimeScalar.from_function(grid, func, keep_func=False)


def test_narrow_bump_fourier():
    t0, w = 2.5, 0.05
    f = spacetime(func=lambda t, p: smooth_bump((t - t0) / w) + 0 * p[:, 0])
    mass = np.trapezoid(smooth_bump((f.grid.t - t0) / w), f.grid.t)
    fh = time_fourier(f, 1.3).values / mass
    np.testing.assert_allclose(fh, np.exp(-1.3j * t0), atol=1e-3)


def test_fourier_cosine_period():
    T = 2 * np.pi
    f = spacetime(T=T, func=lambda t, p: np.cos(3 * t) * (1 + p[:, 0]))
    x = f.grid.axes[0]
    h = (1 + x)[:, None] * np.ones(len(x))[None]
    np.testing.assert_allclose(time_fourier(f, 3.0).values, T / 2 * h, atol=1e-4)


def test_moment_closed_forms():
    T = 3.0
    f = spacetime(T=T, func=lambda t, p: t * (1 + p[:, 1] ** 2))
    h = 1 + f.grid.axes[1][None, :] ** 2 + 0 * f.grid.axes[0][:, None]
    np.testing.assert_allclose(moment_slice(0, f).values, T ** 2 / 2 * h, rtol=1e-5)
    np.testing.assert_allclose(moment_slice(1, f).values, -1j * T ** 3 / 3 * h, rtol=1e-5)


def test_zero_moment_nonnegative():
    f = spacetime(func=lambda t, p: smooth_bump((t - 3) / 2) * (p[:, 0] ** 2))
    m = moment_slice(0, f).values
    assert np.isrealobj(m) and m.min() >= 0
    assert np.isrealobj(time_fourier(f, 0.0).values.real)


@given(st.floats(0.1, 4.0))
def test_conjugate_symmetry(tau):
    f = spacetime(n_t=101, n_x=9, func=lambda t, p: np.sin(t) * p[:, 0] + t)
    np.testing.assert_allclose(time_fourier(f, -tau).values, np.conj(time_fourier(f, tau).values),
                               atol=1e-12)


def test_moment_is_fourier_derivative():
    f = spacetime(n_t=201, n_x=9, func=lambda t, p: smooth_bump((t - 3) / 2) * (1 + p[:, 0]))
    errs = []
    for eps in (0.02, 0.01):
        d1 = (time_fourier(f, eps).values - time_fourier(f, -eps).values) / (2 * eps)
        errs.append(np.max(np.abs(d1 - moment_slice(1, f).values)))
    assert errs[1] < errs[0] / 3.5


def test_slice_identity_and_erratum(euclid_geos):
    grid = SpaceTimeGrid(6.0, 48, 32)
    f = SpaceTimeScalar.from_function(
        grid, lambda t, p: smooth_bump((t - 3) / 0.8) * smooth_bump(np.hypot(p[:, 0], p[:, 1]) / 0.6),
        keep_func=False)
    geos = euclid_geos[::3]
    L = light_sinogram(f, geos)
    assert slice_gap(0, f, L, geos) < 1e-12
    for k in (1, 2):
        assert slice_gap(k, f, L, geos) < 1e-10
        assert slice_gap(k, f, L, geos, printed_index=True) > 1e-2
    assert slice_identity_rhs(2, f.with_values(0 * f.values), geos[0]) == 0


def test_shift_invariance_of_zero_moment(euclid_geos):
    grid = SpaceTimeGrid(6.0, 60, 24)
    f = SpaceTimeScalar.from_function(
        grid, lambda t, p: smooth_bump((t - 3) / 0.8) * (1 + p[:, 0]), keep_func=False)
    g = f.with_values(np.roll(f.values, 4, axis=0))
    geos = euclid_geos[::11]
    s = np.arange(-30, 61) * grid.dt
    m0 = sinogram_moment(0, light_sinogram(f, geos, s=s))
    m1 = sinogram_moment(0, light_sinogram(g, geos, s=s))
    np.testing.assert_allclose(m0, m1, atol=1e-12)
