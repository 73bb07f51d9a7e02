import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from lightray.exceptions import ConfigurationError
from lightray.fields import SpaceTimeGrid, SpaceTimeOneForm, SpaceTimeScalar
from lightray.geooptics import (EuclideanChart, MinkowskiChart1D, NumericChart, build_amplitudes,
                                build_chart, chi, eikonal_residual, find_tube_radius, go_probe,
                                mollifier_kernel, mollify, transport_residual)
from lightray.manifold import MetricField

Y = np.array([np.cos(2.5), np.sin(2.5)])
V = -Y + np.array([0.2, -0.1])


@pytest.fixture(scope="module")
def numeric_chart():
    return NumericChart(MetricField.gaussian_bump(0.3, 0.4), Y, V, 1.0)


def smooth_A(t, p):
    return np.stack([0.3 * np.cos(t + p[:, 0]), 0.2 * np.sin(t - 2 * p[:, 0])], axis=1)


def smooth_q(t, p):
    return 0.5 * p[:, 0] * np.cos(t)


# -- cutoff and mollifier ------------------------------------------------------------

def test_chi_plateau_and_support():
    u = np.linspace(-1, 1, 2001)
    c = chi(u)
    assert np.all(c[np.abs(u) <= 0.25] == 1)
    assert np.all(c[np.abs(u) >= 0.5] == 0)


@given(st.floats(0.2, 0.55))
def test_chi_c2(u):
    h = 1e-4
    d2 = (chi(np.array([u + h])) - 2 * chi(np.array([u])) + chi(np.array([u - h]))) / h ** 2
    # finite second difference stays bounded across the joins
    assert abs(d2[0]) < 100


def test_kernel_unit_mass():
    ker, cell = mollifier_kernel(64.0, [0.01, 0.01])
    assert abs(ker.sum() * cell - 1) < 1e-12


def test_mollify_constant_interior():
    grid = SpaceTimeGrid(1.0, 257, 257, dim=1)
    f = SpaceTimeScalar.from_function(grid, lambda t, p: np.full(len(t), 3.0))
    assert abs(mollify(f, 256).values[128, 128] - 3.0) < 1e-12


def test_mollify_too_wide():
    grid = SpaceTimeGrid(0.5, 5, 9, dim=1)
    f = SpaceTimeScalar.from_function(grid, lambda t, p: t)
    with pytest.raises(ConfigurationError):
        mollify(f, 1.0)
    with pytest.raises(ValueError):
        mollifier_kernel(0.5, [0.1, 0.1])


def test_mollify_oneform_components():
    grid = SpaceTimeGrid(1.0, 129, 129, dim=1)
    A = SpaceTimeOneForm.from_function(grid, lambda t, p: np.stack([t, 2 * t], 1))
    Ar = mollify(A, 4096)
    np.testing.assert_allclose(Ar.components[1], 2 * Ar.components[0], rtol=1e-12, atol=1e-14)


# -- charts ------------------------------------------------------------------------

def test_diameter_chord_chart():
    ch = EuclideanChart(np.array([1.0, 0.0]), np.array([-1.0, 0.0]), 1.0)
    z = ch.beta_z(np.linspace(0.05, 2.2, 50))
    t, x = ch.from_z(z)
    assert np.all(ch.to_z(t, x)[:, 1:] == 0) or np.max(np.abs(ch.to_z(t, x)[:, 1:])) < 1e-15


def test_exact_eikonal():
    ch = EuclideanChart(Y, V, 1.0)
    z = ch.beta_z(np.linspace(0.1, 2.3, 30))
    z[:, 1:] += 0.05
    assert np.max(np.abs(np.linalg.inv(ch.metric_z_exact(z))[:, 1, 1])) <= 1e-12
    assert np.max(np.abs(eikonal_residual(MinkowskiChart1D(0.5), np.random.rand(20, 2)))) == 0


def test_numeric_chart(numeric_chart):
    z = numeric_chart.beta_z(np.linspace(0.1, 2.2, 20))
    z[:, 1] += 0.03
    z[:, 2] -= 0.02
    assert np.max(np.abs(eikonal_residual(numeric_chart, z))) <= 1e-6
    g = numeric_chart.metric_z(z)
    assert np.max(np.abs(g[:, 0, 0])) < 1e-6 and np.max(np.abs(g[:, 1, 1])) < 1e-6
    t, x = numeric_chart.from_z(z)
    np.testing.assert_allclose(numeric_chart.to_z(t, x), z, atol=1e-10)


def test_numeric_matches_closed_form():
    m = MetricField.euclidean()
    num = build_chart(m, Y, V, 1.0, numeric=True)
    ex = build_chart(m, Y, V, 1.0)
    assert isinstance(ex, EuclideanChart)
    t = np.array([1.5, 2.0])
    x = np.array([[-0.3, 0.2], [0.0, 0.1]])
    np.testing.assert_allclose(num.to_z(t, x), ex.to_z(t, x), atol=1e-10)


def test_tube_radius():
    ch = EuclideanChart(Y, V, 1.0)
    d = find_tube_radius(ch, 4.0, (0.1, 2.4))
    assert 0 < d <= 0.5


# -- amplitudes --------------------------------------------------------------------

def test_amplitude_without_oneform():
    ch = MinkowskiChart1D(0.8)
    z0 = np.linspace(-0.5, 3.0, 101)
    zp = np.linspace(-0.2, 0.2, 41)
    amps = build_amplitudes(ch, None, None, 16, 0.3, z0, [zp])
    np.testing.assert_allclose(amps.c1, np.broadcast_to(chi(zp / 0.3), amps.c1.shape), atol=1e-15)
    assert np.all(amps.c1 == amps.c2)


def test_amplitude_exponent_quadrature():
    ch = MinkowskiChart1D(0.8)
    z0 = np.linspace(0.0, 3.0, 3001)
    amps = build_amplitudes(ch, smooth_A, smooth_A, 16, 0.3, z0, [np.array([0.0])])
    j = np.argmin(np.abs(z0 - 2.2))

    def a0(w):
        tt, xx = ch.from_z(np.array([[w, 0.0]]))
        b, a = smooth_A(tt, xx)[0]
        return (b + a) / np.sqrt(2)

    ref = 0.5 * quad(a0, z0[0], z0[j])[0]
    got = np.log(amps.c1[j, 0]) - np.log(amps.c1[0, 0])
    assert abs(got - ref) < 1e-6


def test_transport_exact_linear():
    # (A)_0 linear in z0: trapezoid cumulative sums and central differences are exact
    ch = MinkowskiChart1D(0.8)
    A = lambda t, p: np.stack([0.2 * t, 0 * t], axis=1)
    amps = build_amplitudes(ch, A, A, 16, 0.3, np.linspace(-0.5, 3.0, 71),
                            [np.linspace(-0.2, 0.2, 9)])
    for w in (1, 2):
        assert np.max(np.abs(transport_residual(amps, w))) <= 1e-8
    amps0 = build_amplitudes(ch, None, None, 16, 0.3, np.linspace(0, 1, 11), [np.zeros(1)])
    assert np.max(np.abs(transport_residual(amps0, 1))) < 1e-14


def test_transport_order(numeric_chart):
    A = lambda t, p: np.stack([0.3 * np.exp(-(t - 2) ** 2 - np.sum(p ** 2, 1)),
                               0.2 * p[:, 0], 0.1 * np.sin(p[:, 1])], 1)
    zp = np.linspace(-0.05, 0.05, 5)
    lo, hi = numeric_chart.beta_z(0.1)[0, 0], numeric_chart.beta_z(2.4)[0, 0]
    r = [np.max(np.abs(transport_residual(
        build_amplitudes(numeric_chart, A, A, 16, 0.1, np.linspace(lo, hi, n), [zp, zp]), 1)))
        for n in (41, 81)]
    assert abs(np.log2(r[0] / r[1]) - 2) < 0.3


# -- probes ------------------------------------------------------------------------

def _probe_residual(n, which):
    ch = MinkowskiChart1D(0.8)
    grid = SpaceTimeGrid(3.0, n, (n - 1) // 3 + 1, dim=1)
    amps = build_amplitudes(ch, smooth_A, smooth_A, 16, 0.3, np.linspace(-1, 4, 4001),
                            [np.linspace(-0.2, 0.2, 81)])
    P, S = go_probe(ch, amps, 16, grid, A=smooth_A, q=smooth_q, which=which)
    u = P.values
    tt, xx = grid.mesh()
    b, a, q = 0.3 * np.cos(tt + xx), 0.2 * np.sin(tt - 2 * xx), 0.5 * xx * np.cos(tt)
    I = (slice(1, -1), slice(1, -1))
    dt, dx = grid.dt, grid.dx
    utt = (u[2:, 1:-1] - 2 * u[I] + u[:-2, 1:-1]) / dt ** 2
    uxx = (u[1:-1, 2:] - 2 * u[I] + u[1:-1, :-2]) / dx ** 2
    ut = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * dt)
    ux = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * dx)
    if which == 1:
        R = utt - uxx - b[I] * ut + a[I] * ux + q[I] * u[I]
    else:
        div = (0.3 * np.sin(tt + xx) - 0.4 * np.cos(tt - 2 * xx))[I]
        R = utt - uxx + b[I] * ut - a[I] * ux + (q[I] - div) * u[I]
    return np.max(np.abs(R + S.values[I])) / np.max(np.abs(S.values[I]))


@pytest.mark.parametrize("which", [1, 2])
def test_probe_source_matches_full_operator(which):
    # the wave operator applied to the whole probe by finite differences equals -source
    e = [_probe_residual(n, which) for n in (401, 801)]
    assert e[1] < 0.1 and e[1] < e[0] / 2.5


def test_flat_probe_source():
    ch = MinkowskiChart1D(0.8)
    grid = SpaceTimeGrid(3.0, 601, 201, dim=1)
    amps = build_amplitudes(ch, None, None, 32, 0.3, np.linspace(-0.5, 4, 2000),
                            [np.linspace(-0.2, 0.2, 81)])
    P, S = go_probe(ch, amps, 32, grid)
    tt, xx = grid.mesh()
    z1 = (xx - tt + 0.8) / np.sqrt(2)
    np.testing.assert_allclose(P.values, np.exp(32j * z1) * chi(z1 / 0.3), atol=1e-12)
    assert np.max(np.abs(S.values)) < 1e-8
    # principal vanishes outside the tube
    assert np.all(P.values[np.abs(z1) >= 0.15] == 0)
