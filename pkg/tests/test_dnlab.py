import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lightray import dnlab
from lightray.checks import poly_bump, wave_base_A, wave_base_q, wave_test_data
from lightray.exceptions import ConfigurationError


def pulse(t):
    return poly_bump((t - 0.7) / 0.5)


def dalembert_error(n, cfl):
    g = dnlab.WaveGrid1D(n, 2.0, cfl)
    f = g.boundary_data(lambda t, x: pulse(t - x))
    u = dnlab.solve_forward(None, None, f, g)
    tt, xx = np.meshgrid(g.t, g.x, indexing="ij")
    return np.max(np.abs(u - pulse(tt - xx)))


def test_dalembert_exact_at_unit_cfl():
    assert dalembert_error(128, 1.0) < 1e-12


def test_dalembert_order():
    e = [dalembert_error(n, 0.5) for n in (64, 128, 256)]
    orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    assert np.all(np.abs(orders - 2) < 0.3)


def test_zero_data_zero_solution():
    g = dnlab.WaveGrid1D(64, 2.0)
    u = dnlab.solve_forward(wave_base_A, wave_base_q, np.zeros((2, g.n_t + 1)), g)
    assert np.all(u == 0)


def test_energy_conserved():
    g = dnlab.WaveGrid1D(128, 3.0, 0.8)
    f = g.boundary_data(lambda t, x: pulse(t) * (1 - x))
    u = dnlab.solve_forward(None, None, f, g)
    # once the boundary data are off the leapfrog energy is constant
    k = np.searchsorted(g.t, 1.3)
    e = dnlab.energy(u, g)[k:]
    assert np.ptp(e) < 1e-12 * e.max()


def test_cfl_above_one_rejected():
    with pytest.raises(ConfigurationError):
        dnlab.WaveGrid1D(64, 1.0, 1.2)


def test_data_must_vanish_at_ends():
    g = dnlab.WaveGrid1D(32, 2.0)
    bad = np.ones((2, g.n_t + 1))
    with pytest.raises(ConfigurationError):
        dnlab.solve_forward(None, None, bad, g)
    with pytest.raises(ConfigurationError):
        dnlab.solve_adjoint(None, None, bad, g)
    with pytest.raises(ConfigurationError):
        dnlab.solve_forward(None, None, np.zeros((3, g.n_t + 1)), g)


@pytest.mark.parametrize("stencil", [3, 5])
def test_adjoint_pairing(stencil):
    # <Lambda f, h> = <f, Lambda* h> up to discretization
    gaps = []
    for n in (128, 256):
        g = dnlab.WaveGrid1D(n, 3.0)
        f, h = wave_test_data(g)
        lhs = dnlab.dn_map(wave_base_A, wave_base_q, f, g, stencil=stencil).pair(h)
        rhs = dnlab.adjoint_dn_map(wave_base_A, wave_base_q, h, g, stencil=stencil).pair(f)
        gaps.append(abs(lhs - rhs) / abs(lhs))
    assert gaps[1] < 1e-2 and gaps[1] < gaps[0] / 2.5


def test_identity_trivial():
    g = dnlab.WaveGrid1D(64, 3.0)
    f1, f2 = wave_test_data(g)
    res = dnlab.integral_identity_check(wave_base_A, wave_base_q, wave_base_A, wave_base_q,
                                        f1, f2, g)
    assert abs(res.lhs) == 0 and abs(res.rhs) == 0


def test_gauge_zero_potential():
    g = dnlab.WaveGrid1D(64, 3.0)
    f1, _ = wave_test_data(g)
    res = dnlab.gauge_invariance_check(wave_base_A, wave_base_q, lambda t, p: 0 * t, f1, g)
    assert res.gap == 0 and res.probe_error == 0


@settings(max_examples=10)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_forward_linear(alpha, beta):
    g = dnlab.WaveGrid1D(32, 3.0)
    f1, _ = wave_test_data(g)
    f2 = g.boundary_data(lambda t, x: poly_bump((t - 0.6) / 0.4) * x)
    u = dnlab.solve_forward(wave_base_A, wave_base_q, alpha * f1 + beta * f2, g)
    v1 = dnlab.solve_forward(wave_base_A, wave_base_q, f1, g)
    v2 = dnlab.solve_forward(wave_base_A, wave_base_q, f2, g)
    np.testing.assert_allclose(u, alpha * v1 + beta * v2, atol=1e-11)


def test_reduction_zero_perturbation():
    g = dnlab.WaveGrid1D(128, 3.0)
    tab = dnlab.reduction_experiment(lambda t, p: np.zeros((len(t), 2)), rho_list=(8,), grid=g,
                                     richardson=False)
    assert abs(tab.rows[0].value) == 0 and abs(tab.rows[0].target) == 0
    assert abs(tab.oracle) == 0 and abs(tab.extrapolated) < 1e-12


def test_reduction_tube_hits_slab():
    g = dnlab.WaveGrid1D(64, 3.0)
    with pytest.raises(ConfigurationError):
        dnlab.reduction_experiment(lambda t, p: np.zeros((len(t), 2)), s0=0.2, grid=g)
    with pytest.raises(ConfigurationError):
        dnlab.potential_reduction_experiment(lambda t, p: 0 * t, s0=2.0, grid=g)
