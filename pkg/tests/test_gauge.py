import numpy as np
import pytest

from lightray.checks import BumpPotential, base_oneform, rotational_oneform, smooth_bump
from lightray.fields import SpaceTimeGrid, SpaceTimeOneForm, SpaceTimeScalar
from lightray.gauge import (check_gauge_equivalence, exterior_derivative, extract_potential,
                            gauge_transform)
from lightray.inversion import relative_error
from lightray.manifold import MetricField


@pytest.fixture(scope="module")
def grid():
    return SpaceTimeGrid(6.0, 48, 48)


def bump2(p):
    return (np.clip(1 - np.sum(p ** 2, axis=1) / 0.5, 0, None)) ** 4


def bump2_grad(p):
    u = np.clip(1 - np.sum(p ** 2, axis=1) / 0.5, 0, None)
    return (4 * u ** 3 * (-2 / 0.5))[:, None] * p


def test_exterior_derivative_t_bump(grid):
    psi = SpaceTimeScalar.from_function(grid, lambda t, p: t * bump2(p))
    d = exterior_derivative(psi)
    t, p = grid.mesh()[0].ravel(), np.stack([m.ravel() for m in grid.mesh()[1:]], 1)
    exact = np.concatenate([bump2(p)[:, None], t[:, None] * bump2_grad(p)], axis=1)
    got = d.components.reshape(3, -1).T
    assert np.max(np.abs(got - exact)) < 0.05 * np.max(np.abs(exact))
    # analytic callback route
    np.testing.assert_allclose(d.func(t[:50], p[:50]), exact[:50], atol=1e-6)


def test_exterior_derivative_constant(grid):
    d = exterior_derivative(SpaceTimeScalar(grid, np.full(grid.shape, 2.5)))
    assert np.max(np.abs(d.components)) < 1e-12


def test_gauge_transform_identity(grid):
    A = SpaceTimeOneForm.from_function(grid, base_oneform)
    q = SpaceTimeScalar.from_function(grid, lambda t, p: np.sin(t) * p[:, 0])
    zero = SpaceTimeScalar.from_function(grid, lambda t, p: 0 * t)
    A2, q2 = gauge_transform(A, q, zero)
    assert np.all(A2.components == A.components) and np.all(q2.values == q.values)


def test_gauge_potential_formula():
    # q_tilde = q + box psi / 2 - A(grad psi) / 2 - <grad psi, grad psi> / 4 at one point
    grid = SpaceTimeGrid(2.0, 401, 201, dim=1)
    A = SpaceTimeOneForm.from_function(grid, lambda t, p: np.stack([0.3 + 0 * t, 0.2 * p[:, 0]], 1))
    q = SpaceTimeScalar.from_function(grid, lambda t, p: 0 * t)
    psi = SpaceTimeScalar.from_function(grid, lambda t, p: np.sin(t) * p[:, 0] ** 2)
    _, q2 = gauge_transform(A, q, psi)
    t, x = 1.0, 0.5
    pt, px = np.cos(t) * x ** 2, 2 * np.sin(t) * x
    ptt, pxx = -np.sin(t) * x ** 2, 2 * np.sin(t)
    box = -ptt + pxx
    a_grad = -0.3 * pt + 0.2 * x * px
    grad_sq = -pt ** 2 + px ** 2
    ref = 0.5 * box - 0.5 * a_grad - 0.25 * grad_sq
    i, j = 200, 100
    assert abs(q2.values[i, j] - ref) < 1e-4


def test_extract_zero(grid):
    pot = extract_potential(SpaceTimeOneForm.zeros(grid))
    assert np.all(pot.psi.values == 0) and pot.is_gradient


def test_extract_round_trip():
    grid = SpaceTimeGrid(6.0, 64, 64)
    psi0 = BumpPotential(1.0, 3.0, 0.9, (0.1, -0.2), 0.5)
    B = SpaceTimeOneForm.from_function(grid, psi0.gradient)
    pot = extract_potential(B)
    ps = SpaceTimeScalar.from_function(grid, psi0)
    assert relative_error(pot.psi.values, ps.values, ps.region_mask()) <= 0.02
    assert pot.is_gradient and pot.boundary_flag
    # d after extract reproduces the form
    d = exterior_derivative(pot.psi)
    assert (d - B).l2_norm() <= 0.1 * B.l2_norm()


def test_extract_converges():
    psi0 = BumpPotential(1.0, 3.0, 0.9, (0.0, 0.0), 0.5)
    errs = []
    for n in (32, 48, 64):
        grid = SpaceTimeGrid(6.0, n, n)
        pot = extract_potential(SpaceTimeOneForm.from_function(grid, psi0.gradient))
        ps = SpaceTimeScalar.from_function(grid, psi0)
        errs.append(relative_error(pot.psi.values, ps.values, ps.region_mask()))
    assert errs[0] > errs[1] > errs[2]


def test_extract_rotational(grid):
    B = SpaceTimeOneForm.from_function(grid, rotational_oneform)
    pot = extract_potential(B)
    assert not pot.is_gradient


def test_equivalence_same(grid):
    A = SpaceTimeOneForm.from_function(grid, base_oneform)
    ok, pot, res = check_gauge_equivalence(A, A)
    assert ok and res == 0 and np.all(pot.psi.values == 0)


def test_curved_metric_gauge_transform():
    m = MetricField.gaussian_bump(0.3, 0.4)
    grid = SpaceTimeGrid(4.0, 33, 33)
    A = SpaceTimeOneForm.zeros(grid)
    q = SpaceTimeScalar(grid, np.zeros(grid.shape))
    psi = SpaceTimeScalar.from_function(grid, lambda t, p: smooth_bump((t - 2) / 1.5) * bump2(p))
    _, q_flat = gauge_transform(A, q, psi)
    _, q_curved = gauge_transform(A, q, psi, metric=m)
    assert not np.allclose(q_flat.values, q_curved.values)
