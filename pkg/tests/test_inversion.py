import numpy as np
import pytest
from hypothesis import given, strategies as st

from lightray.checks import smooth_bump, spatial_bump
from lightray.exceptions import ConditioningError, MemoryCapError
from lightray.fields import ScalarFieldM, SpaceTimeGrid, SpaceTimeScalar
from lightray.inversion import (LightOperator, TimeBasis, aligned_offsets, assemble_from_geodesics,
                                assemble_ray_matrix, conjugate_residual,
                                invert_geodesic_transform, invert_light_transform_direct,
                                invert_light_transform_moments, relative_error, smooth_window)
from lightray.manifold import MetricField, boundary_ray_grid, trace_geodesics
from lightray.transforms import LightSinogram, Sinogram, light_sinogram


@pytest.fixture(scope="module")
def geos48():
    m = MetricField.euclidean()
    return trace_geodesics(m, boundary_ray_grid(48, 48, m), step=0.01)


def test_row_sums_are_chords(euclid_geos):
    op = assemble_from_geodesics(euclid_geos, 33)
    chords = np.array([g.exit_time for g in euclid_geos])
    np.testing.assert_allclose(np.asarray(op.matrix.sum(axis=1)).ravel(), chords, atol=1e-10)
    assert op.matrix.data.min() >= 0
    assert np.all(op.apply(np.zeros((33, 33))) == 0)


def test_assemble_ray_matrix():
    m = MetricField.euclidean()
    op = assemble_ray_matrix(m, boundary_ray_grid(4, 4), 17)
    assert op.shape == (16, 17 * 17)


def test_geodesic_round_trip(geos48):
    n = 48
    op = assemble_from_geodesics(geos48, n)
    f = ScalarFieldM.from_function(lambda p: spatial_bump(p, (0.1, -0.2), 0.6), n)
    sino = Sinogram(op.apply(f), [g.ray for g in geos48])
    rec, rep = invert_geodesic_transform(op, sino, iters=300)
    assert relative_error(rec.values, f.values, f.disc_mask()) <= 0.05
    assert np.all(np.diff(rep.residuals) <= 1e-12 * rep.residuals[0])


def test_zero_sinogram(euclid_geos):
    op = assemble_from_geodesics(euclid_geos, 17)
    rec, rep = invert_geodesic_transform(op, np.zeros(op.shape[0]), lam=1.0)
    assert np.all(rec.values == 0) and rep.converged


def test_tikhonov_limit(euclid_geos):
    op = assemble_from_geodesics(euclid_geos, 17)
    s = op.apply(np.ones((17, 17)))
    norms = [np.linalg.norm(invert_geodesic_transform(op, s, lam=lam, iters=400)[0].values)
             for lam in (1e-2, 1e0, 1e2, 1e4)]
    assert np.all(np.diff(norms) < 0) and norms[-1] < 1e-2 * norms[0]


@given(st.integers(5, 30), st.integers(0, 2 ** 16))
def test_conjugate_residual_monotone(n, seed):
    r = np.random.default_rng(seed)
    M = r.standard_normal((n, n))
    A = M @ M.T + n * np.eye(n)
    b = r.standard_normal(n)
    x, hist, conv = conjugate_residual(lambda v: A @ v, b, iters=4 * n, tol=1e-10)
    assert conv
    assert np.all(np.diff(hist) <= 1e-12 * hist[0])
    np.testing.assert_allclose(A @ x, b, atol=1e-8 * np.linalg.norm(b))


def test_time_basis_gram():
    t = np.linspace(0, 8, 65)
    b = TimeBasis(t, 4, window=smooth_window(2, 6), center=4, half_width=2)
    assert np.max(np.abs(b.gram() - np.eye(5))) <= 1e-8
    assert np.all(b.samples[:, (t <= 2) | (t >= 6)] == 0)


def _basis_setup(n=32, K=2):
    grid = SpaceTimeGrid(8.0, n, n)
    basis = TimeBasis(grid.t, K, window=smooth_window(2, 6), center=4, half_width=2)
    nodes = grid.spatial_nodes()
    return grid, basis, nodes


def test_moment_pipeline_order0(geos48):
    n = 32
    grid, basis, nodes = _basis_setup(n, 0)
    h = spatial_bump(nodes, (0.0, 0.1), 0.6).reshape(1, n, n)
    f = basis.synthesize(grid, h)
    op = assemble_from_geodesics(geos48, n)
    L = light_sinogram(f, geos48)
    rec, rep = invert_light_transform_moments(op, L, 0, basis, grid)
    assert relative_error(rec.values, f.values, f.region_mask()) <= 0.10
    assert len(rep.moment_reports) == 1


def test_moment_pipeline_zero(geos48):
    n = 16
    grid, basis, _ = _basis_setup(n)
    op = assemble_from_geodesics(geos48, n)
    L = LightSinogram(np.zeros((5, len(geos48))), np.linspace(-2, 8, 5), [g.ray for g in geos48])
    rec, _ = invert_light_transform_moments(op, L, 2, basis, grid)
    assert np.all(rec.values == 0)


def test_moment_condition_error(geos48):
    grid, _, _ = _basis_setup(16)
    basis = TimeBasis(grid.t, 6, window=smooth_window(2, 6), center=4, half_width=2)
    op = assemble_from_geodesics(geos48, 16)
    L = LightSinogram(np.zeros((3, len(geos48))), np.array([0.0, 1.0, 2.0]), [g.ray for g in geos48])
    with pytest.raises(ConditioningError):
        invert_light_transform_moments(op, L, 6, basis, grid, origin=0.0, max_condition=10.0)


def test_light_operator_adjoint(euclid_geos):
    grid = SpaceTimeGrid(8.0, 24, 16)
    s = np.arange(-8, 25) * grid.dt
    L = LightSinogram(np.zeros((len(s), len(euclid_geos))), s, [g.ray for g in euclid_geos])
    k0, ns = aligned_offsets(L, grid.dt)
    op = LightOperator(euclid_geos, grid, k0, ns, (6, 18))
    r = np.random.default_rng(0)
    X = r.standard_normal((13, 16 * 16))
    Z = r.standard_normal((ns, len(euclid_geos)))
    assert abs(np.vdot(op.forward(X), Z) - np.vdot(X, op.adjoint(Z))) < 1e-9 * np.abs(Z).sum()


def test_direct_memory_cap(euclid_geos):
    grid = SpaceTimeGrid(8.0, 24, 16)
    s = np.arange(-8, 25) * grid.dt
    L = LightSinogram(np.zeros((len(s), len(euclid_geos))), s, [g.ray for g in euclid_geos])
    with pytest.raises(MemoryCapError):
        invert_light_transform_direct(euclid_geos, grid, L, memory_cap=1000)
    rec, rep = invert_light_transform_direct(euclid_geos, grid, L, lam=1.0)
    assert np.all(rec.values == 0)


def test_direct_round_trip_small(geos48):
    n = 24
    grid = SpaceTimeGrid(8.0, n, n)
    f = SpaceTimeScalar.from_function(
        grid, lambda t, p: smooth_window(2, 6)(t) * spatial_bump(p, (0.1, 0.0), 0.7), keep_func=False)
    L = light_sinogram(f, geos48)
    w = (int(np.floor(2 / grid.dt)), int(np.ceil(6 / grid.dt)))
    rec, rep = invert_light_transform_direct(geos48, grid, L, window=w, iters=300)
    assert relative_error(rec.values, f.values, f.region_mask()) <= 0.10
