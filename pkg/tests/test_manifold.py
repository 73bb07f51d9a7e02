import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from lightray.exceptions import DomainError, TrappedRayError
from lightray.manifold import (BoundaryRay, MetricField, boundary_ray_grid, check_simplicity,
                               diameter_estimate, in_influence_set, longest_geodesic_through,
                               shoot, trace_geodesic, trace_geodesics)


def test_euclidean_christoffel_vanishes(euclid):
    assert np.all(euclid.christoffel([0.3, -0.2]) == 0)


def test_christoffel_exponential_factor():
    # closed form from sympy: g = exp(-2 x) delta
    x, y = sp.symbols("x y")
    c = sp.exp(x)
    g = sp.diag(c ** -2, c ** -2)
    ginv = g.inv()
    X = (x, y)
    gam = np.zeros((2, 2, 2))
    for k in range(2):
        for i in range(2):
            for j in range(2):
                e = sum(ginv[k, l] * (sp.diff(g[l, i], X[j]) + sp.diff(g[l, j], X[i])
                                      - sp.diff(g[i, j], X[l])) for l in range(2)) / 2
                gam[k, i, j] = float(sp.simplify(e).subs({x: 0, y: 0}))
    m = MetricField(lambda p: np.exp(p[:, 0]))
    np.testing.assert_allclose(m.christoffel([0.0, 0.0]), gam, atol=1e-8)


def test_metric_domain_error(euclid):
    with pytest.raises(DomainError):
        euclid.c([2.0, 0.0])


def test_diameter_chord(euclid):
    ray = BoundaryRay.from_angles(0.0, 0.0)
    assert abs(trace_geodesic(euclid, ray).exit_time - 2.0) < 1e-12


def test_impact_half_chord(euclid):
    ray = BoundaryRay.from_angles(0.7, np.arcsin(0.5))
    assert abs(trace_geodesic(euclid, ray).exit_time - 1.7320508075688772) < 1e-9


def test_straight_segments(euclid_geos):
    for g in euclid_geos[::7]:
        a, b = g.x[0], g.x[-1]
        d = b - a
        off = np.abs((g.x[:, 0] - a[0]) * d[1] - (g.x[:, 1] - a[1]) * d[0]) / np.linalg.norm(d)
        assert off.max() <= 1e-9


def test_unit_speed_and_endpoints(bump_metric):
    geos = trace_geodesics(bump_metric, boundary_ray_grid(8, 8, bump_metric), step=1e-3)
    for g in geos:
        assert np.max(np.abs(bump_metric.norm(g.x, g.v) - 1)) <= 1e-8
        assert abs(np.linalg.norm(g.x[0]) - 1) < 1e-12
        assert abs(np.linalg.norm(g.x[-1]) - 1) < 1e-9


def test_reversibility(bump_metric):
    ray = BoundaryRay.from_angles(1.0, 0.4, bump_metric)
    g = trace_geodesic(bump_metric, ray, step=1e-3)
    back = shoot(bump_metric, g.x[-1:], -g.v[-1:], 1e-3)[0]
    assert np.linalg.norm(back[1][-1] - g.x[0]) <= 1e-6


def test_exit_time_step_order(bump_metric):
    ray = BoundaryRay.from_angles(0.3, 0.5, bump_metric)
    t = [trace_geodesic(bump_metric, ray, step=h).exit_time for h in (0.04, 0.02, 0.01)]
    # Richardson oracle for a fourth order integrator
    assert abs(t[1] - t[2]) < abs(t[0] - t[1]) / 8


def test_longest_geodesic_euclid(euclid):
    assert abs(longest_geodesic_through(euclid, [0.0, 0.0], n_dirs=1) - 2.0) < 1e-9
    assert abs(longest_geodesic_through(euclid, [0.6, 0.0], n_dirs=1) - 2.0) < 1e-9


def test_longest_geodesic_monotone(bump_metric):
    x = [0.3, 0.2]
    d = [longest_geodesic_through(bump_metric, x, n_dirs=n) for n in (4, 8, 16, 32)]
    assert np.all(np.diff(d) >= 0)


def test_influence_set(euclid):
    assert in_influence_set(euclid, 3.0, [0.1, 0.1], 8.0)
    assert not in_influence_set(euclid, 1.5, [0.1, 0.1], 8.0)
    assert not in_influence_set(euclid, 6.5, [0.1, 0.1], 8.0)


def test_ray_grid_weights():
    rays = boundary_ray_grid(1, 1)
    assert len(rays) == 1 and rays[0].weight > 0
    w = sum(r.weight for r in boundary_ray_grid(64, 64))
    # 2 pi boundary length times integral of cos over (-pi/2, pi/2); midpoint error h^2/24
    assert abs(w - 4 * np.pi) < 4 * np.pi * (np.pi / 64) ** 2 / 20
    r1 = boundary_ray_grid(4, 8)[0]
    r2 = boundary_ray_grid(4, 16)[0]
    assert np.isclose(r2.weight / np.cos(r2.dir_angle), 0.5 * r1.weight / np.cos(r1.dir_angle))


def test_simplicity(euclid, bump_metric):
    assert check_simplicity(euclid, 8, 8).ok
    assert check_simplicity(bump_metric, 8, 8).ok
    assert diameter_estimate(euclid, 8, 9) < 2.0 + 1e-9


def test_trapped_ray():
    slow = MetricField(lambda p: 1.0 + 0 * p[:, 0])
    with pytest.raises(TrappedRayError):
        trace_geodesic(slow, BoundaryRay.from_angles(0.0, 0.0), max_length=1.0)


@given(st.floats(0, 2 * np.pi), st.floats(-1.5, 1.5))
def test_chord_property(base, alpha):
    m = MetricField.euclidean()
    g = trace_geodesic(m, BoundaryRay.from_angles(base, alpha), step=0.01)
    assert abs(g.exit_time - 2 * np.cos(alpha)) <= 1e-9
