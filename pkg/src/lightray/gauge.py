"""Exterior derivative, gauge transformations, and recovery of gauge potentials.

Lorentzian conventions: ``gbar = -dt**2 + c(x)**-2 dx**2`` with signature
``(-, +, ...)``.  For a function ``psi`` the gradient is
``grad psi = (-psi_t, c**2 grad_x psi)`` and for ``A = b dt + a dx``
the pairing ``A(grad psi) = -b psi_t + c**2 a . grad_x psi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline

from .fields import (SpaceTimeOneForm, SpaceTimeScalar, in_disc, multilinear_weights)

_FD_EPS = 1e-4


# -- finite differences ---------------------------------------------------------------

def first_derivative(values, h, axis):
    """Second-order central differences, one-sided second order at the ends."""
    return np.gradient(values, h, axis=axis, edge_order=2)


def second_derivative(values, h, axis):
    """Three-point second difference; four-point one-sided at the ends."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h ** 2
    if len(v) >= 4:
        out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h ** 2
        out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h ** 2
    else:
        out[0], out[-1] = out[1], out[-2]
    return np.moveaxis(out, 0, axis)


def _grid_steps(grid):
    return [grid.dt] + [a[1] - a[0] for a in grid.axes]


def _fd_gradient_func(func, dim, eps=_FD_EPS):
    """Space-time gradient of a callable ``func(t, points)`` by central differences."""

    def grad(t, p):
        t = np.asarray(t, dtype=float)
        p = np.atleast_2d(np.asarray(p, dtype=float))
        cols = [(func(t + eps, p) - func(t - eps, p)) / (2 * eps)]
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = eps
            cols.append((func(t, p + e) - func(t, p - e)) / (2 * eps))
        return np.stack(cols, axis=1)

    return grad


def _fd_second_func(func, dim, eps=_FD_EPS):
    """``(psi_tt, spatial Laplacian)`` of a callable by central differences."""

    def second(t, p):
        t = np.asarray(t, dtype=float)
        p = np.atleast_2d(np.asarray(p, dtype=float))
        f0 = func(t, p)
        ptt = (func(t + eps, p) - 2 * f0 + func(t - eps, p)) / eps ** 2
        lap = np.zeros_like(f0)
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = eps
            lap = lap + (func(t, p + e) - 2 * f0 + func(t, p - e)) / eps ** 2
        return ptt, lap

    return second


# -- exterior derivative and gauge transform ------------------------------------------

def exterior_derivative(psi, grad_func=None):
    """Space-time differential ``dpsi = psi_t dt + psi_i dx^i``.

    Grid values use second-order differences.  When ``psi`` carries an
    analytic callback, the result carries ``grad_func`` if given, otherwise
    a central-difference gradient of the callback.
    """
    grid = psi.grid
    steps = _grid_steps(grid)
    comps = np.stack([first_derivative(psi.values, steps[k], k) for k in range(grid.dim + 1)])
    func = grad_func
    if func is None and psi.func is not None:
        func = _fd_gradient_func(psi.func, grid.dim)
    return SpaceTimeOneForm(grid, comps, func, psi.disc, psi.time_order)


def _gauge_terms(b, a, q, psi_t, psi_x, psi_tt, lap_x, c2):
    """Return ``(q_tilde)`` from pointwise data; ``a`` and ``psi_x`` have a leading component axis."""
    box = -psi_tt + c2 * lap_x
    a_grad = -b * psi_t + c2 * np.sum(a * psi_x, axis=0)
    grad_sq = -psi_t ** 2 + c2 * np.sum(psi_x ** 2, axis=0)
    return q + 0.5 * box - 0.5 * a_grad - 0.25 * grad_sq


def gauge_transform(A, q, psi, metric=None):
    """Gauge transform ``(A + dpsi, q + psi_box/2 - A(grad psi)/2 - <grad psi, grad psi>/4)``.

    ``metric`` supplies ``c(x)`` on 2-D grids (Euclidean when omitted); in
    two space dimensions the Laplace-Beltrami operator is ``c**2`` times the
    Euclidean Laplacian.  When ``A``, ``q`` and ``psi`` all carry analytic
    callbacks, so do the results.
    """
    grid = psi.grid
    if not (grid.same_as(A.grid) and grid.same_as(q.grid)):
        raise ValueError("A, q and psi must share a grid")
    steps = _grid_steps(grid)
    dpsi = exterior_derivative(psi)
    psi_tt = second_derivative(psi.values, steps[0], 0)
    lap = sum(second_derivative(psi.values, steps[k], k) for k in range(1, grid.dim + 1))
    if grid.dim == 2 and metric is not None:
        c2 = (metric.c(grid.spatial_nodes()) ** 2).reshape(grid.shape[1:])[None]
    else:
        c2 = 1.0
    comps = dpsi.components
    q_new = _gauge_terms(A.components[0], A.components[1:], q.values,
                         comps[0], comps[1:], psi_tt, lap, c2)

    A_func = q_func = None
    if A.func is not None and q.func is not None and psi.func is not None:
        grad = _fd_gradient_func(psi.func, grid.dim)
        second = _fd_second_func(psi.func, grid.dim)

        def A_func(t, p):
            return A.func(t, p) + grad(t, p)

        def q_func(t, p):
            g = grad(t, p)
            ptt, lp = second(t, p)
            comp = A.func(t, p)
            cc = 1.0 if (grid.dim != 2 or metric is None) else metric.c(p) ** 2
            return _gauge_terms(comp[:, 0], comp[:, 1:].T, q.func(t, p),
                                g[:, 0], g[:, 1:].T, ptt, lp, cc)

    A_new = SpaceTimeOneForm(grid, A.components + comps, A_func, A.disc, A.time_order)
    q_new = SpaceTimeScalar(grid, q_new, q_func, q.disc, q.time_order)
    return A_new, q_new


# -- potential extraction ----------------------------------------------------------

@dataclass
class GaugePotential:
    """Potential ``psi`` with its boundary check and path-independence report."""

    psi: SpaceTimeScalar
    boundary_flag: bool
    boundary_max: float
    discrepancy: float
    tolerance: float

    @property
    def is_gradient(self):
        return self.discrepancy <= self.tolerance

    def report(self):
        return (f"discrepancy {self.discrepancy:.6e}\ntolerance {self.tolerance:.6e}\n"
                f"is_gradient {self.is_gradient}\nboundary_max {self.boundary_max:.6e}\n"
                f"boundary_flag {self.boundary_flag}\n")


def _cumulative_integral(values, t):
    """Running integral along axis 0 from ``t[0]`` (cubic spline antiderivative)."""
    return CubicSpline(t, values, axis=0).antiderivative()(t)


def _path_integral(grid, a_slices, nodes, n_quad, route):
    """``integral of a . dx`` from the disc center to every node, per time slice.

    ``route="radial"`` follows the segment ``theta x``; ``route="cartesian"``
    goes along the first axis to ``(x1, 0)`` and then along the second.
    Components are interpolated with cubic splines on each time slice and
    every leg uses Gauss-Legendre nodes.
    """
    th, wq = np.polynomial.legendre.leggauss(n_quad)
    th = 0.5 * (th + 1.0)
    wq = 0.5 * wq
    zero = np.zeros(len(nodes))
    legs = []
    for theta, w in zip(th, wq):
        if route == "radial":
            legs.append((theta * nodes, w * nodes))
        elif route == "cartesian":
            first = np.stack([nodes[:, 0], zero], axis=1)
            second = np.stack([zero, nodes[:, 1]], axis=1)
            legs.append((theta * first, w * first))
            legs.append((first + theta * second, w * second))
        else:
            raise ValueError(f"unknown route {route!r}")
    pts = np.concatenate([p for p, _ in legs])
    tang = np.concatenate([v for _, v in legs])
    origin = np.array([a[0] for a in grid.axes])
    steps = np.array([a[1] - a[0] for a in grid.axes])
    coords = ((pts - origin) / steps).T
    n_t = a_slices.shape[1]
    out = np.zeros((n_t, len(nodes)))
    for k in range(n_t):
        acc = np.zeros(len(pts))
        for i in range(2):
            acc += tang[:, i] * ndimage.map_coordinates(a_slices[i, k], coords, order=3,
                                                        mode="nearest")
        out[k] = acc.reshape(-1, len(nodes)).sum(axis=0)
    return out


def extract_potential(B, anchor_index=0, tol=1e-2, boundary_tol=None, n_quad=32):
    """Integrate a space-time one-form along two path families.

    Family A goes in time at the disc center from the anchor slab, then
    in space along the first and then the second coordinate axis; family B
    goes radially on the anchor slab, then in time.  Radial paths alone are
    blind to rotational spatial forms, hence the axis-aligned spatial leg.  For
    an exact form both give the same ``psi``; their maximal difference,
    scaled by ``sup|B|`` times the path length ``T + 1``, is the reported
    discrepancy.  ``psi`` is normalized to vanish at the anchor center.
    """
    grid = B.grid
    if grid.dim != 2:
        raise ValueError("extract_potential expects a 2+1 dimensional grid")
    n_t = len(grid.t)
    nodes = grid.spatial_nodes()
    inside = in_disc(nodes)
    b = B.components[0].reshape(n_t, -1)
    spatial_a = _path_integral(grid, B.components[1:], nodes, n_quad, "cartesian")
    anchor_slab = _path_integral(grid, B.components[1:, anchor_index:anchor_index + 1],
                                 nodes, n_quad, "radial")[0]

    center = multilinear_weights(grid.axes, np.zeros((1, 2)))
    b_center = np.sum(b[:, center[0][0]] * center[1][0], axis=-1)
    t_center = _cumulative_integral(b_center, grid.t)
    t_center = t_center - t_center[anchor_index]
    psi_a = t_center[:, None] + spatial_a

    t_line = _cumulative_integral(b, grid.t)
    t_line = t_line - t_line[anchor_index][None]
    psi_b = anchor_slab[None] + t_line

    diff = np.abs(psi_a - psi_b)[:, inside]
    scale = max(B.sup_norm(), 1e-300) * (grid.T + 1.0)
    discrepancy = float(np.max(diff) / scale) if diff.size else 0.0

    psi_vals = np.where(inside[None], psi_a, 0.0).reshape(grid.shape)
    psi = SpaceTimeScalar(grid, psi_vals, disc=B.disc, time_order=B.time_order)

    r = np.sqrt(np.sum(nodes ** 2, axis=1))
    dx = grid.dx
    rim = inside & (r > 1.0 - 1.5 * dx)
    edge = np.concatenate([psi_a[:, rim].ravel(), psi_a[0, inside], psi_a[-1, inside]])
    bmax = float(np.max(np.abs(edge))) if edge.size else 0.0
    btol = tol * scale if boundary_tol is None else boundary_tol
    return GaugePotential(psi, bmax <= btol, bmax, discrepancy, tol)


def check_gauge_equivalence(A1, A2, tol=5e-2, **kwargs):
    """Test ``A2 = A1 + dpsi`` and return ``(equivalent, GaugePotential, residual)``.

    ``psi`` is extracted from ``A2 - A1``; the residual is the relative L2
    norm of ``A2 - A1 - dpsi`` over the disc.
    """
    D = A2 - A1
    pot = extract_potential(D, **kwargs)
    dpsi = exterior_derivative(pot.psi)
    nrm = D.l2_norm()
    if nrm == 0:
        return True, pot, 0.0
    resid = (D - dpsi).l2_norm() / nrm
    return bool(resid <= tol and pot.is_gradient), pot, float(resid)
