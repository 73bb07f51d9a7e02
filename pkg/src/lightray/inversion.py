"""Discrete inversion of the geodesic and light ray transforms.

The spatial transform is assembled as a sparse matrix (bilinear
interpolation times trapezoid weights).  Light ray data are inverted either
through time moments, where each moment order reduces to one regularized
geodesic inversion, or directly by least squares on the space-time
unknowns with a matrix-free operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp

from .exceptions import ConditioningError, ConfigurationError, MemoryCapError
from .fields import (ScalarFieldM, SpaceTimeGrid, SpaceTimeScalar, in_disc,
                     multilinear_weights, spatial_axis, time_stencil)
from .manifold import trace_geodesics
from .slicing import sinogram_moment
from .transforms import trapezoid_weights

DEFAULT_MEMORY_CAP = 2 * 1024 ** 3


# -- spatial operator ----------------------------------------------------------

@dataclass
class RayOperator:
    """Sparse matrix from grid values to geodesic transform values.

    ``matrix[j, i]`` is the weight of node ``i`` (row-major over the
    ``n x n`` grid) in the quadrature along ray ``j``.  ``power`` > 0 builds
    the remainder operator with the extra factor ``(i r)**power``.
    """

    matrix: sp.csr_matrix
    n: int
    extent: float
    weights: np.ndarray
    geodesics: list = field(repr=False, default_factory=list)
    power: int = 0

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, f):
        vals = f.values if isinstance(f, ScalarFieldM) else np.asarray(f)
        return self.matrix @ vals.reshape(-1)

    def rmatvec(self, y):
        return (self.matrix.conj().T @ y).reshape(self.n, self.n)

    def with_power(self, power):
        """Remainder operator on the same rays and grid."""
        return assemble_from_geodesics(self.geodesics, self.n, self.extent, power)


def assemble_from_geodesics(geos, n, extent=1.0, power=0):
    axis = spatial_axis(n, extent)
    rows, cols, vals = [], [], []
    for j, g in enumerate(geos):
        idx, w = multilinear_weights([axis, axis], g.x)
        w = w * in_disc(g.x)[:, None]
        q = trapezoid_weights(g.r)
        if power:
            q = q * (1j * g.r) ** power
        rows.append(np.full(idx.size, j))
        cols.append(idx.ravel())
        vals.append((w * q[:, None]).ravel())
    dtype = complex if power else float
    mat = sp.csr_matrix((np.concatenate(vals).astype(dtype),
                         (np.concatenate(rows), np.concatenate(cols))),
                        shape=(len(geos), n * n))
    mat.sum_duplicates()
    weights = np.array([g.ray.weight if g.ray is not None else 1.0 for g in geos])
    return RayOperator(mat, n, float(extent), weights, list(geos), power)


def assemble_ray_matrix(metric, rays, n, extent=1.0, step=0.01, power=0):
    """Trace ``rays`` and assemble the ``RayOperator`` on an ``n x n`` grid."""
    geos = trace_geodesics(metric, rays, step)
    return assemble_from_geodesics(geos, n, extent, power)


# -- solver ------------------------------------------------------------------------

@dataclass
class SolveReport:
    residuals: list
    converged: bool
    iterations: int
    lam: float

    def text(self):
        lines = [f"lambda {self.lam:.6e}", f"converged {self.converged}",
                 f"iterations {self.iterations}"]
        lines += [f"{k} {r:.6e}" for k, r in enumerate(self.residuals)]
        return "\n".join(lines) + "\n"


def conjugate_residual(apply_A, b, iters=200, tol=1e-8):
    """Conjugate residual iteration for a symmetric positive definite operator.

    The residual norm is minimized over growing Krylov spaces, so the
    recorded history is nonincreasing.
    """
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    history = [float(bnorm)]
    if bnorm == 0:
        return x, history, True
    Ar = apply_A(r)
    p, Ap = r.copy(), Ar.copy()
    rAr = np.vdot(r, Ar).real
    converged = False
    for _ in range(iters):
        denom = np.vdot(Ap, Ap).real
        if denom == 0:
            break
        alpha = rAr / denom
        x += alpha * p
        r -= alpha * Ap
        history.append(float(np.linalg.norm(r)))
        if history[-1] <= tol * bnorm:
            converged = True
            break
        Ar = apply_A(r)
        rAr_new = np.vdot(r, Ar).real
        beta = rAr_new / rAr
        rAr = rAr_new
        p = r + beta * p
        Ap = Ar + beta * Ap
    return x, history, converged


def default_lambda(apply_normal, n_unknowns, scale=1e-4):
    """``scale`` times the max row sum of the (nonnegative) normal operator."""
    return scale * float(np.max(np.abs(apply_normal(np.ones(n_unknowns)))))


def invert_geodesic_transform(op, sino, lam=None, iters=200, tol=1e-8, weighted=True):
    """Tikhonov inversion ``(R^T W R + lam I) f = R^T W s`` by conjugate residuals.

    Complex data are solved as two real systems.  Returns the field and a
    ``SolveReport`` (for complex data, the report of the real part with the
    imaginary-part histories appended).
    """
    s = sino.values if hasattr(sino, "values") else np.asarray(sino)
    if s.shape != (op.shape[0],):
        raise ConfigurationError(f"sinogram has {s.shape} values, operator has {op.shape[0]} rows")
    R = op.matrix
    W = op.weights if weighted else np.ones(op.shape[0])

    def normal(v):
        return R.T @ (W * (R @ v))

    if lam is None:
        lam = default_lambda(normal, op.shape[1])
    if lam < 0:
        raise ValueError("lambda must be nonnegative")

    def apply_A(v):
        return normal(v) + lam * v

    parts = [s.real, s.imag] if np.iscomplexobj(s) else [s]
    sols, reports = [], []
    for part in parts:
        x, hist, conv = conjugate_residual(apply_A, R.T @ (W * part), iters, tol)
        sols.append(x)
        reports.append(SolveReport(hist, conv, len(hist) - 1, lam))
    x = sols[0] if len(sols) == 1 else sols[0] + 1j * sols[1]
    report = reports[0]
    if len(reports) > 1:
        report = SolveReport(reports[0].residuals + reports[1].residuals,
                             reports[0].converged and reports[1].converged,
                             reports[0].iterations + reports[1].iterations, lam)
    return ScalarFieldM(x.reshape(op.n, op.n), op.extent), report


def relative_error(estimate, truth, mask=None):
    e = np.asarray(estimate)
    t = np.asarray(truth)
    if mask is not None:
        e, t = e[mask], t[mask]
    return float(np.linalg.norm(e - t) / np.linalg.norm(t))


# -- time basis ------------------------------------------------------------------

class TimeBasis:
    """Orthonormal polynomial basis in the trapezoid inner product on the t-grid.

    The functions are ``window(t) * poly_k(t)`` orthonormalized with
    modified Gram-Schmidt (twice), so ``Gram`` equals the identity to
    rounding error.  With a window supported in ``[t_lo, t_hi]`` every basis
    element, and every field built from them, vanishes outside it.
    """

    def __init__(self, t, K, window=None, center=None, half_width=None):
        self.t = np.asarray(t, dtype=float)
        self.K = int(K)
        if self.K < 0:
            raise ValueError("K must be nonnegative")
        lo, hi = self.t[0], self.t[-1]
        self.center = 0.5 * (lo + hi) if center is None else float(center)
        hw = 0.5 * (hi - lo) if half_width is None else float(half_width)
        u = (self.t - self.center) / hw
        win = np.ones_like(self.t) if window is None else np.asarray(window(self.t), dtype=float)
        self.window = win
        self.quad = trapezoid_weights(self.t)
        raw = np.stack([win * np.polynomial.legendre.Legendre.basis(k)(u) for k in range(self.K + 1)])
        self.samples = self._orthonormalize(raw)

    def _orthonormalize(self, raw):
        Q = raw.copy()
        for _ in range(2):
            for k in range(len(Q)):
                for j in range(k):
                    Q[k] -= self.inner(Q[k], Q[j]) * Q[j]
                nrm = np.sqrt(self.inner(Q[k], Q[k]))
                if nrm < 1e-12:
                    raise ConditioningError("time basis is degenerate on this grid; reduce K")
                Q[k] /= nrm
        return Q

    def inner(self, a, b):
        return float(np.sum(self.quad * a * b))

    def gram(self):
        return (self.samples * self.quad) @ self.samples.T

    def moment_matrix(self, origin=0.0):
        """``M[k, l] = integral (-i (t - origin))**k p_l(t) dt``."""
        tt = self.t - origin
        powers = np.stack([(-1j * tt) ** k for k in range(self.K + 1)])
        return (powers * self.quad) @ self.samples.T

    def synthesize(self, grid, coeffs):
        """Field ``sum_l coeffs[l](x) p_l(t)`` on ``grid``; ``coeffs`` has shape (K+1, n, n)."""
        vals = np.tensordot(self.samples.T, np.asarray(coeffs), axes=(1, 0))
        return SpaceTimeScalar(grid, vals)


def smooth_window(lo, hi):
    """C-infinity bump equal to ``exp(1 - 1/(1 - u**2))`` on ``(lo, hi)``."""
    c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def w(t):
        u = (np.asarray(t, dtype=float) - c) / h
        out = np.zeros_like(u)
        inside = np.abs(u) < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return out

    return w


# -- moment pipeline ---------------------------------------------------------------

@dataclass
class MomentReport:
    moment_reports: list
    condition: float
    origin: float
    moments: list = field(repr=False, default_factory=list)

    def text(self):
        lines = [f"origin {self.origin:.6f}", f"moment_matrix_condition {self.condition:.6e}"]
        for k, rep in enumerate(self.moment_reports):
            lines.append(f"order {k} iterations {rep.iterations} converged {rep.converged} "
                         f"final_residual {rep.residuals[-1]:.6e}")
        return "\n".join(lines) + "\n"


def invert_light_transform_moments(op, L, K, basis, grid, lam=None, iters=200,
                                   tol=1e-8, origin=None, max_condition=1e8):
    """Recover ``f = sum_k h_k(x) p_k(t)`` from light ray data via time moments.

    Moments are taken about ``origin`` (default: the basis center), which
    is a time shift of the data and keeps the moment matrix well scaled.
    Order ``k`` subtracts remainder terms built from the already recovered
    lower moments, then inverts the geodesic transform once.
    """
    if K > basis.K:
        raise ConfigurationError("K exceeds the basis order")
    if len(L.rays) != op.shape[0]:
        raise ConfigurationError("sinogram rays do not match the operator rows")
    origin = basis.center if origin is None else float(origin)
    M = basis.moment_matrix(origin)[: K + 1, : K + 1]
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > max_condition:
        raise ConditioningError(f"moment-of-basis matrix condition {cond:.3e} exceeds "
                                f"{max_condition:.1e}; use a smaller K")
    from .transforms import LightSinogram
    shifted = LightSinogram(L.values, L.s - origin, L.rays)
    remainders = {}
    moments, reports = [], []
    for k in range(K + 1):
        rhs = sinogram_moment(k, shifted).astype(complex)
        for j in range(k):
            p = k - j
            if p not in remainders:
                remainders[p] = op.with_power(p)
            rhs = rhs - comb(k, j) * (remainders[p].matrix @ moments[j].values.ravel())
        m_k, rep = invert_geodesic_transform(op, rhs, lam, iters, tol)
        moments.append(m_k)
        reports.append(rep)
    mvals = np.stack([m.values.reshape(-1) for m in moments])
    h = np.linalg.solve(M, mvals).real.reshape(K + 1, op.n, op.n)
    full = np.zeros((basis.K + 1, op.n, op.n))
    full[: K + 1] = h
    f = basis.synthesize(grid, full)
    return f, MomentReport(reports, cond, origin, moments)


# -- direct least squares on space-time unknowns -----------------------------------

class LightOperator:
    """Matrix-free light ray transform on an aligned offset grid.

    Offsets are ``s_k = (k0 + k) dt``; unknowns are grid values at time
    nodes ``w0 .. w1`` (all spatial nodes).  For each ray the spatial
    interpolation, time interpolation and quadrature weights are folded
    into a sparse matrix ``H`` with rows ``(ray, m)``: the sample at
    ``t = s_k + r`` reads time node ``m + k``.
    """

    def __init__(self, geos, grid, k0, n_s, window=None, memory_cap=DEFAULT_MEMORY_CAP,
                 time_order=3):
        self.grid = grid
        self.geos = list(geos)
        self.n_rays = len(self.geos)
        self.k0, self.n_s = int(k0), int(n_s)
        self.dt = grid.dt
        self.s = (self.k0 + np.arange(self.n_s)) * self.dt
        nt = len(grid.t)
        self.w0, self.w1 = (0, nt - 1) if window is None else window
        self.n_w = self.w1 - self.w0 + 1
        self.n_sp = int(np.prod([len(a) for a in grid.axes]))
        self.weights = np.array([g.ray.weight if g.ray is not None else 1.0 for g in self.geos])

        tau = max(g.exit_time for g in self.geos)
        self.j_min = int(np.floor(self.k0 * self.dt / self.dt)) - 2
        self.M = int(np.ceil(tau / self.dt)) + 5
        nnz_est = sum(len(g.r) for g in self.geos) * 4 * (time_order + 1)
        est = nnz_est * 28 + 16 * self.n_rays * self.M * self.n_w
        if est > memory_cap:
            raise MemoryCapError(f"light operator needs about {est / 2**20:.0f} MiB, "
                                 f"cap is {memory_cap / 2**20:.0f} MiB")
        self.memory_estimate = est

        rows, cols, vals = [], [], []
        for j, g in enumerate(self.geos):
            sidx, sw = multilinear_weights(grid.axes, g.x)
            sw = sw * in_disc(g.x)[:, None]
            q = trapezoid_weights(g.r)
            # t = s_0 + r lands on node i with stencil offsets; shift k adds k
            tidx_abs, tw = _unclipped_stencil(self.k0 * self.dt + g.r, self.dt, time_order)
            m = tidx_abs - self.j_min
            if m.min() < 0 or m.max() >= self.M:
                raise ConfigurationError("offset bookkeeping out of range")
            coef = q[:, None, None] * tw[:, :, None] * sw[:, None, :]
            rows.append((j * self.M + np.broadcast_to(m[:, :, None], coef.shape)).ravel())
            cols.append(np.broadcast_to(sidx[:, None, :], coef.shape).ravel())
            vals.append(coef.ravel())
        H = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.n_rays * self.M, self.n_sp))
        H.sum_duplicates()
        H.eliminate_zeros()
        self.H = H
        self.HT = H.T.tocsr()
        # time node read by (m, k) is j_min + m + k; keep those inside the window
        self._slices = []
        for m in range(self.M):
            c0 = self.j_min + m - self.w0
            k_lo = max(0, -c0)
            k_hi = min(self.n_s, self.n_w - c0)
            if k_hi > k_lo:
                self._slices.append((m, k_lo, k_hi, c0 + k_lo, c0 + k_hi))

    @property
    def n_unknowns(self):
        return self.n_w * self.n_sp

    def forward(self, F):
        """``F`` of shape (n_w, n_sp) or flat; returns (n_s, n_rays)."""
        F = np.asarray(F).reshape(self.n_w, self.n_sp)
        Y = (self.H @ F.T).reshape(self.n_rays, self.M, self.n_w)
        out = np.zeros((self.n_rays, self.n_s), dtype=Y.dtype)
        for m, k_lo, k_hi, c_lo, c_hi in self._slices:
            out[:, k_lo:k_hi] += Y[:, m, c_lo:c_hi]
        return out.T

    def adjoint(self, Z):
        Z = np.asarray(Z).reshape(self.n_s, self.n_rays).T
        Y = np.zeros((self.n_rays, self.M, self.n_w), dtype=Z.dtype)
        for m, k_lo, k_hi, c_lo, c_hi in self._slices:
            Y[:, m, c_lo:c_hi] += Z[:, k_lo:k_hi]
        return (self.HT @ Y.reshape(self.n_rays * self.M, self.n_w)).T

    def normal(self, F):
        return self.adjoint(self.forward(F) * self.weights[None, :]).ravel()

    def embed(self, F):
        """Window values to a full-grid ``SpaceTimeScalar``."""
        full = np.zeros(self.grid.shape)
        full[self.w0:self.w1 + 1] = np.asarray(F).reshape((self.n_w,) + self.grid.shape[1:])
        return SpaceTimeScalar(self.grid, full)


def _unclipped_stencil(t, dt, order):
    u = t / dt
    i = np.floor(u + 1e-12).astype(int)
    th = u - i
    th = np.where(th < 0, 0.0, th)
    if order == 1:
        offs = np.array([0, 1])
        w = np.stack([1 - th, th], axis=-1)
    else:
        offs = np.array([-1, 0, 1, 2])
        w = np.stack([-th * (th - 1) * (th - 2) / 6,
                      (th + 1) * (th - 1) * (th - 2) / 2,
                      -(th + 1) * th * (th - 2) / 2,
                      (th + 1) * th * (th - 1) / 6], axis=-1)
    return i[:, None] + offs[None, :], w


def aligned_offsets(L, dt):
    """``(k0, n_s)`` if the sinogram offsets sit on the time lattice."""
    k = L.s / dt
    kr = np.round(k)
    if np.max(np.abs(k - kr)) > 1e-9 or np.any(np.diff(kr) != 1):
        raise ConfigurationError("direct inversion needs offsets on the time lattice with step dt")
    return int(kr[0]), len(kr)


def invert_light_transform_direct(geos, grid, L, lam=None, iters=300, tol=1e-8,
                                  window=None, memory_cap=DEFAULT_MEMORY_CAP):
    """Regularized least squares on space-time grid values.

    ``window`` restricts the unknowns to time nodes ``(w0, w1)``; this is
    where the field is assumed to be supported.
    """
    k0, n_s = aligned_offsets(L, grid.dt)
    op = LightOperator(geos, grid, k0, n_s, window, memory_cap)
    rhs = op.adjoint(L.values * op.weights[None, :]).ravel()
    if lam is None:
        lam = default_lambda(op.normal, op.n_unknowns)
    x, hist, conv = conjugate_residual(lambda v: op.normal(v) + lam * v, rhs, iters, tol)
    return op.embed(x), SolveReport(hist, conv, len(hist) - 1, lam)
