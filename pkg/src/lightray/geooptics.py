"""Geometric optics along a null geodesic.

Charts map space-time points near a null geodesic ``beta(r) = (r + s, gamma(r))``
to coordinates ``z = (z0, z1, z')`` built from polar normal coordinates
``(r, theta)`` about a point ``p`` on the extension of ``gamma`` outside the
disc:

    z0 = (t + r) / sqrt(2),  z1 = (-t + r + s0) / sqrt(2),  z2 = theta - theta0.

In these coordinates ``gbar = 2 dz0 dz1 + G dz2**2`` with ``G = |d x / d theta|_g**2``,
the phase is ``Phi = z1`` and ``grad Phi = d / dz0``.  Amplitudes solve the
transport equation along ``z0`` lines in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.signal import fftconvolve

from .exceptions import ConfigurationError, DomainError
from .fields import SpaceTimeOneForm, SpaceTimeScalar, in_disc
from .manifold import rk4_step

SQRT2 = np.sqrt(2.0)


# -- cutoff profile and mollifier ----------------------------------------------------

def chi(u):
    """Radial cutoff: 1 for ``|u| <= 1/4``, 0 for ``|u| >= 1/2``.

    Between the two radii it is ``1 - (10 s^3 - 15 s^4 + 6 s^5)`` with
    ``s = 4 |u| - 1``, which is C2 across both junctions.
    """
    a = np.abs(np.asarray(u, dtype=float))
    s = np.clip(4.0 * a - 1.0, 0.0, 1.0)
    return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def mollifier_kernel(rho, steps):
    """Sampled ``rho**((n+1)/4) chi(rho**(1/4) |(t, y)|)`` with unit discrete mass.

    ``steps`` are the grid spacings ``(dt, dx, ...)``.  The continuous profile
    has mass below one, so the samples are rescaled to sum to one against
    the cell volume; this is what makes constants invariant.
    """
    if rho < 1:
        raise ValueError("rho must be at least 1")
    scale = rho ** 0.25
    radius = 0.5 / scale
    axes = []
    for h in steps:
        m = int(np.floor(radius / h))
        axes.append(np.arange(-m, m + 1) * h)
    mesh = np.meshgrid(*axes, indexing="ij")
    dist = np.sqrt(sum(g ** 2 for g in mesh))
    n = len(steps) - 1
    ker = rho ** ((n + 1) / 4.0) * chi(scale * dist)
    cell = float(np.prod(steps))
    return ker / (ker.sum() * cell), cell


def mollify(f, rho):
    """Convolve a space-time field with the mollifier at scale ``rho``.

    The field is extended by zero outside ``[0, T] x M`` before convolving.
    Returns a field of the same type on the same grid.
    """
    grid = f.grid
    steps = [grid.dt] + [a[1] - a[0] for a in grid.axes]
    ker, cell = mollifier_kernel(rho, steps)
    if any(k > s for k, s in zip(ker.shape, grid.shape)):
        raise ConfigurationError("mollifier kernel is wider than the grid")

    def conv(vals, mask):
        v = np.where(mask, vals, 0.0)
        return fftconvolve(v, ker, mode="same") * cell

    if isinstance(f, SpaceTimeOneForm):
        mask = SpaceTimeScalar(grid, f.components[0], disc=f.disc).region_mask()
        comps = np.stack([conv(c, mask) for c in f.components])
        return SpaceTimeOneForm(grid, comps, None, f.disc, f.time_order)
    mask = f.region_mask()
    return SpaceTimeScalar(grid, conv(f.values, mask), None, f.disc, f.time_order)


# -- charts --------------------------------------------------------------------------

class NullChart:
    """Common interface of the z-coordinate charts.

    Subclasses implement ``spatial_inverse``/``spatial_forward`` (polar data
    ``(r, theta)`` and the frame ``v = dx/dr``, ``J = dx/dtheta``) or override
    the z-level methods directly.
    """

    dim = 2
    s0 = 0.0
    tube_radius = None

    # z <-> (t, x)
    def to_z(self, t, x):
        t = np.asarray(t, dtype=float)
        r, th = self.spatial_inverse(x)
        z = np.stack([(t + r) / SQRT2, (-t + r + self.s0) / SQRT2, th], axis=1)
        return z

    def from_z(self, z, strict=True):
        z = np.atleast_2d(z)
        r = (z[:, 0] + z[:, 1]) / SQRT2 - 0.5 * self.s0
        t = (z[:, 0] - z[:, 1]) / SQRT2 + 0.5 * self.s0
        x, _, _ = self.spatial_forward(r, z[:, 2], strict)
        return t, x

    def frame(self, z):
        """``(x, v, J)`` at chart points."""
        z = np.atleast_2d(z)
        r = (z[:, 0] + z[:, 1]) / SQRT2 - 0.5 * self.s0
        return self.spatial_forward(r, z[:, 2])

    def metric_z(self, z):
        """Components of ``gbar`` in z-coordinates, shape (m, 3, 3)."""
        x, v, J = self.frame(z)
        c2 = self.c2(x)
        m = len(x)
        dt = np.array([1.0, -1.0, 0.0]) / SQRT2
        dX = np.zeros((m, 2, 3))
        dX[:, :, 0] = v / SQRT2
        dX[:, :, 1] = v / SQRT2
        dX[:, :, 2] = J
        gz = -np.einsum("i,j->ij", dt, dt)[None] + np.einsum("mai,maj->mij", dX, dX) / c2[:, None, None]
        return gz

    def log_abs_g(self, z):
        """``log |det gbar_z|``; equals ``log G`` for the exact z-form."""
        x, v, J = self.frame(z)
        return np.log(np.einsum("ij,ij->i", J, J) / self.c2(x))

    def A0(self, A, z):
        """``A(grad Phi) = A(d/dz0) = (b + a . v) / sqrt(2)`` at chart points."""
        t, x, v, _ = self.z_data(z)
        return _pair_z0(A, t, x, v)

    def z_data(self, z, strict=True):
        """``(t, x, dx/dr, log|g|)`` at chart points; NaN where undefined when not strict."""
        z = np.atleast_2d(z)
        r = (z[:, 0] + z[:, 1]) / SQRT2 - 0.5 * self.s0
        t = (z[:, 0] - z[:, 1]) / SQRT2 + 0.5 * self.s0
        x, v, J = self.spatial_forward(r, z[:, 2], strict)
        with np.errstate(invalid="ignore", divide="ignore"):
            lg = np.log(np.einsum("ij,ij->i", J, J) / self.c2(np.nan_to_num(x)))
        return t, x, v, lg

    def grad_phi(self, t, x):
        """Euclidean partials ``(Phi_t, grad_x Phi)`` at Cartesian points."""
        r, th = self.spatial_inverse(x)
        _, v, J = self.spatial_forward(r, th)
        jac = np.stack([v, J], axis=2)
        dr = np.linalg.inv(jac)[:, 0, :]
        return np.full(len(r), -1.0 / SQRT2), dr / SQRT2

    def phi(self, t, x):
        return self.to_z(t, x)[:, 1]

    def c2(self, x):
        return np.ones(len(x))

    def beta_z(self, r):
        """Chart coordinates of ``beta`` at polar radius ``r`` (z1 = z' = 0)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return np.stack([(2 * r + self.s0) / SQRT2, np.zeros_like(r), np.zeros_like(r)], axis=1)


def _eval_oneform(A, t, x):
    if A is None:
        return np.zeros((len(t), x.shape[1] + 1))
    if isinstance(A, SpaceTimeOneForm):
        return A.evaluate(t, x)
    return np.asarray(A(t, x))


def _pair_z0(A, t, x, v):
    ok = np.all(np.isfinite(x), axis=1)
    out = np.full(len(t), np.nan)
    comps = _eval_oneform(A, t[ok], x[ok])
    out[ok] = (comps[:, 0] + np.einsum("ij,ij->i", comps[:, 1:], v[ok])) / SQRT2
    return out


def _eval_scalar(q, t, x):
    if q is None:
        return np.zeros(len(t))
    if isinstance(q, SpaceTimeScalar):
        return q.evaluate(t, x)
    return np.asarray(q(t, x))


class EuclideanChart(NullChart):
    """Closed-form chart for the Euclidean disc.

    ``beta(r) = (r + s, y + r v)`` with ``y`` on the circle; ``p = y - eps v``.
    """

    def __init__(self, y, v, s, eps=0.3):
        self.y = np.asarray(y, dtype=float)
        v = np.asarray(v, dtype=float)
        self.v = v / np.linalg.norm(v)
        self.eps = float(eps)
        self.p = self.y - self.eps * self.v
        self.theta0 = float(np.arctan2(self.v[1], self.v[0]))
        self.s = float(s)
        self.s0 = self.s - self.eps

    def spatial_inverse(self, x):
        d = np.atleast_2d(x) - self.p
        r = np.sqrt(np.sum(d ** 2, axis=1))
        th = np.mod(np.arctan2(d[:, 1], d[:, 0]) - self.theta0 + np.pi, 2 * np.pi) - np.pi
        return r, th

    def spatial_forward(self, r, th, strict=True):
        r = np.asarray(r, dtype=float)
        if strict and np.any(r < 0):
            raise DomainError("negative polar radius")
        ang = self.theta0 + np.asarray(th, dtype=float)
        u = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        J = r[:, None] * np.stack([-np.sin(ang), np.cos(ang)], axis=1)
        return self.p + r[:, None] * u, u, J

    def metric_z_exact(self, z):
        """Closed form ``2 dz0 dz1 + r**2 dz2**2``."""
        z = np.atleast_2d(z)
        r = (z[:, 0] + z[:, 1]) / SQRT2 - 0.5 * self.s0
        g = np.zeros((len(z), 3, 3))
        g[:, 0, 1] = g[:, 1, 0] = 1.0
        g[:, 2, 2] = r ** 2
        return g


class NumericChart(NullChart):
    """Chart built from the exponential map of a conformal metric.

    Geodesics from ``p`` are integrated with RK4 using, for each point,
    a uniform step ``r / n`` with ``n`` chosen so the step is at most
    ``max_step``.  ``dx/dtheta`` is a central difference in the initial
    angle; the inverse map is Newton's method on ``(r, theta)``.
    """

    def __init__(self, metric, y, v, s, eps=0.3, max_step=0.005, dtheta=1e-5):
        self.metric = metric
        self.y = np.asarray(y, dtype=float)
        self.eps = float(eps)
        self.max_step = max_step
        self.dtheta = dtheta
        v = np.asarray(v, dtype=float)
        v = v * metric.c(self.y) / np.linalg.norm(v)
        xs, vs = self._integrate(self.y[None], -v[None], np.array([self.eps]))
        self.p = xs[0]
        vp = -vs[0]
        self.theta0 = float(np.arctan2(vp[1], vp[0]))
        self.s = float(s)
        self.s0 = self.s - self.eps

    def c2(self, x):
        return self.metric.c(x) ** 2

    def _integrate(self, x0, v0, r, strict=True):
        r = np.asarray(r, dtype=float)
        n = max(1, int(np.ceil(np.max(r) / self.max_step)))
        h = r / n
        x, v = x0.copy(), v0.copy()
        if strict:
            for _ in range(n):
                x, v = rk4_step(self.metric, x, v, h)
            return x, v
        # freeze rays that approach the edge of the metric domain and mark them
        edge = self.metric.domain_radius - 4 * self.max_step * self.metric.c(self.p)
        live = np.ones(len(r), dtype=bool)
        for _ in range(n):
            x[live], v[live] = rk4_step(self.metric, x[live], v[live], h[live])
            live &= np.sum(x ** 2, axis=1) < edge ** 2
        x[~live] = np.nan
        v[~live] = np.nan
        return x, v

    def _shoot(self, r, th, strict=True):
        uniq, inv = np.unique(th, return_inverse=True)
        if 4 * len(uniq) <= len(th):
            return self._shoot_shared(r, uniq, inv, strict)
        ang = self.theta0 + th
        cp = self.metric.c(self.p)
        v0 = cp * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        x0 = np.repeat(self.p[None], len(ang), axis=0)
        return self._integrate(x0, v0, r, strict)

    def _shoot_shared(self, r, uniq, inv, strict):
        """Store one trajectory per distinct angle and finish each point with a partial step."""
        h = self.max_step
        n = int(np.floor(np.max(r) / h)) + 1
        ang = self.theta0 + uniq
        cp = self.metric.c(self.p)
        v = cp * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        x = np.repeat(self.p[None], len(ang), axis=0)
        xs = np.full((n, len(ang), 2), np.nan)
        vs = np.full((n, len(ang), 2), np.nan)
        edge = self.metric.domain_radius - 4 * h * cp
        live = np.ones(len(ang), dtype=bool)
        for k in range(n):
            xs[k, live], vs[k, live] = x[live], v[live]
            if k == n - 1:
                break
            x[live], v[live] = rk4_step(self.metric, x[live], v[live], h)
            live &= np.sum(x ** 2, axis=1) < edge ** 2
        k = np.minimum(np.floor(r / h).astype(int), n - 1)
        xk, vk = xs[k, inv], vs[k, inv]
        ok = np.all(np.isfinite(xk), axis=1)
        if strict and not np.all(ok):
            raise DomainError("geodesic from the chart origin leaves the metric domain")
        xo = np.full_like(xk, np.nan)
        vo = np.full_like(vk, np.nan)
        xo[ok], vo[ok] = rk4_step(self.metric, xk[ok], vk[ok], r[ok] - k[ok] * h)
        out = np.sum(xo ** 2, axis=1) >= self.metric.domain_radius ** 2
        xo[out] = vo[out] = np.nan
        return xo, vo

    def spatial_forward(self, r, th, strict=True):
        """Exponential map at ``(r, theta)`` with ``v = dx/dr`` and ``J = dx/dtheta``.

        With ``strict=False`` rays leaving the metric domain give NaN instead
        of raising.
        """
        r = np.atleast_1d(np.asarray(r, dtype=float))
        th = np.atleast_1d(np.asarray(th, dtype=float))
        bad = r < 0
        if strict and np.any(bad):
            raise DomainError("negative polar radius")
        r = np.where(bad, 0.0, r)
        m = len(r)
        rr = np.concatenate([r, r, r])
        tt = np.concatenate([th, th + self.dtheta, th - self.dtheta])
        x, v = self._shoot(rr, tt, strict)
        J = (x[m:2 * m] - x[2 * m:]) / (2 * self.dtheta)
        x, v = x[:m], v[:m]
        if np.any(bad):
            x[bad] = v[bad] = J[bad] = np.nan
        return x, v, J

    def spatial_inverse(self, x, tol=1e-13, max_iter=40):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = x - self.p
        # initial radius: metric length of the straight segment from p
        frac = (np.arange(16) + 0.5) / 16
        seg = self.p + frac[:, None, None] * d[None]
        inv_c = 1.0 / self.metric.c(seg.reshape(-1, 2)).reshape(16, -1)
        r = np.sqrt(np.sum(d ** 2, axis=1)) * inv_c.mean(axis=0)
        th = np.mod(np.arctan2(d[:, 1], d[:, 0]) - self.theta0 + np.pi, 2 * np.pi) - np.pi
        xf, v, J = self.spatial_forward(r, th)
        for _ in range(max_iter):
            res = xf - x
            jac = np.stack([v, J], axis=2)
            step = np.linalg.solve(jac, res[:, :, None])[:, :, 0]
            # damp the batch until every iterate stays inside the metric domain
            for _ in range(20):
                try:
                    r_new, th_new = r - step[:, 0], th - step[:, 1]
                    xf, v, J = self.spatial_forward(r_new, th_new)
                    break
                except DomainError:
                    step = 0.5 * step
            else:
                raise DomainError("chart inversion left the metric domain")
            r, th = r_new, th_new
            if np.max(np.abs(step)) < tol:
                break
        else:
            if np.max(np.abs(step)) > 1e-9:
                raise DomainError("chart inversion did not converge")
        return r, th


class MinkowskiChart1D(NullChart):
    """Closed-form chart on ``(0, T) x [0, 1]`` for the line ``t = x + s0``.

    ``z0 = (t + x) / sqrt(2)``, ``z1 = (x - t + s0) / sqrt(2)``, ``|g| = 1``.
    """

    dim = 1

    def __init__(self, s0):
        self.s0 = float(s0)

    def to_z(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.atleast_2d(x)[:, 0] if np.ndim(x) > 1 else np.asarray(x, dtype=float)
        return np.stack([(t + x) / SQRT2, (x - t + self.s0) / SQRT2], axis=1)

    def from_z(self, z, strict=True):
        z = np.atleast_2d(z)
        x = (z[:, 0] + z[:, 1] - self.s0 / SQRT2) / SQRT2
        t = (z[:, 0] - z[:, 1] + self.s0 / SQRT2) / SQRT2
        return t, x[:, None]

    def metric_z(self, z):
        z = np.atleast_2d(z)
        g = np.zeros((len(z), 2, 2))
        g[:, 0, 1] = g[:, 1, 0] = 1.0
        return g

    def log_abs_g(self, z):
        return np.zeros(len(np.atleast_2d(z)))

    def z_data(self, z, strict=True):
        t, x = self.from_z(z)
        return t, x, np.ones((len(t), 1)), np.zeros(len(t))

    def grad_phi(self, t, x):
        m = len(np.asarray(t).ravel())
        return np.full(m, -1.0 / SQRT2), np.full((m, 1), 1.0 / SQRT2)

    def beta_z(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.stack([(2 * x + self.s0) / SQRT2, np.zeros_like(x)], axis=1)


def build_chart(metric, y, v, s, eps=0.3, numeric=None, **kwargs):
    """Chart about the null geodesic through boundary point ``y`` with direction ``v``.

    Euclidean metrics get the closed-form chart unless ``numeric=True``.
    """
    if numeric is None:
        numeric = metric.name != "euclidean"
    if numeric:
        return NumericChart(metric, y, v, s, eps, **kwargs)
    return EuclideanChart(y, v, s, eps)


def eikonal_residual(chart, z):
    """``<grad Phi, grad Phi>`` for ``Phi = z1``: the ``(1, 1)`` entry of the inverse z-metric."""
    gz = chart.metric_z(z)
    return np.linalg.inv(gz)[:, 1, 1]


def find_tube_radius(chart, T, r_range, inside=None, n_z0=32, n_ring=8, delta_max=0.5, iters=16):
    """Largest ``delta'`` (by bisection) whose tube keeps ``0 < t < T`` on the manifold.

    Tube points ``|z'| <= delta'`` with polar radius in ``r_range`` are
    mapped back to ``(t, x)``; those with ``x`` in the manifold must have
    ``0 < t < T`` and the map must be invertible there.
    """
    if inside is None:
        inside = in_disc if chart.dim == 2 else (lambda x: (x[:, 0] >= 0) & (x[:, 0] <= 1))
    rs = np.linspace(r_range[0], r_range[1], n_z0)
    ang = np.linspace(0, 2 * np.pi, n_ring, endpoint=False)

    def ok(delta):
        pts = []
        for frac in (0.5, 1.0):
            for a in ang:
                zz = chart.beta_z(rs)
                zz[:, 1] += frac * delta * np.cos(a)
                if chart.dim == 2:
                    zz[:, 2] += frac * delta * np.sin(a)
                pts.append(zz)
        z = np.concatenate(pts)
        try:
            t, x = chart.from_z(z, strict=False)
            known = np.all(np.isfinite(x), axis=1)
            t, x, z = t[known], x[known], z[known]
            m = inside(x)
            if chart.dim == 2 and np.any(m):
                zb = chart.to_z(t[m], x[m])
                if np.max(np.abs(zb - z[m])) > 1e-6:
                    return False
        except (DomainError, np.linalg.LinAlgError):
            return False
        return bool(np.all((t[m] > 0) & (t[m] < T)))

    lo, hi = 0.0, delta_max
    if ok(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise ConfigurationError("null geodesic tube meets the initial or final slab")
    return lo


# -- amplitudes ----------------------------------------------------------------------

@dataclass
class AmplitudePair:
    """Amplitudes ``c1, c2`` sampled on a tensor grid in z-coordinates."""

    chart: NullChart
    rho: float
    delta: float
    z_axes: list
    c1: np.ndarray
    c2: np.ndarray
    log_g: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    A0_1: np.ndarray = field(repr=False, default=None)
    A0_2: np.ndarray = field(repr=False, default=None)

    def _interp(self, arr, z, method):
        interp = RegularGridInterpolator(self.z_axes, arr, method=method,
                                         bounds_error=False, fill_value=None)
        return interp(z)

    def amplitude(self, z, which, method="cubic"):
        """Amplitude at arbitrary chart points (exact |g| and cutoff, interpolated exponent)."""
        z = np.atleast_2d(z)
        zp = np.sqrt(np.sum(z[:, 1:] ** 2, axis=1))
        cut = chi(zp / self.delta)
        lo0, hi0 = self.z_axes[0][0], self.z_axes[0][-1]
        inside = (cut > 0) & (z[:, 0] >= lo0) & (z[:, 0] <= hi0)
        out = np.zeros(len(z))
        if not np.any(inside):
            return out
        zi = z[inside]
        for k in range(1, len(self.z_axes)):
            zi[:, k] = np.clip(zi[:, k], self.z_axes[k][0], self.z_axes[k][-1])
        expo = self._interp(self.I1 if which == 1 else self.I2, zi, method)
        sign = 1.0 if which == 1 else -1.0
        lg = self.chart.log_abs_g(z[inside])
        out[inside] = np.exp(-0.25 * lg) * cut[inside] * np.exp(0.5 * sign * expo)
        return out


def _cumtrapz(vals, h, axis=0):
    v = np.moveaxis(vals, axis, 0)
    out = np.zeros_like(v)
    out[1:] = np.cumsum(0.5 * h * (v[1:] + v[:-1]), axis=0)
    return np.moveaxis(out, 0, axis)


def build_amplitudes(chart, A1, A2, rho, delta, z0, zp):
    """Amplitudes on the grid ``z0 x zp[0] (x zp[1])``.

    ``c1 = |g|**-1/4 chi(|z'|/delta) exp(+1/2 int (A1)_0 dz0)`` and ``c2`` with
    the opposite sign and ``A2``; integrals start at ``z0[0]`` (trapezoid
    rule along each ``z0`` line).
    """
    if chart.tube_radius is not None and not delta < chart.tube_radius:
        raise ConfigurationError(f"delta {delta:g} must be below the tube radius {chart.tube_radius:g}")
    z0 = np.asarray(z0, dtype=float)
    axes = [z0] + [np.asarray(a, dtype=float) for a in zp]
    mesh = np.meshgrid(*axes, indexing="ij")
    z = np.stack([m.ravel() for m in mesh], axis=1)
    shape = mesh[0].shape
    zprime = np.sqrt(sum(m ** 2 for m in mesh[1:]))
    cut = chi(zprime / delta)
    t, x, v, lg = chart.z_data(z, strict=False)
    # points whose ray leaves the metric domain lie beyond the manifold
    lg = lg.reshape(shape)
    a01 = np.nan_to_num(_pair_z0(A1, t, x, v)).reshape(shape)
    a02 = a01 if A2 is A1 else np.nan_to_num(_pair_z0(A2, t, x, v)).reshape(shape)
    cut = np.where(np.isfinite(lg), cut, 0.0)
    lg = np.where(np.isfinite(lg), lg, 0.0)
    h = z0[1] - z0[0]
    I1 = _cumtrapz(a01, h)
    I2 = I1 if A2 is A1 else _cumtrapz(a02, h)
    base = np.exp(-0.25 * lg) * cut
    c1 = base * np.exp(0.5 * I1)
    c2 = base * np.exp(-0.5 * I2)
    return AmplitudePair(chart, float(rho), float(delta), axes, c1, c2, lg, I1, I2, a01, a02)


def transport_residual(amps, which):
    """``d c/dz0 + (d log|g| / 4 -+ (A)_0 / 2) c`` by central differences along z0.

    The derivative is taken of ``log c`` on the support of ``c`` (the same
    stencil is applied to ``log |g|``), so the ``|g|`` factor cancels
    exactly and the residual measures the exponent quadrature.
    """
    z0 = amps.z_axes[0]
    h = z0[1] - z0[0]
    c = amps.c1 if which == 1 else amps.c2
    sign = 1.0 if which == 1 else -1.0
    a0 = amps.A0_1 if which == 1 else amps.A0_2
    cut = chi(np.sqrt(sum(m ** 2 for m in np.meshgrid(*amps.z_axes, indexing="ij")[1:])) / amps.delta)
    live = (cut > 0) & np.isfinite(amps.log_g) & (np.abs(c) > 0)
    logc = np.where(live, np.log(np.where(live, np.abs(c), 1.0)), 0.0)
    lg = np.where(live, amps.log_g, 0.0)
    dlogc = (logc[2:] - logc[:-2]) / (2 * h)
    dlogg = (lg[2:] - lg[:-2]) / (2 * h)
    res = c[1:-1] * (dlogc + 0.25 * dlogg - 0.5 * sign * np.nan_to_num(a0[1:-1]))
    # points whose stencil leaves the manifold or the tube are not scored
    return np.where(live[2:] & live[1:-1] & live[:-2], res, 0.0)


# -- probes -----------------------------------------------------------------------

def _padded_axes(grid, pad=1):
    axes = []
    for a in [grid.t] + list(grid.axes):
        h = a[1] - a[0]
        axes.append(np.concatenate([a[0] - h * np.arange(pad, 0, -1), a, a[-1] + h * np.arange(1, pad + 1)]))
    return axes


def _central(v, h, axis):
    v = np.moveaxis(v, axis, 0)
    return np.moveaxis((v[2:] - v[:-2]) / (2 * h), 0, axis)


def _central2(v, h, axis):
    v = np.moveaxis(v, axis, 0)
    return np.moveaxis((v[2:] - 2 * v[1:-1] + v[:-2]) / h ** 2, 0, axis)


def _crop(v, axis, ndim):
    sl = [slice(1, -1)] * ndim
    sl[axis] = slice(None)
    return v[tuple(sl)]


def go_probe(chart, amps, rho, grid, A=None, q=None, which=1, A_rho=None, metric=None,
             method="cubic"):
    """Principal part ``exp(+-i rho Phi) c`` and source on a Cartesian space-time grid.

    The source is ``-exp(+-i rho Phi) [L c + i rho (A - A_rho)(grad Phi) c]``
    where ``L = -box + A_rho(grad .) + q`` for ``which=1`` and the formal
    adjoint ``-box - A_rho(grad .) + q - div A_rho`` for ``which=2``.
    Derivatives of ``c`` are centered second-order differences; ``c`` is
    evaluated on a grid padded by one node so the stencils never go one-sided.
    """
    if A_rho is None:
        A_rho = A
    axes = _padded_axes(grid)
    steps = [a[1] - a[0] for a in axes]
    shape = tuple(len(a) for a in axes)
    ndim = len(shape)
    mesh = np.meshgrid(*axes, indexing="ij")
    t = mesh[0].ravel()
    x = np.stack([m.ravel() for m in mesh[1:]], axis=1)
    if grid.dim == 2:
        smesh = np.meshgrid(*axes[1:], indexing="ij")
        spatial = np.stack([m.ravel() for m in smesh], axis=1)
        near = np.sum(spatial ** 2, axis=1) <= (1.0 + 3 * steps[1]) ** 2
        rs = np.full(len(spatial), np.nan)
        ths = np.full(len(spatial), np.nan)
        rs[near], ths[near] = chart.spatial_inverse(spatial[near])
        rr = np.tile(rs, len(axes[0]))
        tt = np.tile(ths, len(axes[0]))
        ok = np.isfinite(rr)
        z = np.zeros((len(t), 3))
        z[:, 0] = (t + np.nan_to_num(rr)) / SQRT2
        z[:, 1] = (-t + np.nan_to_num(rr) + chart.s0) / SQRT2
        z[:, 2] = np.nan_to_num(tt)
        c = np.zeros(len(t))
        c[ok] = amps.amplitude(z[ok], which, method)
        c2 = np.ones(len(t))
        if metric is not None:
            c2[ok] = metric.c(x[ok]) ** 2
    else:
        z = chart.to_z(t, x)
        c = amps.amplitude(z, which, method)
        c2 = np.ones(len(t))
    c = c.reshape(shape)
    c2g = c2.reshape(shape)
    phi = z[:, 1].reshape(shape)
    sign = 1.0 if which == 1 else -1.0
    phase = np.exp(sign * 1j * rho * phi)

    def inner(v):
        return v[(slice(1, -1),) * ndim]

    c_t = _crop(_central(c, steps[0], 0), 0, ndim)
    c_x = [_crop(_central(c, steps[k], k), k, ndim) for k in range(1, ndim)]
    c_tt = _crop(_central2(c, steps[0], 0), 0, ndim)
    lap = sum(_crop(_central2(c, steps[k], k), k, ndim) for k in range(1, ndim))
    box = -c_tt + inner(c2g) * lap

    comps = _eval_oneform(A_rho, t, x)
    b = comps[:, 0].reshape(shape)
    a = [comps[:, 1 + i].reshape(shape) for i in range(grid.dim)]
    a_grad_c = -inner(b) * c_t + inner(c2g) * sum(inner(ai) * ci for ai, ci in zip(a, c_x))
    qv = inner(_eval_scalar(q, t, x).reshape(shape))
    ci = inner(c)
    if which == 1:
        Lc = -box + a_grad_c + qv * ci
    else:
        # div(b dt + a dx) = -b_t + c**2 div_x a for the conformal metric
        div = -_crop(_central(b, steps[0], 0), 0, ndim) + inner(c2g) * sum(
            _crop(_central(a[i], steps[1 + i], 1 + i), 1 + i, ndim) for i in range(grid.dim))
        Lc = -box - a_grad_c + (qv - div) * ci

    extra = 0.0
    if A is not None and A_rho is not A:
        tg = grid.mesh()[0].ravel()
        xg = np.stack([m.ravel() for m in grid.mesh()[1:]], axis=1)
        diff = _eval_oneform(A, tg, xg) - _eval_oneform(A_rho, tg, xg)
        if grid.dim == 1:
            phi_t, phi_x = chart.grad_phi(tg, xg)
        else:
            phi_t, phi_x = _grad_phi_grid(chart, grid, tg)
        c2i = inner(c2g).ravel()
        gphi = -diff[:, 0] * phi_t + c2i * np.einsum("ij,ij->i", diff[:, 1:], phi_x)
        extra = 1j * rho * gphi.reshape(grid.shape) * ci
    ph = inner(phase)
    source = -ph * (Lc + extra)
    disc = grid.dim == 2
    principal = SpaceTimeScalar(grid, ph * ci, disc=disc)
    source = SpaceTimeScalar(grid, np.where(np.isfinite(source), source, 0.0), disc=disc)
    if disc:
        mask = principal.region_mask()
        principal.values = np.where(mask, principal.values, 0.0)
        source.values = np.where(mask, source.values, 0.0)
    return principal, source


def _grad_phi_grid(chart, grid, t):
    spatial = grid.spatial_nodes()
    live = in_disc(spatial)
    px = np.zeros((len(spatial), 2))
    _, gx = chart.grad_phi(np.zeros(int(live.sum())), spatial[live])
    px[live] = gx
    return np.full(len(t), -1.0 / SQRT2), np.tile(px, (len(grid.t), 1))
