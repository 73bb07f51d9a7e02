"""Conformally Euclidean metrics on the closed unit disc and their geodesics.

The metric is ``g = c(x)**-2 (dx1**2 + dx2**2)`` with a positive conformal
factor ``c``.  Geodesics are integrated in arc length with a classical
fourth-order Runge-Kutta step and the boundary crossing is located by
bisection on ``|x|**2 - 1``.  All tracing routines are vectorised over rays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .exceptions import DomainError, TrappedRayError

_BISECT_TOL = 1e-14
_BOUNDARY_SLACK = 1e-9


def _as_points(x):
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


class MetricField:
    """Metric ``c(x)**-2 * delta`` on the unit disc.

    Parameters
    ----------
    conformal_factor : callable
        Maps points of shape ``(m, 2)`` to ``c`` values of shape ``(m,)``.
    grad_log : callable, optional
        Gradient of ``log c``; central differences are used when omitted.
    lap_log : callable, optional
        Euclidean Laplacian of ``log c``; central differences when omitted.
    domain_radius : float
        Points with Euclidean norm above this radius raise ``DomainError``.
    name : str
        Label used in reports and file metadata.
    """

    def __init__(self, conformal_factor, grad_log=None, lap_log=None, *,
                 domain_radius=1.5, name="custom", fd_step=1e-5):
        self._c = conformal_factor
        self._grad_log = grad_log
        self._lap_log = lap_log
        self.domain_radius = float(domain_radius)
        self.name = name
        self.fd_step = fd_step
        self.c_min = self._sample_c_min()
        if not np.isfinite(self.c_min) or self.c_min <= 0:
            raise ValueError(f"conformal factor must be positive on the disc (min {self.c_min:g})")

    # -- constructors -----------------------------------------------------
    @classmethod
    def euclidean(cls, domain_radius=1.5):
        return cls(lambda p: np.ones(len(p)),
                   lambda p: np.zeros((len(p), 2)),
                   lambda p: np.zeros(len(p)),
                   domain_radius=domain_radius, name="euclidean")

    @classmethod
    def gaussian_bump(cls, amplitude, width, domain_radius=1.5):
        """``c = 1 + amplitude * exp(-|x|^2 / (2 width^2))``."""
        a, w2 = float(amplitude), float(width) ** 2

        def c(p):
            return 1.0 + a * np.exp(-np.einsum("ij,ij->i", p, p) / (2 * w2))

        def grad_log(p):
            e = a * np.exp(-np.einsum("ij,ij->i", p, p) / (2 * w2))
            return (-e / w2 / (1.0 + e))[:, None] * p

        def lap_log(p):
            r2 = np.einsum("ij,ij->i", p, p)
            e = a * np.exp(-r2 / (2 * w2))
            cc = 1.0 + e
            lap_c = e * (r2 / w2 ** 2 - 2.0 / w2)
            grad_c2 = e ** 2 * r2 / w2 ** 2
            return lap_c / cc - grad_c2 / cc ** 2

        return cls(c, grad_log, lap_log, domain_radius=domain_radius,
                   name=f"gaussian-bump:{amplitude:g},{width:g}")

    @classmethod
    def preset(cls, spec):
        """Build a metric from ``"euclidean"`` or ``"gaussian-bump:A,W"``."""
        spec = spec.strip()
        if spec == "euclidean":
            return cls.euclidean()
        if spec.startswith("gaussian-bump"):
            _, _, args = spec.partition(":")
            try:
                amp, width = (float(s) for s in args.split(","))
            except ValueError:
                raise ValueError(f"expected 'gaussian-bump:amplitude,width', got {spec!r}") from None
            if width <= 0:
                raise ValueError("gaussian-bump width must be positive")
            return cls.gaussian_bump(amp, width)
        raise ValueError(f"unknown metric preset {spec!r}")

    @classmethod
    def from_grid(cls, values, extent, name="grid"):
        """Bicubic interpolant of ``c`` sampled on ``linspace(-extent, extent, n)``.

        ``values[i, j]`` is ``c(x_i, y_j)``.  The usable domain is the disc
        enlarged by one grid cell.
        """
        values = np.asarray(values, dtype=float)
        n0, n1 = values.shape
        xs = np.linspace(-extent, extent, n0)
        ys = np.linspace(-extent, extent, n1)
        cell = max(xs[1] - xs[0], ys[1] - ys[0])
        if extent < 1.0 + cell:
            raise ValueError("grid must cover the disc plus one cell")
        spline = RectBivariateSpline(xs, ys, values, kx=3, ky=3)

        def c(p):
            return spline.ev(p[:, 0], p[:, 1])

        def grad_log(p):
            cv = spline.ev(p[:, 0], p[:, 1])
            return np.stack([spline.ev(p[:, 0], p[:, 1], dx=1),
                             spline.ev(p[:, 0], p[:, 1], dy=1)], axis=1) / cv[:, None]

        def lap_log(p):
            cv = spline.ev(p[:, 0], p[:, 1])
            gx = spline.ev(p[:, 0], p[:, 1], dx=1)
            gy = spline.ev(p[:, 0], p[:, 1], dy=1)
            lap = spline.ev(p[:, 0], p[:, 1], dx=2) + spline.ev(p[:, 0], p[:, 1], dy=2)
            return lap / cv - (gx ** 2 + gy ** 2) / cv ** 2

        metric = cls(c, grad_log, lap_log, domain_radius=1.0 + cell, name=name)
        metric.grid_values = values
        metric.grid_extent = float(extent)
        return metric

    # -- pointwise quantities --------------------------------------------
    def _check_domain(self, p):
        r = np.sqrt(np.einsum("ij,ij->i", p, p))
        if np.any(r > self.domain_radius) or not np.all(np.isfinite(r)):
            raise DomainError(f"point outside metric domain (radius {r.max():.6g} > {self.domain_radius:g})")

    def c(self, x):
        p, single = _as_points(x)
        self._check_domain(p)
        out = np.asarray(self._c(p), dtype=float)
        return out[0] if single else out

    def grad_log_c(self, x):
        p, single = _as_points(x)
        self._check_domain(p)
        if self._grad_log is not None:
            out = np.asarray(self._grad_log(p), dtype=float)
        else:
            h = self.fd_step
            out = np.empty_like(p)
            for k in range(2):
                e = np.zeros(2)
                e[k] = h
                out[:, k] = (np.log(self._c(p + e)) - np.log(self._c(p - e))) / (2 * h)
        return out[0] if single else out

    def laplacian_log_c(self, x):
        p, single = _as_points(x)
        self._check_domain(p)
        if self._lap_log is not None:
            out = np.asarray(self._lap_log(p), dtype=float)
        else:
            h = 1e-4
            base = np.log(self._c(p))
            out = np.zeros(len(p))
            for k in range(2):
                e = np.zeros(2)
                e[k] = h
                out += (np.log(self._c(p + e)) - 2 * base + np.log(self._c(p - e))) / h ** 2
        return out[0] if single else out

    def gaussian_curvature(self, x):
        """Gaussian curvature ``K = c**2 * lap(log c)`` of the conformal metric."""
        return self.c(x) ** 2 * self.laplacian_log_c(x)

    def norm(self, x, v):
        """Riemannian length of vectors ``v`` based at ``x``."""
        p, single = _as_points(x)
        vv = np.atleast_2d(np.asarray(v, dtype=float))
        out = np.sqrt(np.einsum("ij,ij->i", vv, vv)) / self.c(p)
        return out[0] if single else out

    def christoffel(self, x):
        """Christoffel symbols ``gamma[k, i, j]`` at a single point."""
        g = self.grad_log_c(np.asarray(x, dtype=float).reshape(2))
        eye = np.eye(2)
        return -(np.einsum("ki,j->kij", eye, g) + np.einsum("kj,i->kij", eye, g)
                 - np.einsum("ij,k->kij", eye, g))

    def _sample_c_min(self):
        rr, th = np.meshgrid(np.linspace(0, 1, 33), np.linspace(0, 2 * np.pi, 64, endpoint=False))
        pts = np.stack([(rr * np.cos(th)).ravel(), (rr * np.sin(th)).ravel()], axis=1)
        return float(np.min(self._c(pts)))

    def __repr__(self):
        return f"MetricField({self.name!r})"


@dataclass(frozen=True)
class BoundaryRay:
    """Inward pointing unit vector at a boundary point of the disc.

    ``dir_angle`` is measured from the inward normal, so the impact
    parameter of the Euclidean chord is ``|sin(dir_angle)|``.
    """

    base_angle: float
    dir_angle: float
    point: np.ndarray
    direction: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        nu = self.point / np.linalg.norm(self.point)
        if not np.dot(self.direction, nu) < 0:
            raise ValueError("boundary ray must point strictly inward")
        if not self.weight > 0:
            raise ValueError("ray weight must be positive")

    @classmethod
    def from_angles(cls, base_angle, dir_angle, metric=None, weight=1.0):
        if not -np.pi / 2 < dir_angle < np.pi / 2:
            raise ValueError("dir_angle must lie in (-pi/2, pi/2)")
        y = np.array([np.cos(base_angle), np.sin(base_angle)])
        inward = -y
        tangent = np.array([-y[1], y[0]])
        speed = 1.0 if metric is None else float(metric.c(y))
        v = speed * (np.cos(dir_angle) * inward + np.sin(dir_angle) * tangent)
        return cls(float(base_angle), float(dir_angle), y, v, float(weight))


@dataclass(frozen=True)
class Geodesic:
    """Arc-length samples of a geodesic from entry to exit.

    Samples are uniform in ``r`` except for the final interval, which ends
    exactly on the boundary at ``r = exit_time``.
    """

    r: np.ndarray
    x: np.ndarray
    v: np.ndarray
    ray: BoundaryRay | None = None

    @property
    def exit_time(self):
        return float(self.r[-1])

    @property
    def exit_point(self):
        return self.x[-1]

    def __len__(self):
        return len(self.r)


def _rhs(metric, x, v):
    g = metric.grad_log_c(x)
    vg = np.einsum("ij,ij->i", v, g)
    vv = np.einsum("ij,ij->i", v, v)
    return 2.0 * vg[:, None] * v - vv[:, None] * g


def rk4_step(metric, x, v, h):
    """One RK4 step of the geodesic equation; ``h`` scalar or per-row."""
    h = np.asarray(h, dtype=float)
    if h.ndim:
        h = h[:, None]
    k1x, k1v = v, _rhs(metric, x, v)
    x2, v2 = x + 0.5 * h * k1x, v + 0.5 * h * k1v
    k2x, k2v = v2, _rhs(metric, x2, v2)
    x3, v3 = x + 0.5 * h * k2x, v + 0.5 * h * k2v
    k3x, k3v = v3, _rhs(metric, x3, v3)
    x4, v4 = x + h * k3x, v + h * k3v
    k4x, k4v = v4, _rhs(metric, x4, v4)
    xn = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    vn = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return xn, vn


def _outside(x):
    return np.einsum("ij,ij->i", x, x) - 1.0


def _bisect_exit(metric, x, v, h):
    lo = np.zeros(len(x))
    hi = np.full(len(x), float(h))
    while np.max(hi - lo) > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        xm, _ = rk4_step(metric, x, v, mid)
        pos = _outside(xm) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    sigma = 0.5 * (lo + hi)
    xe, ve = rk4_step(metric, x, v, sigma)
    return sigma, xe, ve


def shoot(metric, x0, v0, step, max_length=20.0):
    """Integrate geodesics from ``x0`` with velocities ``v0`` until they leave the disc.

    Returns a list of ``(r, x, v)`` sample arrays, one per starting state.
    """
    x = np.array(x0, dtype=float, copy=True)
    v = np.array(v0, dtype=float, copy=True)
    n = len(x)
    active = np.ones(n, dtype=bool)
    hist_x, hist_v = [x.copy()], [v.copy()]
    last = np.zeros(n, dtype=int)
    sig = np.zeros(n)
    xe = np.zeros((n, 2))
    ve = np.zeros((n, 2))
    k = 0
    while active.any():
        if (k + 1) * step > max_length:
            bad = np.flatnonzero(active)
            raise TrappedRayError(f"{len(bad)} geodesic(s) still inside after length {max_length:g}")
        idx = np.flatnonzero(active)
        xn, vn = rk4_step(metric, x[idx], v[idx], step)
        crossed = _outside(xn) > 0
        if crossed.any():
            ci = idx[crossed]
            s, xc, vc = _bisect_exit(metric, x[ci], v[ci], step)
            last[ci] = k
            sig[ci] = s
            xe[ci] = xc
            ve[ci] = vc
            active[ci] = False
        keep = idx[~crossed]
        x[keep] = xn[~crossed]
        v[keep] = vn[~crossed]
        hist_x.append(x.copy())
        hist_v.append(v.copy())
        k += 1
    hx = np.stack(hist_x)
    hv = np.stack(hist_v)
    out = []
    for i in range(n):
        m = last[i]
        r = np.arange(m + 1) * step
        xs, vs = hx[: m + 1, i], hv[: m + 1, i]
        if sig[i] > 1e-13:
            r = np.append(r, m * step + sig[i])
            xs = np.vstack([xs, xe[i]])
            vs = np.vstack([vs, ve[i]])
        else:
            xs = xs.copy()
            vs = vs.copy()
            xs[-1], vs[-1] = xe[i], ve[i]
        out.append((r, xs, vs))
    return out


def trace_geodesics(metric, rays, step=0.01, max_length=20.0):
    """Trace every ray in ``rays`` and return the list of ``Geodesic`` objects."""
    if step <= 0:
        raise ValueError("step must be positive")
    rays = list(rays)
    if not rays:
        return []
    x0 = np.stack([ray.point for ray in rays])
    v0 = np.stack([ray.direction for ray in rays])
    speed = metric.norm(x0, v0)
    if np.max(np.abs(speed - 1.0)) > 1e-9:
        raise ValueError("ray directions must have unit length in the metric")
    traced = shoot(metric, x0, v0, step, max_length)
    return [Geodesic(r, xs, vs, ray) for (r, xs, vs), ray in zip(traced, rays)]


def trace_geodesic(metric, ray, step=0.01, max_length=20.0):
    """Trace a single boundary ray."""
    return trace_geodesics(metric, [ray], step, max_length)[0]


def boundary_ray_grid(n_base, n_dir, metric=None):
    """Product grid on the inward boundary bundle with cosine-weighted cells.

    Base angles are ``2 pi i / n_base``; direction angles are cell midpoints
    of ``(-pi/2, pi/2)``.  The weight of each ray is
    ``cos(dir_angle) * (boundary length cell) * (angle cell)`` so that
    weighted sums approximate the usual measure on the inward bundle.
    """
    if n_base < 1 or n_dir < 1:
        raise ValueError("n_base and n_dir must be at least 1")
    d_base = 2 * np.pi / n_base
    d_dir = np.pi / n_dir
    rays = []
    for i in range(n_base):
        phi = i * d_base
        y = np.array([np.cos(phi), np.sin(phi)])
        c_y = 1.0 if metric is None else float(metric.c(y))
        for j in range(n_dir):
            alpha = -np.pi / 2 + (j + 0.5) * d_dir
            w = np.cos(alpha) * (d_base / c_y) * d_dir
            rays.append(BoundaryRay.from_angles(phi, alpha, metric, w))
    return rays


def _van_der_corput(n):
    out = np.zeros(n)
    for k in range(n):
        q, denom, x = k, 1.0, 0.0
        while q:
            denom *= 2
            q, rem = divmod(q, 2)
            x += rem / denom
        out[k] = x
    return out


def longest_geodesic_through(metric, x, n_dirs=64, step=0.01, max_length=20.0):
    """Longest sampled geodesic through interior point(s) ``x``.

    Directions are the first ``n_dirs`` terms of a van der Corput sequence
    on ``[0, pi)``, so the sampled sets are nested and the estimate is
    nondecreasing in ``n_dirs``.
    """
    pts, single = _as_points(x)
    if np.any(np.einsum("ij,ij->i", pts, pts) >= 1.0):
        raise DomainError("longest_geodesic_through needs interior points")
    angles = np.pi * _van_der_corput(n_dirs)
    m = len(pts)
    cvals = metric.c(pts)
    u = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    x0 = np.repeat(pts, n_dirs, axis=0)
    v0 = (cvals[:, None, None] * u[None]).reshape(-1, 2)
    fwd = shoot(metric, x0, v0, step, max_length)
    bwd = shoot(metric, x0, -v0, step, max_length)
    lengths = np.array([f[0][-1] + b[0][-1] for f, b in zip(fwd, bwd)]).reshape(m, n_dirs)
    out = lengths.max(axis=1)
    return float(out[0]) if single else out


def in_influence_set(metric, t, x, T, n_dirs=64, step=0.01):
    """Membership of ``(t, x)`` in ``{D_g(x) < t < T - D_g(x)}``."""
    d = longest_geodesic_through(metric, x, n_dirs=n_dirs, step=step)
    t = np.asarray(t, dtype=float)
    return (d < t) & (t < T - d)


def diameter_estimate(metric, n_base=32, n_dir=33, step=0.01):
    """Largest exit time over a boundary ray grid (odd ``n_dir`` includes normal rays)."""
    geos = trace_geodesics(metric, boundary_ray_grid(n_base, n_dir, metric), step)
    return max(g.exit_time for g in geos)


@dataclass
class SimplicityReport:
    ok: bool
    max_exit_time: float
    exit_map_injective: bool
    conjugate_free: bool
    boundary_convex: bool
    c_min: float

    def __str__(self):
        return (f"simple={self.ok} max_exit_time={self.max_exit_time:.6f} "
                f"injective={self.exit_map_injective} conjugate_free={self.conjugate_free} "
                f"convex={self.boundary_convex} c_min={self.c_min:.6g}")


def check_simplicity(metric, n_base=32, n_dir=32, step=0.01, max_length=20.0):
    """Empirical simplicity heuristic on a boundary ray grid.

    Checks that every ray exits, that exit angles are strictly monotone in
    the direction angle at each base point, that the scalar Jacobi field
    ``J'' + K J = 0`` with ``J(0)=0, J'(0)=1`` stays positive, and that the
    boundary circle has positive geodesic curvature.
    """
    rays = boundary_ray_grid(n_base, n_dir, metric)
    try:
        geos = trace_geodesics(metric, rays, step, max_length)
    except TrappedRayError:
        return SimplicityReport(False, np.inf, False, False, False, metric.c_min)

    injective = True
    for i in range(n_base):
        block = geos[i * n_dir:(i + 1) * n_dir]
        base = rays[i * n_dir].base_angle
        exits = np.array([np.arctan2(g.exit_point[1], g.exit_point[0]) for g in block])
        rel = np.mod(exits - base, 2 * np.pi)
        if not (np.all(np.diff(rel) < 0) or np.all(np.diff(rel) > 0)):
            injective = False
            break

    conj_free = True
    for g in geos:
        m = len(g.r)
        if m < 3:
            continue
        k = metric.gaussian_curvature(g.x)
        j_prev, j_cur = 0.0, step
        for n in range(1, m - 1):
            h = g.r[n + 1] - g.r[n]
            j_next = j_cur + (j_cur - j_prev) * h / step - h * step * k[n] * j_cur
            j_prev, j_cur = j_cur, j_next
            if j_cur <= 0:
                conj_free = False
                break
        if not conj_free:
            break

    th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    bd = np.stack([np.cos(th), np.sin(th)], axis=1)
    dr_log = np.einsum("ij,ij->i", metric.grad_log_c(bd), bd)
    convex = bool(np.all(metric.c(bd) * (1.0 - dr_log) > 0))

    max_exit = max(g.exit_time for g in geos)
    return SimplicityReport(injective and conj_free and convex, max_exit,
                            injective, conj_free, convex, metric.c_min)
