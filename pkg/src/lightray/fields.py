"""Sampled scalar fields and one-forms on the disc and on space-time slabs.

Spatial samples live on a uniform Cartesian grid.  Nodes outside the disc
are kept as ghost values so that interpolation near the boundary is not
biased toward zero; evaluation at points outside the disc returns zero.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.interpolate import RectBivariateSpline

_DISC_TOL = 1e-9


def linear_stencil(axis, x):
    """Left node index and fractional offset of ``x`` on a uniform ``axis``.

    Returns ``(i, theta, inside)``; points outside the axis range are
    flagged and get ``i = 0, theta = 0``.
    """
    x = np.asarray(x, dtype=float)
    h = axis[1] - axis[0]
    u = (x - axis[0]) / h
    n = len(axis)
    inside = (u >= -1e-12) & (u <= n - 1 + 1e-12)
    i = np.clip(np.floor(u).astype(int), 0, n - 2)
    theta = np.clip(u - i, 0.0, 1.0)
    i = np.where(inside, i, 0)
    theta = np.where(inside, theta, 0.0)
    return i, theta, inside


def time_stencil(axis, t, order=3):
    """Interpolation stencil in time with zero extension beyond the axis.

    ``order=1`` is linear; ``order=3`` is the symmetric four-point Lagrange
    kernel, which reproduces cubic polynomials.  Returns ``(idx, w)`` of
    shape ``(..., order + 1)``; nodes outside the axis get weight zero and
    index 0, and so do points outside ``[axis[0], axis[-1]]``.
    """
    t = np.asarray(t, dtype=float)
    n = len(axis)
    u = (t - axis[0]) / (axis[1] - axis[0])
    inside = (u >= -1e-12) & (u <= n - 1 + 1e-12)
    i = np.clip(np.floor(u).astype(int), 0, n - 1)
    th = np.where(inside, u - i, 0.0)
    if order == 1:
        offsets = (0, 1)
        w = np.stack([1.0 - th, th], axis=-1)
    elif order == 3:
        offsets = (-1, 0, 1, 2)
        w = np.stack([-th * (th - 1) * (th - 2) / 6,
                      (th + 1) * (th - 1) * (th - 2) / 2,
                      -(th + 1) * th * (th - 2) / 2,
                      (th + 1) * th * (th - 1) / 6], axis=-1)
    else:
        raise ValueError("time interpolation order must be 1 or 3")
    idx = i[..., None] + np.array(offsets)
    valid = (idx >= 0) & (idx < n) & inside[..., None]
    return np.where(valid, idx, 0), np.where(valid, w, 0.0)


def multilinear_weights(axes, coords):
    """Flat node indices and weights of multilinear interpolation.

    Parameters
    ----------
    axes : sequence of 1-D uniform arrays
    coords : array (m, d)

    Returns
    -------
    idx, w : arrays (m, 2**d)
        Row-major flat indices into the grid and matching weights.  Rows of
        points outside the grid box have all weights zero.
    """
    coords = np.atleast_2d(coords)
    shape = tuple(len(a) for a in axes)
    strides = np.array([int(np.prod(shape[k + 1:])) for k in range(len(shape))])
    parts = [linear_stencil(a, coords[:, k]) for k, a in enumerate(axes)]
    inside = np.logical_and.reduce([p[2] for p in parts])
    corners = list(itertools.product((0, 1), repeat=len(axes)))
    m = len(coords)
    idx = np.zeros((m, len(corners)), dtype=np.int64)
    w = np.ones((m, len(corners)))
    for c, corner in enumerate(corners):
        for k, (i, th, _) in enumerate(parts):
            idx[:, c] += (i + corner[k]) * strides[k]
            w[:, c] *= th if corner[k] else (1.0 - th)
    w[~inside] = 0.0
    return idx, w


def spatial_axis(n, extent=1.0):
    return np.linspace(-extent, extent, n)


def in_disc(points):
    p = np.atleast_2d(points)
    return np.einsum("ij,ij->i", p, p) <= (1.0 + _DISC_TOL) ** 2


class ScalarFieldM:
    """Scalar field on the unit disc sampled on ``linspace(-extent, extent, n)**2``.

    Parameters
    ----------
    values : array (n, n)
        ``values[i, j] = f(x_i, y_j)``.
    extent : float
    order : {1, 3}
        Bilinear (default) or bicubic spline interpolation.
    """

    def __init__(self, values, extent=1.0, order=1):
        values = np.asarray(values)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("values must be a square 2-D array")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if order not in (1, 3):
            raise ValueError("order must be 1 or 3")
        if extent < 1.0:
            raise ValueError("grid must cover the unit disc")
        self.values = values
        self.extent = float(extent)
        self.order = order
        self.axis = spatial_axis(values.shape[0], extent)
        self._spline = None

    @classmethod
    def from_function(cls, func, n, extent=1.0, order=1):
        """Sample ``func(points) -> (m,)`` at every grid node."""
        ax = spatial_axis(n, extent)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        vals = np.asarray(func(np.stack([X.ravel(), Y.ravel()], axis=1))).reshape(n, n)
        return cls(vals, extent, order)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def spacing(self):
        return self.axis[1] - self.axis[0]

    def nodes(self):
        X, Y = np.meshgrid(self.axis, self.axis, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def disc_mask(self):
        return in_disc(self.nodes()).reshape(self.values.shape)

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.order == 1:
            idx, w = multilinear_weights([self.axis, self.axis], p)
            out = np.sum(w * self.values.ravel()[idx], axis=1)
        else:
            if self._spline is None:
                if np.iscomplexobj(self.values):
                    raise ValueError("bicubic interpolation needs real values")
                self._spline = RectBivariateSpline(self.axis, self.axis, self.values, kx=3, ky=3)
            out = self._spline.ev(p[:, 0], p[:, 1])
        return np.where(in_disc(p), out, 0.0)

    def with_values(self, values):
        return ScalarFieldM(values, self.extent, self.order)

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def __mul__(self, a):
        return self.with_values(a * self.values)

    __rmul__ = __mul__

    def l2_norm(self):
        """Discrete L2 norm over nodes inside the disc."""
        mask = self.disc_mask()
        return float(np.sqrt(np.sum(np.abs(self.values[mask]) ** 2) * self.spacing ** 2))


class SpaceTimeGrid:
    """Uniform grid ``t in [0, T]`` times a spatial box.

    ``dim = 2`` gives the square ``[-extent, extent]**2`` around the unit disc;
    ``dim = 1`` gives the interval ``[x0, x1]``.
    """

    def __init__(self, T, n_t, n_x, dim=2, extent=1.0, interval=(0.0, 1.0)):
        if T <= 0 or n_t < 2 or n_x < 2:
            raise ValueError("need T > 0 and at least two nodes per axis")
        self.T = float(T)
        self.dim = dim
        self.t = np.linspace(0.0, T, n_t)
        if dim == 2:
            ax = spatial_axis(n_x, extent)
            self.axes = [ax, ax]
        elif dim == 1:
            self.axes = [np.linspace(interval[0], interval[1], n_x)]
        else:
            raise ValueError("dim must be 1 or 2")
        self.extent = extent

    @property
    def dt(self):
        return self.t[1] - self.t[0]

    @property
    def dx(self):
        return self.axes[0][1] - self.axes[0][0]

    @property
    def shape(self):
        return (len(self.t),) + tuple(len(a) for a in self.axes)

    def mesh(self):
        """Arrays ``(t, x1[, x2])`` of full grid shape."""
        return np.meshgrid(self.t, *self.axes, indexing="ij")

    def spatial_nodes(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cell_volume(self):
        return self.dt * self.dx ** self.dim

    def same_as(self, other):
        return (self.shape == other.shape and np.allclose(self.t, other.t)
                and all(np.allclose(a, b) for a, b in zip(self.axes, other.axes)))


def _interp_spacetime(grid, values, t, p, time_order):
    sidx, sw = multilinear_weights(grid.axes, p)
    tidx, tw = time_stencil(grid.t, t, time_order)
    flat = values.reshape(len(grid.t), -1)
    out = np.zeros(len(t), dtype=values.dtype if np.iscomplexobj(values) else float)
    for a in range(tidx.shape[1]):
        rows = flat[tidx[:, a]]
        out += tw[:, a] * np.sum(sw * np.take_along_axis(rows, sidx, axis=1), axis=1)
    return out


def _region_mask(grid, t, p, disc):
    t = np.asarray(t, dtype=float)
    ok = (t >= -1e-12) & (t <= grid.T + 1e-12)
    if grid.dim == 2 and disc:
        ok &= in_disc(p)
    return ok


class SpaceTimeScalar:
    """Sampled ``f(t, x)`` on a ``SpaceTimeGrid``, zero outside ``[0, T] x M``.

    Parameters
    ----------
    grid : SpaceTimeGrid
    values : array of ``grid.shape``
    func : callable, optional
        Exact ``func(t, points)``; when given, ``evaluate`` uses it instead
        of multilinear interpolation.
    disc : bool
        Zero-extend outside the unit disc (2-D grids).
    time_order : {1, 3}
        Linear or cubic Lagrange interpolation in time.  The cubic kernel
        makes discrete time moments up to order three commute exactly with
        time shifts.
    """

    time_order = 3

    def __init__(self, grid, values, func=None, disc=True, time_order=3):
        values = np.asarray(values)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.grid = grid
        self.values = values
        self.func = func
        self.disc = disc
        self.time_order = time_order

    @classmethod
    def from_function(cls, grid, func, keep_func=True, disc=True):
        mesh = grid.mesh()
        t = mesh[0].ravel()
        p = np.stack([m.ravel() for m in mesh[1:]], axis=1)
        vals = np.asarray(func(t, p)).reshape(grid.shape)
        return cls(grid, vals, func if keep_func else None, disc)

    def evaluate(self, t, points, exact=None):
        """Values at space-time points ``(t[m], points[m, d])``."""
        t = np.asarray(t, dtype=float).ravel()
        p = np.atleast_2d(np.asarray(points, dtype=float))
        use_exact = self.func is not None if exact is None else exact
        mask = _region_mask(self.grid, t, p, self.disc)
        if use_exact:
            out = np.asarray(self.func(t, p))
        else:
            out = _interp_spacetime(self.grid, self.values, t, p, self.time_order)
        return np.where(mask, out, 0.0)

    def time_support(self, tol=0.0):
        """Open interval outside of which interpolated values vanish in time."""
        nz = np.flatnonzero(np.max(np.abs(self.values.reshape(len(self.grid.t), -1)), axis=1) > tol)
        if nz.size == 0:
            return None
        reach = self.grid.dt * (2 if self.time_order == 3 else 1)
        return self.grid.t[nz[0]] - reach, self.grid.t[nz[-1]] + reach

    def with_values(self, values, func=None):
        return SpaceTimeScalar(self.grid, values, func, self.disc, self.time_order)

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def __mul__(self, a):
        return self.with_values(a * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def region_mask(self):
        """Nodes inside ``[0, T] x M``."""
        if self.grid.dim == 2 and self.disc:
            m = in_disc(self.grid.spatial_nodes()).reshape(self.grid.shape[1:])
            return np.broadcast_to(m, self.grid.shape)
        return np.ones(self.grid.shape, dtype=bool)

    def l2_norm(self):
        v = np.where(self.region_mask(), self.values, 0.0)
        return float(np.sqrt(np.sum(np.abs(v) ** 2) * self.grid.cell_volume()))


class SpaceTimeOneForm:
    """One-form ``b dt + a_i dx^i`` sampled on a ``SpaceTimeGrid``.

    ``components[0]`` is ``b`` and ``components[1:]`` are the spatial
    components ``a_i``.  ``func(t, points)`` may return exact components of
    shape ``(m, 1 + d)``.
    """

    def __init__(self, grid, components, func=None, disc=True, time_order=3):
        components = np.asarray(components)
        if components.shape != (grid.dim + 1,) + grid.shape:
            raise ValueError("components must have shape (1 + dim,) + grid.shape")
        if not np.all(np.isfinite(components)):
            raise ValueError("one-form values must be finite")
        self.grid = grid
        self.components = components
        self.func = func
        self.disc = disc
        self.time_order = time_order

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.dim + 1,) + grid.shape))

    @classmethod
    def from_function(cls, grid, func, keep_func=True, disc=True):
        mesh = grid.mesh()
        t = mesh[0].ravel()
        p = np.stack([m.ravel() for m in mesh[1:]], axis=1)
        vals = np.asarray(func(t, p))
        comps = np.moveaxis(vals, -1, 0).reshape((grid.dim + 1,) + grid.shape)
        return cls(grid, comps, func if keep_func else None, disc)

    @property
    def b(self):
        return SpaceTimeScalar(self.grid, self.components[0], disc=self.disc,
                               time_order=self.time_order)

    def a(self, i):
        return SpaceTimeScalar(self.grid, self.components[1 + i], disc=self.disc,
                               time_order=self.time_order)

    def evaluate(self, t, points, exact=None):
        """Components at space-time points, shape ``(m, 1 + d)``."""
        t = np.asarray(t, dtype=float).ravel()
        p = np.atleast_2d(np.asarray(points, dtype=float))
        use_exact = self.func is not None if exact is None else exact
        mask = _region_mask(self.grid, t, p, self.disc)
        if use_exact:
            out = np.asarray(self.func(t, p))
        else:
            out = np.stack([_interp_spacetime(self.grid, c, t, p, self.time_order)
                            for c in self.components], axis=1)
        return np.where(mask[:, None], out, 0.0)

    def with_components(self, components, func=None):
        return SpaceTimeOneForm(self.grid, components, func, self.disc, self.time_order)

    def __add__(self, other):
        return self.with_components(self.components + other.components)

    def __sub__(self, other):
        return self.with_components(self.components - other.components)

    def __mul__(self, a):
        return self.with_components(a * self.components)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_components(-self.components)

    def l2_norm(self):
        mask = SpaceTimeScalar(self.grid, self.components[0], disc=self.disc).region_mask()
        v = np.where(mask, self.components, 0.0)
        return float(np.sqrt(np.sum(np.abs(v) ** 2) * self.grid.cell_volume()))

    def sup_norm(self):
        """Max over nodes of the Euclidean norm of the component vector."""
        mask = SpaceTimeScalar(self.grid, self.components[0], disc=self.disc).region_mask()
        mag = np.sqrt(np.sum(np.abs(self.components) ** 2, axis=0))
        return float(np.max(np.where(mask, mag, 0.0)))
