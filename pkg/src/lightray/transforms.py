"""Geodesic and light ray transforms on sampled fields.

All line integrals use the composite trapezoid rule on the arc-length
samples of a traced ``Geodesic``.  The light ray through ``(s, ray)`` is
``r -> (r + s, gamma(r))`` with velocity ``(1, gamma'(r))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import (ScalarFieldM, SpaceTimeOneForm, SpaceTimeScalar, in_disc,
                     multilinear_weights, time_stencil)


def trapezoid_weights(r):
    """Weights ``w`` with ``sum(w * g) == trapezoid(g, r)``."""
    r = np.asarray(r, dtype=float)
    w = np.zeros_like(r)
    if len(r) < 2:
        return w
    d = np.diff(r)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def _spatial_values(f, points):
    if isinstance(f, ScalarFieldM):
        return f(points)
    if callable(f):
        p = np.atleast_2d(points)
        return np.where(in_disc(p), np.asarray(f(p)), 0.0)
    raise TypeError("expected a ScalarFieldM or a callable")


@dataclass
class Sinogram:
    """Values of a transform over a list of boundary rays."""

    values: np.ndarray
    rays: list
    n_base: int | None = None
    n_dir: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (len(self.rays),):
            raise ValueError("one sinogram value per ray expected")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sinogram values must be finite")

    @property
    def weights(self):
        return np.array([r.weight for r in self.rays])


@dataclass
class LightSinogram:
    """Values ``L f(s_k, ray_j)`` stored as ``values[k, j]``."""

    values: np.ndarray
    s: np.ndarray
    rays: list
    n_base: int | None = None
    n_dir: int | None = None
    exit_times: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        self.s = np.asarray(self.s, dtype=float)
        if self.values.shape != (len(self.s), len(self.rays)):
            raise ValueError("values must have shape (len(s), len(rays))")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sinogram values must be finite")

    @property
    def s_range(self):
        return float(self.s[0]), float(self.s[-1])

    @property
    def weights(self):
        return np.array([r.weight for r in self.rays])


# -- spatial transforms ----------------------------------------------------

def geodesic_transform(f, geo):
    """Trapezoid quadrature of ``f`` along a geodesic."""
    return complex_or_float(np.sum(trapezoid_weights(geo.r) * _spatial_values(f, geo.x)))


def ray_transform(f, geos):
    """``geodesic_transform`` over a list of geodesics, as a ``Sinogram``."""
    vals = np.array([geodesic_transform(f, g) for g in geos])
    return Sinogram(vals, [g.ray for g in geos])


def geodesic_transform_oneform(a, geo):
    """Integral of ``a_i(x(r)) x'^i(r) dr``.

    ``a`` is a callable returning ``(m, 2)`` components or a pair of
    ``ScalarFieldM`` components.
    """
    if callable(a):
        comps = np.asarray(a(geo.x))
        comps = np.where(in_disc(geo.x)[:, None], comps, 0.0)
    else:
        comps = np.stack([_spatial_values(ai, geo.x) for ai in a], axis=1)
    pairing = np.einsum("ij,ij->i", comps, geo.v)
    return complex_or_float(np.sum(trapezoid_weights(geo.r) * pairing))


def remainder_transform(j, f, geo):
    """Quadrature of ``(i r)**j f(x(r)) dr`` for ``j >= 1``."""
    if j < 1:
        raise ValueError("remainder order must be at least 1")
    vals = _spatial_values(f, geo.x)
    return complex(np.sum(trapezoid_weights(geo.r) * (1j * geo.r) ** j * vals))


# -- light ray transforms ----------------------------------------------------

def light_transform_scalar(f, s, geo):
    """``integral_0^tau f(r + s, x(r)) dr`` for a ``SpaceTimeScalar``."""
    vals = f.evaluate(geo.r + s, geo.x)
    return complex_or_float(np.sum(trapezoid_weights(geo.r) * vals))


def light_transform_oneform(B, s, geo):
    """``integral_0^tau b + a_i x'^i`` evaluated at ``(r + s, x(r))``."""
    comps = B.evaluate(geo.r + s, geo.x)
    pairing = comps[:, 0] + np.einsum("ij,ij->i", comps[:, 1:], geo.v)
    return complex_or_float(np.sum(trapezoid_weights(geo.r) * pairing))


def complex_or_float(z):
    z = complex(z)
    return z.real if z.imag == 0 else z


def _ray_time_profile(field, geo):
    """Space-interpolated samples ``G[k, n]`` at every time node of the grid."""
    grid = field.grid
    idx, w = multilinear_weights(grid.axes, geo.x)
    w = np.where(in_disc(geo.x)[:, None], w, 0.0) if field.disc else w
    if isinstance(field, SpaceTimeOneForm):
        n_t = len(grid.t)
        comps = field.components.reshape(field.components.shape[0], n_t, -1)
        G = np.einsum("nc,knc->kn", w, comps[0][:, idx])
        for i in range(grid.dim):
            G = G + np.einsum("nc,knc->kn", w, comps[1 + i][:, idx]) * geo.v[:, i]
        return G
    vals = field.values.reshape(len(grid.t), -1)
    return np.einsum("nc,knc->kn", w, vals[:, idx])


def _light_row_fast(field, geo, s):
    G = _ray_time_profile(field, geo)
    t = s[:, None] + geo.r[None, :]
    idx, w = time_stencil(field.grid.t, t, field.time_order)
    cols = np.arange(len(geo.r))[None, :, None]
    vals = np.sum(w * G[idx, cols], axis=-1)
    return vals @ trapezoid_weights(geo.r)


def _light_row_exact(field, geo, s):
    t = (s[:, None] + geo.r[None, :]).ravel()
    pts = np.tile(geo.x, (len(s), 1))
    comps = field.evaluate(t, pts)
    if isinstance(field, SpaceTimeOneForm):
        v = np.tile(geo.v, (len(s), 1))
        vals = comps[:, 0] + np.einsum("ij,ij->i", comps[:, 1:], v)
    else:
        vals = comps
    return vals.reshape(len(s), -1) @ trapezoid_weights(geo.r)


def default_s_grid(f, geos):
    """Offsets on the time lattice covering ``[s_min - tau_max, s_max]``.

    ``(s_min, s_max)`` is the open time support of ``f``; outside this
    window the light transform vanishes identically.
    """
    grid = f.grid
    if isinstance(f, SpaceTimeOneForm):
        support = SpaceTimeScalar(grid, np.abs(f.components).sum(axis=0),
                                  time_order=f.time_order).time_support()
    else:
        support = f.time_support()
    dt = grid.dt
    if support is None:
        return np.array([0.0])
    tau = max(g.exit_time for g in geos)
    k0 = int(np.floor((support[0] - tau) / dt))
    k1 = int(np.ceil(support[1] / dt))
    return np.arange(k0, k1 + 1) * dt


def light_sinogram(f, geos, s=None, exact=None):
    """Light ray transform over ``s`` offsets and traced geodesics.

    ``f`` is a ``SpaceTimeScalar`` or ``SpaceTimeOneForm``.  Sampled fields
    use multilinear interpolation; ``exact=True`` evaluates the analytic
    callback when one is attached.
    """
    if s is None:
        s = default_s_grid(f, geos)
    s = np.asarray(s, dtype=float)
    use_exact = f.func is not None if exact is None else exact
    row = _light_row_exact if use_exact else _light_row_fast
    vals = np.stack([row(f, g, s) for g in geos], axis=1)
    if not np.iscomplexobj(vals) or np.all(vals.imag == 0):
        vals = np.real(vals)
    return LightSinogram(vals, s, [g.ray for g in geos],
                         exit_times=np.array([g.exit_time for g in geos]))
