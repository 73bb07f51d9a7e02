"""Time-Fourier moments and the Fourier-slice identity for light ray data.

Convention: ``f_hat(tau, x) = integral exp(-i tau t) f(t, x) dt``.  The k-th
derivative at ``tau = 0`` is the moment ``m_k(x) = integral (-i t)**k f dt``.
Differentiating ``L f_hat(tau) = integral_0^tau exp(i tau r) f_hat(tau, gamma(r)) dr``
k times at zero gives

    d^k L f_hat(0) = I(m_k) + sum_{j<k} binom(k, j) R_{k-j}(m_j),

with ``R_j g = integral (i r)**j g(gamma(r)) dr``.
"""

from __future__ import annotations

import warnings
from math import comb

import numpy as np

from .fields import ScalarFieldM
from .transforms import geodesic_transform, remainder_transform, trapezoid_weights


class MomentField(ScalarFieldM):
    """Complex spatial field ``m_k(x)`` carrying its order ``k``."""

    def __init__(self, values, extent=1.0, k=0):
        super().__init__(values, extent, order=1)
        self.k = k


def _time_quadrature(f, kernel):
    w = trapezoid_weights(f.grid.t) * kernel
    return np.tensordot(w, f.values, axes=(0, 0))


def time_fourier(f, tau):
    """``integral exp(-i tau t) f(t, x) dt`` as a complex ``ScalarFieldM``."""
    vals = _time_quadrature(f, np.exp(-1j * tau * f.grid.t))
    return ScalarFieldM(vals, f.grid.extent)


def moment_slice(k, f):
    """Moment ``integral (-i t)**k f(t, x) dt``."""
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    vals = _time_quadrature(f, (-1j * f.grid.t) ** k)
    if k == 0 and not np.iscomplexobj(f.values):
        vals = np.real(vals)
    return MomentField(vals, f.grid.extent, k)


def sinogram_moment(k, L, ray=None):
    """``integral (-i s)**k L f(s, ray) ds`` for one ray index or all rays."""
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    vals = L.values if ray is None else L.values[:, ray]
    edge = np.max(np.abs(vals[[0, -1]]))
    if edge > 1e-12:
        warnings.warn(f"s-grid does not cover the support window (edge value {edge:.3g})",
                      RuntimeWarning, stacklevel=2)
    w = trapezoid_weights(L.s) * (-1j * L.s) ** k
    return np.tensordot(w, vals, axes=(0, 0))


def slice_identity_rhs(k, f, geo, printed_index=False, moments=None):
    """Right side of the slice identity on one geodesic.

    ``printed_index=True`` evaluates the variant that pairs every remainder
    term with ``m_k`` instead of ``m_j``; it is kept only to document that
    this variant does not match the left side.
    """
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    if moments is None:
        moments = [moment_slice(j, f) for j in range(k + 1)]
    total = complex(geodesic_transform(moments[k], geo))
    for j in range(k):
        m = moments[k] if printed_index else moments[j]
        total += comb(k, j) * remainder_transform(k - j, m, geo)
    return total


def slice_identity_rhs_all(k, f, geos, printed_index=False):
    """``slice_identity_rhs`` over a list of geodesics."""
    moments = [moment_slice(j, f) for j in range(k + 1)]
    return np.array([slice_identity_rhs(k, f, g, printed_index, moments) for g in geos])


def slice_gap(k, f, L, geos, printed_index=False):
    """Max relative gap between sinogram moments and the slice identity."""
    lhs = sinogram_moment(k, L)
    rhs = slice_identity_rhs_all(k, f, geos, printed_index)
    scale = np.max(np.abs(lhs))
    if scale == 0:
        return float(np.max(np.abs(rhs)))
    return float(np.max(np.abs(lhs - rhs)) / scale)
