"""scikit-learn style wrappers around the transform inversions.

Both estimators take a sinogram as ``X`` in ``fit``; rays are re-traced
from the ones stored in the sinogram, so the metric must match the one
used to produce the data.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ConfigurationError
from .fields import SpaceTimeGrid
from .inversion import (TimeBasis, assemble_from_geodesics, invert_geodesic_transform,
                        invert_light_transform_direct, invert_light_transform_moments,
                        smooth_window)
from .manifold import MetricField, trace_geodesics
from .transforms import light_sinogram


def _metric(m):
    return MetricField.preset(m) if isinstance(m, str) else m


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise ConfigurationError(f"{type(est).__name__} is not fitted yet")


class GeodesicRayInverter(BaseEstimator):
    """Tikhonov inversion of the geodesic ray transform on an ``n x n`` grid.

    Attributes after ``fit``: ``operator_``, ``image_`` (``ScalarFieldM``),
    ``report_`` (``SolveReport``).
    """

    def __init__(self, metric="euclidean", n=64, lam=None, iters=200, tol=1e-8, step=0.01):
        self.metric = metric
        self.n = n
        self.lam = lam
        self.iters = iters
        self.tol = tol
        self.step = step

    def fit(self, X, y=None):
        geos = trace_geodesics(_metric(self.metric), X.rays, self.step)
        self.operator_ = assemble_from_geodesics(geos, self.n)
        self.image_, self.report_ = invert_geodesic_transform(self.operator_, X, self.lam,
                                                              self.iters, self.tol)
        return self

    def predict(self, X=None):
        """Forward transform of the fitted image over the fitted rays."""
        _check_fitted(self, "image_")
        return self.operator_.apply(self.image_)

    def score(self, X, y=None):
        """Negative relative data residual of the fitted image."""
        _check_fitted(self, "image_")
        s = np.asarray(X.values)
        return -float(np.linalg.norm(self.predict() - s) / np.linalg.norm(s))


class LightRayInverter(BaseEstimator):
    """Recover a space-time scalar field from light ray data.

    ``method="moments"`` runs the time-moment pipeline with a windowed
    polynomial basis of order ``K``; ``method="direct"`` solves the
    regularized least squares problem on all grid values in the window.
    The window defaults to ``(Diam, T - Diam)``, the time extent of the
    interior set on a disc of diameter ``diam``.
    """

    def __init__(self, metric="euclidean", T=8.0, n_t=64, n_x=64, method="moments", K=2,
                 lam=None, iters=300, tol=1e-8, diam=2.0, step=0.01, memory_cap_mb=2048,
                 max_condition=1e8):
        self.metric = metric
        self.T = T
        self.n_t = n_t
        self.n_x = n_x
        self.method = method
        self.K = K
        self.lam = lam
        self.iters = iters
        self.tol = tol
        self.diam = diam
        self.step = step
        self.memory_cap_mb = memory_cap_mb
        self.max_condition = max_condition

    def _window(self):
        lo, hi = self.diam, self.T - self.diam
        if not hi > lo:
            raise ConfigurationError("T must exceed twice the diameter")
        return lo, hi

    def fit(self, X, y=None):
        lo, hi = self._window()
        self.grid_ = SpaceTimeGrid(self.T, self.n_t, self.n_x)
        self.geodesics_ = trace_geodesics(_metric(self.metric), X.rays, self.step)
        if self.method == "moments":
            self.basis_ = TimeBasis(self.grid_.t, self.K, window=smooth_window(lo, hi),
                                    center=0.5 * (lo + hi), half_width=0.5 * (hi - lo))
            op = assemble_from_geodesics(self.geodesics_, self.n_x)
            self.field_, self.report_ = invert_light_transform_moments(
                op, X, self.K, self.basis_, self.grid_, self.lam, self.iters, self.tol,
                max_condition=self.max_condition)
        elif self.method == "direct":
            w = (int(np.floor(lo / self.grid_.dt)), int(np.ceil(hi / self.grid_.dt)))
            self.field_, self.report_ = invert_light_transform_direct(
                self.geodesics_, self.grid_, X, self.lam, self.iters, self.tol, window=w,
                memory_cap=int(self.memory_cap_mb * 2 ** 20))
        else:
            raise ConfigurationError(f"unknown method {self.method!r}")
        return self

    def predict(self, X):
        """Light sinogram of the fitted field at the offsets of ``X``."""
        _check_fitted(self, "field_")
        return light_sinogram(self.field_, self.geodesics_, s=X.s).values

    def score(self, X, y=None):
        """Negative relative data residual of the fitted field."""
        v = np.asarray(X.values)
        return -float(np.linalg.norm(self.predict(X) - v) / np.linalg.norm(v))
