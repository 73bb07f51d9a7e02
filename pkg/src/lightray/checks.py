"""Acceptance checks shared by the test suite and the ``selftest`` command.

Every check returns a ``CheckResult`` with a pass flag, the measured
numbers and a one-line summary.  Test fields are fixed here so that the
CLI and the tests exercise the same inputs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import dnlab, geooptics
from .fields import SpaceTimeGrid, SpaceTimeOneForm, SpaceTimeScalar
from .gauge import check_gauge_equivalence, first_derivative
from .inversion import (LightOperator, TimeBasis, aligned_offsets, assemble_from_geodesics,
                        invert_light_transform_direct, invert_light_transform_moments,
                        relative_error, smooth_window)
from .manifold import MetricField, boundary_ray_grid, in_influence_set, trace_geodesics
from .slicing import slice_gap
from .transforms import light_sinogram, ray_transform


@dataclass
class CheckResult:
    name: str
    passed: bool
    summary: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: {self.summary} ({self.seconds:.1f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def observed_order(errors, factor=2.0):
    """Convergence orders ``log(e_k / e_{k+1}) / log(factor)``."""
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(factor)


# -- test fields --------------------------------------------------------------------

def poly_bump(u):
    """``(1 - u**2)**4`` on ``|u| < 1``: C3, compact support, cheap derivatives."""
    u = np.asarray(u, dtype=float)
    return np.clip(1.0 - u ** 2, 0.0, None) ** 4


def smooth_bump(u):
    """``exp(1 - 1/(1 - u**2))`` on ``|u| < 1`` (peak value 1)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    i = np.abs(u) < 1
    out[i] = np.exp(1.0 - 1.0 / (1.0 - u[i] ** 2))
    return out


def spatial_bump(p, center, radius):
    return smooth_bump(np.sqrt(np.sum((p - np.asarray(center)) ** 2, axis=1)) / radius)


class BumpPotential:
    """``psi = amp * B((t - tc)/wt) * B(|x - xc|/wx)`` with ``B = poly_bump`` and exact gradient."""

    def __init__(self, amp, tc, wt, xc, wx):
        self.amp, self.tc, self.wt = float(amp), float(tc), float(wt)
        self.xc, self.wx = np.asarray(xc, dtype=float), float(wx)

    def _parts(self, t, p):
        u = (np.asarray(t, dtype=float) - self.tc) / self.wt
        d = p - self.xc
        v2 = np.sum(d ** 2, axis=1) / self.wx ** 2
        bu = np.clip(1 - u ** 2, 0, None)
        bv = np.clip(1 - v2, 0, None)
        return u, d, bu, bv

    def __call__(self, t, p):
        _, _, bu, bv = self._parts(t, p)
        return self.amp * bu ** 4 * bv ** 4

    def gradient(self, t, p):
        u, d, bu, bv = self._parts(t, p)
        dt = self.amp * 4 * bu ** 3 * (-2 * u / self.wt) * bv ** 4
        dx = (self.amp * bu ** 4 * 4 * bv ** 3)[:, None] * (-2 * d / self.wx ** 2)
        return np.concatenate([dt[:, None], dx], axis=1)


def random_potentials(n, T, rng, diam=2.0, dim=2):
    """Random ``BumpPotential`` supported in ``{diam < t < T - diam}`` and inside the disc."""
    out = []
    for _ in range(n):
        wt = rng.uniform(0.3, 0.5 * (T - 2 * diam) - 0.1)
        tc = rng.uniform(diam + wt + 0.05, T - diam - wt - 0.05)
        wx = rng.uniform(0.2, 0.5)
        r = rng.uniform(0.0, 0.95 - wx)
        ang = rng.uniform(0, 2 * np.pi)
        xc = r * np.array([np.cos(ang), np.sin(ang)])[:dim]
        out.append(BumpPotential(rng.uniform(0.5, 2.0), tc, wt, xc, wx))
    return out


def reference_scalar_field(grid, basis):
    """Separable test field ``h0(x) p0(t) + h2(x) p2(t)`` with narrow spatial bumps."""
    nodes = grid.spatial_nodes()
    n = grid.shape[1]
    h = np.stack([spatial_bump(nodes, (0.2, 0.1), 0.3),
                  np.zeros(len(nodes)),
                  0.5 * spatial_bump(nodes, (-0.3, 0.2), 0.25)]).reshape(3, n, n)
    return basis.synthesize(grid, h)


def base_oneform(t, p):
    return np.stack([np.sin(t) * p[:, 0], np.cos(p[:, 1]) + 0 * t, p[:, 0] * p[:, 1]], axis=1)


def rotational_oneform(t, p):
    """Non-exact perturbation: a swirl ``(-y, x) g`` with a space-time bump ``g``."""
    g = smooth_bump((t - 3.0) / 0.8) * smooth_bump(np.sqrt(np.sum(p ** 2, axis=1)) / 0.6)
    return np.stack([0 * t, -p[:, 1] * g, p[:, 0] * g], axis=1)


def wave_bump(t, x, tc, xc, w):
    return poly_bump(np.sqrt((t - tc) ** 2 + (x - xc) ** 2) / w)


def wave_test_data(grid):
    """Forward and adjoint compatible boundary data for the 1-D identities."""
    f1 = grid.boundary_data(lambda t, x: poly_bump((t - 0.8) / 0.5) * (1 - x)
                            + poly_bump((t - 1.2) / 0.4) * x)
    f2 = grid.boundary_data(lambda t, x: poly_bump((t - 2.0) / 0.6) * (1 - x)
                            + 0.5 * poly_bump((t - 1.8) / 0.5) * x)
    return f1, f2


def wave_base_q(t, p):
    return 0.5 * np.sin(3 * p[:, 0]) * np.cos(t)


def wave_base_A(t, p):
    return np.stack([0.3 * np.cos(p[:, 0] + t), 0.2 * np.sin(2 * t - p[:, 0])], axis=1)


# -- criteria -------------------------------------------------------------------------

@_timed
def chord_check(n_base=64, n_dir=64, tol=1e-3, time_limit=10.0):
    """Ray transform of ``f = 1`` on the Euclidean disc against ``2 sqrt(1 - b**2)``."""
    m = MetricField.euclidean()
    t0 = time.perf_counter()
    rays = boundary_ray_grid(n_base, n_dir, m)
    geos = trace_geodesics(m, rays, step=0.01)
    sino = ray_transform(lambda p: np.ones(len(p)), geos)
    elapsed = time.perf_counter() - t0
    b = np.array([np.sin(r.dir_angle) for r in rays])
    exact = 2 * np.sqrt(1 - b ** 2)
    err = float(np.max(np.abs(sino.values - exact) / exact))
    ok = err <= tol and elapsed < time_limit
    return CheckResult("chord oracle", ok, f"max rel err {err:.2e} in {elapsed:.2f}s",
                       {"max_rel_error": err, "runtime": elapsed})


@_timed
def annihilation_check(n_psi=10, seed=0, T=8.0, n=32, n_base=32, n_dir=32, tol=1e-4):
    """Light ray transform of exact forms ``d psi`` with ``psi`` supported in the interior set."""
    m = MetricField.euclidean()
    diam = 2.0
    grid = SpaceTimeGrid(T, n, n)
    geos = trace_geodesics(m, boundary_ray_grid(n_base, n_dir, m), step=0.01)
    rng = np.random.default_rng(seed)
    s = np.linspace(-diam - 0.5, T + 0.5, 81)
    worst = 0.0
    for psi in random_potentials(n_psi, T, rng, diam):
        # corners of the support must lie in the interior set
        ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
        ring = psi.xc + psi.wx * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        ring = ring[np.sum(ring ** 2, axis=1) < 1]
        for tt in (psi.tc - psi.wt, psi.tc + psi.wt):
            if not np.all(in_influence_set(m, np.full(len(ring), tt), ring, T)):
                raise AssertionError("test potential leaves the interior set")
        B = SpaceTimeOneForm.from_function(grid, psi.gradient)
        L = light_sinogram(B, geos, s=s, exact=True)
        worst = max(worst, float(np.max(np.abs(L.values))) / (B.sup_norm() * diam))
    return CheckResult("gauge annihilation", worst <= tol,
                       f"max |L(d psi)| / (|d psi|_inf Diam) = {worst:.2e} over {n_psi} potentials",
                       {"max_ratio": worst})


@_timed
def slice_check(T=6.0, n=64, n_base=32, n_dir=32, tol=1e-3):
    """Fourier-slice identity for ``k = 0..3`` (corrected and printed remainder index)."""
    m = MetricField.euclidean()
    grid = SpaceTimeGrid(T, n, n)

    def func(t, p):
        return smooth_bump((t - 3.0) / 0.8) * smooth_bump(np.sqrt(np.sum(p ** 2, axis=1)) / 0.6)

    f = SpaceTimeScalar.from_function(grid, func, keep_func=False)
    geos = trace_geodesics(m, boundary_ray_grid(n_base, n_dir, m), step=0.01)
    L = light_sinogram(f, geos)
    corrected = [slice_gap(k, f, L, geos) for k in range(4)]
    printed = [slice_gap(k, f, L, geos, printed_index=True) for k in range(4)]
    ok = max(corrected) <= tol and all(printed[k] > corrected[k] for k in range(1, 4))
    return CheckResult("Fourier slice", ok,
                       "corrected " + " ".join(f"{g:.1e}" for g in corrected)
                       + " | printed " + " ".join(f"{g:.1e}" for g in printed),
                       {"corrected": corrected, "printed": printed})


@_timed
def scalar_roundtrip_check(T=8.0, n=64, n_rays=128, K=2, tol_moment=0.10, tol_direct=0.05,
                           tol_cross=0.10, iters=300):
    """Moment pipeline and direct least squares on the reference separable field."""
    m = MetricField.euclidean()
    grid = SpaceTimeGrid(T, n, n)
    basis = TimeBasis(grid.t, K, window=smooth_window(2.0, 6.0), center=4.0, half_width=2.0)
    f = reference_scalar_field(grid, basis)
    geos = trace_geodesics(m, boundary_ray_grid(n_rays, n_rays, m), step=0.01)
    L = light_sinogram(f, geos)
    op = assemble_from_geodesics(geos, n)
    fm, _ = invert_light_transform_moments(op, L, K, basis, grid)
    w0, w1 = int(np.floor(2.0 / grid.dt)), int(np.ceil(6.0 / grid.dt))
    fd, rep = invert_light_transform_direct(geos, grid, L, window=(w0, w1), iters=iters)
    mask = f.region_mask()
    em = relative_error(fm.values, f.values, mask)
    ed = relative_error(fd.values, f.values, mask)
    ec = relative_error(fd.values, fm.values, mask)
    ok = em <= tol_moment and ed <= tol_direct and ec <= tol_cross
    return CheckResult("scalar round trip", ok,
                       f"moment {em:.2%} direct {ed:.2%} cross {ec:.2%}",
                       {"moment": em, "direct": ed, "cross": ec, "iterations": rep.iterations})


@_timed
def gauge_recovery_check(T=6.0, n=64, tol=0.05):
    """``check_gauge_equivalence`` on an exact and on a rotational perturbation."""
    grid = SpaceTimeGrid(T, n, n)
    psi0 = BumpPotential(0.8, 3.0, 0.9, (0.1, -0.2), 0.5)
    A1 = SpaceTimeOneForm.from_function(grid, base_oneform)
    ps = SpaceTimeScalar.from_function(grid, psi0)
    A2 = A1 + SpaceTimeOneForm.from_function(grid, psi0.gradient)
    ok_exact, pot, res = check_gauge_equivalence(A1, A2)
    mask = ps.region_mask()
    err = relative_error(pot.psi.values, ps.values, mask)
    A3 = A1 + SpaceTimeOneForm.from_function(grid, rotational_oneform)
    ok_rot, pot3, res3 = check_gauge_equivalence(A1, A3)
    ok = ok_exact and err <= tol and not ok_rot
    return CheckResult("one-form up to gauge", ok,
                       f"exact: {ok_exact} psi err {err:.2%}; rotational: {ok_rot} "
                       f"(residual {res3:.2f})",
                       {"psi_error": err, "residual": res, "rot_residual": res3,
                        "rot_discrepancy": pot3.discrepancy})


@_timed
def go_residual_check(exact_tol=1e-12, numeric_tol=1e-6, order_tol=0.3):
    """Eikonal residuals (exact z-forms, numeric chart) and transport convergence order."""
    rng = np.random.default_rng(1)
    y = np.array([np.cos(2.5), np.sin(2.5)])
    v = -y + np.array([0.2, -0.1])
    euc = geooptics.EuclideanChart(y, v, 1.0)
    z = euc.beta_z(np.linspace(0.1, 2.4, 50))
    z[:, 1:] += rng.uniform(-0.1, 0.1, size=(50, 2))
    exact_form = np.linalg.inv(euc.metric_z_exact(z))[:, 1, 1]
    mink = geooptics.MinkowskiChart1D(0.8)
    zm = rng.uniform(-1, 2, size=(50, 2))
    e_exact = float(max(np.max(np.abs(exact_form)),
                        np.max(np.abs(geooptics.eikonal_residual(mink, zm)))))

    metric = MetricField.gaussian_bump(0.3, 0.4)
    chart = geooptics.NumericChart(metric, y, v, 1.0)
    zc = chart.beta_z(np.linspace(0.05, 2.2, 40))
    zc[:, 1:] += rng.uniform(-0.05, 0.05, size=(40, 2))
    e_num = float(np.max(np.abs(geooptics.eikonal_residual(chart, zc))))

    def A(t, p):
        return np.stack([0.3 * np.exp(-(t - 2) ** 2 - np.sum(p ** 2, axis=1)),
                         0.2 * p[:, 0], 0.1 * np.sin(p[:, 1])], axis=1)

    zp = np.linspace(-0.05, 0.05, 5)
    lo, hi = chart.beta_z(0.1)[0, 0], chart.beta_z(2.4)[0, 0]
    res = []
    for nz in (41, 81, 161):
        amps = geooptics.build_amplitudes(chart, A, A, 16, 0.1, np.linspace(lo, hi, nz), [zp, zp])
        res.append(max(np.max(np.abs(geooptics.transport_residual(amps, w))) for w in (1, 2)))
    orders = observed_order(res)
    ok = (e_exact <= exact_tol and e_num <= numeric_tol
          and np.all(np.abs(orders - 2) <= order_tol))
    return CheckResult("eikonal/transport", ok,
                       f"exact {e_exact:.1e} numeric {e_num:.1e} transport orders "
                       + " ".join(f"{o:.2f}" for o in orders),
                       {"exact": e_exact, "numeric": e_num, "transport": res,
                        "orders": orders.tolist()})


def mollifier_test_form(t, p):
    """Continuous, Hoelder-1/2 one-form on ``[0, 1]**2``."""
    x = p[:, 0]
    w = (np.sqrt(np.abs(x - 0.5)) * np.sqrt(np.abs(t - 0.5))
         * np.exp(-((x - 0.5) ** 2 + (t - 0.5) ** 2) / 0.02))
    return np.stack([w, 0.5 * w], axis=1)


@_timed
def mollifier_check(n=1025, rhos=(16, 256, 4096), factor=2.0):
    """``|A_rho - A|_L2`` decreasing and ``max|grad A_rho| / rho**(1/4)`` within ``factor``."""
    grid = SpaceTimeGrid(1.0, n, n, dim=1)
    A = SpaceTimeOneForm.from_function(grid, mollifier_test_form)
    dists, ratios = [], []
    for rho in rhos:
        Ar = geooptics.mollify(A, rho)
        dists.append((Ar - A).l2_norm())
        g = max(np.max(np.abs(first_derivative(c, h, ax)))
                for c in Ar.components for ax, h in ((0, grid.dt), (1, grid.dx)))
        ratios.append(g / rho ** 0.25)
    dec = all(b < a for a, b in zip(dists, dists[1:]))
    spread = max(ratios) / min(ratios)
    ok = dec and spread <= factor
    return CheckResult("mollifier estimates", ok,
                       "L2 " + " ".join(f"{d:.2e}" for d in dists)
                       + f"; grad/rho^(1/4) spread {spread:.2f}",
                       {"l2": dists, "grad_ratios": ratios, "spread": spread})


@_timed
def identity_check(sizes=(128, 256, 512), tol=1e-2, order_tol=0.3):
    """Integral identity gaps for q-only and A-only perturbations under refinement."""
    def dq(t, p):
        return wave_base_q(t, p) + 2.0 * wave_bump(t, p[:, 0], 1.5, 0.5, 0.35)

    def dA(t, p):
        return wave_base_A(t, p) + np.stack([1.5 * wave_bump(t, p[:, 0], 1.5, 0.5, 0.35),
                                             -1.0 * wave_bump(t, p[:, 0], 1.4, 0.6, 0.3)], axis=1)

    gq, ga = [], []
    for n in sizes:
        g = dnlab.WaveGrid1D(n, 3.0)
        f1, f2 = wave_test_data(g)
        gq.append(dnlab.integral_identity_check(wave_base_A, wave_base_q, wave_base_A, dq,
                                                f1, f2, g).gap)
        ga.append(dnlab.integral_identity_check(wave_base_A, wave_base_q, dA, wave_base_q,
                                                f1, f2, g).gap)
    oq, oa = observed_order(gq), observed_order(ga)
    ok = (gq[-1] <= tol and ga[-1] <= tol and np.all(np.abs(oq - 2) <= order_tol)
          and np.all(np.abs(oa - 2) <= order_tol))
    return CheckResult("integral identity", ok,
                       f"q gap {gq[-1]:.1e} orders {np.round(oq, 2).tolist()}; "
                       f"A gap {ga[-1]:.1e} orders {np.round(oa, 2).tolist()}",
                       {"q_gaps": gq, "A_gaps": ga})


@_timed
def dn_gauge_check(sizes=(128, 256, 512), tol=1e-2, probe_tol=1e-3, order_tol=0.3):
    """DN map invariance under a gauge transform and the probe identity."""
    psi = BumpPotential(0.8, 1.5, 0.4, (0.5,), 0.4)
    gaps, probes = [], []
    for n in sizes:
        g = dnlab.WaveGrid1D(n, 3.0)
        f1, _ = wave_test_data(g)
        res = dnlab.gauge_invariance_check(wave_base_A, wave_base_q, psi, f1, g)
        gaps.append(res.gap)
        probes.append(res.probe_error)
    orders = observed_order(gaps)
    ok = gaps[-1] <= tol and probes[-1] <= probe_tol and np.all(np.abs(orders - 2) <= order_tol)
    return CheckResult("DN gauge invariance", ok,
                       f"gap {gaps[-1]:.1e} orders {np.round(orders, 2).tolist()} "
                       f"probe {probes[-1]:.1e}",
                       {"gaps": gaps, "probe_errors": probes})


def reduction_oneform(t, p):
    return np.stack([0.3 * wave_bump(t, p[:, 0], 1.5, 0.5, 0.35), np.zeros(len(t))], axis=1)


def reduction_potential(t, p):
    return 0.5 * wave_bump(t, p[:, 0], 1.5, 0.5, 0.35)


@_timed
def reduction_check(rho_list=(8, 16, 32, 64, 128), n_x=1024, tol=0.10):
    """Asymptotic reduction for a one-form and a potential perturbation."""
    grid = dnlab.WaveGrid1D(n_x, 3.0)
    tabs = [dnlab.reduction_experiment(reduction_oneform, rho_list=rho_list, grid=grid),
            dnlab.potential_reduction_experiment(reduction_potential, rho_list=rho_list,
                                                 grid=grid)]
    ok = True
    parts = []
    for tab in tabs:
        g, r = tab.gaps, tab.remainders
        ok &= bool(np.all(np.diff(g) < 0) and g[-1] <= tol and np.all(np.diff(r) < 0))
        parts.append(f"{tab.kind}: gap {g[-1]:.1e} remainder {r[-1]:.1e} "
                     f"extrapolation {tab.extrapolation_gap:.1e}")
    return CheckResult("asymptotic reduction", ok, "; ".join(parts),
                       {"tables": [t.text() for t in tabs]})


@_timed
def localization_check(T=6.0, n=48, n_base=24, n_dir=24):
    """Light sinogram vanishes exactly for ``s`` outside ``[s_min - Diam, s_max]``."""
    m = MetricField.euclidean()
    diam = 2.0
    grid = SpaceTimeGrid(T, n, n)

    def func(t, p):
        return smooth_bump((t - 3.0) / 0.6) * (1 + p[:, 0]) * smooth_bump(
            np.sqrt(np.sum(p ** 2, axis=1)) / 0.8)

    f = SpaceTimeScalar.from_function(grid, func, keep_func=False)
    smin, smax = f.time_support()
    geos = trace_geodesics(m, boundary_ray_grid(n_base, n_dir, m), step=0.01)
    s = np.linspace(smin - diam - 1.5, smax + 1.5, 121)
    L = light_sinogram(f, geos, s=s)
    outside = (s < smin - diam) | (s > smax)
    inside_max = float(np.max(np.abs(L.values[~outside])))
    bad = int(np.count_nonzero(L.values[outside]))
    ok = bad == 0 and inside_max > 0
    return CheckResult("localization", ok,
                       f"{bad} nonzero values among {int(outside.sum()) * len(geos)} outside the window",
                       {"nonzero_outside": bad, "inside_max": inside_max})


ALL_CHECKS = [chord_check, annihilation_check, slice_check, scalar_roundtrip_check,
              gauge_recovery_check, go_residual_check, mollifier_check, identity_check,
              dn_gauge_check, reduction_check, localization_check]
