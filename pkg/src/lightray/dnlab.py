"""One-dimensional wave laboratory.

Solves ``L_{A,q} u = -box u + A(grad u) + q u = F`` on ``(0, T) x [0, 1]`` with
``box = -d_t**2 + d_x**2`` and ``A(grad u) = -b u_t + a u_x`` for
``A = b dt + a dx``, i.e.

    u_tt = u_xx + b u_t - a u_x - q u + F,

with zero initial data and Dirichlet data at ``x = 0, 1``.  The scheme is
the centered leapfrog with the damping term averaged over ``n +- 1``; at
CFL ratio one it transports ``f(t - x)`` exactly.

Coefficients may be ``None``, callables ``A(t, p) -> (m, 2)`` and
``q(t, p) -> (m,)`` with ``p`` of shape ``(m, 1)``, or sampled
``SpaceTimeOneForm``/``SpaceTimeScalar`` fields on the matching grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .exceptions import ConfigurationError, InstabilityError
from .fields import SpaceTimeGrid, SpaceTimeOneForm, SpaceTimeScalar
from .gauge import gauge_transform
from .geooptics import MinkowskiChart1D, SQRT2, build_amplitudes, chi, go_probe


class WaveGrid1D:
    """Uniform grid on ``[0, T] x [0, 1]`` with ``dt = T / n_t <= cfl * dx``."""

    def __init__(self, n_x=512, T=3.0, cfl=1.0):
        if cfl > 1.0 + 1e-12:
            raise ConfigurationError(f"CFL ratio {cfl:g} exceeds 1")
        if n_x < 4:
            raise ConfigurationError("need at least four spatial cells")
        self.n_x = int(n_x)
        self.T = float(T)
        self.cfl = float(cfl)
        self.dx = 1.0 / self.n_x
        self.n_t = int(np.ceil(self.T / (cfl * self.dx) - 1e-9))
        self.dt = self.T / self.n_t
        self.x = np.linspace(0.0, 1.0, self.n_x + 1)
        self.t = np.linspace(0.0, self.T, self.n_t + 1)

    @property
    def shape(self):
        return (self.n_t + 1, self.n_x + 1)

    @property
    def ratio(self):
        return self.dt / self.dx

    def spacetime(self):
        """The matching ``SpaceTimeGrid`` (dim 1)."""
        return SpaceTimeGrid(self.T, self.n_t + 1, self.n_x + 1, dim=1)

    def points(self):
        tt, xx = np.meshgrid(self.t, self.x, indexing="ij")
        return tt.ravel(), xx.ravel()[:, None]

    def refine(self):
        return WaveGrid1D(2 * self.n_x, self.T, self.cfl)

    def boundary_data(self, func):
        """Sample ``func(t, x)`` at ``x = 0`` and ``x = 1``; shape (2, n_t + 1)."""
        return np.stack([np.asarray(func(self.t, np.zeros_like(self.t))),
                         np.asarray(func(self.t, np.ones_like(self.t)))])


# -- coefficient sampling --------------------------------------------------------

def _sample_oneform(A, grid):
    if A is None:
        z = np.zeros(grid.shape)
        return z, z
    if isinstance(A, SpaceTimeOneForm):
        if A.components.shape[1:] == grid.shape:
            return A.components[0], A.components[1]
        t, p = grid.points()
        comps = A.evaluate(t, p)
    else:
        t, p = grid.points()
        comps = np.asarray(A(t, p))
    return comps[:, 0].reshape(grid.shape), comps[:, 1].reshape(grid.shape)


def _sample_scalar(q, grid):
    if q is None:
        return np.zeros(grid.shape)
    if isinstance(q, SpaceTimeScalar):
        if q.values.shape == grid.shape:
            return q.values
        t, p = grid.points()
        return q.evaluate(t, p).reshape(grid.shape)
    t, p = grid.points()
    return np.asarray(q(t, p)).reshape(grid.shape)


def divergence(b, a, grid):
    """``div(b dt + a dx) = -b_t + a_x`` by second-order differences."""
    return (-np.gradient(b, grid.dt, axis=0, edge_order=2)
            + np.gradient(a, grid.dx, axis=1, edge_order=2))


# -- solvers -----------------------------------------------------------------------

def _leapfrog(b, a, qv, F, left, right, grid):
    n_t, dt, dx = grid.n_t, grid.dt, grid.dx
    lam2 = (dt / dx) ** 2
    dtype = np.result_type(b, a, qv, left, right, F if F is not None else 0.0)
    u = np.zeros(grid.shape, dtype=dtype)
    u[0, 0], u[0, -1] = left[0], right[0]
    # zero initial data: u^1 = dt**2 / 2 * F^0 in the interior
    if F is not None:
        u[1, 1:-1] = 0.5 * dt ** 2 * F[0, 1:-1]
    u[1, 0], u[1, -1] = left[1], right[1]
    for n in range(1, n_t):
        un, um = u[n], u[n - 1]
        half = 0.5 * dt * b[n, 1:-1]
        lap = lam2 * (un[2:] - 2 * un[1:-1] + un[:-2])
        adv = a[n, 1:-1] * (un[2:] - un[:-2]) * (dt ** 2 / (2 * dx))
        rhs = 2 * un[1:-1] - (1 + half) * um[1:-1] + lap - adv - dt ** 2 * qv[n, 1:-1] * un[1:-1]
        if F is not None:
            rhs = rhs + dt ** 2 * F[n, 1:-1]
        u[n + 1, 1:-1] = rhs / (1 - half)
        u[n + 1, 0], u[n + 1, -1] = left[n + 1], right[n + 1]
    if not np.all(np.isfinite(u)):
        raise InstabilityError("wave solve produced non-finite values")
    return u


def _check_data(f, grid, at_end):
    f = np.asarray(f)
    if f.shape != (2, grid.n_t + 1):
        raise ConfigurationError(f"boundary data must have shape (2, {grid.n_t + 1})")
    scale = max(np.max(np.abs(f)), 1e-300)
    edge = f[:, -2:] if at_end else f[:, :2]
    if np.max(np.abs(edge)) > 1e-8 * scale:
        which = "final" if at_end else "initial"
        raise ConfigurationError(f"boundary data must vanish near the {which} time")
    return f


def solve_forward(A, q, f, grid, source=None):
    """Solve ``L_{A,q} u = source`` with ``u = f`` on the boundary and zero initial data.

    ``f`` has shape (2, n_t + 1): rows are the data at ``x = 0`` and ``x = 1``.
    """
    f = _check_data(f, grid, at_end=False)
    b, a = _sample_oneform(A, grid)
    qv = _sample_scalar(q, grid)
    return _leapfrog(b, a, qv, source, f[0], f[1], grid)


def solve_adjoint(A, q, h, grid, source=None):
    """Solve ``L*_{A,q} v = -box v - A(grad v) + (q - div A) v = source`` with final conditions.

    Time reversal ``w(tau) = v(T - tau)`` turns this into a forward problem
    with coefficients ``b(T - tau)``, ``-a`` and ``q - div A``.
    """
    h = _check_data(h, grid, at_end=True)
    b, a = _sample_oneform(A, grid)
    qv = _sample_scalar(q, grid) - divergence(b, a, grid)
    F = None if source is None else source[::-1]
    w = _leapfrog(b[::-1], -a[::-1], qv[::-1], F, h[0, ::-1], h[1, ::-1], grid)
    return w[::-1]


def energy(u, grid):
    """Conserved leapfrog energy ``E^{n+1/2}`` for the free wave equation."""
    du = (u[1:] - u[:-1]) / grid.dt
    gx1 = np.diff(u[1:], axis=1) / grid.dx
    gx0 = np.diff(u[:-1], axis=1) / grid.dx
    kin = 0.5 * np.sum(np.abs(du[:, 1:-1]) ** 2, axis=1) * grid.dx
    pot = 0.5 * np.real(np.sum(gx1 * np.conj(gx0), axis=1)) * grid.dx
    return kin + pot


# -- DN maps -------------------------------------------------------------------------

@dataclass
class DNSample:
    """Boundary input and flux on ``(0, T) x {0, 1}``; rows are ``x = 0`` and ``x = 1``."""

    t: np.ndarray
    f: np.ndarray
    out: np.ndarray

    def pair(self, h):
        """Bilinear boundary pairing of the output with data ``h`` (trapezoid in time)."""
        return boundary_pairing(self.out, h, self.t)

    def norm(self):
        return float(np.sqrt(np.real(boundary_pairing(self.out, np.conj(self.out), self.t))))


def boundary_pairing(g, h, t):
    return complex(np.sum(np.trapezoid(np.asarray(g) * np.asarray(h), t, axis=1)))


# one-sided first-derivative weights at the boundary node, by stencil width
_ONE_SIDED = {3: np.array([-3.0, 4.0, -1.0]) / 2.0,
              5: np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0}


def _normal_derivative(u, grid, stencil=3):
    w = _ONE_SIDED[stencil]
    k = len(w)
    d0 = -(u[:, :k] @ w) / grid.dx
    d1 = -(u[:, ::-1][:, :k] @ w) / grid.dx
    return np.stack([d0, d1])


def _flux(u, a, grid, sign, stencil=3):
    dn = _normal_derivative(u, grid, stencil)
    nu = np.array([-1.0, 1.0])[:, None]
    trace = np.stack([u[:, 0], u[:, -1]])
    a_b = np.stack([a[:, 0], a[:, -1]])
    return dn + sign * 0.5 * a_b * nu * trace


def dn_map(A, q, f, grid, u=None, stencil=3):
    """``f -> d_nu u - (A nu / 2) u`` on both boundary points.

    ``stencil`` is the width of the one-sided normal derivative: 3 (second
    order) or 5 (fourth order).
    """
    if u is None:
        u = solve_forward(A, q, f, grid)
    _, a = _sample_oneform(A, grid)
    return DNSample(grid.t, np.asarray(f), _flux(u, a, grid, -1.0, stencil))


def adjoint_dn_map(A, q, h, grid, v=None, stencil=3):
    """``h -> d_nu v + (A nu / 2) v`` for the adjoint problem."""
    if v is None:
        v = solve_adjoint(A, q, h, grid)
    _, a = _sample_oneform(A, grid)
    return DNSample(grid.t, np.asarray(h), _flux(v, a, grid, 1.0, stencil))


# -- identities ------------------------------------------------------------------------

def _trapz2(vals, grid):
    return complex(np.trapezoid(np.trapezoid(vals, grid.x, axis=1), grid.t))


def _a_grad(b, a, u, grid):
    ut = np.gradient(u, grid.dt, axis=0, edge_order=2)
    ux = np.gradient(u, grid.dx, axis=1, edge_order=2)
    return -b * ut + a * ux


@dataclass
class IdentityResult:
    lhs: complex
    rhs: complex
    gap: float

    def text(self):
        return f"lhs {self.lhs:.10e}\nrhs {self.rhs:.10e}\ngap {self.gap:.3e}\n"


def integral_identity_check(A1, q1, A2, q2, f1, f2, grid):
    """Both sides of the boundary-interior identity for ``A = A1 - A2``, ``q = q1 - q2``.

    ``lhs = <(Lambda_1 - Lambda_2) f1, f2>`` from boundary fluxes;
    ``rhs = int 1/2 (u2 A(grad u1) - u1 A(grad u2)) + (q - div A / 2) u1 u2``
    with ``u1`` the forward solution for set 1 and ``u2`` the adjoint
    solution for set 2.
    """
    u1 = solve_forward(A1, q1, f1, grid)
    w = solve_forward(A2, q2, f1, grid)
    u2 = solve_adjoint(A2, q2, f2, grid)
    lam1 = dn_map(A1, q1, f1, grid, u=u1)
    lam2 = dn_map(A2, q2, f1, grid, u=w)
    lhs = boundary_pairing(lam1.out - lam2.out, f2, grid.t)
    b1, a1 = _sample_oneform(A1, grid)
    b2, a2 = _sample_oneform(A2, grid)
    b, a = b1 - b2, a1 - a2
    qd = _sample_scalar(q1, grid) - _sample_scalar(q2, grid)
    dens = (0.5 * (u2 * _a_grad(b, a, u1, grid) - u1 * _a_grad(b, a, u2, grid))
            + (qd - 0.5 * divergence(b, a, grid)) * u1 * u2)
    rhs = _trapz2(dens, grid)
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return IdentityResult(lhs, rhs, abs(lhs - rhs) / scale)


@dataclass
class GaugeResult:
    gap: float
    probe_error: float
    probe: tuple

    def text(self):
        return (f"dn_gap {self.gap:.3e}\nprobe_error {self.probe_error:.3e}\n"
                f"probe_t {self.probe[0]:.6f}\nprobe_x {self.probe[1]:.6f}\n")


def gauge_invariance_check(A, q, psi, f, grid, probe=None):
    """Relative DN gap between ``(A, q)`` and its gauge transform by ``psi``.

    ``A`` and ``q`` are callables (or ``None``), ``psi(t, p)`` a callable
    vanishing near the boundary.  Also compares ``u_tilde`` with
    ``exp(psi / 2) u`` at a probe point (default: where ``|psi u|`` peaks).
    """
    st = grid.spacetime()
    A_f = A if A is not None else (lambda t, p: np.zeros((len(t), 2)))
    q_f = q if q is not None else (lambda t, p: np.zeros(len(t)))
    A_s = SpaceTimeOneForm.from_function(st, A_f, disc=False)
    q_s = SpaceTimeScalar.from_function(st, q_f, disc=False)
    psi_s = SpaceTimeScalar.from_function(st, psi, disc=False)
    A_t, q_t = gauge_transform(A_s, q_s, psi_s)
    A_new = SpaceTimeOneForm.from_function(st, A_t.func, disc=False)
    q_new = SpaceTimeScalar.from_function(st, q_t.func, disc=False)

    u = solve_forward(A_s, q_s, f, grid)
    ut = solve_forward(A_new, q_new, f, grid)
    lam = dn_map(A_s, q_s, f, grid, u=u)
    lam_t = dn_map(A_new, q_new, f, grid, u=ut)
    diff = DNSample(grid.t, lam.f, lam_t.out - lam.out)
    gap = diff.norm() / max(lam.norm(), 1e-300)

    pv = psi_s.values
    if probe is None:
        k = np.unravel_index(np.argmax(np.abs(pv * u)), grid.shape)
    else:
        k = (int(round(probe[0] / grid.dt)), int(round(probe[1] / grid.dx)))
    ref = np.exp(0.5 * pv[k]) * u[k]
    perr = abs(ut[k] - ref) / max(abs(ref), 1e-300)
    return GaugeResult(float(gap), float(perr), (grid.t[k[0]], grid.x[k[1]]))


# -- asymptotic reduction -----------------------------------------------------------

@dataclass
class ReductionRow:
    rho: float
    value: complex
    target: complex
    gap: float
    remainder: float


@dataclass
class ReductionTable:
    """Per-rho pairing values against their principal-part targets."""

    kind: str
    rows: list
    tube_ratios: dict = field(default_factory=dict)
    extrapolated: float = np.nan
    oracle: float = np.nan

    @property
    def extrapolation_gap(self):
        return abs(self.extrapolated - self.oracle) / max(abs(self.oracle), 1e-300)

    @property
    def gaps(self):
        return np.array([r.gap for r in self.rows])

    @property
    def remainders(self):
        return np.array([r.remainder for r in self.rows])

    def text(self):
        lines = [f"# {self.kind}", "rho value_re value_im target_re target_im gap remainder"]
        for r in self.rows:
            lines.append(f"{r.rho:g} {r.value.real:.10e} {r.value.imag:.10e} "
                         f"{r.target.real:.10e} {r.target.imag:.10e} {r.gap:.6e} {r.remainder:.6e}")
        for d, v in self.tube_ratios.items():
            lines.append(f"tube_ratio delta={d:g} {v:.10e}")
        lines.append(f"extrapolated {self.extrapolated:.10e}")
        lines.append(f"oracle {self.oracle:.10e}")
        lines.append(f"extrapolation_gap {self.extrapolation_gap:.6e}")
        return "\n".join(lines) + "\n"


def _check_tube(s0, delta, T):
    # chi(z1 / delta) vanishes for |z1| >= delta / 2, i.e. |t - x - s0| >= delta / sqrt(2)
    w = delta / SQRT2
    if not (s0 - w > 0 and 1 + s0 + w < T):
        raise ConfigurationError(
            f"probe tube around t = x + {s0:g} with delta {delta:g} meets t = 0 or t = {T:g}")


def _amplitudes(chart, A1, A2, rho, delta, grid):
    lo = -0.1
    hi = (grid.T + 1.0) / SQRT2 + 0.1
    z0 = np.arange(lo, hi + grid.dx, grid.dx / SQRT2)
    z1 = np.linspace(-0.5 * delta, 0.5 * delta, 129)
    return build_amplitudes(chart, A1, A2, rho, delta, z0, [z1])


def _tube_integral(chart, A1, A2, delta, grid, weight):
    """``int weight c1 c2 dt dx`` over the wave grid with amplitudes for width ``delta``."""
    amps = _amplitudes(chart, A1, A2, 1.0, delta, grid)
    t, p = grid.points()
    z = chart.to_z(t, p)
    c12 = amps.amplitude(z, 1) * amps.amplitude(z, 2)
    return _trapz2(weight * c12.reshape(grid.shape), grid).real


def _probe_pair(chart, A1, A2, rho, delta, grid, st):
    amps = _amplitudes(chart, A1, A2, rho, delta, grid)
    p1, _ = go_probe(chart, amps, rho, st, which=1)
    p2, _ = go_probe(chart, amps, rho, st, which=2)
    return p1.values, p2.values


def _traces(u):
    return np.stack([u[:, 0], u[:, -1]])


def _chi_sq_mass(delta):
    return delta * quad(lambda u: chi(u) ** 2, -0.5, 0.5, points=[-0.25, 0.25])[0]


def _line_integral(func, s0, z1=0.0):
    """``int (t, x) on the line t = x + s0 - sqrt(2) z1``, ``x`` in ``[0, 1]``, of func."""
    def g(x):
        return float(np.ravel(func(np.array([x + s0 - SQRT2 * z1]), np.array([[x]])))[0])

    return quad(g, 0.0, 1.0, limit=200)[0]


def _richardson(values):
    # errors are even in delta, so O(delta**2) leading term
    d, v = zip(*sorted(values.items(), reverse=True))
    r1 = (4 * v[1] - v[0]) / 3
    r2 = (4 * v[2] - v[1]) / 3
    return (16 * r2 - r1) / 15


def _default_grid(grid):
    return WaveGrid1D(1024, 3.0) if grid is None else grid


def _pairing(chart, coeffs1, coeffs2, rho, delta, grid, stencil):
    """``<(Lambda_1 - Lambda_2) f1, f2>`` for the probes of width ``delta`` on ``grid``.

    ``coeffs1`` and ``coeffs2`` are ``(A, q)`` pairs; amplitudes are built
    with the one-forms of the two sets.  Returns the value, both principal
    parts and the forward solution for set 1.
    """
    (A1, q1), (A2, q2) = coeffs1, coeffs2
    p1, p2 = _probe_pair(chart, A1, A2, rho, delta, grid, grid.spacetime())
    f1, f2 = _traces(p1), _traces(p2)
    u1 = solve_forward(A1, q1, f1, grid)
    w = solve_forward(A2, q2, f1, grid)
    value = boundary_pairing(dn_map(A1, q1, f1, grid, u=u1, stencil=stencil).out
                             - dn_map(A2, q2, f1, grid, u=w, stencil=stencil).out, f2, grid.t)
    return value, p1, p2, u1


def _run_rows(chart, coeffs1, coeffs2, rho_list, delta, grid, stencil, richardson, target_of):
    coarse = WaveGrid1D(grid.n_x // 2, grid.T, grid.cfl) if richardson else None
    rows = []
    for rho in rho_list:
        value, p1, p2, u1 = _pairing(chart, coeffs1, coeffs2, rho, delta, grid, stencil)
        if coarse is not None:
            # the scheme error expands in even powers of h at fixed CFL ratio
            v_c = _pairing(chart, coeffs1, coeffs2, rho, delta, coarse, stencil)[0]
            value = (4 * value - v_c) / 3
        target = target_of(rho, p1 * p2)
        rem = float(np.max(np.sqrt(np.trapezoid(np.abs(u1 - p1) ** 2, grid.x, axis=1))))
        rows.append(ReductionRow(float(rho), value, target,
                                 abs(value - target) / max(abs(target), 1e-300), rem))
    return rows


def reduction_experiment(A, q=None, s0=1.0, rho_list=(8, 16, 32, 64, 128), grid=None,
                         delta=0.8, A2=None, stencil=3, richardson=True):
    """Pairing ``<(Lambda_{A1,q} - Lambda_{A2,q}) f1, f2>`` for GO probes along ``t = x + s0``.

    ``A1 = A2 + A`` (``A2`` defaults to zero); ``f1, f2`` are boundary traces of
    ``exp(+-i rho Phi) c_{1,2}``.  The target is
    ``i rho int A(grad Phi) c1 c2 dV``.  With ``richardson`` the value is
    extrapolated from ``grid`` and the grid with half as many cells.

    The tube ratio ``int A(grad Phi) c1 c2 dV / (2 int chi(z1/delta)**2 dz1)``
    tends to ``exp(L A / 2) - 1`` as ``delta -> 0``; it is extrapolated from
    ``delta, delta/2, delta/4``.
    """
    grid = _default_grid(grid)
    _check_tube(s0, delta, grid.T)
    zero = lambda t, p: np.zeros((len(t), 2))
    A2f = A2 if A2 is not None else zero

    def A1f(t, p):
        return np.asarray(A(t, p)) + np.asarray(A2f(t, p))

    chart = MinkowskiChart1D(s0)
    b, a = _sample_oneform(A, grid)
    a0 = (b + a) / SQRT2
    rows = _run_rows(chart, (A1f, q), (A2f, q), rho_list, delta, grid, stencil, richardson,
                     lambda rho, c12: 1j * rho * _trapz2(a0 * c12, grid))

    def pair0(t, p):
        c = np.asarray(A(t, p))
        return (c[:, 0] + c[:, 1])

    ratios = {}
    for d in (delta, delta / 2, delta / 4):
        ratios[d] = _tube_integral(chart, A1f, A2f, d, grid, a0) / (2 * _chi_sq_mass(d))
    extrap = _richardson(ratios)
    oracle = float(np.expm1(0.5 * _line_integral(pair0, s0)))
    return ReductionTable("one-form", rows, ratios, extrap, oracle)


def potential_reduction_experiment(q, s0=1.0, rho_list=(8, 16, 32, 64, 128), grid=None,
                                   delta=0.8, A=None, stencil=3, richardson=True):
    """Pairing ``<(Lambda_{A,q} - Lambda_{A,0}) f1, f2>`` against ``int q c1 c2 dV``.

    The tube ratio ``int q c1 c2 dV / int chi(z1/delta)**2 dz1`` tends to
    ``sqrt(2) L q`` when ``A`` is zero (the ``z0`` parameter runs ``sqrt(2)``
    times faster than the light-ray parameter) and is compared after
    division by ``sqrt(2)``.
    """
    grid = _default_grid(grid)
    _check_tube(s0, delta, grid.T)
    chart = MinkowskiChart1D(s0)
    qv = _sample_scalar(q, grid)
    rows = _run_rows(chart, (A, q), (A, None), rho_list, delta, grid, stencil, richardson,
                     lambda rho, c12: _trapz2(qv * c12, grid))
    ratios = {}
    for d in (delta, delta / 2, delta / 4):
        ratios[d] = _tube_integral(chart, A, A, d, grid, qv) / _chi_sq_mass(d) / SQRT2
    extrap = _richardson(ratios)
    oracle = _line_integral(q, s0)
    return ReductionTable("potential", rows, ratios, extrap, oracle)
