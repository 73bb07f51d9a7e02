"""Command line interface.

Exit codes: 0 success, 1 validation error (bad configuration, input file
or failed self-test), 2 numerical failure (non-convergence, instability,
trapped rays, ill conditioning).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import checks, dnlab, geooptics
from .config import dump_config, load_config, require_interior_time
from .exceptions import (ConditioningError, ConfigurationError, DomainError, GridFormatError,
                         InstabilityError, LightrayError, MemoryCapError,
                         TrappedRayError)
from .fields import ScalarFieldM, SpaceTimeGrid, SpaceTimeOneForm, SpaceTimeScalar
from .gauge import check_gauge_equivalence
from .gridfile import GridFile, from_field, from_sinogram, load_grid, save_grid
from .inversion import TimeBasis, relative_error, smooth_window
from .manifold import (MetricField, boundary_ray_grid, check_simplicity, diameter_estimate,
                       trace_geodesics)
from .slicing import slice_gap
from .transforms import LightSinogram, Sinogram, light_sinogram, ray_transform
from .estimators import LightRayInverter

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class NumericalFailure(LightrayError):
    """Raised by a command when an iteration did not converge."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# -- shared setup -------------------------------------------------------------------

def _metric(cfg):
    spec = cfg["metric"]
    if spec.endswith(".bin"):
        g = load_grid(spec)
        if g.field_kind != "scalar" or g.data.ndim != 2:
            raise ConfigurationError(f"metric file {spec} must hold a 2-D scalar grid")
        extent = float(g.axes[0][2]) if g.axes else 1.0
        return MetricField.from_grid(g.data.real, extent, name=spec)
    try:
        return MetricField.preset(spec)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def _geodesics(cfg, metric):
    r = cfg["rays"]
    rays = boundary_ray_grid(r["n_base"], r["n_dir"], metric)
    return trace_geodesics(metric, rays, r["step"], r["max_length"])


def _out(cfg, name):
    d = Path(cfg["output_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _spacetime_grid(cfg):
    g = cfg["grid"]
    return SpaceTimeGrid(float(g["T"]), g["n_t"], g["n_x"])


def _spatial_field(cfg):
    if cfg["input"]:
        g = load_grid(cfg["input"])
        if g.field_kind != "scalar" or g.data.ndim != 2:
            raise ConfigurationError("forward-ray input must be a 2-D scalar grid")
        return ScalarFieldM(g.data.real, float(g.axes[0][2]) if g.axes else 1.0)
    if cfg["field"]["spatial"] == "one":
        return lambda p: np.ones(len(p))
    return lambda p: checks.spatial_bump(p, (0.2, 0.1), 0.6)


def _spacetime_field(cfg, diam):
    grid = _spacetime_grid(cfg)
    T = grid.T
    if cfg["input"]:
        g = load_grid(cfg["input"])
        if g.field_kind != "scalar" or g.data.shape != grid.shape:
            raise ConfigurationError(f"input must be a scalar grid of shape {grid.shape}")
        return SpaceTimeScalar(grid, g.data.real)
    if cfg["field"]["spacetime"] == "reference":
        lo, hi = diam, T - diam
        basis = TimeBasis(grid.t, 2, window=smooth_window(lo, hi), center=0.5 * (lo + hi),
                          half_width=0.5 * (hi - lo))
        return checks.reference_scalar_field(grid, basis)
    wt = min(0.8, 0.45 * (T - 2 * diam))

    def func(t, p):
        return checks.smooth_bump((t - 0.5 * T) / wt) * checks.smooth_bump(
            np.sqrt(np.sum(p ** 2, axis=1)) / 0.6)

    return SpaceTimeScalar.from_function(grid, func, keep_func=False)


def _interior_setup(cfg):
    metric = _metric(cfg)
    diam = diameter_estimate(metric)
    require_interior_time(float(cfg["grid"]["T"]), diam)
    return metric, diam


def _write_report(cfg, name, text):
    path = _out(cfg, name)
    path.write_text(text, encoding="utf-8")
    print(text, end="")
    return path


# -- commands -------------------------------------------------------------------------

def cmd_trace(cfg):
    metric = _metric(cfg)
    geos = _geodesics(cfg, metric)
    r = cfg["rays"]
    rep = check_simplicity(metric, r["n_base"], r["n_dir"], r["step"], r["max_length"])
    exits = np.array([g.exit_time for g in geos])
    sino = Sinogram(exits, [g.ray for g in geos], r["n_base"], r["n_dir"])
    save_grid(_out(cfg, "exit_times.bin"), from_sinogram(sino))
    _write_report(cfg, "trace-report.txt",
                  f"metric {metric.name}\nrays {len(geos)}\n{rep}\n"
                  f"min_exit_time {exits.min():.12g}\nmax_exit_time {exits.max():.12g}\n")
    if not rep.ok:
        raise ConfigurationError("metric failed the simplicity heuristic")
    return EXIT_OK


def cmd_forward_ray(cfg):
    metric = _metric(cfg)
    geos = _geodesics(cfg, metric)
    sino = ray_transform(_spatial_field(cfg), geos)
    sino.n_base, sino.n_dir = cfg["rays"]["n_base"], cfg["rays"]["n_dir"]
    save_grid(_out(cfg, "sinogram.bin"), from_sinogram(sino))
    lines = [f"metric {metric.name}", f"rays {len(geos)}",
             f"max_abs {np.max(np.abs(sino.values)):.12g}"]
    if metric.name == "euclidean" and not cfg["input"] and cfg["field"]["spatial"] == "one":
        b = np.array([np.sin(g.ray.dir_angle) for g in geos])
        chord = 2 * np.sqrt(1 - b ** 2)
        lines.append(f"chord_max_rel_error {np.max(np.abs(sino.values - chord) / chord):.6e}")
    _write_report(cfg, "forward-ray-report.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_forward_light(cfg):
    metric, diam = _interior_setup(cfg)
    f = _spacetime_field(cfg, diam)
    geos = _geodesics(cfg, metric)
    L = light_sinogram(f, geos)
    L.n_base, L.n_dir = cfg["rays"]["n_base"], cfg["rays"]["n_dir"]
    save_grid(_out(cfg, "field.bin"), from_field(f))
    save_grid(_out(cfg, "light_sinogram.bin"), from_sinogram(L))
    _write_report(cfg, "forward-light-report.txt",
                  f"metric {metric.name}\ndiameter {diam:.12g}\nrays {len(geos)}\n"
                  f"offsets {len(L.s)} from {L.s[0]:.12g} to {L.s[-1]:.12g}\n"
                  f"max_abs {np.max(np.abs(L.values)):.12g}\n")
    return EXIT_OK


def cmd_slice(cfg):
    metric, diam = _interior_setup(cfg)
    f = _spacetime_field(cfg, diam)
    geos = _geodesics(cfg, metric)
    L = light_sinogram(f, geos)
    lines = ["k corrected_gap printed_index_gap"]
    for k in range(cfg["slice"]["k_max"] + 1):
        lines.append(f"{k} {slice_gap(k, f, L, geos):.6e} "
                     f"{slice_gap(k, f, L, geos, printed_index=True):.6e}")
    _write_report(cfg, "slice-report.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def _load_light_sinogram(path, geos):
    g = load_grid(path)
    if g.field_kind != "lightsinogram":
        raise ConfigurationError(f"{path} is not a light sinogram")
    vals = g.data.reshape(g.data.shape[0], -1)
    if vals.shape[1] != len(geos):
        raise ConfigurationError(f"{path} has {vals.shape[1]} rays, configuration gives {len(geos)}")
    (_, lo, hi), = [a for a in g.axes if a[0] == "s"]
    s = np.linspace(lo, hi, vals.shape[0])
    return LightSinogram(vals, s, [r.ray for r in geos])


def cmd_invert(cfg):
    metric, diam = _interior_setup(cfg)
    geos = _geodesics(cfg, metric)
    truth = None
    if cfg["input"]:
        L = _load_light_sinogram(cfg["input"], geos)
    else:
        truth = _spacetime_field(cfg, diam)
        L = light_sinogram(truth, geos)
    inv = cfg["inversion"]
    g = cfg["grid"]
    est = LightRayInverter(metric, float(g["T"]), g["n_t"], g["n_x"], inv["method"], inv["K"],
                           inv["lam"], inv["iters"], inv["tol"], diam, cfg["rays"]["step"],
                           inv["memory_cap_mb"], inv["max_condition"])
    est.fit(L)
    save_grid(_out(cfg, "reconstruction.bin"), from_field(est.field_))
    lines = [f"method {inv['method']}", f"data_residual {-est.score(L):.6e}"]
    if truth is not None:
        err = relative_error(est.field_.values, truth.values, truth.region_mask())
        lines.append(f"relative_error {err:.6e}")
        diff = truth.with_values(np.where(truth.region_mask(), est.field_.values - truth.values, 0))
        save_grid(_out(cfg, "error_field.bin"), from_field(diff))
    lines.append(est.report_.text().rstrip())
    _write_report(cfg, "invert-report.txt", "\n".join(lines) + "\n")
    reports = getattr(est.report_, "moment_reports", [est.report_])
    if not all(r.converged for r in reports):
        raise NumericalFailure("inversion did not reach the requested tolerance")
    return EXIT_OK


def cmd_gauge_check(cfg):
    _interior_setup(cfg)
    grid = _spacetime_grid(cfg)
    T = grid.T
    A1 = SpaceTimeOneForm.from_function(grid, checks.base_oneform)
    if cfg["gauge"]["perturbation"] == "exact":
        psi0 = checks.BumpPotential(0.8, 0.5 * T, 0.9, (0.1, -0.2), 0.5)
        A2 = A1 + SpaceTimeOneForm.from_function(grid, psi0.gradient)
    else:
        def rot(t, p):
            return checks.rotational_oneform(t - 0.5 * T + 3.0, p)
        A2 = A1 + SpaceTimeOneForm.from_function(grid, rot)
    ok, pot, res = check_gauge_equivalence(A1, A2, tol=cfg["gauge"]["tol"])
    save_grid(_out(cfg, "potential.bin"), from_field(pot.psi))
    lines = [f"perturbation {cfg['gauge']['perturbation']}", f"equivalent {ok}",
             f"residual {res:.6e}", pot.report().rstrip()]
    if cfg["gauge"]["perturbation"] == "exact":
        ps = SpaceTimeScalar.from_function(grid, psi0)
        lines.append(f"potential_error {relative_error(pot.psi.values, ps.values, ps.region_mask()):.6e}")
    _write_report(cfg, "gauge-report.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def _go_oneform(t, p):
    return np.stack([0.3 * np.exp(-(t - 2) ** 2 - np.sum(p ** 2, axis=1)),
                     0.2 * p[:, 0], 0.1 * np.sin(p[:, 1])], axis=1)


def cmd_go_probe(cfg):
    metric = _metric(cfg)
    go = cfg["go"]
    a = go["base_angle"]
    y = np.array([np.cos(a), np.sin(a)])
    v = np.asarray(go["direction"], dtype=float)
    if not np.dot(v, y) < 0:
        raise ConfigurationError("go.direction must point into the disc at the base point")
    chart = geooptics.build_chart(metric, y, v, go["s"], go["eps"])
    T = float(cfg["grid"]["T"])
    grid = SpaceTimeGrid(T, go["n_t"], go["n_x"])
    r_hi = 2.6 if isinstance(chart, geooptics.NumericChart) else 2.0 + go["eps"]
    z0 = np.linspace(chart.beta_z(0.05)[0, 0], chart.beta_z(r_hi)[0, 0], go["n_z0"])
    zp = np.linspace(-go["delta"], go["delta"], 21)
    amps = geooptics.build_amplitudes(chart, _go_oneform, _go_oneform, go["rho"], go["delta"],
                                      z0, [zp, zp])
    P, S = geooptics.go_probe(chart, amps, go["rho"], grid, A=_go_oneform, metric=metric)
    save_grid(_out(cfg, "probe_principal.bin"), from_field(P))
    save_grid(_out(cfg, "probe_source.bin"), from_field(S))
    zc = chart.beta_z(np.linspace(0.1, 1.8, 16))
    eik = float(np.max(np.abs(geooptics.eikonal_residual(chart, zc))))
    tr = max(float(np.max(np.abs(geooptics.transport_residual(amps, w)))) for w in (1, 2))
    _write_report(cfg, "go-probe-report.txt",
                  f"chart {type(chart).__name__}\neikonal_residual {eik:.6e}\n"
                  f"transport_residual {tr:.6e}\nmax_principal {np.max(np.abs(P.values)):.6e}\n"
                  f"max_source {np.max(np.abs(S.values)):.6e}\n")
    return EXIT_OK


def _wave_grid(cfg):
    w = cfg["wave"]
    try:
        return dnlab.WaveGrid1D(w["n_x"], float(w["T"]), float(w["cfl"]))
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def cmd_dn_demo(cfg):
    grid = _wave_grid(cfg)
    f1, f2 = checks.wave_test_data(grid)
    st = cfg["wave"]["stencil"]
    lam = dnlab.dn_map(checks.wave_base_A, checks.wave_base_q, f1, grid, stencil=st)
    save_grid(_out(cfg, "dn_map.bin"),
              GridFile(lam.out, "scalar", [("side", 0.0, 1.0), ("t", 0.0, grid.T)]))

    def dq(t, p):
        return checks.wave_base_q(t, p) + 2.0 * checks.wave_bump(t, p[:, 0], 1.5, 0.5, 0.35)

    rid = dnlab.integral_identity_check(checks.wave_base_A, checks.wave_base_q,
                                        checks.wave_base_A, dq, f1, f2, grid)
    psi = checks.BumpPotential(0.8, 0.5 * grid.T, 0.4, (0.5,), 0.4)
    rg = dnlab.gauge_invariance_check(checks.wave_base_A, checks.wave_base_q, psi, f1, grid)
    _write_report(cfg, "dn-demo-report.txt",
                  f"n_x {grid.n_x}\nn_t {grid.n_t}\ndn_norm {lam.norm():.6e}\n"
                  f"identity: {rid.text().strip()}\ngauge: {rg.text().strip()}\n")
    return EXIT_OK


def cmd_reduce(cfg):
    red = cfg["reduction"]
    w = cfg["wave"]
    try:
        grid = dnlab.WaveGrid1D(red["n_x"], float(w["T"]), float(w["cfl"]))
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    kw = dict(s0=float(red["s0"]), rho_list=tuple(red["rho_list"]), grid=grid,
              delta=float(red["delta"]), stencil=w["stencil"], richardson=bool(red["richardson"]))
    if red["kind"] == "oneform":
        tab = dnlab.reduction_experiment(checks.reduction_oneform, **kw)
    else:
        tab = dnlab.potential_reduction_experiment(checks.reduction_potential, **kw)
    _write_report(cfg, f"reduce-{red['kind']}-report.txt", tab.text())
    return EXIT_OK


def cmd_selftest(cfg):
    only = set(cfg["selftest"]["only"])
    known = {fn.__name__ for fn in checks.ALL_CHECKS}
    if only - known:
        raise ConfigurationError(f"unknown checks {sorted(only - known)}; choose from {sorted(known)}")
    results = []
    for fn in checks.ALL_CHECKS:
        if only and fn.__name__ not in only:
            continue
        res = fn(seed=cfg["seed"]) if fn is checks.annihilation_check else fn()
        print(res.line(), flush=True)
        results.append(res)
    n_pass = sum(r.passed for r in results)
    width = max(len(r.name) for r in results)
    table = [f"{'check':<{width}}  result  seconds"]
    table += [f"{r.name:<{width}}  {'pass' if r.passed else 'FAIL':<6}  {r.seconds:7.1f}"
              for r in results]
    table.append(f"{n_pass}/{len(results)} passed")
    _write_report(cfg, "selftest-report.txt", "\n".join(table) + "\n")
    return EXIT_OK if n_pass == len(results) else EXIT_INVALID


COMMANDS = {
    "trace": (cmd_trace, "trace boundary rays and run the simplicity heuristic"),
    "forward-ray": (cmd_forward_ray, "geodesic ray transform of a spatial field"),
    "forward-light": (cmd_forward_light, "light ray transform of a space-time field"),
    "slice": (cmd_slice, "Fourier-slice identity gaps for k = 0..slice.k_max"),
    "invert": (cmd_invert, "recover a space-time field from light ray data"),
    "gauge-check": (cmd_gauge_check, "test whether two one-forms differ by an exact form"),
    "go-probe": (cmd_go_probe, "geometric optics probe and its source on a space-time grid"),
    "dn-demo": (cmd_dn_demo, "1-D DN map, integral identity and gauge invariance"),
    "reduce": (cmd_reduce, "asymptotic reduction of the DN pairing to light ray data"),
    "selftest": (cmd_selftest, "run the acceptance checks and print a pass/fail table"),
}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", default="default",
                        help="YAML config file, or 'default' for built-in values (default: %(default)s)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config leaf, e.g. --set grid.T=8 (repeatable)")
    common.add_argument("--dump-config", action="store_true",
                        help="print the resolved configuration before running")
    parser = _Parser(prog="lightray", description="Light ray transforms and DN-map experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, helptext) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=helptext, description=helptext)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        if args.dump_config:
            print(dump_config(cfg), end="")
        return COMMANDS[args.command][0](cfg)
    except (ConfigurationError, GridFormatError, DomainError, MemoryCapError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalFailure, ConditioningError, InstabilityError, TrappedRayError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
