"""Experiment configuration: nested YAML with defaults, overrides and range checks."""

from __future__ import annotations

import copy
import re
from pathlib import Path

import yaml

from .exceptions import ConfigurationError

DEFAULTS = {
    "seed": 0,
    "output_dir": "lightray-out",
    "metric": "euclidean",
    "input": None,
    "grid": {"T": 8.0, "n_t": 64, "n_x": 64},
    "rays": {"n_base": 64, "n_dir": 64, "step": 0.01, "max_length": 20.0},
    "field": {"spatial": "one", "spacetime": "reference"},
    "inversion": {"method": "moments", "K": 2, "lam": None, "iters": 300, "tol": 1e-8,
                  "memory_cap_mb": 2048, "max_condition": 1e8},
    "slice": {"k_max": 3},
    "gauge": {"perturbation": "exact", "tol": 0.05},
    "go": {"base_angle": 2.5, "direction": [1.0, -0.7], "s": 1.0, "eps": 0.3, "rho": 16.0,
           "delta": 0.1, "n_z0": 81, "n_t": 65, "n_x": 48},
    "wave": {"n_x": 512, "T": 3.0, "cfl": 1.0, "stencil": 3},
    "reduction": {"kind": "oneform", "rho_list": [8, 16, 32, 64, 128], "s0": 1.0, "delta": 0.8,
                  "n_x": 1024, "richardson": True},
    "selftest": {"only": []},
}

# (lower, upper, inclusive lower) for numeric leaves
_RANGES = {
    "seed": (0, 2 ** 32 - 1, True),
    "grid.T": (0.0, 100.0, False),
    "grid.n_t": (4, 4096, True),
    "grid.n_x": (4, 4096, True),
    "rays.n_base": (1, 4096, True),
    "rays.n_dir": (1, 4096, True),
    "rays.step": (1e-5, 0.5, True),
    "rays.max_length": (0.0, 1e3, False),
    "inversion.K": (0, 8, True),
    "inversion.lam": (0.0, 1e6, True),
    "inversion.iters": (1, 100000, True),
    "inversion.tol": (0.0, 1.0, False),
    "inversion.memory_cap_mb": (1, 1 << 20, True),
    "inversion.max_condition": (1.0, 1e16, True),
    "slice.k_max": (0, 8, True),
    "gauge.tol": (0.0, 1.0, False),
    "go.base_angle": (-10.0, 10.0, True),
    "go.s": (0.0, 100.0, True),
    "go.eps": (0.0, 1.0, False),
    "go.rho": (0.0, 1e6, False),
    "go.delta": (0.0, 1.0, False),
    "go.n_z0": (5, 10000, True),
    "go.n_t": (5, 4096, True),
    "go.n_x": (5, 4096, True),
    "wave.n_x": (8, 1 << 16, True),
    "wave.T": (0.0, 100.0, False),
    "wave.cfl": (0.0, 1.0, False),
    "reduction.s0": (0.0, 100.0, False),
    "reduction.delta": (0.0, 2.0, False),
    "reduction.n_x": (8, 1 << 16, True),
}

_CHOICES = {
    "field.spatial": ("one", "bump"),
    "field.spacetime": ("reference", "bump"),
    "inversion.method": ("moments", "direct"),
    "gauge.perturbation": ("exact", "rotational"),
    "wave.stencil": (3, 5),
    "reduction.kind": ("oneform", "potential"),
}


def _merge(base, update, prefix=""):
    for key, val in update.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigurationError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigurationError(f"config key {path!r} must be a mapping")
            _merge(base[key], val, path + ".")
        else:
            base[key] = val


def _get(cfg, path):
    node = cfg
    for part in path.split("."):
        node = node[part]
    return node


def _check_number(path, val, lo, hi, closed):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigurationError(f"{path} must be a number, got {val!r}")
    if not ((lo <= val) if closed else (lo < val)) or val > hi:
        bracket = "[" if closed else "("
        raise ConfigurationError(f"{path} = {val!r} outside {bracket}{lo}, {hi}]")


def validate(cfg):
    """Range and type checks; raises ``ConfigurationError``."""
    for path, (lo, hi, closed) in _RANGES.items():
        val = _get(cfg, path)
        if val is None and path == "inversion.lam":
            continue
        _check_number(path, val, lo, hi, closed)
        if isinstance(lo, int) and not isinstance(lo, bool) and isinstance(hi, int):
            if int(val) != val:
                raise ConfigurationError(f"{path} must be an integer, got {val!r}")
    for path, options in _CHOICES.items():
        if _get(cfg, path) not in options:
            raise ConfigurationError(f"{path} must be one of {options}, got {_get(cfg, path)!r}")
    if not isinstance(cfg["metric"], str):
        raise ConfigurationError("metric must be a preset name or a grid file path")
    d = cfg["go"]["direction"]
    if not (isinstance(d, (list, tuple)) and len(d) == 2):
        raise ConfigurationError("go.direction must be a list of two numbers")
    rl = cfg["reduction"]["rho_list"]
    if not (isinstance(rl, (list, tuple)) and len(rl) >= 1):
        raise ConfigurationError("reduction.rho_list must be a non-empty list")
    for r in rl:
        _check_number("reduction.rho_list", r, 0.0, 1e6, False)
    if not isinstance(cfg["selftest"]["only"], (list, tuple)):
        raise ConfigurationError("selftest.only must be a list of check names")
    return cfg


_FLOAT = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)[eE][-+]?\d+$")


def _coerce(val):
    # YAML 1.1 reads "1e-8" (no dot) as a string
    if isinstance(val, str) and _FLOAT.match(val.strip()):
        return float(val)
    if isinstance(val, dict):
        return {k: _coerce(v) for k, v in val.items()}
    if isinstance(val, list):
        return [_coerce(v) for v in val]
    return val


def parse_override(text):
    """``"a.b=value"`` to ``("a.b", parsed value)``; values use YAML scalars."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigurationError(f"override {text!r} is not key=value")
    try:
        val = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse override {text!r}: {exc}") from None
    return key.strip(), _coerce(val)


def apply_override(cfg, key, val):
    parts = key.split(".")
    node = cfg
    for i, part in enumerate(parts[:-1]):
        if part not in node or not isinstance(node[part], dict):
            raise ConfigurationError(f"unknown config key {'.'.join(parts[:i + 1])!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigurationError(f"unknown config key {key!r}")
    if isinstance(node[parts[-1]], dict):
        raise ConfigurationError(f"config key {key!r} is a section; set its leaves")
    node[parts[-1]] = val


def load_config(path=None, overrides=()):
    """Defaults, then the YAML file (``None`` or ``"default"`` skips it), then overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None and str(path) != "default":
        p = Path(path)
        if not p.exists():
            raise ConfigurationError(f"config file {p} not found")
        try:
            data = yaml.safe_load(p.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse {p}: {exc}") from None
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"{p} must hold a mapping at top level")
        _merge(cfg, _coerce(data))
    for item in overrides:
        apply_override(cfg, *parse_override(item))
    return validate(cfg)


def require_interior_time(T, diam):
    """Experiments supported in the interior set need ``T > 2 Diam``."""
    if not T > 2 * diam:
        raise ConfigurationError(f"T = {T:g} must exceed 2 * Diam = {2 * diam:.4g}")


def dump_config(cfg):
    return yaml.safe_dump(cfg, sort_keys=False)
