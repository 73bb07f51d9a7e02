"""Binary grid files with a text sidecar.

A grid file ``name.bin`` holds little-endian IEEE 754 doubles in row-major
order; complex data are stored as interleaved ``(re, im)`` pairs.  The
sidecar ``name.bin.meta`` is UTF-8 ``key: value`` text with the keys
``dims``, ``components``, ``axes``, ``dtype``, ``field_kind`` and
``creator``.  ``axes`` lists ``name:min:max`` triples separated by ``;``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import GridFormatError

FORMAT_VERSION = "lightray-grid 1"
FIELD_KINDS = ("scalar", "oneform", "sinogram", "lightsinogram")
_DTYPES = {"f64": np.dtype("<f8"), "c128": np.dtype("<c16")}


@dataclass
class GridFile:
    """An array plus the metadata needed to interpret it.

    ``data`` has shape ``(components, *dims)`` for one-forms and ``dims``
    otherwise.  ``axes`` is a list of ``(name, min, max)``.
    """

    data: np.ndarray
    field_kind: str = "scalar"
    axes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.field_kind not in FIELD_KINDS:
            raise GridFormatError(f"unknown field kind {self.field_kind!r}")
        self.data = np.asarray(self.data)
        if not (np.issubdtype(self.data.dtype, np.floating) or np.iscomplexobj(self.data)):
            self.data = self.data.astype(float)

    @property
    def dtype_name(self):
        return "c128" if np.iscomplexobj(self.data) else "f64"

    @property
    def components(self):
        return self.data.shape[0] if self.field_kind == "oneform" else 1

    @property
    def dims(self):
        return self.data.shape[1:] if self.field_kind == "oneform" else self.data.shape

    def metadata(self):
        meta = {
            "dims": " ".join(str(d) for d in self.dims),
            "components": str(self.components),
            "axes": ";".join(f"{n}:{lo!r}:{hi!r}" for n, lo, hi in self.axes),
            "dtype": self.dtype_name,
            "field_kind": self.field_kind,
            "creator": FORMAT_VERSION,
        }
        for k, v in self.extra.items():
            if k in meta:
                raise GridFormatError(f"extra key {k!r} clashes with a reserved key")
            meta[k] = str(v)
        return meta


def meta_path(path):
    path = Path(path)
    return path.with_name(path.name + ".meta")


def _format_meta(meta):
    return "".join(f"{k}: {v}\n" for k, v in meta.items())


def _parse_meta(text):
    meta = {}
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if ":" not in line:
            raise GridFormatError(f"metadata line {n} is not 'key: value'")
        k, v = line.split(":", 1)
        meta[k.strip()] = v.strip()
    return meta


def save_grid(path, grid):
    """Write the payload and sidecar; returns the payload path."""
    path = Path(path)
    dt = _DTYPES[grid.dtype_name]
    payload = np.ascontiguousarray(grid.data, dtype=dt).tobytes(order="C")
    path.write_bytes(payload)
    meta_path(path).write_text(_format_meta(grid.metadata()), encoding="utf-8")
    return path


def load_grid(path):
    """Read a grid file, checking the payload length against the metadata."""
    path = Path(path)
    mp = meta_path(path)
    if not mp.exists():
        raise GridFormatError(f"missing metadata sidecar {mp}")
    meta = _parse_meta(mp.read_text(encoding="utf-8"))
    for key in ("dims", "components", "dtype", "field_kind"):
        if key not in meta:
            raise GridFormatError(f"metadata lacks key {key!r}")
    if meta["dtype"] not in _DTYPES:
        raise GridFormatError(f"unsupported dtype {meta['dtype']!r}")
    try:
        dims = tuple(int(d) for d in meta["dims"].split())
        comps = int(meta["components"])
    except ValueError as exc:
        raise GridFormatError(f"bad dims or components: {exc}") from None
    dt = _DTYPES[meta["dtype"]]
    raw = path.read_bytes()
    expected = int(np.prod(dims, dtype=np.int64)) * comps * dt.itemsize
    if len(raw) != expected:
        raise GridFormatError(
            f"payload {path} has {len(raw)} bytes, expected {expected} "
            f"(dims {dims} x {comps} components x {dt.itemsize} bytes); "
            f"mismatch starts at byte offset {min(len(raw), expected)}")
    data = np.frombuffer(raw, dtype=dt)
    shape = (comps,) + dims if meta["field_kind"] == "oneform" else dims
    data = data.reshape(shape).copy()
    axes = []
    if meta.get("axes"):
        for item in meta["axes"].split(";"):
            name, lo, hi = item.split(":")
            axes.append((name, float(lo), float(hi)))
    reserved = {"dims", "components", "axes", "dtype", "field_kind", "creator"}
    extra = {k: v for k, v in meta.items() if k not in reserved}
    return GridFile(data, meta["field_kind"], axes, extra)


# -- conversions from package types ----------------------------------------------------

def from_field(f):
    """GridFile for a ``SpaceTimeScalar``, ``SpaceTimeOneForm`` or ``ScalarFieldM``."""
    from .fields import ScalarFieldM, SpaceTimeOneForm, SpaceTimeScalar

    if isinstance(f, ScalarFieldM):
        ax = f.axis
        return GridFile(f.values, "scalar", [("x1", ax[0], ax[-1]), ("x2", ax[0], ax[-1])])
    grid = f.grid
    names = ["t"] + [f"x{i + 1}" for i in range(grid.dim)]
    axes = [(n, float(a[0]), float(a[-1])) for n, a in zip(names, [grid.t] + list(grid.axes))]
    if isinstance(f, SpaceTimeOneForm):
        return GridFile(f.components, "oneform", axes)
    if isinstance(f, SpaceTimeScalar):
        return GridFile(f.values, "scalar", axes)
    raise TypeError(f"cannot store {type(f).__name__}")


def from_sinogram(sino):
    """GridFile for a ``Sinogram`` (rays) or ``LightSinogram`` (offsets x rays)."""
    from .transforms import LightSinogram

    if isinstance(sino, LightSinogram):
        vals = sino.values
        if sino.n_base and sino.n_dir:
            vals = vals.reshape(len(sino.s), sino.n_base, sino.n_dir)
        axes = [("s", float(sino.s[0]), float(sino.s[-1]))]
        return GridFile(vals, "lightsinogram", axes)
    vals = sino.values
    if sino.n_base and sino.n_dir:
        vals = vals.reshape(sino.n_base, sino.n_dir)
    return GridFile(vals, "sinogram", [("base", 0.0, 2 * np.pi), ("dir", -np.pi / 2, np.pi / 2)])
