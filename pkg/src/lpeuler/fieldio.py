"""Field files: the ``LPF1`` binary layout and an ``x,y,value[,value2]`` CSV."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .lp import FrequencyGrid, SpectralField

MAGIC = b"LPF1"
_HEADER = struct.Struct("<4sIdB")


class FieldFormatError(ValueError):
    pass


def write_field(path, f: SpectralField, fmt: str | None = None) -> None:
    """Write physical samples; ``fmt`` is ``lpf`` or ``csv`` (default from the suffix)."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "lpf")
    values = f.physical().reshape(f.components, f.grid.n, f.grid.n)
    if fmt == "lpf":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, f.grid.n, f.grid.l, f.components))
            fh.write(values.astype("<f8").tobytes(order="C"))
    elif fmt == "csv":
        if f.components > 2:
            raise FieldFormatError("the CSV layout holds at most two components")
        x, y = f.grid.x
        cols = [x.ravel(), y.ravel()] + [v.ravel() for v in values]
        names = ["x", "y", "value", "value2"][: len(cols)]
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names), comments="", fmt="%.17g")
    else:
        raise FieldFormatError(f"unknown field format {fmt!r}")


def read_field(path) -> SpectralField:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == MAGIC:
        return _read_lpf(raw)
    return _read_csv(path)


def _read_lpf(raw: bytes) -> SpectralField:
    if len(raw) < _HEADER.size:
        raise FieldFormatError("truncated LPF1 header")
    _, n, l, comps = _HEADER.unpack_from(raw)
    expected = _HEADER.size + 8 * comps * n * n
    if comps < 1 or len(raw) != expected:
        raise FieldFormatError(f"LPF1 payload size {len(raw)} does not match n={n}, components={comps}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(comps, n, n)
    grid = FrequencyGrid(n, l)
    return SpectralField.from_physical(grid, values[0] if comps == 1 else values)


def _read_csv(path: Path) -> SpectralField:
    with open(path) as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    if header[:3] != ["x", "y", "value"] or header[3:] not in ([], ["value2"]):
        raise FieldFormatError(f"CSV field needs columns x,y,value[,value2], got {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = int(round(np.sqrt(len(data))))
    if n * n != len(data):
        raise FieldFormatError(f"{len(data)} rows is not a square grid")
    data = data[np.lexsort((data[:, 1], data[:, 0]))]
    xs = np.unique(data[:, 0])
    if len(xs) != n:
        raise FieldFormatError("x coordinates do not form a regular grid")
    l = n * (xs[1] - xs[0]) if n > 1 else 2 * np.pi
    values = data[:, 2:].T.reshape(-1, n, n)
    grid = FrequencyGrid(n, float(l))
    return SpectralField.from_physical(grid, values[0] if len(values) == 1 else values)
