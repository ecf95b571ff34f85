"""Byte-exact file formats: plane snapshots (binary) and observable series (CSV).

Snapshot layout, all little-endian:

    offset  size  field
    0       8     magic b"DFDTSNAP"
    8       2     u16 version (1)
    10      6     zero padding
    16      4     u32 rows
    20      4     u32 cols
    24      8*r*c f64 payload, row-major
    ...     8     f64 time (nm/c)
            4     u32 plane axis (0=x, 1=y, 2=z)
            4     u32 plane index
            8     u64 first 8 bytes of SHA-256(scenario name, UTF-8), big-endian
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "SNAPSHOT_MAGIC",
    "SNAPSHOT_VERSION",
    "SNAPSHOT_META_SIZE",
    "SERIES_HEADER",
    "SnapshotMeta",
    "FormatError",
    "write_snapshot",
    "read_snapshot",
    "snapshot_bytes",
    "name_hash",
    "write_series",
    "read_series",
    "series_rows",
]

SNAPSHOT_MAGIC = b"DFDTSNAP"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<8sH6x")
_DIMS = struct.Struct("<II")
_META = struct.Struct("<dIIQ")
SNAPSHOT_META_SIZE = _META.size

SERIES_HEADER = "t,norm,x,y,z,vx,vy,vz,energy,pmx,pmy,pmz,pcx,pcy,pcz"


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class SnapshotMeta:
    time: float
    axis: int
    index: int
    name_hash: int


def name_hash(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")


def snapshot_bytes(data: np.ndarray, time: float, axis: int, index: int, name: str) -> bytes:
    arr = np.asarray(data, dtype="<f8")
    if arr.ndim != 2:
        raise FormatError("snapshot payload must be 2-D")
    rows, cols = arr.shape
    return b"".join([
        _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION),
        _DIMS.pack(rows, cols),
        np.ascontiguousarray(arr).tobytes(order="C"),
        _META.pack(float(time), int(axis), int(index), name_hash(name)),
    ])


def write_snapshot(path, data, time: float, axis: int, index: int, name: str) -> Path:
    path = Path(path)
    path.write_bytes(snapshot_bytes(data, time, axis, index, name))
    return path


def read_snapshot(path):
    """Return ``(array, SnapshotMeta)``."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + _DIMS.size + _META.size:
        raise FormatError("snapshot file truncated")
    magic, version = _HEADER.unpack_from(raw, 0)
    if magic != SNAPSHOT_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise FormatError(f"unsupported snapshot version {version}")
    rows, cols = _DIMS.unpack_from(raw, _HEADER.size)
    start = _HEADER.size + _DIMS.size
    end = start + 8 * rows * cols
    if len(raw) != end + _META.size:
        raise FormatError("snapshot size does not match its dimensions")
    arr = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=start).reshape(rows, cols).astype(float)
    meta = SnapshotMeta(*_META.unpack_from(raw, end))
    return arr, meta


def _fmt(v) -> str:
    return "%.17g" % float(v)


def series_rows(series) -> list:
    """Rows of 15 floats in header order from an observable series."""
    rows = []
    for r in series:
        rows.append([r.t, r.norm, *r.center, *r.velocity, r.energy, *r.p_mech, *r.p_canon])
    return rows


def write_series(path, series) -> Path:
    """Write records (or raw 15-column rows) as CSV with LF endings."""
    rows = series if isinstance(series, (list, np.ndarray)) else series_rows(series)
    buf = io.StringIO(newline="")
    buf.write(SERIES_HEADER + "\n")
    for row in rows:
        if len(row) != 15:
            raise FormatError("series rows need 15 columns")
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    path = Path(path)
    with open(path, "w", newline="", encoding="ascii") as fh:
        fh.write(buf.getvalue())
    return path


def read_series(path) -> np.ndarray:
    """Parse a series CSV into an (n, 15) float array."""
    text = Path(path).read_text(encoding="ascii")
    lines = text.split("\n")
    if lines[0] != SERIES_HEADER:
        raise FormatError("unexpected series header")
    body = [ln for ln in lines[1:] if ln]
    out = np.empty((len(body), 15))
    for i, ln in enumerate(body):
        parts = ln.split(",")
        if len(parts) != 15:
            raise FormatError(f"line {i + 2}: expected 15 fields")
        out[i] = [float(p) for p in parts]
    return out
