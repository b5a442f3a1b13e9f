"""SGMF: a small bit-exact binary container for one field on a periodic grid.

Layout, all little-endian::

    b"SGMF" | u32 version | u32 nx | u32 ny | u32 kind | f64 Lx | f64 Ly | f64 values...

Values are written in (ny, nx, components) C order, so vector components are
interleaved innermost.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from . import fields as F

MAGIC = b"SGMF"
VERSION = 1
HEADER = struct.Struct("<4sIIIIdd")
KINDS = ("scalar", "density", "one_form", "vector")
MAX_VALUES = 1 << 31


class SGMFError(ValueError):
    code = "sgmf_error"


class BadMagicError(SGMFError):
    code = "bad_magic"


class VersionMismatchError(SGMFError):
    code = "version_mismatch"


class TruncatedPayloadError(SGMFError):
    code = "truncated_payload"


class DimensionOverflowError(SGMFError):
    code = "dimension_overflow"


class UnknownKindError(SGMFError):
    code = "unknown_kind"


def encode_field(f):
    grid = f.grid
    kind = KINDS.index(f.kind)
    vals = f.values
    if vals.ndim == 3:
        vals = np.moveaxis(vals, 0, -1)
    head = HEADER.pack(MAGIC, VERSION, grid.nx, grid.ny, kind, float(grid.Lx), float(grid.Ly))
    return head + np.ascontiguousarray(vals, dtype="<f8").tobytes()


def decode_field(data):
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < HEADER.size:
        raise TruncatedPayloadError(f"header needs {HEADER.size} bytes, file has {len(data)}")
    _, version, nx, ny, kind, Lx, Ly = HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionMismatchError(f"unsupported SGMF version {version}, this reader handles {VERSION}")
    if kind >= len(KINDS):
        raise UnknownKindError(f"unknown field kind code {kind}")
    ncomp = 2 if KINDS[kind] in ("one_form", "vector") else 1
    count = nx * ny * ncomp
    if nx == 0 or ny == 0 or count >= MAX_VALUES:
        raise DimensionOverflowError(f"grid {nx}x{ny} with {ncomp} component(s) is out of range")
    need = HEADER.size + 8 * count
    if len(data) < need:
        raise TruncatedPayloadError(f"payload needs {need} bytes, file has {len(data)}")
    if len(data) > need:
        raise SGMFError(f"{len(data) - need} trailing bytes after payload")
    vals = np.frombuffer(data, dtype="<f8", count=count, offset=HEADER.size).astype(np.float64)
    vals = vals.reshape(ny, nx, ncomp)
    vals = vals[..., 0] if ncomp == 1 else np.moveaxis(vals, -1, 0)
    grid = F.Grid2D(nx, ny, Lx, Ly)
    return F.Field(KINDS[kind], np.ascontiguousarray(vals), grid)


def save_field(f, path):
    """Write ``f`` atomically (temp file then rename)."""
    path = Path(path)
    blob = encode_field(f)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_field(path):
    return decode_field(Path(path).read_bytes())


def list_snapshot_files(directory):
    return sorted(Path(directory).glob("*.sgmf"))
