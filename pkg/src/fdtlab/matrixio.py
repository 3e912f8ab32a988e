"""Binary container for named float32 matrices.

Layout (all integers little-endian uint32):

    magic "FDT1" | count | count x [name_len | name utf-8 | rows | cols | data]

where data is rows*cols IEEE-754 float32 values, row-major. Matrix names
within one file are unique. This is the on-disk format for features, grids,
and checkpoints.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"FDT1"
_U32 = struct.Struct("<I")


def write_matrices(path: str | Path, matrices: dict[str, np.ndarray]) -> None:
    """Write `matrices` to `path`; values are cast to float32, names kept in order."""
    chunks = [MAGIC, _U32.pack(len(matrices))]
    for name, mat in matrices.items():
        arr = np.ascontiguousarray(mat, dtype=np.float32)
        if arr.ndim != 2:
            raise DataError(f"matrix {name!r} must be 2-D, got shape {arr.shape}")
        raw = name.encode("utf-8")
        chunks.append(_U32.pack(len(raw)))
        chunks.append(raw)
        chunks.append(_U32.pack(arr.shape[0]))
        chunks.append(_U32.pack(arr.shape[1]))
        chunks.append(arr.tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def read_matrices(path: str | Path) -> dict[str, np.ndarray]:
    """Read a container written by write_matrices; returns name -> float32 array."""
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise DataError(f"{path}: not a matrix container (bad magic)")
    pos = 4
    (count,) = _U32.unpack_from(blob, pos)
    pos += 4
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        if pos + 4 > len(blob):
            raise DataError(f"{path}: truncated container header")
        (name_len,) = _U32.unpack_from(blob, pos)
        pos += 4
        if pos + name_len + 8 > len(blob):
            raise DataError(f"{path}: truncated matrix record")
        name = blob[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (rows,) = _U32.unpack_from(blob, pos)
        (cols,) = _U32.unpack_from(blob, pos + 4)
        pos += 8
        nbytes = rows * cols * 4
        if pos + nbytes > len(blob):
            raise DataError(f"{path}: matrix {name!r} data truncated")
        if name in out:
            raise DataError(f"{path}: duplicate matrix name {name!r}")
        data = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=pos)
        out[name] = data.reshape(rows, cols).copy()
        pos += nbytes
    if pos != len(blob):
        raise DataError(f"{path}: {len(blob) - pos} trailing bytes after last matrix")
    return out
