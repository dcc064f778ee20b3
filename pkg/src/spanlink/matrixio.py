"""Binary matrix files for features, head weights, and score dumps.

Layout: 16-byte little-endian header ``{magic "SPLM", version u32, rows u32,
cols u32}`` followed by row-major IEEE-754 float32 values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import MatrixFormatError

MAGIC = b"SPLM"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def save_matrix(path: str | Path, values: np.ndarray) -> None:
    values = np.asarray(values)
    if values.ndim != 2:
        raise MatrixFormatError(f"expected a 2-D matrix, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise MatrixFormatError("refusing to write non-finite values")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def load_matrix(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise MatrixFormatError(f"{path}: truncated header")
        magic, version, rows, cols = _HEADER.unpack(header)
        if magic != MAGIC:
            raise MatrixFormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise MatrixFormatError(f"{path}: unsupported version {version}")
        payload = fh.read()
    expected = rows * cols * 4
    if len(payload) != expected:
        raise MatrixFormatError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    values = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    if not np.all(np.isfinite(values)):
        raise MatrixFormatError(f"{path}: non-finite values")
    return np.array(values, dtype=np.float32)
