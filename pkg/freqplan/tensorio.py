# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Flat binary tensors.

Layout, all little-endian:
  magic     4 bytes  b"FPT1"
  ndim      uint32
  elemsize  uint32   4 (float32) or 8 (float64)
  dims      ndim × uint64
  data      C-order values
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import InputError

MAGIC = b"FPT1"
_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


def dumps(arr, elemsize: int = 8) -> bytes:
    if elemsize not in _DTYPES:
        raise InputError(f"element size must be 4 or 8, got {elemsize}")
    arr = np.ascontiguousarray(arr, dtype=_DTYPES[elemsize])
    header = MAGIC + struct.pack("<II", arr.ndim, elemsize) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + arr.tobytes()


def loads(data: bytes) -> np.ndarray:
    if len(data) < 12 or data[:4] != MAGIC:
        raise InputError("not a tensor file (bad magic)")
    ndim, elemsize = struct.unpack_from("<II", data, 4)
    if elemsize not in _DTYPES:
        raise InputError(f"unsupported element size {elemsize}")
    offset = 12 + 8 * ndim
    if len(data) < offset:
        raise InputError("truncated tensor header")
    dims = struct.unpack_from(f"<{ndim}Q", data, 12)
    count = int(np.prod(dims, dtype=np.int64))
    if len(data) - offset != count * elemsize:
        raise InputError(f"tensor payload is {len(data) - offset} bytes, expected {count * elemsize}")
    arr = np.frombuffer(data, dtype=_DTYPES[elemsize], count=count, offset=offset)
    return arr.reshape(dims).astype(np.float64)


def save(path: str | Path, arr, elemsize: int = 8) -> None:
    Path(path).write_bytes(dumps(arr, elemsize))


def load(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"tensor file not found: {path}")
    return loads(path.read_bytes())
