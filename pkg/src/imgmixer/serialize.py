"""Binary tensor and checkpoint file formats.

Tensor record: magic ``IMXT``, u8 version=1, u8 dtype (0=f32, 1=f64),
u8 rank, rank x u64 little-endian dims, then the row-major little-endian
payload. A tensor file holds one record; a checkpoint holds a u32 count
followed by repeated (u16 name-length, UTF-8 name, tensor record) entries
in canonical parameter order.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .params import ModelParams
from .tensor import Tensor

MAGIC = b"IMXT"
VERSION = 1

_DTYPE_TO_CODE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_TO_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def write_tensor(fh: BinaryIO, array: np.ndarray) -> None:
    dtype = np.dtype(array.dtype)
    if dtype not in _DTYPE_TO_CODE:
        raise ValueError(f"unsupported dtype {dtype}; use float32 or float64")
    fh.write(MAGIC)
    fh.write(struct.pack("<BBB", VERSION, _DTYPE_TO_CODE[dtype], array.ndim))
    for dim in array.shape:
        fh.write(struct.pack("<Q", dim))
    fh.write(np.ascontiguousarray(array).astype(dtype.newbyteorder("<")).tobytes())


def read_tensor(fh: BinaryIO) -> np.ndarray:
    magic = fh.read(4)
    if magic != MAGIC:
        raise ValueError(f"bad tensor magic {magic!r}, expected {MAGIC!r}")
    version, dtype_code, rank = struct.unpack("<BBB", fh.read(3))
    if version != VERSION:
        raise ValueError(f"unsupported tensor record version {version}")
    if dtype_code not in _CODE_TO_DTYPE:
        raise ValueError(f"unknown dtype code {dtype_code}")
    dims = struct.unpack(f"<{rank}Q", fh.read(8 * rank)) if rank else ()
    dtype = _CODE_TO_DTYPE[dtype_code]
    count = int(np.prod(dims, dtype=np.int64)) if dims else 1
    payload = fh.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise ValueError("truncated tensor payload")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))


def save_tensor(path: str | Path, array: np.ndarray) -> None:
    with open(path, "wb") as fh:
        write_tensor(fh, array)


def load_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor(fh)


def save_checkpoint(path: str | Path, params: ModelParams) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(params)))
        for name, t in params.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            write_tensor(fh, t.data)


def load_checkpoint(path: str | Path) -> ModelParams:
    params = ModelParams()
    with open(path, "rb") as fh:
        (count,) = struct.unpack("<I", fh.read(4))
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            params[name] = Tensor(read_tensor(fh), requires_grad=True)
    return params
