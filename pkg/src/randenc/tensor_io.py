"""Raw tensor container.

Layout: 8-byte magic ``PTNSR01\\0``, then a little-endian u32 rank, one
little-endian u32 per dimension, then the row-major float64 payload,
little-endian.  Used for datasets and saved encoder parameters.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"PTNSR01\x00"


def write_tensor(path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        for d in arr.shape:
            fh.write(struct.pack("<I", d))
        fh.write(arr.astype("<f8").tobytes())


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: bad magic, not a raw tensor file")
    (rank,) = struct.unpack_from("<I", raw, 8)
    offset = 12
    shape = []
    for _ in range(rank):
        (d,) = struct.unpack_from("<I", raw, offset)
        shape.append(d)
        offset += 4
    count = int(np.prod(shape)) if shape else 1
    expected = offset + 8 * count
    if len(raw) != expected:
        raise ValueError(f"{path}: payload size {len(raw) - offset} does not match shape {shape}")
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
    return data.reshape(shape).astype(np.float64)
