"""Pure-Python observation-grouping kernel.

Fallback for the compiled extension; both implementations must return
byte-identical group keys and identical (encoder, subset) index arrays.
"""

import numpy as np


def observation_groups(tables, labels, subsets, n_labels):
    """Group (encoder, subset) pairs by their canonical observation key.

    Each pair (encoded value z, label l) is packed as ``z * n_labels + l``;
    a key is the ascending-sorted little-endian int32 byte string of the
    subset's packed pairs under one encoder.

    Returns {key bytes: int32 array of shape (k, 2) with rows (encoder
    index, subset index)}, rows in (subset-major, encoder-minor) order.
    """
    tables = np.ascontiguousarray(tables, dtype=np.int32)
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    subsets = np.ascontiguousarray(subsets, dtype=np.int32)
    n_enc = tables.shape[0]
    packed_base = tables * np.int32(n_labels)
    groups: dict[bytes, list] = {}
    for si in range(subsets.shape[0]):
        s = subsets[si]
        block = packed_base[:, s] + labels[s]
        block = np.sort(block, axis=1).astype("<i4")
        for fi in range(n_enc):
            key = block[fi].tobytes()
            hit = groups.get(key)
            if hit is None:
                groups[key] = hit = []
            hit.append((fi, si))
    return {
        k: np.asarray(v, dtype=np.int32).reshape(-1, 2) for k, v in groups.items()
    }
