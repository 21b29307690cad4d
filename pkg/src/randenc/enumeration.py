"""Backend selection and work partitioning for exact enumeration.

The compiled kernel is used when its extension module built; otherwise
the pure-Python fallback is selected.  ``RANDENC_PURE_PY=1`` forces the
fallback (used by the parity tests and the benchmark).

Partitioning is over a fixed number of subset chunks, independent of the
worker count, and chunk results are merged in chunk order, so results are
bit-identical for any ``workers`` value.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _obs_py

try:
    from . import _obskernel as _compiled
except ImportError:  # extension not built
    _compiled = None

N_CHUNKS = 64  # fixed partition count; never derived from the worker count


def _force_pure() -> bool:
    return os.environ.get("RANDENC_PURE_PY", "") not in ("", "0")


def backend_name() -> str:
    if _compiled is not None and not _force_pure():
        return "compiled"
    return "python"


def _kernel():
    if _compiled is not None and not _force_pure():
        return _compiled.observation_groups
    return _obs_py.observation_groups


def observation_groups(tables, labels, subsets, n_labels, workers: int = 1):
    """Group (encoder, subset) pairs by canonical observation key.

    See :func:`randenc._obs_py.observation_groups` for the contract.
    """
    tables = np.ascontiguousarray(tables, dtype=np.int32)
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    subsets = np.ascontiguousarray(subsets, dtype=np.int32)
    kernel = _kernel()
    n_sub = subsets.shape[0]
    if workers <= 1 or n_sub < 2:
        return kernel(tables, labels, subsets, n_labels)

    bounds = np.linspace(0, n_sub, min(N_CHUNKS, n_sub) + 1, dtype=np.int64)
    chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def run(chunk):
        a, b = chunk
        return a, kernel(tables, labels, subsets[a:b], n_labels)

    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        parts = list(pool.map(run, chunks))

    merged: dict[bytes, list] = {}
    for offset, part in parts:  # pool.map preserves submission order
        for key, arr in part.items():
            shifted = arr.copy()
            shifted[:, 1] += offset
            merged.setdefault(key, []).append(shifted)
    return {k: np.concatenate(v, axis=0) for k, v in merged.items()}
