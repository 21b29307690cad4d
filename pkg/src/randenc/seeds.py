"""Deterministic seed derivation.

A master seed fans out to per-purpose seeds keyed by name, so adding a new
stage or parameter never perturbs the streams of existing ones.  The
derivation is sha256 over ``"<seed>:<name>[:<name>...]"``, taking the first
8 digest bytes little-endian.  All randomness in the package flows through
``numpy.random.default_rng`` (PCG64), whose streams are platform-stable.
"""

import hashlib

import numpy as np


def derive_seed(master: int, *names: str) -> int:
    """Derive a child seed from a master seed and one or more name keys."""
    tag = ":".join([str(int(master))] + [str(n) for n in names])
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master: int, *names: str) -> np.random.Generator:
    """Generator seeded by :func:`derive_seed`."""
    return np.random.default_rng(derive_seed(master, *names))
