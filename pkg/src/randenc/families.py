"""Table-encoder families with key distributions, and the family algebra.

An encoder is an injective map from the ordered universe into a finite
symbol set, stored as a table whose i-th entry is the codomain index of
the i-th sample's encoding.  A family pairs a list of distinct encoders
with a strictly positive probability weight per encoder.

Families are immutable; composition and growth are pure functions.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .universe import Universe

WEIGHT_TOL = 1e-12
MAX_ENUMERATED_PERMUTATIONS = 40320  # 8!


@dataclass(frozen=True)
class TableEncoder:
    """Injective encoder given by its table over the ordered universe.

    ``table[i]`` is the codomain index of the encoding of sample i;
    ``codomain`` is the ordered symbol set (by default the universe ids).
    """

    table: tuple[int, ...]
    codomain: tuple

    def __post_init__(self):
        table = tuple(int(z) for z in self.table)
        object.__setattr__(self, "table", table)
        if len(set(table)) != len(table):
            raise ValueError("encoder table is not injective")
        if table and (min(table) < 0 or max(table) >= len(self.codomain)):
            raise ValueError("encoder table entry outside the codomain")
        object.__setattr__(self, "codomain", tuple(self.codomain))

    def __len__(self) -> int:
        return len(self.table)

    def encode_index(self, i: int) -> int:
        return self.table[i]

    def symbols(self) -> tuple:
        """The table rendered as codomain symbols."""
        return tuple(self.codomain[z] for z in self.table)

    def inverse_map(self) -> dict:
        return {z: i for i, z in enumerate(self.table)}


@dataclass(frozen=True)
class EncoderFamily:
    """Support of the key distribution: distinct encoders plus weights."""

    encoders: tuple[TableEncoder, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.encoders) != len(self.weights):
            raise ValueError("one weight per encoder required")
        if not self.encoders:
            raise ValueError("family must contain at least one encoder")
        weights = tuple(float(w) for w in self.weights)
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be strictly positive")
        if abs(math.fsum(weights) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {math.fsum(weights)!r}, not 1")
        cod = self.encoders[0].codomain
        dom = len(self.encoders[0])
        seen = set()
        for enc in self.encoders:
            if enc.codomain != cod:
                raise ValueError("all encoders in a family must share a codomain")
            if len(enc) != dom:
                raise ValueError("all encoders in a family must share a domain size")
            if enc.table in seen:
                raise ValueError(f"duplicate encoder table {enc.symbols()}")
            seen.add(enc.table)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "encoders", tuple(self.encoders))

    def __len__(self) -> int:
        return len(self.encoders)

    @property
    def codomain(self) -> tuple:
        return self.encoders[0].codomain

    @property
    def domain_size(self) -> int:
        return len(self.encoders[0])

    def tables_array(self) -> np.ndarray:
        return np.asarray([e.table for e in self.encoders], dtype=np.int32)

    def weights_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


def make_family(encoders: Sequence[TableEncoder], weights: Sequence[float]) -> EncoderFamily:
    """Validate and assemble an :class:`EncoderFamily`."""
    return EncoderFamily(encoders=tuple(encoders), weights=tuple(weights))


def family_from_tables(
    tables: Sequence[Sequence[int]],
    codomain: Sequence,
    weights: Sequence[float] | None = None,
) -> EncoderFamily:
    """Family from raw index tables; uniform weights when none are given."""
    encs = [TableEncoder(table=tuple(t), codomain=tuple(codomain)) for t in tables]
    if weights is None:
        weights = [1.0 / len(encs)] * len(encs)
    return make_family(encs, weights)


def sample_encoder(family: EncoderFamily, seed: int) -> TableEncoder:
    """Draw one encoder with probability equal to its weight."""
    rng = np.random.default_rng(seed)
    w = family.weights_array()
    i = rng.choice(len(family), p=w / w.sum())
    return family.encoders[int(i)]


def compose_families(inner: EncoderFamily, outer: EncoderFamily) -> EncoderFamily:
    """All pairwise composites outer∘inner, with merged probabilities.

    Composites that coincide as tables are merged and their probabilities
    summed.  The outer family's tables must be indexed by the inner
    family's codomain.
    """
    if outer.domain_size != len(inner.codomain):
        raise ValueError(
            f"outer domain size {outer.domain_size} does not match "
            f"inner codomain size {len(inner.codomain)}"
        )
    merged: dict[tuple[int, ...], float] = {}
    for to, wo in zip(outer.encoders, outer.weights):
        for ti, wi in zip(inner.encoders, inner.weights):
            table = tuple(to.table[z] for z in ti.table)
            merged[table] = merged.get(table, 0.0) + wo * wi
    tables = list(merged)
    encs = [TableEncoder(table=t, codomain=outer.codomain) for t in tables]
    return make_family(encs, [merged[t] for t in tables])


def grow_family(
    family: EncoderFamily,
    extra_encoders: Sequence[TableEncoder],
    new_weights: Sequence[float] | None = None,
) -> EncoderFamily:
    """Enlarge the support; the union must stay duplicate-free.

    ``new_weights`` covers the whole enlarged family and defaults to
    uniform.
    """
    encs = list(family.encoders) + list(extra_encoders)
    if new_weights is None:
        new_weights = [1.0 / len(encs)] * len(encs)
    return make_family(encs, new_weights)


def permutation_family(
    universe: Universe,
    kind: str = "all",
    distribution: str = "uniform",
) -> EncoderFamily:
    """Family of all permutations of the universe, uniformly weighted.

    ``kind="label_preserving"`` restricts to permutations fixing each
    label class setwise.  Guarded against enumerating more than 8! tables.
    """
    if distribution != "uniform":
        raise ValueError(f"unsupported distribution {distribution!r}")
    m = len(universe)
    codomain = universe.ids
    if kind == "all":
        count = math.factorial(m)
        if count > MAX_ENUMERATED_PERMUTATIONS:
            raise ValueError(f"{count} permutations exceed the enumeration guard")
        tables = [tuple(p) for p in itertools.permutations(range(m))]
    elif kind == "label_preserving":
        classes: dict[int, list[int]] = {}
        for i, l in enumerate(universe.labels):
            classes.setdefault(l, []).append(i)
        count = math.prod(math.factorial(len(c)) for c in classes.values())
        if count > MAX_ENUMERATED_PERMUTATIONS:
            raise ValueError(f"{count} permutations exceed the enumeration guard")
        per_class = [
            list(itertools.permutations(members)) for members in classes.values()
        ]
        members_order = [i for members in classes.values() for i in members]
        tables = []
        for combo in itertools.product(*per_class):
            images = [z for perm in combo for z in perm]
            table = [0] * m
            for src, dst in zip(members_order, images):
                table[src] = dst
            tables.append(tuple(table))
    else:
        raise ValueError(f"unknown permutation family kind {kind!r}")
    return family_from_tables(tables, codomain)


# ---------------------------------------------------------------------------
# JSON format: {"codomain": [symbols], "encoders": [[symbol, ...], ...],
#               "weights": [..]}
# ---------------------------------------------------------------------------


def family_to_json(family: EncoderFamily) -> dict:
    return {
        "codomain": list(family.codomain),
        "encoders": [list(e.symbols()) for e in family.encoders],
        "weights": list(family.weights),
    }


def family_from_json(doc: dict) -> EncoderFamily:
    codomain = tuple(doc["codomain"])
    index = {sym: i for i, sym in enumerate(codomain)}
    tables = [[index[sym] for sym in row] for row in doc["encoders"]]
    return family_from_tables(tables, codomain, doc.get("weights"))


def save_family(path, family: EncoderFamily) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(family_to_json(family), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_family(path) -> EncoderFamily:
    with open(path, encoding="utf-8") as fh:
        return family_from_json(json.load(fh))
