"""Finite sample universes, owner/public datasets, and published observations.

A universe is an ordered finite list of samples, each carrying a feature
payload (a vector of reals or a token sequence), a total labeling into a
finite label set, and optionally a second total labeling with sensitive
attributes.  The sample order is the total order used everywhere a sample
is referred to by index, in particular when encoders are represented as
tables.

All objects here are immutable after construction and safe to share across
threads.  Randomized constructors take explicit seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np


def _freeze_payload(p):
    """Canonicalize a payload to a tuple (feature vector or token sequence)."""
    if isinstance(p, np.ndarray):
        return tuple(p.ravel().tolist())
    if isinstance(p, (list, tuple)):
        return tuple(p)
    return (p,)


@dataclass(frozen=True)
class Universe:
    """Ordered finite sample space with total label maps.

    ``labels`` and ``sensitive`` hold indices into ``label_set`` and
    ``sensitive_set``; helpers translate back to the declared label values.
    """

    ids: tuple
    payloads: tuple
    labels: tuple[int, ...]
    label_set: tuple
    sensitive: tuple[int, ...] | None = None
    sensitive_set: tuple | None = None

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def n_labels(self) -> int:
        return len(self.label_set)

    def label_value(self, index: int):
        return self.label_set[self.labels[index]]

    def labels_array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int32)

    def features_matrix(self) -> np.ndarray:
        """Stack numeric payloads into one (n, d) float matrix."""
        return np.asarray([list(p) for p in self.payloads], dtype=np.float64)


def build_universe(
    feature_payloads: Sequence,
    label_assignment: Sequence,
    sensitive_assignment: Sequence | None = None,
    ids: Sequence | None = None,
    label_set: Sequence | None = None,
    sensitive_set: Sequence | None = None,
) -> Universe:
    """Validate and assemble a :class:`Universe`.

    Label sets default to the values in first-occurrence order.  Raises
    ``ValueError`` on a missing label, a label outside the declared set, or
    a duplicate sample identifier.
    """
    payloads = tuple(_freeze_payload(p) for p in feature_payloads)
    m = len(payloads)
    if ids is None:
        ids = tuple(f"s{i}" for i in range(m))
    else:
        ids = tuple(ids)
    if len(ids) != m:
        raise ValueError(f"{len(ids)} ids for {m} samples")
    if len(set(ids)) != m:
        raise ValueError("duplicate sample identifier")

    labels = list(label_assignment)
    if len(labels) != m:
        raise ValueError(f"{len(labels)} labels for {m} samples (labeling must be total)")
    if any(l is None for l in labels):
        raise ValueError("missing label")
    if label_set is None:
        label_set = tuple(dict.fromkeys(labels))
    else:
        label_set = tuple(label_set)
        unknown = [l for l in labels if l not in label_set]
        if unknown:
            raise ValueError(f"labels outside the declared label set: {unknown}")
    label_idx = tuple(label_set.index(l) for l in labels)

    sens_idx = None
    if sensitive_assignment is not None:
        sens = list(sensitive_assignment)
        if len(sens) != m:
            raise ValueError("sensitive labeling must be total")
        if any(s is None for s in sens):
            raise ValueError("missing sensitive label")
        if sensitive_set is None:
            sensitive_set = tuple(dict.fromkeys(sens))
        else:
            sensitive_set = tuple(sensitive_set)
        sens_idx = tuple(sensitive_set.index(s) for s in sens)
    else:
        sensitive_set = None

    return Universe(
        ids=ids,
        payloads=payloads,
        labels=label_idx,
        label_set=label_set,
        sensitive=sens_idx,
        sensitive_set=sensitive_set,
    )


@dataclass(frozen=True)
class OwnerDataset:
    """A data owner's subset of the universe, given by sample indices."""

    universe: Universe
    indices: tuple[int, ...]
    owner_id: int = 0

    def __post_init__(self):
        m = len(self.universe)
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if len(idx) != len(self.indices):
            raise ValueError("owner dataset indices must be distinct")
        if idx and (idx[0] < 0 or idx[-1] >= m):
            raise ValueError("owner dataset index out of range")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class PublicDataset:
    """Publicly known samples (with labels, and sensitive labels if present)."""

    universe: Universe
    indices: tuple[int, ...]

    def __post_init__(self):
        m = len(self.universe)
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if len(idx) != len(self.indices):
            raise ValueError("public dataset indices must be distinct")
        if idx and (idx[0] < 0 or idx[-1] >= m):
            raise ValueError("public dataset index out of range")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)


def check_disjoint(owner: OwnerDataset, public: PublicDataset) -> None:
    """Raise if the owner and public datasets overlap.

    Overlap breaks the threat-model assumption under which the randomized
    schemes are evaluated, so pipelines check it explicitly instead of
    assuming it.
    """
    overlap = set(owner.indices) & set(public.indices)
    if overlap:
        raise ValueError(f"owner and public datasets overlap on indices {sorted(overlap)}")


def sample_owner_dataset(
    universe: Universe, n: int, seed: int, owner_id: int = 0
) -> OwnerDataset:
    """Draw a uniformly random size-``n`` subset of the universe.

    Every one of the C(|X|, n) subsets is equiprobable; the draw is
    deterministic given the seed.
    """
    m = len(universe)
    if n < 0 or n > m:
        raise ValueError(f"cannot sample {n} of {m} samples")
    rng = np.random.default_rng(seed)
    idx = rng.choice(m, size=n, replace=False)
    return OwnerDataset(universe=universe, indices=tuple(int(i) for i in idx), owner_id=owner_id)


def n_subsets(universe: Universe, n: int) -> int:
    return comb(len(universe), n)


@dataclass(frozen=True)
class Observation:
    """Unordered collection of (encoded value, label) pairs.

    ``pairs`` is canonically sorted, so equality and hashing are invariant
    under any reordering of the published pairs.  The canonical order is a
    representation choice only; no ordering semantics are exposed.
    """

    pairs: tuple[tuple[int, int], ...]
    codomain: tuple
    label_set: tuple

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(sorted(tuple(p) for p in self.pairs)))

    def __len__(self) -> int:
        return len(self.pairs)

    def symbol_pairs(self) -> tuple:
        """Pairs rendered with codomain symbols and label values."""
        return tuple((self.codomain[z], self.label_set[l]) for z, l in self.pairs)


def make_observation(encoder, owner: OwnerDataset) -> Observation:
    """Publish an owner dataset through a table encoder.

    The result is the unordered multiset of (encoded value, label) pairs;
    no ordering information is retained.
    """
    universe = owner.universe
    table = encoder.table
    pairs = []
    for i in owner.indices:
        if i >= len(table):
            raise ValueError(f"encoder undefined on sample index {i}")
        pairs.append((table[i], universe.labels[i]))
    return Observation(pairs=tuple(pairs), codomain=encoder.codomain, label_set=universe.label_set)


# ---------------------------------------------------------------------------
# JSON document format
#
# {"samples": [{"id": .., "features": [..] | "tokens": [..],
#               "label": .., "sensitive": ..}],
#  "label_set": [..], "sensitive_set": [..],
#  "feature_shape": [..],                  # optional, for image payloads
#  "owners": [[indices], ...], "public": [indices]}        # optional
# ---------------------------------------------------------------------------


def universe_to_json(
    universe: Universe,
    owners: Sequence[OwnerDataset] | None = None,
    public: PublicDataset | None = None,
    feature_shape: Sequence[int] | None = None,
) -> dict:
    samples = []
    for i in range(len(universe)):
        payload = universe.payloads[i]
        entry: dict = {"id": universe.ids[i]}
        if payload and isinstance(payload[0], str):
            entry["tokens"] = list(payload)
        else:
            entry["features"] = list(payload)
        entry["label"] = universe.label_value(i)
        if universe.sensitive is not None:
            entry["sensitive"] = universe.sensitive_set[universe.sensitive[i]]
        samples.append(entry)
    doc: dict = {"samples": samples, "label_set": list(universe.label_set)}
    if universe.sensitive_set is not None:
        doc["sensitive_set"] = list(universe.sensitive_set)
    if feature_shape is not None:
        doc["feature_shape"] = list(int(d) for d in feature_shape)
    if owners is not None:
        doc["owners"] = [list(o.indices) for o in owners]
    if public is not None:
        doc["public"] = list(public.indices)
    return doc


def universe_from_json(doc: dict):
    """Parse a universe document; returns (universe, owners, public).

    ``owners`` is a list of :class:`OwnerDataset` (empty if absent) and
    ``public`` a :class:`PublicDataset` or None.
    """
    samples = doc["samples"]
    ids = [s["id"] for s in samples]
    payloads = [s["tokens"] if "tokens" in s else s["features"] for s in samples]
    labels = [s["label"] for s in samples]
    sens = [s.get("sensitive") for s in samples]
    has_sens = any(x is not None for x in sens)
    if has_sens and any(x is None for x in sens):
        raise ValueError("sensitive labeling must be total when present")
    uni = build_universe(
        payloads,
        labels,
        sensitive_assignment=sens if has_sens else None,
        ids=ids,
        label_set=doc.get("label_set"),
        sensitive_set=doc.get("sensitive_set"),
    )
    owners = [
        OwnerDataset(universe=uni, indices=tuple(ix), owner_id=k)
        for k, ix in enumerate(doc.get("owners", []))
    ]
    public = None
    if "public" in doc:
        public = PublicDataset(universe=uni, indices=tuple(doc["public"]))
    return uni, owners, public


def save_universe(path, universe: Universe, **kwargs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(universe_to_json(universe, **kwargs), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_universe(path):
    with open(path, encoding="utf-8") as fh:
        return universe_from_json(json.load(fh))
