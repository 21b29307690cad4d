"""Exact information-theoretic privacy and utility scores.

Everything here is computed by full enumeration over the joint randomness
(encoder choice, owner subset, and for utility scores also the labeling),
grouped by the canonical observation.  All entropies are base 2 with the
convention 0·log 0 = 0.  Group masses are exact integer counts scaled by
rational weights, accumulated with ``math.fsum`` in a canonical
observation order, so results are bit-stable across worker counts and
enumeration backends.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from math import comb, fsum, log2
from typing import Callable, Sequence

import numpy as np

from .enumeration import backend_name, observation_groups
from .errors import BudgetExceededError, SupportViolationError
from .families import EncoderFamily
from .posterior import MismatchedDistribution
from .universe import Observation, Universe

DEFAULT_BUDGET = 10_000_000

QBuilder = Callable[[Observation], MismatchedDistribution]


def entropy_bits(probs: Sequence[float]) -> float:
    """Shannon entropy in bits of a probability vector (0·log 0 = 0)."""
    return -fsum(p * log2(p) for p in probs if p > 0.0)


def _normalized_entropy(masses: Sequence[float]) -> float:
    total = fsum(masses)
    return -fsum((m / total) * log2(m / total) for m in masses if m > 0.0)


def _check_budget(cost: int, budget: int, what: str) -> None:
    if cost > budget:
        raise BudgetExceededError(cost, budget, what)


def _all_subsets(m: int, n: int) -> np.ndarray:
    if n == 0:
        return np.empty((1, 0), dtype=np.int32)
    return np.asarray(list(itertools.combinations(range(m), n)), dtype=np.int32)


def _resolve_labels(universe: Universe, labeling) -> np.ndarray:
    if labeling is None:
        return universe.labels_array()
    values = list(labeling)
    if len(values) != len(universe):
        raise ValueError("labeling must be total over the universe")
    idx = [universe.label_set.index(v) for v in values]
    return np.asarray(idx, dtype=np.int32)


def _decode_key(key: bytes) -> tuple[int, ...]:
    return tuple(int(c) for c in np.frombuffer(key, dtype="<i4"))


def _key_to_observation(key: bytes, family: EncoderFamily, universe: Universe) -> Observation:
    n_labels = universe.n_labels
    pairs = [(c // n_labels, c % n_labels) for c in _decode_key(key)]
    return Observation(pairs=tuple(pairs), codomain=family.codomain, label_set=universe.label_set)


@dataclass(frozen=True)
class ObservationScore:
    observation: Observation
    probability: float
    conditional_entropy_bits: float


@dataclass(frozen=True)
class ScoreReport:
    """Score value plus the full per-observation breakdown and config echo."""

    score_bits: float
    per_observation: tuple[ObservationScore, ...]
    config: dict

    def to_json(self) -> dict:
        return {
            "score_bits": self.score_bits,
            "config": dict(self.config),
            "per_observation": [
                {
                    "pairs": [list(p) for p in o.observation.symbol_pairs()],
                    "probability": o.probability,
                    "conditional_entropy_bits": o.conditional_entropy_bits,
                }
                for o in self.per_observation
            ],
        }


def _base_config(family: EncoderFamily, universe: Universe, n: int, workers: int, budget: int) -> dict:
    return {
        "n": int(n),
        "family_size": len(family),
        "universe_size": len(universe),
        "workers": int(workers),
        "budget": int(budget),
        "backend": backend_name(),
    }


def _grouped(family, universe, n, labels, workers, budget, what):
    m = len(universe)
    cost = len(family) * comb(m, n)
    _check_budget(cost, budget, what)
    subsets = _all_subsets(m, n)
    groups = observation_groups(
        family.tables_array(), labels, subsets, universe.n_labels, workers=workers
    )
    order = sorted(groups, key=_decode_key)
    return groups, order, subsets


def privacy_score(
    family: EncoderFamily,
    universe: Universe,
    n: int,
    labeling=None,
    *,
    workers: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> ScoreReport:
    """Expected residual uncertainty (bits) about the encoder.

    Enumerates every (encoder, size-n subset) pair, groups by the published
    observation, and sums observation probability times the entropy of the
    restricted-and-renormalized key distribution.
    """
    labels = _resolve_labels(universe, labeling)
    groups, order, _ = _grouped(
        family, universe, n, labels, workers, budget, "privacy score"
    )
    c_total = comb(len(universe), n)
    w = family.weights_array()
    rows = []
    for key in order:
        enc_idx = groups[key][:, 0]
        masses = w[enc_idx]
        p_obs = fsum(masses) / c_total
        h = _normalized_entropy(masses)
        rows.append((key, p_obs, h))
    score = fsum(p * h for _, p, h in rows)
    per_obs = tuple(
        ObservationScore(_key_to_observation(k, family, universe), p, h)
        for k, p, h in rows
    )
    config = _base_config(family, universe, n, workers, budget)
    config["kind"] = "privacy"
    return ScoreReport(score_bits=score, per_observation=per_obs, config=config)


def mismatched_privacy_score(
    family: EncoderFamily,
    universe: Universe,
    n: int,
    q_builder: QBuilder,
    labeling=None,
    *,
    workers: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> ScoreReport:
    """Expected cross-entropy (bits) against the adversary's distribution.

    ``q_builder`` maps each reachable observation to the mismatched
    distribution the adversary would use there.  Raises
    :class:`SupportViolationError` where the cross-entropy diverges.
    """
    labels = _resolve_labels(universe, labeling)
    groups, order, _ = _grouped(
        family, universe, n, labels, workers, budget, "mismatched privacy score"
    )
    c_total = comb(len(universe), n)
    w = family.weights_array()
    rows = []
    for key in order:
        obs = _key_to_observation(key, family, universe)
        q = q_builder(obs).probs
        if len(q) != len(family):
            raise ValueError("mismatched distribution must cover the family")
        enc_idx = groups[key][:, 0]
        masses = w[enc_idx]
        total = fsum(masses)
        p_obs = total / c_total
        terms = []
        for k, mass in zip(enc_idx, masses):
            p = mass / total
            if q[k] <= 0.0:
                raise SupportViolationError(
                    f"adversary distribution assigns zero mass to encoder {int(k)} "
                    f"which has posterior probability {p}"
                )
            terms.append(-p * log2(q[k]))
        rows.append((key, p_obs, fsum(terms)))
    score = fsum(p * ce for _, p, ce in rows)
    per_obs = tuple(
        ObservationScore(_key_to_observation(k, family, universe), p, ce)
        for k, p, ce in rows
    )
    config = _base_config(family, universe, n, workers, budget)
    config["kind"] = "mismatched_privacy"
    return ScoreReport(score_bits=score, per_observation=per_obs, config=config)


def kl_gap(
    family: EncoderFamily,
    universe: Universe,
    n: int,
    q_builder: QBuilder,
    labeling=None,
    *,
    workers: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> float:
    """Mismatched-minus-matched score gap, in bits.

    Postcondition: the gap equals the observation-averaged KL divergence
    between the posterior and the adversary's distribution (within 1e-10)
    and is nonnegative (within 1e-12); both are recomputed independently
    here and violations raise ``ArithmeticError``.
    """
    matched = privacy_score(
        family, universe, n, labeling, workers=workers, budget=budget
    )
    mismatched = mismatched_privacy_score(
        family, universe, n, q_builder, labeling, workers=workers, budget=budget
    )
    gap = mismatched.score_bits - matched.score_bits

    labels = _resolve_labels(universe, labeling)
    groups, order, _ = _grouped(family, universe, n, labels, workers, budget, "kl gap")
    c_total = comb(len(universe), n)
    w = family.weights_array()
    kl_terms = []
    for key in order:
        obs = _key_to_observation(key, family, universe)
        q = q_builder(obs).probs
        enc_idx = groups[key][:, 0]
        masses = w[enc_idx]
        total = fsum(masses)
        p_obs = total / c_total
        kl = fsum(
            (mass / total) * log2((mass / total) / q[k])
            for k, mass in zip(enc_idx, masses)
        )
        kl_terms.append(p_obs * kl)
    direct = fsum(kl_terms)
    if abs(gap - direct) > 1e-10:
        raise ArithmeticError(
            f"score gap {gap} disagrees with averaged KL divergence {direct}"
        )
    if gap < -1e-12:
        raise ArithmeticError(f"score gap {gap} is negative")
    return gap


def decompose_privacy_score(
    family: EncoderFamily,
    universe: Universe,
    n: int,
    labeling=None,
    *,
    workers: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> tuple[float, float]:
    """Split the privacy score into data and key-given-data uncertainty.

    Returns ``(h_data, h_key_given_data)``: the adversary's expected
    uncertainty about the owner's raw subset given the observation, and
    about the encoder once the raw subset is also known.  Both terms are
    enumerated jointly; their sum equals the privacy score.
    """
    labels = _resolve_labels(universe, labeling)
    groups, order, _ = _grouped(
        family, universe, n, labels, workers, budget, "privacy score decomposition"
    )
    c_total = comb(len(universe), n)
    w = family.weights_array()
    h_data_terms = []
    h_key_terms = []
    for key in order:
        arr = groups[key]
        by_subset: dict[int, list[float]] = {}
        for fi, si in arr:
            by_subset.setdefault(int(si), []).append(w[fi])
        subset_masses = {si: fsum(v) for si, v in by_subset.items()}
        p_obs = fsum(subset_masses.values()) / c_total
        h_data_terms.append(p_obs * _normalized_entropy(list(subset_masses.values())))
        for si in sorted(by_subset):
            h_key_terms.append(
                (subset_masses[si] / c_total) * _normalized_entropy(by_subset[si])
            )
    return fsum(h_data_terms), fsum(h_key_terms)


# ---------------------------------------------------------------------------
# Utility scores: the labeling is random.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabelingPrior:
    """Finite distribution over total labelings of a universe.

    ``labelings`` holds label indices per sample.  Duplicate labeling
    tables are merged (weights summed) so the prior's entropy is the
    entropy of the distinct tables.
    """

    labelings: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.labelings) != len(self.weights):
            raise ValueError("one weight per labeling required")
        if not self.labelings:
            raise ValueError("prior must contain at least one labeling")
        weights = tuple(float(x) for x in self.weights)
        if any(x <= 0 for x in weights):
            raise ValueError("prior weights must be strictly positive")
        if abs(fsum(weights) - 1.0) > 1e-9:
            raise ValueError("prior weights must sum to 1")
        merged: dict[tuple[int, ...], float] = {}
        for table, wgt in zip(self.labelings, weights):
            t = tuple(int(v) for v in table)
            merged[t] = merged.get(t, 0.0) + wgt
        object.__setattr__(self, "labelings", tuple(merged))
        object.__setattr__(self, "weights", tuple(merged.values()))

    def __len__(self) -> int:
        return len(self.labelings)

    def entropy_bits(self) -> float:
        return entropy_bits(self.weights)


def labeling_prior(
    universe: Universe, labelings: Sequence[Sequence], weights: Sequence[float] | None = None
) -> LabelingPrior:
    """Prior over labelings given as label values; uniform by default."""
    tables = []
    for lab in labelings:
        values = list(lab)
        if len(values) != len(universe):
            raise ValueError("each labeling must be total over the universe")
        tables.append(tuple(universe.label_set.index(v) for v in values))
    if weights is None:
        weights = [1.0 / len(tables)] * len(tables)
    return LabelingPrior(labelings=tuple(tables), weights=tuple(weights))


def all_labelings_prior(universe: Universe, limit: int = 4096) -> LabelingPrior:
    """Uniform prior over every total labeling (guarded by ``limit``)."""
    m, k = len(universe), universe.n_labels
    count = k**m
    if count > limit:
        raise ValueError(f"{count} labelings exceed the enumeration limit {limit}")
    tables = [tuple(t) for t in itertools.product(range(k), repeat=m)]
    return LabelingPrior(labelings=tuple(tables), weights=tuple([1.0 / count] * count))


def utility_score(
    family: EncoderFamily,
    universe: Universe,
    n: int,
    prior: LabelingPrior,
    *,
    workers: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> ScoreReport:
    """Prior labeling entropy minus the faithful user's residual uncertainty.

    The residual term is the expected entropy of the labeling of the
    realized encoder's output space, given the published observation: the
    labeling-on-encodings is identified by its restriction table on the
    encoder's image, which for a realized encoder is in bijection with the
    labeling itself.  Joint enumeration over (labeling, encoder, subset).
    """
    m = len(universe)
    cost = len(prior) * len(family) * comb(m, n)
    _check_budget(cost, budget, "utility score")
    subsets = _all_subsets(m, n)
    tables = family.tables_array()
    w = family.weights_array()
    u = np.asarray(prior.weights, dtype=np.float64)
    c_total = comb(m, n)

    # collect[key][encoder] = per-labeling masses (each labeling reaches a
    # given (observation, encoder) cell through at most one subset)
    collect: dict[bytes, dict[int, list[float]]] = {}
    for i, table in enumerate(prior.labelings):
        labels_i = np.asarray(table, dtype=np.int32)
        groups_i = observation_groups(
            tables, labels_i, subsets, universe.n_labels, workers=workers
        )
        for key, arr in groups_i.items():
            per_enc = collect.setdefault(key, {})
            for fi in arr[:, 0]:
                per_enc.setdefault(int(fi), []).append(u[i])

    h_prior = prior.entropy_bits()
    cond_terms = []
    rows = []
    for key in sorted(collect, key=_decode_key):
        per_enc = collect[key]
        cell_terms = []
        p_obs_terms = []
        for fi in sorted(per_enc):
            masses = per_enc[fi]
            cell_mass = w[fi] * fsum(masses) / c_total
            p_obs_terms.append(cell_mass)
            cell_terms.append((cell_mass, _normalized_entropy(masses)))
        p_obs = fsum(p_obs_terms)
        h_here = fsum(mass * h for mass, h in cell_terms) / p_obs
        cond_terms.extend(mass * h for mass, h in cell_terms)
        rows.append((key, p_obs, h_here))
    h_cond = fsum(cond_terms)
    score = h_prior - h_cond
    per_obs = tuple(
        ObservationScore(_key_to_observation(k, family, universe), p, h)
        for k, p, h in rows
    )
    config = _base_config(family, universe, n, workers, budget)
    config["kind"] = "utility"
    config["prior_size"] = len(prior)
    config["prior_entropy_bits"] = h_prior
    return ScoreReport(score_bits=score, per_observation=per_obs, config=config)


# ---------------------------------------------------------------------------
# Multi-owner utility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OwnerUtility:
    owner_id: int
    single_bits: float
    combined_bits: float


@dataclass(frozen=True)
class MultiOwnerUtilityReport:
    owners: tuple[OwnerUtility, ...]
    prior_entropy_bits: float
    config: dict

    def to_json(self) -> dict:
        return {
            "prior_entropy_bits": self.prior_entropy_bits,
            "config": dict(self.config),
            "owners": [
                {
                    "owner_id": o.owner_id,
                    "single_bits": o.single_bits,
                    "combined_bits": o.combined_bits,
                }
                for o in self.owners
            ],
        }


def _owner_keys(universe, dataset, family, prior) -> list[list[bytes]]:
    """keys[f][i]: observation key of ``dataset`` under encoder f, labeling i."""
    idx = np.asarray(dataset.indices, dtype=np.int64)
    tables = family.tables_array()
    n_labels = universe.n_labels
    sub_z = tables[:, idx] * np.int32(n_labels)
    out: list[list[bytes]] = []
    for f in range(tables.shape[0]):
        row = []
        for table in prior.labelings:
            lab = np.asarray(table, dtype=np.int32)[idx]
            codes = np.sort(sub_z[f] + lab).astype("<i4")
            row.append(codes.tobytes())
        out.append(row)
    return out


def multi_owner_utility(
    universe: Universe,
    owner_datasets: Sequence,
    families: Sequence[EncoderFamily],
    prior: LabelingPrior,
    *,
    budget: int = DEFAULT_BUDGET,
) -> MultiOwnerUtilityReport:
    """Utility per owner when training alone versus on all published data.

    Owners hold fixed datasets and draw encoders independently from their
    families.  For every owner, the combined score conditions on every
    owner's published observation and is therefore at least the
    single-dataset score; the bound is checked and violations raise
    ``ArithmeticError``.
    """
    d_count = len(owner_datasets)
    if len(families) != d_count:
        raise ValueError("one family per owner required")
    if d_count < 1:
        raise ValueError("at least one owner required")
    cost = len(prior) * math.prod(len(f) for f in families)
    _check_budget(cost, budget, "multi-owner utility")

    u = np.asarray(prior.weights, dtype=np.float64)
    h_prior = prior.entropy_bits()
    keys = [_owner_keys(universe, ds, fam, prior) for ds, fam in zip(owner_datasets, families)]
    weights = [fam.weights_array() for fam in families]

    # Single-owner scores need no joint enumeration: the other owners'
    # randomness marginalizes out exactly.
    singles = []
    for d in range(d_count):
        buckets: dict[tuple[bytes, int], dict[int, float]] = {}
        for f in range(len(families[d])):
            for i in range(len(prior)):
                cell = buckets.setdefault((keys[d][f][i], f), {})
                cell[i] = cell.get(i, 0.0) + u[i]
        terms = []
        for bk in sorted(buckets, key=lambda t: (_decode_key(t[0]), t[1])):
            cell = buckets[bk]
            masses = [cell[i] for i in sorted(cell)]
            terms.append(weights[d][bk[1]] * fsum(masses) * _normalized_entropy(masses))
        singles.append(h_prior - fsum(terms))

    combined_buckets: list[dict[tuple, dict[int, float]]] = [dict() for _ in range(d_count)]
    for f_vec in itertools.product(*(range(len(fam)) for fam in families)):
        w_joint = math.prod(weights[d][f_vec[d]] for d in range(d_count))
        for i in range(len(prior)):
            joint_key = tuple(keys[d][f_vec[d]][i] for d in range(d_count))
            mass = w_joint * u[i]
            for d in range(d_count):
                cell = combined_buckets[d].setdefault((joint_key, f_vec[d]), {})
                cell[i] = cell.get(i, 0.0) + mass

    combined = []
    for d in range(d_count):
        terms = []
        ordered = sorted(
            combined_buckets[d],
            key=lambda t: (tuple(_decode_key(k) for k in t[0]), t[1]),
        )
        for bk in ordered:
            cell = combined_buckets[d][bk]
            masses = [cell[i] for i in sorted(cell)]
            terms.append(fsum(masses) * _normalized_entropy(masses))
        combined.append(h_prior - fsum(terms))

    owners = []
    for d in range(d_count):
        if combined[d] < singles[d] - 1e-10:
            raise ArithmeticError(
                f"combined utility {combined[d]} fell below the single-owner "
                f"utility {singles[d]} for owner {d}"
            )
        owners.append(
            OwnerUtility(
                owner_id=getattr(owner_datasets[d], "owner_id", d),
                single_bits=singles[d],
                combined_bits=combined[d],
            )
        )
    config = {
        "owners": d_count,
        "dataset_sizes": [len(ds.indices) for ds in owner_datasets],
        "family_sizes": [len(f) for f in families],
        "prior_size": len(prior),
        "budget": int(budget),
        "backend": backend_name(),
    }
    return MultiOwnerUtilityReport(
        owners=tuple(owners), prior_entropy_bits=h_prior, config=config
    )
