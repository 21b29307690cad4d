"""Adversary-side posterior over a family given a published observation.

The posterior restricts the prior key distribution to the encoders that
could have produced the observation and renormalizes; encoders outside
that set get exactly zero.  Argmax attacks operate on the true posterior
or on any mismatched distribution the adversary carries instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ImpossibleObservationError
from .families import EncoderFamily, TableEncoder
from .universe import Observation, Universe

TIE_TOL = 1e-12


def pos_set(family: EncoderFamily, observation: Observation, universe: Universe) -> frozenset[int]:
    """Indices of encoders consistent with the observation.

    An encoder is consistent when some subset of the universe reproduces
    the observation pair-for-pair.  Because encoders are injective, each
    (encoded value, label) pair pins down the only candidate preimage, so
    the check is a per-pair lookup.  The empty set is a legal result.
    """
    if len(observation) > len(universe):
        raise ValueError("observation holds more pairs than the universe has samples")
    possible = []
    for k, enc in enumerate(family.encoders):
        inv = enc.inverse_map()
        for z, l in observation.pairs:
            i = inv.get(z)
            if i is None or universe.labels[i] != l:
                break
        else:
            possible.append(k)
    return frozenset(possible)


@dataclass(frozen=True)
class Posterior:
    """Probability per encoder index, conditioned on one observation."""

    family: EncoderFamily
    observation: Observation
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.probs) != len(self.family):
            raise ValueError("one probability per encoder required")
        if abs(math.fsum(self.probs) - 1.0) > 1e-9:
            raise ValueError("posterior probabilities must sum to 1")


@dataclass(frozen=True)
class MismatchedDistribution:
    """The adversary's (possibly wrong) distribution over the family."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if any(p < 0 for p in probs):
            raise ValueError("probabilities must be nonnegative")
        if abs(math.fsum(probs) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")
        object.__setattr__(self, "probs", probs)


def posterior(family: EncoderFamily, observation: Observation, universe: Universe) -> Posterior:
    """Prior weights restricted to the consistent set and renormalized."""
    pos = pos_set(family, observation, universe)
    if not pos:
        raise ImpossibleObservationError(
            "observation cannot be produced by any encoder in the family"
        )
    total = math.fsum(family.weights[k] for k in pos)
    probs = tuple(
        family.weights[k] / total if k in pos else 0.0 for k in range(len(family))
    )
    return Posterior(family=family, observation=observation, probs=probs)


def _argmax_with_ties(probs, seed: int) -> int:
    arr = np.asarray(probs, dtype=np.float64)
    top = arr.max()
    tied = np.flatnonzero(arr >= top - TIE_TOL)
    if len(tied) == 1:
        return int(tied[0])
    rng = np.random.default_rng(seed)
    return int(rng.choice(tied))


def optimal_attack(post: Posterior, seed: int) -> int:
    """Index of a maximum-posterior encoder; ties broken uniformly."""
    return _argmax_with_ties(post.probs, seed)


def suboptimal_attack(mismatched: MismatchedDistribution, seed: int) -> int:
    """Argmax of the adversary's mismatched distribution; ties uniform."""
    return _argmax_with_ties(mismatched.probs, seed)
