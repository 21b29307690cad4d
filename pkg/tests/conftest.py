import numpy as np
import pytest

import randenc as re


@pytest.fixture
def swap_universe():
    """Four scalar samples, two label classes."""
    return re.build_universe([1, 2, 3, 4], ["+", "+", "-", "-"], ids=[1, 2, 3, 4])


@pytest.fixture
def base_family(swap_universe):
    """Identity and a front-pair swap, uniform."""
    return re.family_from_tables([(0, 1, 2, 3), (1, 0, 2, 3)], swap_universe.ids)


@pytest.fixture
def outer_family(swap_universe):
    """Identity and a back-pair swap, uniform."""
    return re.family_from_tables([(0, 1, 2, 3), (0, 1, 3, 2)], swap_universe.ids)


@pytest.fixture
def four_swap_family(swap_universe):
    """All four front/back swap combinations, uniform."""
    return re.family_from_tables(
        [(0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2)], swap_universe.ids
    )


@pytest.fixture
def five_family(four_swap_family, swap_universe):
    """The four swaps grown with the half-rotation, uniform over five."""
    extra = re.TableEncoder(table=(2, 3, 0, 1), codomain=swap_universe.ids)
    return re.grow_family(four_swap_family, [extra])


def random_universe(rng, m=None, n_labels=2):
    m = m if m is not None else int(rng.integers(2, 7))
    labels = rng.integers(0, n_labels, size=m)
    while len(set(labels.tolist())) < min(n_labels, 2):
        labels = rng.integers(0, n_labels, size=m)
    values = [f"y{int(l)}" for l in labels]
    return re.build_universe(
        [float(i) for i in range(m)],
        values,
        ids=[f"x{i}" for i in range(m)],
        label_set=[f"y{k}" for k in range(n_labels)],
    )


def _random_weights(rng, size):
    w = rng.random(size) + 0.1
    w = w / w.sum()
    # renormalize exactly enough for the 1e-12 gate
    w[-1] = 1.0 - w[:-1].sum()
    return w.tolist()


def random_family(rng, universe, max_size=8, codomain=None):
    """Random injective tables with random positive weights."""
    import math

    m = len(universe)
    codomain = codomain if codomain is not None else universe.ids
    available = math.perm(len(codomain), m)
    size = int(rng.integers(1, min(max_size, available) + 1))
    seen = set()
    tables = []
    while len(tables) < size:
        t = tuple(int(v) for v in rng.permutation(len(codomain))[:m])
        if t not in seen:
            seen.add(t)
            tables.append(t)
    return re.family_from_tables(tables, codomain, _random_weights(rng, size))


def random_label_preserving_family(rng, universe, max_size=8):
    """Random permutations fixing each label class setwise, random weights.

    Label-preserving encoders keep the published labels attached to the
    same codomain points, which is the regime where composing families can
    only help privacy.
    """
    import math

    m = len(universe)
    classes = {}
    for i, l in enumerate(universe.labels):
        classes.setdefault(l, []).append(i)
    available = math.prod(math.factorial(len(c)) for c in classes.values())
    size = int(rng.integers(1, min(max_size, available) + 1))
    seen = set()
    tables = []
    while len(tables) < size:
        table = [0] * m
        for members in classes.values():
            images = rng.permutation(members)
            for src, dst in zip(members, images):
                table[src] = int(dst)
        t = tuple(table)
        if t not in seen:
            seen.add(t)
            tables.append(t)
    return re.family_from_tables(tables, universe.ids, _random_weights(rng, size))
