import numpy as np
import pytest

import randenc as re


def obs(universe, family, pairs):
    """Observation from (codomain index, label index) pairs."""
    return re.Observation(pairs=tuple(pairs), codomain=family.codomain, label_set=universe.label_set)


class TestPosSet:
    def test_rotation_pins_the_encoder(self, five_family, swap_universe):
        o = obs(swap_universe, five_family, [(2, 0)])  # symbol 3 labeled +
        assert re.pos_set(five_family, o, swap_universe) == {4}

    def test_empty_observation_allows_all(self, five_family, swap_universe):
        o = obs(swap_universe, five_family, [])
        assert re.pos_set(five_family, o, swap_universe) == set(range(5))

    def test_front_symbol_allows_the_four_swaps(self, five_family, swap_universe):
        o = obs(swap_universe, five_family, [(0, 0)])  # symbol 1 labeled +
        assert re.pos_set(five_family, o, swap_universe) == {0, 1, 2, 3}

    def test_unproducible_observation_empty(self, base_family, swap_universe):
        o = obs(swap_universe, base_family, [(2, 0)])  # symbol 3 labeled +
        assert re.pos_set(base_family, o, swap_universe) == frozenset()

    def test_oversized_observation_rejected(self, base_family, swap_universe):
        o = obs(swap_universe, base_family, [(0, 0), (1, 0), (2, 1), (3, 1), (0, 1)])
        with pytest.raises(ValueError):
            re.pos_set(base_family, o, swap_universe)


class TestPosterior:
    def test_uniform_restriction(self, five_family, swap_universe):
        o = obs(swap_universe, five_family, [(0, 0)])
        post = re.posterior(five_family, o, swap_universe)
        assert post.probs == (0.25, 0.25, 0.25, 0.25, 0.0)

    def test_weighted_restriction(self, swap_universe):
        fam = re.family_from_tables(
            [(2, 3, 0, 1), (0, 1, 2, 3), (1, 0, 2, 3)],
            swap_universe.ids,
            [0.5, 0.25, 0.25],
        )
        o = obs(swap_universe, fam, [(0, 0)])  # symbol 1, +: rotation impossible
        post = re.posterior(fam, o, swap_universe)
        assert post.probs == (0.0, 0.5, 0.5)

    def test_impossible_observation_raises(self, base_family, swap_universe):
        o = obs(swap_universe, base_family, [(2, 0)])
        with pytest.raises(re.ImpossibleObservationError):
            re.posterior(base_family, o, swap_universe)

    def test_zero_exactly_outside_pos(self, five_family, swap_universe):
        o = obs(swap_universe, five_family, [(0, 0)])
        post = re.posterior(five_family, o, swap_universe)
        assert post.probs[4] == 0.0
        assert abs(sum(post.probs) - 1.0) <= 1e-12


class TestAttacks:
    def test_unique_max(self, five_family, swap_universe):
        o = obs(swap_universe, five_family, [(0, 0)])
        post = re.Posterior(family=five_family, observation=o, probs=(0.0, 0.0, 1.0, 0.0, 0.0))
        assert all(re.optimal_attack(post, seed=s) == 2 for s in range(20))

    def test_tie_frequencies(self, five_family, swap_universe):
        o = obs(swap_universe, five_family, [(0, 0)])
        post = re.Posterior(
            family=five_family, observation=o, probs=(0.5, 0.5, 0.0, 0.0, 0.0)
        )
        picks = np.array([re.optimal_attack(post, seed=s) for s in range(10_000)])
        assert set(picks.tolist()) == {0, 1}
        assert abs((picks == 0).mean() - 0.5) < 0.02

    def test_rotation_attack_always_succeeds(self, five_family, swap_universe):
        o = obs(swap_universe, five_family, [(2, 0)])
        post = re.posterior(five_family, o, swap_universe)
        assert all(re.optimal_attack(post, seed=s) == 4 for s in range(20))

    def test_suboptimal_matches_optimal_when_q_is_p(self, five_family, swap_universe):
        o = obs(swap_universe, five_family, [(0, 0)])
        post = re.posterior(five_family, o, swap_universe)
        q = re.MismatchedDistribution(probs=post.probs)
        for s in range(10):
            assert re.suboptimal_attack(q, seed=s) == re.optimal_attack(post, seed=s)

    def test_suboptimal_uniform_q_ties_over_family(self, five_family):
        q = re.MismatchedDistribution(probs=(0.2,) * 5)
        picks = {re.suboptimal_attack(q, seed=s) for s in range(200)}
        assert picks == {0, 1, 2, 3, 4}

    def test_suboptimal_can_pick_impossible_encoder(self):
        q = re.MismatchedDistribution(probs=(0.7, 0.1, 0.1, 0.1))
        assert all(re.suboptimal_attack(q, seed=s) == 0 for s in range(10))
