import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import randenc as re
from conftest import random_family, random_universe


class TestMakeFamily:
    def test_two_swap_family(self, base_family):
        assert len(base_family) == 2
        assert [e.symbols() for e in base_family.encoders] == [(1, 2, 3, 4), (2, 1, 3, 4)]

    def test_singleton_identity(self, swap_universe):
        fam = re.family_from_tables([(0, 1, 2, 3)], swap_universe.ids, [1.0])
        assert len(fam) == 1

    def test_bad_weight_sum_rejected(self, swap_universe):
        with pytest.raises(ValueError, match="sum"):
            re.family_from_tables(
                [(0, 1, 2, 3), (1, 0, 2, 3)], swap_universe.ids, [0.6, 0.6]
            )

    def test_noninjective_rejected(self, swap_universe):
        with pytest.raises(ValueError, match="injective"):
            re.TableEncoder(table=(0, 0, 2, 3), codomain=swap_universe.ids)

    def test_duplicate_table_rejected(self, swap_universe):
        with pytest.raises(ValueError, match="duplicate"):
            re.family_from_tables([(0, 1, 2, 3), (0, 1, 2, 3)], swap_universe.ids)

    def test_nonpositive_weight_rejected(self, swap_universe):
        with pytest.raises(ValueError, match="positive"):
            re.family_from_tables(
                [(0, 1, 2, 3), (1, 0, 2, 3)], swap_universe.ids, [1.0, 0.0]
            )


class TestSampleEncoder:
    def test_singleton_any_seed(self, swap_universe):
        fam = re.family_from_tables([(0, 1, 2, 3)], swap_universe.ids)
        assert all(re.sample_encoder(fam, seed=s) is fam.encoders[0] for s in range(5))

    def test_uniform_frequencies(self, base_family):
        hits = sum(
            re.sample_encoder(base_family, seed=s) is base_family.encoders[0]
            for s in range(10_000)
        )
        assert abs(hits / 10_000 - 0.5) < 0.02

    def test_skewed_frequencies(self, swap_universe):
        fam = re.family_from_tables(
            [(0, 1, 2, 3), (1, 0, 2, 3)], swap_universe.ids, [0.9, 0.1]
        )
        hits = sum(
            re.sample_encoder(fam, seed=s) is fam.encoders[0] for s in range(10_000)
        )
        assert abs(hits / 10_000 - 0.9) < 0.02


class TestComposeFamilies:
    def test_paper_pair_composition(self, base_family, outer_family):
        comp = re.compose_families(base_family, outer_family)
        tables = {e.symbols() for e in comp.encoders}
        assert tables == {(1, 2, 3, 4), (2, 1, 3, 4), (1, 2, 4, 3), (2, 1, 4, 3)}
        assert all(abs(w - 0.25) < 1e-12 for w in comp.weights)

    def test_identity_outer_is_left_identity(self, base_family, swap_universe):
        ident = re.family_from_tables([(0, 1, 2, 3)], swap_universe.ids)
        comp = re.compose_families(base_family, ident)
        assert [e.table for e in comp.encoders] == [e.table for e in base_family.encoders]
        assert np.allclose(comp.weights, base_family.weights)

    def test_identity_inner_is_right_identity(self, base_family, swap_universe):
        ident = re.family_from_tables([(0, 1, 2, 3)], swap_universe.ids)
        comp = re.compose_families(ident, base_family)
        assert [e.table for e in comp.encoders] == [e.table for e in base_family.encoders]
        assert np.allclose(comp.weights, base_family.weights)

    def test_self_composition_collapses(self, swap_universe):
        fam = re.family_from_tables([(0, 1, 2, 3), (1, 0, 2, 3)], swap_universe.ids)
        comp = re.compose_families(fam, fam)
        got = {e.symbols(): w for e, w in zip(comp.encoders, comp.weights)}
        assert got == {
            (1, 2, 3, 4): pytest.approx(0.5),
            (2, 1, 3, 4): pytest.approx(0.5),
        }

    def test_weight_total_and_size_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            uni = random_universe(rng)
            f1 = random_family(rng, uni)
            f2 = random_family(rng, uni)
            comp = re.compose_families(f1, f2)
            assert abs(math.fsum(comp.weights) - 1.0) <= 1e-12
            assert len(comp) <= len(f1) * len(f2)

    def test_associative_as_weighted_multisets(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            uni = random_universe(rng, m=4)
            f1, f2, f3 = (random_family(rng, uni, max_size=4) for _ in range(3))
            left = re.compose_families(re.compose_families(f1, f2), f3)
            right = re.compose_families(f1, re.compose_families(f2, f3))
            as_map = lambda fam: {
                e.table: w for e, w in zip(fam.encoders, fam.weights)
            }
            lm, rm = as_map(left), as_map(right)
            assert set(lm) == set(rm)
            assert all(abs(lm[t] - rm[t]) < 1e-12 for t in lm)

    def test_domain_mismatch_rejected(self, base_family):
        small = re.family_from_tables([(0, 1)], (1, 2))
        with pytest.raises(ValueError, match="domain"):
            re.compose_families(base_family, small)


class TestGrowFamily:
    def test_grow_to_five(self, four_swap_family, swap_universe):
        extra = re.TableEncoder(table=(2, 3, 0, 1), codomain=swap_universe.ids)
        grown = re.grow_family(four_swap_family, [extra])
        assert len(grown) == 5
        assert all(abs(w - 0.2) < 1e-12 for w in grown.weights)

    def test_grow_with_nothing(self, four_swap_family):
        grown = re.grow_family(four_swap_family, [])
        assert grown == four_swap_family

    def test_grow_singleton(self, swap_universe):
        ident = re.family_from_tables([(0, 1, 2, 3)], swap_universe.ids)
        swap = re.TableEncoder(table=(1, 0, 2, 3), codomain=swap_universe.ids)
        grown = re.grow_family(ident, [swap])
        assert len(grown) == 2
        assert grown.weights == (0.5, 0.5)

    def test_duplicate_growth_rejected(self, base_family, swap_universe):
        dup = re.TableEncoder(table=(0, 1, 2, 3), codomain=swap_universe.ids)
        with pytest.raises(ValueError, match="duplicate"):
            re.grow_family(base_family, [dup])


class TestPermutationFamily:
    def test_all_three(self):
        uni = re.build_universe([1, 2, 3], ["a", "b", "a"])
        fam = re.permutation_family(uni, kind="all")
        assert len(fam) == 6
        assert all(abs(w - 1 / 6) < 1e-12 for w in fam.weights)

    def test_label_preserving(self, swap_universe):
        fam = re.permutation_family(swap_universe, kind="label_preserving")
        assert len(fam) == 4
        for enc in fam.encoders:
            for i, z in enumerate(enc.table):
                assert swap_universe.labels[i] == swap_universe.labels[z]

    def test_singleton_universe(self):
        uni = re.build_universe([1], ["+"])
        fam = re.permutation_family(uni, kind="all")
        assert len(fam) == 1 and fam.encoders[0].table == (0,)

    def test_size_guard(self):
        uni = re.build_universe(list(range(9)), ["+"] * 9)
        with pytest.raises(ValueError, match="guard"):
            re.permutation_family(uni, kind="all")


class TestFamilyJson:
    def test_round_trip(self, tmp_path, five_family):
        path = tmp_path / "f.json"
        re.save_family(path, five_family)
        loaded = re.load_family(path)
        assert loaded == five_family


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_sampled_encoder_always_in_support(seed):
    uni = re.build_universe([1, 2, 3], ["a", "a", "b"])
    fam = re.family_from_tables([(0, 1, 2), (1, 0, 2), (0, 2, 1)], uni.ids, [0.5, 0.25, 0.25])
    assert re.sample_encoder(fam, seed) in fam.encoders
