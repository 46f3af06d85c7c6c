import math

import pytest

from frag_core.errors import InstanceTooLargeError, InvalidMassError
from frag_core.masspart import (
    MassPartition, RefinementWitness, SpaceTag, dust_sequence, find_refinement_witness, lp_distance,
    moments, normalize, product_metric, verify_refinement,
)


def mp(*masses):
    return MassPartition(masses=tuple(masses))


class TestNormalize:
    """Canonical form of raw mass vectors."""

    def test_sorts_and_drops_zeros(self):
        assert normalize([0.2, 0.5, 0.0, 0.3]).masses == (0.5, 0.3, 0.2)

    def test_empty_and_single(self):
        assert normalize([]).masses == ()
        assert normalize([1.0]).masses == (1.0,)

    def test_idempotent(self):
        once = normalize([0.1, 0.7, 0.2])
        assert normalize(once.masses).masses == once.masses

    @pytest.mark.parametrize("bad,index", [([0.5, -0.1], 1), ([math.nan], 0), ([0.2, 0.3, math.inf], 2)])
    def test_rejects_invalid_values(self, bad, index):
        with pytest.raises(InvalidMassError) as exc:
            normalize(bad)
        assert exc.value.index == index

    def test_model_rejects_unsorted_and_trailing_zero(self):
        with pytest.raises(ValueError):
            mp(0.2, 0.5)
        with pytest.raises(ValueError):
            mp(0.5, 0.0)


class TestMetrics:
    """Product metric and l^p distances."""

    def test_product_metric_single_mass(self):
        assert product_metric(mp(1.0), mp()) == pytest.approx(0.5)

    def test_product_metric_dust(self):
        assert product_metric(dust_sequence(4), mp()) == pytest.approx(15 / 64)

    def test_product_metric_identity_and_symmetry(self):
        a, b = mp(0.6, 0.3), mp(0.5, 0.1, 0.1)
        assert product_metric(a, a) == 0.0
        assert product_metric(a, b) == pytest.approx(product_metric(b, a))
        assert 0.0 <= product_metric(a, b) <= 1.0

    @pytest.mark.parametrize("n", [1, 2, 10, 1000])
    def test_dust_stays_at_l1_distance_one(self, n):
        assert lp_distance(dust_sequence(n), mp(), 1) == pytest.approx(1.0)

    def test_dust_vanishes_in_product_metric(self):
        assert product_metric(dust_sequence(1000), mp()) < 1e-3

    def test_sup_and_l2(self):
        assert lp_distance(mp(0.5, 0.5), mp(1.0), "inf") == pytest.approx(0.5)
        assert lp_distance(mp(0.6, 0.4), mp(0.6, 0.4), 2) == 0.0

    def test_rejects_p_below_one(self):
        with pytest.raises(ValueError):
            lp_distance(mp(1.0), mp(), 0.5)


class TestMoments:
    """Total mass, Q value and subspace tag."""

    def test_unit_mass(self):
        m = moments(mp(1.0))
        assert (m.total_mass, m.q_value, m.space_tag) == (1.0, 1.0, SpaceTag.S1)

    def test_sub_probability(self):
        m = moments(mp(0.5, 1 / 3))
        assert m.total_mass == pytest.approx(5 / 6)
        assert m.q_value == pytest.approx(13 / 36)
        assert m.space_tag == SpaceTag.S_LE1

    def test_dust(self):
        m = moments(dust_sequence(4))
        assert m.q_value == pytest.approx(0.25)
        assert m.space_tag == SpaceTag.S1

    def test_finite_mass_above_one(self):
        assert moments(mp(1.0, 0.5)).space_tag == SpaceTag.S_FIN


class TestRefinement:
    """Refinement order with explicit witnesses."""

    def test_merge_into_one_piece(self):
        assert verify_refinement(mp(0.3, 0.2), mp(0.5), RefinementWitness(assignment=(0, 0)))

    def test_overfull_fibre_fails(self):
        assert not verify_refinement(mp(0.3, 0.3), mp(0.5), RefinementWitness(assignment=(0, 0)))

    def test_target_outside_support_needs_empty_fibre(self):
        assert not verify_refinement(mp(0.3, 0.2), mp(0.5), RefinementWitness(assignment=(0, 1)))

    def test_mass_may_disappear(self):
        assert verify_refinement(mp(0.1), mp(0.5, 0.4), RefinementWitness(assignment=(1,)))

    def test_search_finds_a_valid_witness(self):
        y, x = mp(0.3, 0.2, 0.1), mp(0.4, 0.2)
        w = find_refinement_witness(y, x)
        assert w is not None
        assert verify_refinement(y, x, w)

    def test_search_reports_impossible_grouping(self):
        assert find_refinement_witness(mp(0.4, 0.4), mp(0.5, 0.3)) is None

    def test_search_guard(self):
        with pytest.raises(InstanceTooLargeError):
            find_refinement_witness(dust_sequence(20), mp(1.0), max_support=12)
