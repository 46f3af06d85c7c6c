import math

import numpy as np
import pytest
from scipy.special import zeta

from frag_core.errors import SamplerBudgetExceededError
from frag_core.generators import (
    DegreeSequence, FamilyKind, FamilySpec, OffspringDistribution, RankedProbability, _prufer_decode,
    cayley, cycle_lemma_rotation, decode_plane_tree, degree_sequence_tree, family_size, gw_conditioned,
    natural_scale, p_tree, sample_tree, stable_family,
)
from frag_core.trees import Tree


def child_counts(tree: Tree) -> np.ndarray:
    return np.bincount(tree.parent[tree.parent >= 0], minlength=tree.n)


class TestOffspringDistribution:
    """Offspring laws and the standing criticality assumptions."""

    def test_stable_law_is_a_critical_probability(self):
        mu = OffspringDistribution.stable(1.5)
        k = np.arange(200_000)
        pmf = mu.pmf(k)
        assert pmf[0] == pytest.approx(1.0 - zeta(2.5) / zeta(1.5), rel=1e-12)
        assert pmf.sum() == pytest.approx(1.0, abs=1e-6)
        assert mu.is_critical

    def test_geometric_half_is_critical(self):
        mu = OffspringDistribution.geometric(0.5)
        assert mu.mean == pytest.approx(1.0)
        assert mu.pmf([0, 1, 2]).tolist() == pytest.approx([0.5, 0.25, 0.125])

    def test_supercritical_law_rejected(self):
        with pytest.raises(ValueError):
            OffspringDistribution.poisson(2.0).check_conditionable()

    def test_table_must_sum_to_one(self):
        with pytest.raises(ValueError):
            OffspringDistribution.from_table([0.5, 0.2])

    def test_stable_family_scalings(self):
        _, b2 = stable_family(2.0)
        _, b15 = stable_family(1.5)
        assert b2(400) == pytest.approx(20.0)
        assert b15(1000) == pytest.approx(100.0)


class TestCayley:
    """Uniform labelled trees."""

    def test_prufer_star(self):
        edges = _prufer_decode(np.array([3, 3, 3]), 5)
        tree = Tree(5, edges)
        assert tree.degrees()[3] == 4

    @pytest.mark.parametrize("n", [1, 2, 3, 50])
    def test_size_and_root(self, n, rng):
        tree = cayley(n, rng)
        assert tree.n == n
        assert 0 <= tree.root < n


class TestPlaneTrees:
    """Cycle lemma and preorder decoding."""

    def test_rotation(self):
        assert cycle_lemma_rotation(np.array([0, 0, 2, 1])).tolist() == [2, 1, 0, 0]

    def test_rotation_rejects_bad_word(self):
        with pytest.raises(ValueError):
            cycle_lemma_rotation(np.array([1, 1, 1]))

    def test_decode(self):
        assert decode_plane_tree(np.array([2, 0, 1, 0])).tolist() == [-1, 0, 0, 2]

    def test_gw_tree_size(self, rng):
        tree = gw_conditioned(OffspringDistribution.poisson(1.0), 200, rng)
        assert tree.n == 200
        assert tree.root == 0

    def test_degree_sequence_is_respected(self, rng):
        s = DegreeSequence.from_profile(300, OffspringDistribution.poisson(1.0))
        tree = degree_sequence_tree(s, rng)
        assert tree.n == s.size
        counts = np.bincount(child_counts(tree), minlength=len(s.counts))
        assert tuple(counts.tolist()) == s.counts

    def test_infeasible_degree_sequence(self):
        with pytest.raises(ValueError):
            DegreeSequence(counts=(2, 2))

    def test_sigma2(self):
        assert DegreeSequence(counts=(2, 1, 1)).sigma2 == 2


class TestPTrees:
    """Birthday construction."""

    def test_uniform_sigma(self):
        assert RankedProbability.uniform(100).sigma == pytest.approx(0.1)

    def test_rejects_unranked(self):
        with pytest.raises(ValueError):
            RankedProbability(p=(0.2, 0.8))

    def test_heavy_atom_must_dominate(self):
        with pytest.raises(ValueError):
            RankedProbability.one_heavy_atom(2, 0.3)

    def test_tree_carries_the_weights(self, rng):
        p = RankedProbability.geometric(20)
        tree = p_tree(p, rng)
        assert tree.n == 20
        assert tree.weights.tolist() == pytest.approx(list(p.p))

    def test_step_cap(self, rng):
        with pytest.raises(SamplerBudgetExceededError):
            p_tree(RankedProbability.uniform(50), rng, step_cap=10)


class TestFamilySpec:
    """Dispatch by family and natural scales."""

    def test_scales(self):
        assert natural_scale(FamilySpec(kind=FamilyKind.CAYLEY), 100) == pytest.approx(10.0)
        assert natural_scale(FamilySpec(kind=FamilyKind.PTREE), 100) == pytest.approx(10.0)
        assert natural_scale(FamilySpec(kind=FamilyKind.GW), 100) == pytest.approx(10.0)

    @pytest.mark.parametrize("kind", list(FamilyKind))
    def test_sample_matches_family_size(self, kind, rng):
        spec = FamilySpec(kind=kind)
        assert sample_tree(spec, 60, rng).n == family_size(spec, 60)

    def test_geometric_offspring_at_alpha_two(self):
        mu, scale = FamilySpec(kind=FamilyKind.GW, offspring="geometric").offspring_law()
        assert mu.variance == pytest.approx(2.0)
        assert scale(100) == pytest.approx(10.0 * math.sqrt(2.0))

    @pytest.mark.parametrize("offspring", ["geometric", "poisson"])
    def test_offspring_needs_alpha_two(self, offspring):
        with pytest.raises(ValueError, match="needs alpha=2"):
            FamilySpec(kind=FamilyKind.GW, alpha=1.5, offspring=offspring)

    @pytest.mark.parametrize("offspring", ["stable", "table"])
    def test_offspring_must_be_a_base_law(self, offspring):
        with pytest.raises(ValueError, match="poisson or geometric"):
            FamilySpec(kind=FamilyKind.GW, offspring=offspring)

    def test_heavy_shape(self):
        p = FamilySpec(kind=FamilyKind.PTREE, p_shape="heavy", p_param=0.4).probabilities(10)
        assert p.p[0] == pytest.approx(0.4)
        assert math.fsum(p.p) == pytest.approx(1.0)
