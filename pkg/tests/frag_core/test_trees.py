import math

import numpy as np
import pytest

from frag_core.errors import ExactRegimeExceededError, InvalidTreeError
from frag_core.trees import (
    Tree, diameter, distance, laplace_distance_sum, mean_pairwise_distance, pairwise_defect,
    pairwise_distance_sum, path_tree, read_tree, sample_vertices, star_tree, subtree_masses, summary,
)


class TestTreeConstruction:
    """Validation of edge data."""

    def test_wrong_edge_count(self):
        with pytest.raises(InvalidTreeError):
            Tree(3, np.array([[0, 1]]))

    def test_disconnected(self):
        with pytest.raises(InvalidTreeError):
            Tree(4, np.array([[0, 1], [1, 0], [2, 3]]))

    def test_self_loop(self):
        with pytest.raises(InvalidTreeError):
            Tree(2, np.array([[1, 1]]))

    def test_weights_must_sum_to_one(self):
        with pytest.raises(InvalidTreeError):
            path_tree(3).with_weights([0.5, 0.5, 0.5])

    def test_from_parents(self):
        tree = Tree.from_parents([-1, 0, 0, 1])
        assert tree.root == 0
        assert tree.depth.tolist() == [0, 1, 1, 2]

    def test_immutable(self):
        with pytest.raises(AttributeError):
            star_tree(3).n = 5

    def test_canonical_key_ignores_edge_order(self):
        a = Tree(3, np.array([[0, 1], [2, 1]]))
        b = Tree(3, np.array([[1, 2], [1, 0]]))
        assert a.canonical_key() == b.canonical_key()

    def test_edge_list_files(self, tmp_path):
        tree = path_tree(3).with_weights([0.5, 0.25, 0.25])
        tree.to_edge_list(tmp_path / "t.edges", tmp_path / "t.weights")
        loaded = read_tree(tmp_path / "t.edges", tmp_path / "t.weights", root=0)
        assert loaded.canonical_key() == tree.canonical_key()
        assert loaded.weights.tolist() == [0.5, 0.25, 0.25]

    def test_malformed_edge_file(self, tmp_path):
        (tmp_path / "bad.edges").write_text("0 1\n1 2 3\n")
        with pytest.raises(InvalidTreeError):
            read_tree(tmp_path / "bad.edges")


class TestDistances:
    """Distances, diameters and pair sums."""

    def test_distance_on_star(self, star4):
        assert distance(star4, 0, 3) == 1
        assert distance(star4, 1, 3) == 2
        assert distance(star4, 2, 2) == 0

    @pytest.mark.parametrize("v,w", [(-1, 0), (0, 4), (7, 7)])
    def test_distance_rejects_unknown_vertices(self, star4, v, w):
        with pytest.raises(InvalidTreeError, match="out of range"):
            distance(star4, v, w)

    def test_mean_pairwise_distance(self, star4, path3):
        assert mean_pairwise_distance(star4) == pytest.approx(18 / 16)
        assert mean_pairwise_distance(path3) == pytest.approx(8 / 9)

    def test_pair_sum_matches_brute_force(self, rng):
        parents = [-1] + [int(rng.integers(0, v)) for v in range(1, 30)]
        tree = Tree.from_parents(parents)
        brute = sum(distance(tree, v, w) for v in range(tree.n) for w in range(tree.n))
        assert pairwise_distance_sum(tree) == brute

    def test_weighted_mean_distance(self):
        tree = path_tree(3).with_weights([0.5, 0.0, 0.5])
        assert mean_pairwise_distance(tree) == pytest.approx(2 * 0.25 * 2)

    def test_diameter_and_summary(self, path3, star4):
        assert diameter(path_tree(7)) == 6
        s = summary(star4)
        assert (s.diameter, s.height, s.total_path_length) == (2, 1, 3)
        assert summary(path3.with_root(None)).height is None

    def test_subtree_masses(self, path3):
        assert subtree_masses(path3).tolist() == [3, 2, 1]


class TestExactFunctionals:
    """Laplace transform of the distance and the pairwise defect."""

    def test_star_at_ln2(self, star4):
        assert laplace_distance_sum(star4, math.log(2.0)) == pytest.approx(0.53125)

    def test_zero_beta(self, path3):
        assert laplace_distance_sum(path3, 0.0) == pytest.approx(1.0)

    def test_defect_on_star(self, star4):
        d = pairwise_defect(star4, math.log(2.0))
        assert d.defect == pytest.approx(0.46875)
        assert d.linear == pytest.approx(math.log(2.0) * 18 / 16)
        assert d.defect <= d.linear

    def test_exact_regime_guard(self, star4, mocker):
        mocker.patch("frag_core.trees.EXACT_REGIME_MAX_N", 3)
        with pytest.raises(ExactRegimeExceededError):
            laplace_distance_sum(star4, 1.0)

    def test_weighted_vertex_sampling(self, rng):
        tree = path_tree(3).with_weights([0.0, 1.0, 0.0])
        assert set(sample_vertices(tree, rng, 50).tolist()) == {1}
