import math

import numpy as np
import pytest

from frag_core.generators import RankedProbability
from frag_lab.poissonlab import (
    TailStatus, TailTable, _first_repeats, binomial_bound, birthday_law, default_t_grid,
    distance_tail_bound, distance_tail_bound_sharp, identity_test, ptree_distances, simulate_embedding,
    simulate_embeddings, t1_tail_bound, tail_report, tail_row,
)
from frag_lab.stats import wilson_interval


class TestEmbedding:
    """Exact and blocked draws of the first repeat (R1, T1)."""

    def test_single_atom_repeats_immediately(self, rng):
        p = RankedProbability(p=(1.0,))
        sample = simulate_embedding(p, rng)
        assert sample.r1 == 1
        assert sample.atoms_used == 2
        assert sample.t1 > 0

    def test_r1_bounded_by_support(self, rng):
        p = RankedProbability.uniform(5)
        assert all(1 <= s.r1 <= 5 for s in simulate_embeddings(p, rng, 500))

    def test_first_repeats(self):
        labels = np.array([[0, 1, 0, 2], [3, 1, 2, 0], [1, 1, 2, 2], [2, 0, 1, 0]])
        assert _first_repeats(labels).tolist() == [2, 0, 1, 3]

    @pytest.mark.statistical
    def test_blocked_matches_birthday_law(self, rng):
        n, size = 20, 20000
        r1 = np.array([s.r1 for s in simulate_embeddings(RankedProbability.uniform(n), rng, size)])
        for k in (2, 4, 6, 8):
            expected = birthday_law(n, k)[0]
            se = math.sqrt(expected * (1 - expected) / size)
            assert abs(np.mean(r1 > k) - expected) <= 4 * se


class TestBirthdayLaw:
    def test_small_support(self):
        law = birthday_law(4, [0, 1, 2, 3, 4])
        assert law == pytest.approx([1.0, 0.75, 0.375, 0.09375, 0.0])

    def test_classic_value(self):
        # 23 people with no shared birthday
        assert birthday_law(365, 22)[0] == pytest.approx(0.4927, abs=1e-4)


class TestBounds:
    def test_t1_bound_at_zero(self):
        assert t1_tail_bound(0.0, 0.3) == 1.0

    def test_sharp_form_is_tighter_for_large_x(self):
        for x in (8.0, 10.0, 27.0):
            assert distance_tail_bound_sharp(x, 0.1) <= distance_tail_bound(x, 0.1)

    def test_binomial_bound(self):
        # at most one of three draws in an atom of mass 1/2
        assert binomial_bound(2.0, 0.5) == pytest.approx(0.5)
        assert binomial_bound(2.7, 0.5) == pytest.approx(0.5)

    def test_default_grid_below_cap(self):
        p = RankedProbability.uniform(100)
        grid = default_t_grid(p)
        assert grid == pytest.approx([5.0, 10.0, 20.0, 30.0, 40.0])
        assert max(grid) < 1.0 / (2.0 * p.p[0])

    def test_default_grid_falls_back_to_cap_fractions(self):
        p = RankedProbability.one_heavy_atom(50, 0.4)
        cap = 1.0 / 0.8
        assert default_t_grid(p) == pytest.approx([f * cap for f in (0.5, 0.6, 0.7, 0.8, 0.9)])


class TestTailReport:
    def test_rejects_small_x(self):
        with pytest.raises(ValueError):
            tail_report(RankedProbability.uniform(50), 100, x_grid=(4.0,))

    def test_rejects_t_beyond_cap(self):
        with pytest.raises(ValueError):
            tail_report(RankedProbability.uniform(50), 100, t_grid=(30.0,))

    @pytest.mark.statistical
    def test_uniform_rows_pass(self):
        table = tail_report(RankedProbability.uniform(200), 5000, seed=17)
        kinds = [r.kind for r in table.rows]
        assert kinds.count("T1") == 5
        assert kinds.count("chernoff") == 5
        assert kinds.count("binomial") == 3
        assert table.all_passed

    def test_zero_hits_below_a_loose_bound(self):
        table = tail_report(RankedProbability.uniform(400), 200, seed=3, t_grid=(1.0,),
                            chernoff_grid=())
        far = [r for r in table.rows if r.kind == "distance"]
        assert all(r.empirical == 0.0 and r.passed and r.status == TailStatus.PASS for r in far)
        assert far[0].upper_conf == pytest.approx(wilson_interval(0, 200)[1])

    def test_pairs_from_one_tree_count_once(self):
        table = tail_report(RankedProbability.uniform(400), 200, seed=3, t_grid=(1.0,),
                            chernoff_grid=(), pairs_per_tree=10)
        far = [r for r in table.rows if r.kind == "distance"]
        assert far[0].upper_conf == pytest.approx(wilson_interval(0, 20)[1])


class TestTailRow:
    """Pass, fail and underpowered rows."""

    def test_pass_needs_upper_limit_below_bound(self):
        row = tail_row("chernoff", 16.0, 0, 5000, math.exp(-16 / 3))
        assert row.passed
        assert row.status == TailStatus.PASS

    def test_zero_hits_do_not_pass_a_tight_bound(self):
        row = tail_row("chernoff", 16.0, 0, 200, math.exp(-16 / 3))
        assert row.upper_conf == pytest.approx(wilson_interval(0, 200)[1])
        assert not row.passed
        assert row.status == TailStatus.UNDERPOWERED

    def test_underpowered_rows_do_not_fail_the_table(self):
        rows = [tail_row("chernoff", 16.0, 0, 200, math.exp(-16 / 3)),
                tail_row("chernoff", 1.0, 3, 200, math.exp(-1 / 3))]
        table = TailTable(support=10, sigma=0.3, replicates=200, rows=rows)
        assert table.all_passed
        assert [r.x_or_t for r in table.underpowered] == [16.0]

    @pytest.mark.parametrize("hits,trials,bound", [(50, 200, 0.1), (2, 200, math.exp(-16 / 3))])
    def test_estimate_above_bound_fails(self, hits, trials, bound):
        row = tail_row("T1", 1.0, hits, trials, bound)
        assert row.status == TailStatus.FAIL
        assert not TailTable(support=10, sigma=0.3, replicates=trials, rows=[row]).all_passed

    def test_clustered_hits_widen_the_interval(self):
        row = tail_row("distance", 8.0, 50, 1000, 1.0, cluster_size=10)
        assert row.empirical == pytest.approx(0.05)
        assert row.upper_conf == pytest.approx(wilson_interval(5, 100)[1])
        assert row.upper_conf > wilson_interval(50, 1000)[1]

    def test_cluster_size_must_be_positive(self):
        with pytest.raises(ValueError):
            tail_row("distance", 8.0, 1, 10, 1.0, cluster_size=0)

    def test_csv_row_carries_the_status(self):
        assert tail_row("chernoff", 16.0, 0, 200, math.exp(-16 / 3)).to_row()[-2:] == [0, "underpowered"]


class TestIdentity:
    def test_needs_enough_replicates(self):
        with pytest.raises(ValueError):
            identity_test(RankedProbability.uniform(10), 10)

    def test_ptree_distance_count(self):
        dist = ptree_distances(RankedProbability.uniform(12), 25, seed=5, pairs_per_tree=4)
        assert dist.shape == (25,)
        assert dist.min() >= 0
        assert dist.max() <= 11

    @pytest.mark.statistical
    def test_uniform_law_not_rejected(self):
        report = identity_test(RankedProbability.uniform(30), 4000, seed=8)
        assert report.passed(level=0.001)
        assert not report.degenerate
        assert report.r1_mean == pytest.approx(report.distance_mean, rel=0.1)
