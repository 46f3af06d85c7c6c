import pytest

from frag_core.cadlag import (
    PiecewiseLinearPath, StepPath, counterexample_pair, evaluate, j1_upper_bound, jump_lower_bound,
    satisfies_monotone_hypothesis, separation_table, step_path_from_json, uniform_distance,
)
from frag_core.errors import PathDomainError
from frag_core.masspart import MassPartition


def unit_jump(at: float, horizon: float = 1.0) -> StepPath:
    return StepPath([0.0, at], [0.0, 1.0], horizon)


class TestStepPath:
    """Right-continuous step paths."""

    def test_right_continuity(self):
        path = StepPath([0.0, 1.0], [1.0, 2.0], 2.0)
        assert evaluate(path, 0.5) == 1.0
        assert evaluate(path, 1.0) == 2.0
        assert evaluate(path, 2.0) == 2.0

    def test_outside_horizon(self):
        with pytest.raises(PathDomainError):
            evaluate(StepPath([0.0], [1.0], 1.0), 1.5)

    @pytest.mark.parametrize("bps,vals", [([0.5], [1.0]), ([0.0, 0.0], [1.0, 2.0]), ([0.0, 1.0], [1.0])])
    def test_invalid_breakpoints(self, bps, vals):
        with pytest.raises(ValueError):
            StepPath(bps, vals)

    def test_jumps(self):
        times, sizes = StepPath([0.0, 1.0, 2.0], [0.0, 0.0, -0.5], 3.0).jumps()
        assert times.tolist() == [2.0]
        assert sizes.tolist() == [-0.5]

    def test_mass_partition_payload_from_json(self):
        path = StepPath([0.0, 1.0], [MassPartition(masses=(1.0,)), MassPartition(masses=(0.5, 0.5))], 2.0)
        restored = step_path_from_json(path.to_json())
        assert evaluate(restored, 1.5).masses == (0.5, 0.5)


class TestUniformDistance:
    """Exact sup-norm distances."""

    def test_counterexample_pair_values(self):
        g2, _ = counterexample_pair(2)
        g4, _ = counterexample_pair(4)
        assert evaluate(g4, 0.375) == pytest.approx(0.5)
        assert uniform_distance(g2, g4) == pytest.approx(0.5)

    def test_step_against_linear_uses_left_limits(self):
        step = unit_jump(0.5)
        ramp = PiecewiseLinearPath([(0.0, 0.0), (1.0, 1.0)])
        assert uniform_distance(step, ramp) == pytest.approx(0.5)

    def test_horizon_mismatch(self):
        with pytest.raises(PathDomainError):
            uniform_distance(unit_jump(0.5, 1.0), unit_jump(0.5, 2.0))

    def test_grid_must_cover_breakpoints(self):
        with pytest.raises(ValueError):
            uniform_distance(unit_jump(0.5), unit_jump(0.6), grid=1)


class TestJ1Bounds:
    """Certified J1 brackets."""

    def test_shifted_jump(self):
        f, g = unit_jump(0.5), unit_jump(0.6)
        bound = j1_upper_bound(f, g)
        assert bound.uniform == pytest.approx(1.0)
        assert bound.upper == pytest.approx(0.1)
        assert bound.lower <= bound.upper

    def test_symmetric_and_zero_on_diagonal(self):
        f = StepPath([0.0, 0.2, 0.7], [1.0, 0.6, 0.3], 1.0)
        g = StepPath([0.0, 0.3], [1.0, 0.5], 1.0)
        assert j1_upper_bound(f, g).upper == pytest.approx(j1_upper_bound(g, f).upper)
        assert j1_upper_bound(f, f).upper == 0.0

    def test_never_above_uniform(self):
        f = StepPath([0.0, 0.1, 0.4, 0.8], [1.0, 0.7, 0.5, 0.2], 1.0)
        g = StepPath([0.0, 0.5], [1.0, 0.3], 1.0)
        bound = j1_upper_bound(f, g)
        assert bound.upper <= bound.uniform

    def test_jump_certificate(self):
        flat = StepPath([0.0], [0.0], 1.0)
        assert jump_lower_bound(flat, unit_jump(0.5)) == pytest.approx(1.0)


class TestCounterexample:
    """The non-compact sequence g_n and its two-coordinate companion f_n."""

    def test_separation_for_doubled_index(self):
        rows = separation_table(64)
        assert all(d >= 0.5 - 1e-12 for n, m, d in rows if m >= 2 * n)
        assert len(rows) == 63 * 62 // 2

    @pytest.mark.parametrize("n", [2, 3, 10, 64])
    def test_monotone_hypothesis(self, n):
        result = satisfies_monotone_hypothesis(counterexample_pair(n)[1], 2.0)
        assert result.holds
        assert result.sup_l1_norm == pytest.approx(1.0)
        assert result.total_variation == pytest.approx(2.0)

    def test_rejects_small_index(self):
        with pytest.raises(ValueError):
            counterexample_pair(1)
