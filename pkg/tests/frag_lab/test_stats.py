import math

import numpy as np
import pytest

from frag_lab.stats import (
    chi2_goodness_of_fit, chi2_two_sample, ks_two_sample, mean_and_se, ratio_spread, wilson_interval,
)


class TestMeanAndSE:
    """Sample mean with its standard error."""

    def test_empty_is_nan(self):
        estimate, se = mean_and_se([])
        assert math.isnan(estimate) and math.isnan(se)

    def test_single_value_has_zero_error(self):
        assert mean_and_se([3.0]) == (3.0, 0.0)

    def test_three_values(self):
        estimate, se = mean_and_se([1.0, 2.0, 3.0])
        assert estimate == pytest.approx(2.0)
        assert se == pytest.approx(1.0 / math.sqrt(3.0))


class TestWilson:
    def test_no_trials_is_uninformative(self):
        assert wilson_interval(0, 0) == (0.0, 1.0)

    def test_symmetric_at_one_half(self):
        low, high = wilson_interval(50, 100)
        assert low < 0.5 < high
        assert low == pytest.approx(1.0 - high)

    def test_zero_successes_has_positive_upper_limit(self):
        low, high = wilson_interval(0, 1000)
        assert low == pytest.approx(0.0, abs=1e-12)
        assert 0.0 < high < 0.01


class TestChiSquare:
    """Homogeneity and goodness-of-fit tests with pooling of sparse categories."""

    def test_identical_samples(self):
        sample = [1, 2, 3] * 50
        result = chi2_two_sample(sample, sample)
        assert result.statistic == pytest.approx(0.0)
        assert result.p_value == pytest.approx(1.0)
        assert result.samples == (150, 150)

    def test_disjoint_samples(self):
        result = chi2_two_sample([0] * 100, [1] * 100)
        assert result.p_value < 1e-10

    def test_single_category_is_indistinguishable(self):
        result = chi2_two_sample([4] * 30, [4] * 20)
        assert result.p_value == 1.0
        assert result.dof == 0

    def test_goodness_of_fit_exact_counts(self):
        result = chi2_goodness_of_fit([25, 25, 50], [0.25, 0.25, 0.5])
        assert result.statistic == pytest.approx(0.0)
        assert result.p_value == pytest.approx(1.0)

    def test_goodness_of_fit_rejects_wrong_law(self):
        result = chi2_goodness_of_fit([900, 50, 50], [1 / 3, 1 / 3, 1 / 3])
        assert result.p_value < 1e-10


class TestMisc:
    def test_ks_same_sample(self):
        values = np.linspace(0.0, 1.0, 50)
        assert ks_two_sample(values, values).statistic == pytest.approx(0.0)

    def test_ratio_spread(self):
        assert ratio_spread([1.0, 1.2, 1.1]) == pytest.approx(0.2)
        assert ratio_spread([]) == 0.0
        assert ratio_spread([0.0, 0.0]) == 0.0
