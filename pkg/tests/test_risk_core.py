import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenario_verify.risk_core import (
    RiskSpec,
    SampleSet,
    ScenarioError,
    confidence_bound,
    epsilon_for,
    required_samples,
    scenario_var_upper_bound,
)
from scenario_verify.distributions import Gaussian, sample
from scenario_verify.seeding import RngSeed

finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e300, max_value=1e300)


class TestScenarioBound:
    def test_maximum_of_samples(self):
        b = scenario_var_upper_bound([1.0, 3.0, 2.0], 0.1)
        assert b.value == 3.0
        assert b.n_samples == 3
        assert b.confidence == confidence_bound(3, 0.1)

    def test_single_sample(self):
        assert scenario_var_upper_bound([-5.0], 0.5).value == -5.0

    def test_gaussian_bound_exceeds_analytic_quantile(self):
        # 0.99-quantile of N(0, 1); failure probability 0.99**5000 ~ 1.5e-22
        s = sample(Gaussian(0.0, 1.0), 5000, RngSeed(2024, 0))
        assert scenario_var_upper_bound(s, 0.01).value >= 2.326347874040841

    def test_empty_rejected(self):
        with pytest.raises(ScenarioError, match="no scenarios"):
            scenario_var_upper_bound([], 0.1)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_nonfinite_rejected(self, bad):
        with pytest.raises(ScenarioError, match="invalid sample"):
            scenario_var_upper_bound([1.0, bad], 0.1)

    def test_bad_epsilon(self):
        with pytest.raises(ScenarioError):
            scenario_var_upper_bound([1.0], 1.5)

    @given(st.lists(finite, min_size=1, max_size=200), st.floats(0, 1))
    def test_exactly_the_maximum(self, xs, eps):
        b = scenario_var_upper_bound(xs, eps)
        assert b.value == max(xs)
        assert b.confidence == 1.0 - (1.0 - eps) ** len(xs)

    @given(st.lists(finite, min_size=1, max_size=50), finite)
    def test_adding_a_sample_never_lowers_the_bound(self, xs, extra):
        assert scenario_var_upper_bound(xs + [extra], 0.1).value >= scenario_var_upper_bound(xs, 0.1).value


class TestSampleSet:
    def test_cardinality(self):
        s = SampleSet([1, 2, 3], seed=RngSeed(1, 2))
        assert s.n == len(s) == 3
        assert s.seed == RngSeed(1, 2)

    def test_values_read_only(self):
        s = SampleSet([1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0


class TestConfidence:
    def test_sample_count_496(self):
        assert confidence_bound(496, 0.0275) >= 1 - 1e-6

    def test_zero_risk_single_sample(self):
        assert confidence_bound(1, 0.0) == 0.0

    def test_fifty_samples(self):
        # 1 - 0.9**50 evaluated in 40-digit arithmetic
        assert confidence_bound(50, 0.1) == pytest.approx(0.99484622479268, abs=1e-13)

    def test_zero_samples_rejected(self):
        with pytest.raises(ScenarioError, match="degenerate sample count"):
            confidence_bound(0, 0.1)

    @given(st.integers(1, 5000), st.integers(1, 5000), st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, n1, n2, e1, e2):
        lo_n, hi_n = sorted((n1, n2))
        lo_e, hi_e = sorted((e1, e2))
        assert confidence_bound(lo_n, lo_e) <= confidence_bound(hi_n, lo_e)
        assert confidence_bound(lo_n, lo_e) <= confidence_bound(lo_n, hi_e)
        assert 0.0 <= confidence_bound(lo_n, lo_e) <= 1.0


class TestRequiredSamples:
    def test_reference_value(self):
        assert required_samples(RiskSpec(0.0275, 1 - 1e-6)) == 496

    def test_one_sample_suffices(self):
        assert required_samples(RiskSpec(0.5, 0.5)) == 1

    def test_inverts_confidence_bound(self):
        assert required_samples(RiskSpec(0.1, confidence_bound(50, 0.1))) == 50

    def test_rounded_gamma_needs_one_more(self):
        # 0.99485 is slightly above 1 - 0.9**50 = 0.9948462...
        assert required_samples(RiskSpec(0.1, 0.99485)) == 51

    @pytest.mark.parametrize("eps,gamma", [(0.0, 0.9), (1.0, 0.9), (0.1, 0.0), (0.1, 1.0)])
    def test_boundaries_rejected(self, eps, gamma):
        with pytest.raises(ScenarioError, match="degenerate risk spec"):
            required_samples(RiskSpec(eps, gamma))

    @pytest.mark.parametrize("eps,gamma", [(-0.1, 0.5), (0.5, 1.1), (math.nan, 0.5)])
    def test_spec_rejects_out_of_range(self, eps, gamma):
        with pytest.raises(ScenarioError):
            RiskSpec(eps, gamma)

    def test_planner_tightness_1000_pairs(self):
        rng = np.random.default_rng(7)
        eps = rng.uniform(0.001, 0.5, 1000)
        gam = rng.uniform(0.5, 1 - 1e-9, 1000)
        for e, g in zip(eps, gam):
            n = required_samples(RiskSpec(e, g))
            assert confidence_bound(n, e) >= g
            assert n == 1 or confidence_bound(n - 1, e) < g

    @settings(max_examples=300)
    @given(st.floats(1e-4, 0.999), st.floats(1e-4, 1 - 1e-9))
    def test_planner_tightness_property(self, e, g):
        n = required_samples(RiskSpec(e, g))
        assert confidence_bound(n, e) >= g
        assert n == 1 or confidence_bound(n - 1, e) < g


class TestEpsilonFor:
    def test_single_sample(self):
        # one ulp below 0.5 already rounds to confidence 0.5
        eps = epsilon_for(1, 0.5)
        assert eps == pytest.approx(0.5, abs=1e-15)
        assert confidence_bound(1, eps) >= 0.5

    def test_sample_count_496(self):
        eps = epsilon_for(496, 1 - 1e-6)
        # 1 - (1e-6)**(1/496) in 40-digit arithmetic
        assert eps == pytest.approx(0.02746951013174324, rel=1e-12)
        assert eps <= 0.0275

    def test_fifty_samples(self):
        assert epsilon_for(50, 0.99) == pytest.approx(0.08798916064409026, rel=1e-12)

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.5, 2.0])
    def test_bad_gamma(self, gamma):
        with pytest.raises(ScenarioError):
            epsilon_for(10, gamma)

    @given(st.integers(1, 10_000), st.floats(0.01, 1 - 1e-9))
    def test_round_trip(self, n, gamma):
        eps = epsilon_for(n, gamma)
        assert confidence_bound(n, eps) >= gamma
        assert required_samples(RiskSpec(eps, gamma)) <= n
