import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from qjfeedback.stats import (
    _ks_d, dkw_epsilon, gain_estimate, ks_two_sample, median, predicted_gain, q_ks,
    survival_curve,
)


def brute_d(a, b):
    """Sup-gap by evaluating both ECDFs at every threshold, one at a time."""
    pts = sorted(set(a) | set(b))
    best = 0.0
    for x in pts:
        fa = sum(v <= x for v in a) / len(a)
        fb = sum(v <= x for v in b) / len(b)
        best = max(best, abs(fa - fb))
    return best


class TestSurvival:
    def test_simple(self):
        c = survival_curve([3, 1, 2, 2])
        assert c.support.tolist() == [1, 2, 3]
        assert c.probability.tolist() == [1.0, 0.75, 0.25]

    def test_step_evaluation(self):
        c = survival_curve([1.0, 2.0, 3.0, 4.0])
        assert c([0.5, 1.0, 1.5, 4.0, 4.5]).tolist() == [1.0, 1.0, 0.75, 0.25, 0.0]

    def test_rejects(self):
        with pytest.raises(ValueError):
            survival_curve([])
        with pytest.raises(ValueError):
            survival_curve([-1.0, 2.0])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 50), min_size=1, max_size=40))
    def test_consistent_with_median(self, xs):
        c = survival_curve(xs)
        m = median(xs)
        assert c(m) >= 0.5
        assert c(m + 1e-9) <= 0.5


class TestMedian:
    def test_examples(self):
        assert median([3, 1, 2]) == 2
        assert median([1, 2, 3, 100]) == 2.5
        assert median([7]) == 7

    def test_empty(self):
        with pytest.raises(ValueError):
            median([])


class TestGain:
    def test_ratio(self):
        g = gain_estimate([10, 20, 30], [5, 10, 15], seed=0)
        assert g.g == 2.0
        assert g.ci_low <= 2.0 <= g.ci_high

    def test_identical_arms(self):
        x = np.random.default_rng(1).exponential(1.0, 56)
        g = gain_estimate(x, x, seed=0)
        assert g.g == 1.0 and g.ci_low < 1.0 < g.ci_high

    def test_zero_median(self):
        with pytest.raises(ZeroDivisionError):
            gain_estimate([1, 2, 3], [0, 0, 1], seed=0)

    def test_n_boot_floor(self):
        with pytest.raises(ValueError):
            gain_estimate([1, 2], [1, 2], n_boot=10)

    def test_seeded(self):
        a, b = [1, 5, 9, 12], [2, 3, 4, 8]
        assert gain_estimate(a, b, seed=4) == gain_estimate(a, b, seed=4)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.1, 1e3), min_size=3, max_size=20),
           st.lists(st.floats(0.1, 1e3), min_size=3, max_size=20),
           st.sampled_from([0.5, 2.0, 8.0]))
    def test_scale_equivariance(self, a, b, c):
        base = gain_estimate(a, b, seed=0).g
        both = gain_estimate([c * x for x in a], [c * x for x in b], seed=0).g
        one = gain_estimate([c * x for x in a], b, seed=0).g
        assert both == pytest.approx(base, rel=1e-12)
        assert one == pytest.approx(c * base, rel=1e-12)


class TestKs:
    def test_equal_samples(self):
        a = [1.0, 4.0, 2.0, 8.0, 5.0]
        r = ks_two_sample(a, list(a))
        assert r.d == 0.0 and r.p == 1.0

    def test_disjoint(self):
        assert ks_two_sample([0, 0, 0, 0], [1, 1, 1, 1]).d == 1.0

    def test_shifted(self):
        assert ks_two_sample([1, 2, 3, 4], [1.5, 2.5, 3.5, 4.5]).d == 0.25

    def test_size_floor(self):
        with pytest.raises(ValueError):
            ks_two_sample([1, 2, 3], [1, 2, 3, 4])

    def test_q_ks(self):
        assert q_ks(0.0) == 1.0
        assert q_ks(1.36) == pytest.approx(0.0494, abs=5e-4)
        # against the Kolmogorov distribution survival function
        for lam in (0.5, 1.0, 1.5, 2.5):
            assert q_ks(lam) == pytest.approx(sps.kstwobign.sf(lam), rel=1e-9)
        assert 0.0 < q_ks(40.0) <= 1.0

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 12), min_size=4, max_size=25),
           st.lists(st.integers(0, 12), min_size=4, max_size=25))
    def test_d_matches_brute_force(self, a, b):
        assert _ks_d(np.array(a, float), np.array(b, float)) == pytest.approx(brute_d(a, b))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0.01, 100), min_size=4, max_size=30),
           st.lists(st.floats(0.01, 100), min_size=4, max_size=30))
    def test_monotone_invariance(self, a, b):
        d = ks_two_sample(a, b).d
        assert ks_two_sample(np.log(a), np.log(b)).d == pytest.approx(d)
        assert ks_two_sample(np.sqrt(a), np.sqrt(b)).d == pytest.approx(d)

    def test_matches_scipy_statistic(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a, b = rng.exponential(1, 56), rng.exponential(1.3, 56)
            assert ks_two_sample(a, b).d == pytest.approx(sps.ks_2samp(a, b).statistic)

    def test_permutation_mode(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(0, 1, 20), rng.normal(1.5, 1, 20)
        r = ks_two_sample(a, b, method="permutation", n_perm=2000, seed=0)
        assert r.p < 0.01
        r0 = ks_two_sample(a, rng.normal(0, 1, 20), method="permutation", n_perm=500, seed=0)
        assert 0 < r0.p <= 1

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            ks_two_sample([1, 2, 3, 4], [1, 2, 3, 4], method="exact")


class TestPredicted:
    def test_examples(self):
        assert predicted_gain(240e-6, 70e-6) == pytest.approx(3.4286, abs=1e-4)
        assert predicted_gain(5e-5, 5e-5) == 1.0
        assert round(predicted_gain(217e-6, 70e-6), 1) == 3.1

    def test_not_clamped(self):
        assert predicted_gain(100e-6, 200e-6) == 0.5

    def test_rejects(self):
        with pytest.raises(ValueError):
            predicted_gain(0.0, 1.0)


def test_dkw_epsilon():
    assert dkw_epsilon(10_000) == pytest.approx(math.sqrt(math.log(40) / 20_000))
