import numpy as np
import pytest
from scipy.integrate import quad

from intervalweib.dataset import IntervalDataset, TestRecord
from intervalweib.survival import (
    conditional_survival,
    cumulative_hazard,
    interval_failure_probability,
    interval_log_likelihood,
    rate_from_reliability,
)

from conftest import central_difference_gradient, relative_gradient_error, toy_dataset


def _intensity_integral(g, lam, k, t1, t2):
    """Independent oracle: adaptive quadrature of the raw intensity."""
    val, _ = quad(lambda t: np.exp(g) * (lam * t) ** (k - 1.0) * k * lam, t1, t2)
    return val


class TestCumulativeHazard:
    def test_matches_quadrature(self):
        assert cumulative_hazard(0.0, 0.5, 2.0, 1.0, 2.0) == pytest.approx(
            _intensity_integral(0.0, 0.5, 2.0, 1.0, 2.0), rel=1e-10
        )
        assert cumulative_hazard(0.0, 0.5, 2.0, 1.0, 2.0) == pytest.approx(0.75)

    def test_empty_interval(self):
        assert cumulative_hazard(1.3, 0.7, 2.5, 3.0, 3.0) == 0.0

    def test_exponential_special_case(self):
        # k = 1 reduces to a constant-hazard exponential
        assert cumulative_hazard(0.0, 0.1, 1.0, 0.0, 2.0) == pytest.approx(0.2, rel=1e-12)

    def test_random_points_match_quadrature(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            g = rng.normal(0, 1)
            lam = rng.uniform(0.05, 2.0)
            k = rng.uniform(0.5, 4.0)
            t1 = rng.uniform(0, 4)
            t2 = t1 + rng.uniform(0.1, 3)
            assert cumulative_hazard(g, lam, k, t1, t2) == pytest.approx(
                _intensity_integral(g, lam, k, t1, t2), rel=1e-9
            )

    def test_additivity(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            g, lam, k = rng.normal(), rng.uniform(0.1, 1.5), rng.uniform(0.5, 4)
            t1 = rng.uniform(0, 2)
            t2 = t1 + rng.uniform(0.1, 2)
            t3 = t2 + rng.uniform(0.1, 2)
            whole = cumulative_hazard(g, lam, k, t1, t3)
            split = cumulative_hazard(g, lam, k, t1, t2) + cumulative_hazard(g, lam, k, t2, t3)
            assert whole == pytest.approx(split, abs=1e-12 * max(1.0, whole))

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            cumulative_hazard(0.0, 0.5, 2.0, 2.0, 1.0)
        with pytest.raises(ValueError):
            cumulative_hazard(0.0, -0.5, 2.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            cumulative_hazard(0.0, 0.5, 0.0, 0.0, 1.0)


class TestConditionalSurvival:
    def test_reference_value(self):
        assert conditional_survival(0.0, 0.5, 2.0, 1.0, 2.0) == pytest.approx(
            np.exp(-0.75), rel=1e-12
        )

    def test_empty_interval_is_certain_survival(self):
        assert conditional_survival(0.0, 0.5, 2.0, 2.0, 2.0) == 1.0

    def test_huge_rate_underflows_smoothly(self):
        # hazard capped before exponentiation: tiny but never NaN/inf
        s = conditional_survival(0.0, 1e12, 3.0, 1.0, 2.0)
        assert 0.0 <= s < 1e-300 and np.isfinite(s)

    def test_monotone_in_endpoints(self):
        ts = np.linspace(1.0, 5.0, 20)
        s2 = [conditional_survival(0.0, 0.4, 2.0, 1.0, t) for t in ts]
        assert np.all(np.diff(s2) <= 0)
        s1 = [conditional_survival(0.0, 0.4, 2.0, t, 6.0) for t in ts]
        assert np.all(np.diff(s1) >= 0)

    def test_failure_probability_complement(self):
        p = interval_failure_probability(0.0, 0.5, 2.0, 1.0, 2.0)
        assert p == pytest.approx(1.0 - np.exp(-0.75), rel=1e-12)


class TestRateFromReliability:
    def test_unit_case(self):
        for k in (0.5, 1.0, 2.7):
            assert rate_from_reliability(np.exp(-1.0), k, 1.0) == pytest.approx(1.0)

    def test_hand_value(self):
        assert rate_from_reliability(0.9, 2.0, 10.0) == pytest.approx(0.0324593, rel=1e-5)

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            R = rng.uniform(0.01, 0.99)
            k = rng.uniform(0.3, 5.0)
            t = rng.uniform(0.1, 20.0)
            lam = rate_from_reliability(R, k, t)
            assert conditional_survival(0.0, lam, k, 0.0, t) == pytest.approx(R, abs=1e-12)

    def test_domain_errors(self):
        for bad in (0.0, 1.0, -0.2, 1.3):
            with pytest.raises(ValueError):
                rate_from_reliability(bad, 2.0, 1.0)


class TestIntervalLogLikelihood:
    def test_single_failure_record(self):
        ds = IntervalDataset([TestRecord("a", (0.0,), 1, 1.0, 2.0)])
        ll, _ = interval_log_likelihood(ds, 0.0, 0.5, 2.0)
        assert ll == pytest.approx(np.log(1.0 - np.exp(-0.75)), rel=1e-10)
        assert ll == pytest.approx(-0.639353465, abs=1e-8)

    def test_pass_record_contribution(self):
        ds = IntervalDataset([TestRecord("a", (0.0,), 0, 1.0, 2.0)])
        ll, _ = interval_log_likelihood(ds, 0.0, 0.5, 2.0)
        assert ll == pytest.approx(-0.75, rel=1e-12)

    def test_matches_quadrature_evaluation(self):
        rng = np.random.default_rng(4)
        ds = toy_dataset(n_records=10, seed=4)
        _, y, t1, t2 = ds.arrays()
        for _ in range(5):
            g = rng.normal(0, 0.5, 10)
            lam = rng.uniform(0.2, 1.0)
            k = rng.uniform(0.8, 3.0)
            ll, _ = interval_log_likelihood(ds, g, lam, k)
            ref = 0.0
            for i in range(10):
                H = _intensity_integral(g[i], lam, k, t1[i], t2[i])
                S = np.exp(-H)
                ref += np.log(1.0 - S) if y[i] == 1 else np.log(S)
            assert ll == pytest.approx(ref, abs=1e-10 * max(1.0, abs(ref)))

    def test_gradient_against_finite_differences(self):
        ds = toy_dataset(n_records=8, seed=5)
        n = len(ds)
        rng = np.random.default_rng(6)

        def value(params):
            g = params[:n]
            lam = np.exp(params[n : 2 * n])
            k = float(np.exp(params[2 * n]))
            ll, _ = interval_log_likelihood(ds, g, lam, k)
            return ll

        checked = 0
        worst = 0.0
        while checked < 100:
            p = np.concatenate(
                [rng.normal(0, 0.5, n), rng.normal(-0.5, 0.5, n), [rng.normal(0, 0.3)]]
            )
            g = p[:n]
            lam = np.exp(p[n : 2 * n])
            k = float(np.exp(p[2 * n]))
            H = cumulative_hazard(g, lam, k, ds.arrays()[2], ds.arrays()[3])
            if np.max(H) > 30.0:  # saturated regime: fd cannot resolve anything
                continue
            ll, grad = interval_log_likelihood(ds, g, lam, k)
            analytic = np.concatenate([grad["g"], grad["eta"], [grad["kappa"].sum()]])
            numeric = central_difference_gradient(value, p)
            worst = max(worst, relative_gradient_error(analytic, numeric))
            checked += 1
        assert worst < 1e-6

    def test_failure_probability_floor_prevents_neg_inf(self):
        # survival numerically 1 with y = 1 must not yield -inf
        ds = IntervalDataset([TestRecord("a", (0.0,), 1, 1.0, 1.0 + 1e-13)])
        ll, _ = interval_log_likelihood(ds, 0.0, 1e-6, 1.0)
        assert np.isfinite(ll)
