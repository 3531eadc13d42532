import math
from fractions import Fraction

import numpy as np
import pytest

from scenbar.bounds import (
    SampleComplexityInputs,
    binomial_tail,
    empirical_count,
    gaussian_raw_moments,
    lipschitz_linear,
    lipschitz_quadratic,
    log_binomial_tail,
    minimal_scenario_count,
    variance_bound_additive_1d,
)
from scenbar.core import InputError

from conftest import rng


def rational_tail(n: int, limit: int, eps: float) -> Fraction:
    """Exact-arithmetic oracle for the truncated binomial sum."""
    p = Fraction(eps)
    q = 1 - p
    total = Fraction(0)
    for i in range(0, min(limit, n) + 1):
        total += math.comb(n, i) * p**i * q ** (n - i)
    return total


class TestMinimalScenarioCount:
    def test_case_study_count(self):
        n = minimal_scenario_count(SampleComplexityInputs(0.03 / 2160.0, 0.005, 5))
        assert abs(n - 1_018_779) <= 0.0005 * 1_018_779
        assert n == 1_018_779

    def test_case_study_minimality(self):
        eps, beta, limit = 0.03 / 2160.0, 0.005, 5
        n = minimal_scenario_count(SampleComplexityInputs(eps, beta, limit))
        assert binomial_tail(n, limit, eps) <= beta
        assert binomial_tail(n - 1, limit, eps) > beta

    def test_degenerate_eps_bar_one(self):
        # Tail is exactly 1 up to the summation limit and 0 beyond it.
        assert minimal_scenario_count(SampleComplexityInputs(1.0, 0.5, 5)) == 6

    def test_brute_force_scan_agreement(self):
        eps, beta, limit = 0.1, 0.01, 2
        expected = None
        for n in range(1, 10_000):
            if rational_tail(n, limit, eps) <= Fraction(beta):
                expected = n
                break
        assert expected is not None
        assert minimal_scenario_count(SampleComplexityInputs(eps, beta, limit)) == expected

    def test_monotone_in_eps_bar_and_beta(self):
        base = minimal_scenario_count(SampleComplexityInputs(0.01, 0.01, 5))
        assert minimal_scenario_count(SampleComplexityInputs(0.02, 0.01, 5)) <= base
        assert minimal_scenario_count(SampleComplexityInputs(0.01, 0.05, 5)) <= base
        assert minimal_scenario_count(SampleComplexityInputs(0.005, 0.01, 5)) >= base

    def test_beta_zero_unbounded(self):
        with pytest.raises(InputError):
            minimal_scenario_count(SampleComplexityInputs(0.5, 0.0, 5))
        # but attainable in the degenerate eps_bar = 1 case
        assert minimal_scenario_count(SampleComplexityInputs(1.0, 0.0, 5)) == 6

    def test_returned_count_always_minimal(self):
        r = rng(21)
        for _ in range(20):
            eps = float(r.uniform(0.02, 0.5))
            beta = float(r.uniform(1e-4, 0.2))
            limit = int(r.integers(1, 8))
            n = minimal_scenario_count(SampleComplexityInputs(eps, beta, limit))
            assert binomial_tail(n, limit, eps) <= beta
            if n > limit + 1:
                assert binomial_tail(n - 1, limit, eps) > beta

    def test_invalid_inputs(self):
        with pytest.raises(InputError):
            SampleComplexityInputs(0.0, 0.5, 5)
        with pytest.raises(InputError):
            SampleComplexityInputs(1.5, 0.5, 5)
        with pytest.raises(InputError):
            SampleComplexityInputs(0.5, 1.5, 5)


class TestLogSpaceTail:
    def test_against_rational_grid(self):
        # The documented numeric contract of the log-space evaluation.
        for eps in (0.5, 0.1, 0.01):
            for limit in (2, 5, 8):
                for n in (10, 101, 999, 10_000):
                    exact = float(rational_tail(n, limit, eps))
                    approx = math.exp(log_binomial_tail(n, limit, eps))
                    assert abs(approx - exact) <= 1e-10 * exact

    def test_small_n_is_one(self):
        assert binomial_tail(3, 5, 0.2) == 1.0


class TestEmpiricalCount:
    def test_case_study_count(self):
        assert empirical_count(0.005, 0.015, 0.005) == 4445

    def test_unit_inputs(self):
        assert empirical_count(1.0, 1.0, 1.0) == 1

    def test_linear_scaling_in_variance_bound(self):
        assert empirical_count(0.02, 0.015, 0.005) == 4 * 4445 - 2  # ceil(17777.77) = 17778
        assert empirical_count(0.02, 0.015, 0.005) == 17778

    def test_ceiling_correctness(self):
        r = rng(22)
        for _ in range(200):
            m_hat = float(r.uniform(1e-6, 10))
            delta = float(r.uniform(1e-3, 1))
            beta_s = float(r.uniform(1e-3, 1))
            n = empirical_count(m_hat, delta, beta_s)
            assert Fraction(n) * Fraction(delta) ** 2 * Fraction(beta_s) >= Fraction(m_hat)
            if n > 1:
                assert Fraction(n - 1) * Fraction(delta) ** 2 * Fraction(beta_s) < Fraction(m_hat)

    def test_rejects_nonpositive(self):
        with pytest.raises(InputError):
            empirical_count(0.0, 0.1, 0.1)
        with pytest.raises(InputError):
            empirical_count(0.1, 0.0, 0.1)
        with pytest.raises(InputError):
            empirical_count(0.1, 0.1, 0.0)


class TestVarianceBound:
    def test_linear_barrier_gives_noise_variance(self):
        sigma2 = 0.7
        moments = [0.0, sigma2]  # E[w], E[w^2]
        bound = variance_bound_additive_1d([5.0, 1.0], fa_bound=3.0, noise_moments=moments)
        assert bound == pytest.approx(sigma2, rel=1e-12)

    def test_zero_noise_gives_zero(self):
        bound = variance_bound_additive_1d([1.0, 2.0, 3.0], 2.0, [0.0, 0.0, 0.0, 0.0])
        assert bound == 0.0

    def test_dominates_monte_carlo_variance(self):
        # 20 random quadratic instances with Gaussian noise: the closed-form
        # bound must not be beaten by a simulated variance beyond 3 SE.
        r = rng(23)
        moments = gaussian_raw_moments(0.4, 4)
        draws = r.normal(0.0, 0.4, size=1_000_000)
        for _ in range(20):
            b = r.uniform(-2, 2, size=3)  # b[p] multiplies x**p
            fa = float(r.uniform(-1.5, 1.5))
            vals = b[0] + b[1] * (fa + draws) + b[2] * (fa + draws) ** 2
            mc_var = float(vals.var())
            m4 = float(((vals - vals.mean()) ** 4).mean())
            se = math.sqrt(max(m4 - mc_var**2, 0.0) / len(vals))
            bound = variance_bound_additive_1d(np.abs(b), abs(fa), moments)
            assert mc_var <= bound + 3 * se

    def test_missing_moments_rejected(self):
        with pytest.raises(InputError):
            variance_bound_additive_1d([1.0, 1.0, 1.0], 1.0, [0.0, 1.0, 0.0])

    def test_gaussian_moment_helper(self):
        m = gaussian_raw_moments(2.0, 6)
        assert m[0] == 0.0 and m[2] == 0.0 and m[4] == 0.0
        assert m[1] == pytest.approx(4.0)  # sigma^2
        assert m[3] == pytest.approx(3 * 16.0)  # 3 sigma^4
        assert m[5] == pytest.approx(15 * 64.0)  # 15 sigma^6


class TestLipschitzConstants:
    def test_case_study_value(self):
        assert lipschitz_quadratic(30.0, 12.0, 2.0, 1.0) == 2160.0

    def test_constant_dynamics_reduction(self):
        assert lipschitz_quadratic(30.0, 12.0, 0.0, 5.0) == 2 * 30.0 * 12.0

    def test_homogeneous_in_m(self):
        assert lipschitz_quadratic(60.0, 12.0, 2.0, 1.0) == 2 * lipschitz_quadratic(
            30.0, 12.0, 2.0, 1.0
        )

    def test_linear_variants(self):
        assert lipschitz_linear(1.0, 1.0, 0.0) == 2.0
        assert lipschitz_linear(30.0, 12.0, 1.0) == 1440.0
        ratio = lipschitz_linear(1.0, 1.0, 2.0) / lipschitz_linear(1.0, 1.0, 1.0)
        assert ratio == pytest.approx(2.5)
