import math

import numpy as np
from django.test import SimpleTestCase

from carpets.moran import (
    BracketError, DegenerateFamilyError, InvalidDistributionError, RowDistribution, bisect,
    entropy_lambda, family_P, family_residual, find_root, gamma, gamma_residual, lambda_many,
    lambda_of, phi, segment_logsumexp, solve_alpha, solve_lambda, solve_t, solve_t_many,
    structural_point, t_bounds,
)
from carpets.model import build_system
from carpets.optimizer import random_distribution

from .factories import LOG2_OVER_LOG3, mcmullen_system, minimal_system, random_system, row

# McMullen row weights (2/3, 1/3): t = (2/3) log3 2, λ = (1 - t) log2 3
MCMULLEN_T = 2 / 3 * LOG2_OVER_LOG3
MCMULLEN_LAMBDA = (1 - MCMULLEN_T) / LOG2_OVER_LOG3


def mcmullen_weights(first):
    return RowDistribution(weights=((first, 1 - first),))


# ====================================================================
# ROOT FINDER TESTS
# ====================================================================

class RootFinderTest(SimpleTestCase):
    """Test bisect and find_root"""

    def test_bisect_square_root(self):
        """Test bisection finds sqrt(2) to the residual tolerance"""
        result = bisect(lambda x: x * x - 2, 0.0, 2.0, tol=1e-12)
        self.assertTrue(result.converged)
        self.assertAlmostEqual(result.root, math.sqrt(2), places=11)

    def test_no_sign_change(self):
        """Test a bracket without a sign change raises BracketError with context"""
        with self.assertRaises(BracketError) as raised:
            bisect(lambda x: x * x + 1, -1.0, 1.0)
        self.assertEqual(raised.exception.context, {'lo': -1.0, 'hi': 1.0})

    def test_methods_agree(self):
        """Test brent and bisect land on the same root"""
        func = lambda x: math.cos(x) - x
        brent = find_root(func, 0.0, 1.0, method='brent').root
        plain = find_root(func, 0.0, 1.0, method='bisect').root
        self.assertAlmostEqual(brent, plain, places=11)

    def test_unknown_method(self):
        """Test unknown root methods are refused"""
        with self.assertRaises(ValueError):
            find_root(lambda x: x, -1.0, 1.0, method='secant')


# ====================================================================
# MORAN EQUATION TESTS
# ====================================================================

class SolveTTest(SimpleTestCase):
    """Test phi, solve_t and solve_t_many"""

    def test_self_similar_row(self):
        """Test two cells of width 1/4 give t = 1/2"""
        P = RowDistribution(weights=((1.0,),))
        self.assertAlmostEqual(solve_t(minimal_system(), P), 0.5, delta=1e-12)

    def test_mcmullen(self):
        """Test weights (2/3, 1/3) give t = (2/3) log3 2"""
        self.assertAlmostEqual(solve_t(mcmullen_system(), mcmullen_weights(2 / 3)), MCMULLEN_T, delta=1e-11)

    def test_single_cell_rows_clamp_to_zero(self):
        """Test Φ(0) = 0 when every row has one cell, so t = 0"""
        system = build_system([[row(0.5, 0.0, [(0.3, 0.0)]), row(0.5, 0.5, [(0.2, 0.0)])]], [1.0])
        self.assertEqual(solve_t(system, RowDistribution.uniform(system)), 0.0)

    def test_phi_decreasing(self):
        """Test Φ strictly decreases in t for random systems and distributions"""
        rng = np.random.default_rng(17)
        for _ in range(10):
            system = random_system(rng)
            P = random_distribution(system, rng)
            values = [phi(system, P, t) for t in np.linspace(0.0, 1.0, 11)]
            self.assertTrue(all(b < a for a, b in zip(values, values[1:])))

    def test_root_is_a_root(self):
        """Test |Φ(t(P))| stays within the tolerance for interior roots"""
        rng = np.random.default_rng(19)
        for _ in range(10):
            system = random_system(rng)
            P = random_distribution(system, rng)
            t = solve_t(system, P)
            if 0.0 < t < 1.0:
                self.assertLessEqual(abs(phi(system, P, t)), 1e-12)

    def test_zero_weight_rows_ignored(self):
        """Test a zero-weight row adds nothing (0 log S = 0)"""
        self.assertAlmostEqual(solve_t(mcmullen_system(), mcmullen_weights(1.0)), LOG2_OVER_LOG3, delta=1e-11)

    def test_invalid_distribution(self):
        """Test weights not summing to p_i are refused"""
        with self.assertRaises(InvalidDistributionError):
            solve_t(mcmullen_system(), RowDistribution(weights=((0.7, 0.7),)))
        with self.assertRaises(InvalidDistributionError):
            solve_t(mcmullen_system(), RowDistribution(weights=((1.0,),)))

    def test_batch_matches_scalar(self):
        """Test solve_t_many agrees with solve_t row by row"""
        rng = np.random.default_rng(23)
        system = random_system(rng, max_maps=3, max_rows=3, max_cells=3)
        distributions = [random_distribution(system, rng) for _ in range(8)]
        batch = solve_t_many(system, np.array([P.flat for P in distributions]))
        for P, t in zip(distributions, batch):
            self.assertAlmostEqual(t, solve_t(system, P), delta=1e-10)


class LambdaTest(SimpleTestCase):
    """Test lambda_of and lambda_many"""

    def test_mcmullen(self):
        """Test λ(2/3, 1/3) = (1 - t) log2 3 at the matching t"""
        self.assertAlmostEqual(lambda_of(mcmullen_system(), mcmullen_weights(2 / 3)), 0.91830, places=5)

    def test_binary_entropy(self):
        """Test one map: λ is the row entropy over log 2"""
        p = 0.3
        expected = -(p * math.log(p) + (1 - p) * math.log(1 - p)) / math.log(2)
        self.assertAlmostEqual(lambda_of(mcmullen_system(), mcmullen_weights(p)), expected, places=14)

    def test_degenerate_row_has_zero_entropy(self):
        """Test all weight on one row gives λ = 0 (0 log 0 = 0)"""
        self.assertEqual(lambda_of(mcmullen_system(), mcmullen_weights(1.0)), 0.0)

    def test_batch_matches_scalar(self):
        """Test lambda_many agrees with lambda_of"""
        rng = np.random.default_rng(29)
        system = random_system(rng)
        distributions = [random_distribution(system, rng) for _ in range(5)]
        batch = lambda_many(system, np.array([P.flat for P in distributions]))
        for P, lam in zip(distributions, batch):
            self.assertAlmostEqual(lam, lambda_of(system, P), places=13)


class TBoundsTest(SimpleTestCase):
    """Test t_bounds"""

    def test_mcmullen(self):
        """Test the bounds are 0 (one-cell row) and log3 2 (two-cell row)"""
        t_under, t_over = t_bounds(mcmullen_system())
        self.assertAlmostEqual(t_under, 0.0, delta=1e-10)
        self.assertAlmostEqual(t_over, LOG2_OVER_LOG3, delta=1e-10)

    def test_bounds_contain_every_t(self):
        """Test t_under ≤ t(P) ≤ t_over for random P"""
        rng = np.random.default_rng(31)
        for _ in range(5):
            system = random_system(rng)
            t_under, t_over = t_bounds(system)
            for _ in range(20):
                t = solve_t(system, random_distribution(system, rng))
                self.assertGreaterEqual(t, t_under - 1e-10)
                self.assertLessEqual(t, t_over + 1e-10)


# ====================================================================
# PARAMETRIC FAMILY TESTS
# ====================================================================

class FamilyTest(SimpleTestCase):
    """Test gamma, family_P and the α / λ solves"""

    def test_gamma_example(self):
        """Test γ(1, 0, 1/2) = 2/√3 + 1/√3 = √3 on McMullen"""
        self.assertAlmostEqual(gamma(mcmullen_system(), 0, 1.0, 0.0, 0.5), math.sqrt(3), places=14)

    def test_gamma_log_space(self):
        """Test large α is evaluated without overflow and matches the direct formula"""
        system = mcmullen_system()
        direct = 2 ** 60 * 3 ** (-30.0) + 3 ** (-30.0)
        self.assertAlmostEqual(gamma(system, 0, 60.0, 0.0, 0.5) / direct, 1.0, places=12)

    def test_gamma_index(self):
        """Test a bad map index raises IndexError"""
        with self.assertRaises(IndexError):
            gamma(mcmullen_system(), 2, 1.0, 0.0, 0.5)

    def test_family_rows_sum_to_env_probs(self):
        """Test P(α, λ, t) is a valid distribution for extreme α"""
        rng = np.random.default_rng(37)
        system = random_system(rng, max_maps=3)
        for alpha in (-500.0, -1.0, 0.0, 2.5, 800.0):
            point = family_P(system, alpha, 0.7, 0.4)
            point.P.check(system)
            self.assertTrue(np.all(np.isfinite(point.log_gamma)))

    def test_alpha_closed_form(self):
        """Test McMullen: 2^α / (2^α + 1) = t / log3 2"""
        t = 0.3
        share = t / LOG2_OVER_LOG3
        expected = math.log2(share / (1 - share))
        self.assertAlmostEqual(solve_alpha(mcmullen_system(), 0.5, t), expected, places=9)

    def test_alpha_grows_near_t_over(self):
        """Test α passes 10 once t is within 2e-4 of t_over"""
        alpha = solve_alpha(mcmullen_system(), 0.5, LOG2_OVER_LOG3 - 2e-4)
        self.assertGreater(alpha, 10)

    def test_alpha_closed_form_near_t_over(self):
        """Test α stays below 10 at t_over - 1e-3 (closed form ≈ 9.3) and grows towards t_over"""
        system = mcmullen_system()
        share = 1 - 1e-3 / LOG2_OVER_LOG3
        near = solve_alpha(system, 0.5, LOG2_OVER_LOG3 - 1e-3)
        self.assertAlmostEqual(near, math.log2(share / (1 - share)), places=6)
        self.assertGreater(near, 9)
        self.assertLess(near, 10)
        self.assertLess(near, solve_alpha(system, 0.5, LOG2_OVER_LOG3 - 2e-4))

    def test_alpha_beyond_t_over(self):
        """Test t outside (t_under, t_over) has no α"""
        with self.assertRaises(BracketError) as raised:
            solve_alpha(mcmullen_system(), 0.5, 0.7)
        self.assertNotIsInstance(raised.exception, DegenerateFamilyError)

    def test_alpha_degenerate(self):
        """Test a single-row system has F constant in α"""
        with self.assertRaises(DegenerateFamilyError):
            solve_alpha(minimal_system(), 0.0, 0.3)

    def test_F_increasing_in_alpha(self):
        """Test F(α) increases on separated random systems"""
        rng = np.random.default_rng(41)
        checked = 0
        while checked < 5:
            system = random_system(rng, max_rows=3)
            if max(system.row_counts) < 2:
                continue
            t_under, t_over = t_bounds(system)
            t = 0.5 * (t_under + t_over)
            values = [family_residual(system, alpha, 0.5, t) for alpha in np.linspace(-5, 5, 11)]
            self.assertTrue(all(b >= a - 1e-14 for a, b in zip(values, values[1:])))
            checked += 1

    def test_G_decreasing_in_lambda(self):
        """Test G(α(λ, t), λ, t) strictly decreases in λ on random systems"""
        rng = np.random.default_rng(47)
        checked = 0
        while checked < 5:
            system = random_system(rng)
            t_under, t_over = t_bounds(system)
            if t_over - t_under < 0.05:
                continue
            t = t_under + 0.5 * (t_over - t_under)
            try:
                values = [
                    gamma_residual(system, solve_alpha(system, lam, t), lam, t)
                    for lam in np.linspace(0.0, 2.0, 9)
                ]
            except DegenerateFamilyError:
                continue
            self.assertTrue(all(b < a for a, b in zip(values, values[1:])))
            checked += 1

    def test_mcmullen_structural_point(self):
        """Test t = (2/3) log3 2 gives α = 1, P = (2/3, 1/3) and λ = 0.91830"""
        lam, alpha = solve_lambda(mcmullen_system(), MCMULLEN_T)
        self.assertAlmostEqual(alpha, 1.0, places=9)
        self.assertAlmostEqual(lam, MCMULLEN_LAMBDA, places=9)
        self.assertAlmostEqual(lam, 0.91830, places=5)
        point = structural_point(mcmullen_system(), MCMULLEN_T)
        np.testing.assert_allclose(point.P.flat, [2 / 3, 1 / 3], atol=1e-9)

    def test_structural_point_is_consistent(self):
        """Test t(P(t)) = t and λ(P(t)) = λ(t) with both residuals at zero"""
        rng = np.random.default_rng(43)
        checked = 0
        while checked < 5:
            system = random_system(rng)
            t_under, t_over = t_bounds(system)
            if t_over - t_under < 0.05:
                continue
            t = t_under + 0.4 * (t_over - t_under)
            try:
                point = structural_point(system, t)
            except DegenerateFamilyError:
                continue
            self.assertAlmostEqual(solve_t(system, point.P), t, delta=1e-10)
            self.assertAlmostEqual(lambda_of(system, point.P), point.lam, delta=1e-10)
            self.assertLessEqual(abs(family_residual(system, point.alpha, point.lam, t)), 1e-11)
            self.assertLessEqual(abs(gamma_residual(system, point.alpha, point.lam, t)), 1e-11)
            checked += 1

    def test_entropy_lambda(self):
        """Test the α = 0 slice: McMullen rows of height 1/2 give λ = 1"""
        self.assertAlmostEqual(entropy_lambda(mcmullen_system()), 1.0, delta=1e-11)


class SegmentLogSumExpTest(SimpleTestCase):
    """Test segment_logsumexp"""

    def test_segments(self):
        """Test per-segment log Σ exp with huge values"""
        values = np.array([0.0, 0.0, 1000.0, 1000.0, 1000.0])
        result = segment_logsumexp(values, np.array([0, 2, 5]))
        np.testing.assert_allclose(result, [math.log(2), 1000 + math.log(3)], rtol=1e-15)
