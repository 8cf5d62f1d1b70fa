import numpy as np
from django.test import SimpleTestCase

from carpets.model import parse_system, serialize_system
from carpets.moran import t_bounds
from carpets.optimizer import DimensionOptions, dimension, objective
from carpets.percolation import (
    GridPattern, build_percolation_system, closed_form_dim, closed_form_result, enumerate_patterns,
    optimal_row_distribution, pattern_map,
)
from carpets.validators import validate_geometry

from .factories import flat_numbers, mcmullen_system


# ====================================================================
# PATTERN TESTS
# ====================================================================

class GridPatternTest(SimpleTestCase):
    """Test pattern enumeration and conversion to carpet maps"""

    def test_fifteen_patterns_for_k2(self):
        """Test k=2 has 2^4 - 1 nonempty patterns with 4, 6, 4, 1 of each size"""
        patterns = list(enumerate_patterns(2))
        self.assertEqual(len(patterns), 15)
        sizes = [pattern.count for pattern in patterns]
        self.assertEqual([sizes.count(l) for l in range(1, 5)], [4, 6, 4, 1])

    def test_mask_round_trip(self):
        """Test from_mask and mask agree"""
        pattern = GridPattern.from_mask(3, 0b100010001)
        self.assertEqual(pattern.selected, frozenset({(0, 0), (1, 1), (2, 2)}))
        self.assertEqual(pattern.mask, 0b100010001)

    def test_full_grid_is_valid(self):
        """Test the full 3x3 pattern gives three rows of three squares"""
        carpet_map = pattern_map(GridPattern.from_mask(3, 2 ** 9 - 1))
        self.assertEqual(len(carpet_map.rows), 3)
        self.assertTrue(all(len(row.cells) == 3 for row in carpet_map.rows))

    def test_empty_rows_dropped(self):
        """Test only occupied grid rows become rows"""
        pattern = GridPattern(k=3, selected=frozenset({(0, 1), (2, 0), (2, 2)}))
        self.assertEqual(pattern.row_counts(), [1, 2])
        carpet_map = pattern_map(pattern)
        self.assertEqual([row.y_offset for row in carpet_map.rows], [0.0, 2 / 3])

    def test_invalid_patterns(self):
        """Test empty patterns, squares off the grid and k < 2 are refused"""
        with self.assertRaises(ValueError):
            GridPattern(k=2, selected=frozenset())
        with self.assertRaises(ValueError):
            GridPattern(k=2, selected=frozenset({(2, 0)}))
        with self.assertRaises(ValueError):
            GridPattern(k=1, selected=frozenset({(0, 0)}))

    def test_enumeration_cap(self):
        """Test k=5 (2^25 - 1 patterns) is refused"""
        with self.assertRaises(ValueError):
            list(enumerate_patterns(5))


# ====================================================================
# SYSTEM TESTS
# ====================================================================

class PercolationSystemTest(SimpleTestCase):
    """Test build_percolation_system"""

    def test_equal_probabilities_at_half(self):
        """Test q = 1/2 makes every pattern equally likely"""
        system = build_percolation_system(2, 0.5)
        self.assertEqual(system.m, 15)
        np.testing.assert_allclose(system.env_probs, np.full(15, 1 / 15), rtol=1e-14)

    def test_probabilities_follow_pattern_size(self):
        """Test p ∝ q^l (1-q)^(k²-l) and sums to one"""
        q = 0.3
        system = build_percolation_system(2, q)
        self.assertAlmostEqual(sum(system.env_probs), 1.0, places=15)
        sizes = [pattern.count for pattern in enumerate_patterns(2)]
        single = system.env_probs[sizes.index(1)]
        full = system.env_probs[sizes.index(4)]
        self.assertAlmostEqual(full / single, (q / (1 - q)) ** 3, places=12)

    def test_system_is_valid(self):
        """Test the generated system passes the geometry checks"""
        self.assertTrue(validate_geometry(build_percolation_system(3, 0.6)).ok)

    def test_round_trip(self):
        """Test a percolation system survives serialisation"""
        system = build_percolation_system(2, 0.4)
        numbers, shape = flat_numbers(system)
        parsed_numbers, parsed_shape = flat_numbers(parse_system(serialize_system(system, 'json')))
        self.assertEqual(parsed_shape, shape)
        np.testing.assert_allclose(parsed_numbers, numbers, rtol=0, atol=1e-15)

    def test_t_bounds(self):
        """Test k=2, q=1/2: t_under = 3/15 (single squares) and t_over = 7/15 (full rows)"""
        t_under, t_over = t_bounds(build_percolation_system(2, 0.5))
        self.assertAlmostEqual(t_under, 0.2, delta=1e-10)
        self.assertAlmostEqual(t_over, 7 / 15, delta=1e-10)

    def test_invalid_q(self):
        """Test q outside (0, 1) is refused"""
        for q in (0.0, 1.0, -0.1):
            with self.assertRaises(ValueError):
                build_percolation_system(2, q)


# ====================================================================
# CLOSED FORM TESTS
# ====================================================================

class ClosedFormTest(SimpleTestCase):
    """Test closed_form_dim and the optimal row distribution"""

    def test_k2_half(self):
        """Test k=2, q=1/2 gives (14 + 4 log2 3) / 15 = 0.955990"""
        self.assertAlmostEqual(closed_form_dim(2, 0.5), 0.955990, places=6)

    def test_full_occupation_limit(self):
        """Test q → 1 approaches dimension 2"""
        self.assertAlmostEqual(closed_form_dim(2, 1 - 1e-7), 2.0, delta=1e-4)

    def test_increasing_in_q(self):
        """Test the dimension grows with q, also on the log-gamma branch (k=6)"""
        for k in (2, 3, 6):
            values = [closed_form_dim(k, q) for q in np.linspace(0.05, 0.95, 19)]
            self.assertTrue(all(b > a for a, b in zip(values, values[1:])))
            self.assertTrue(all(0 < value < 2 for value in values))

    def test_optimal_distribution(self):
        """Test p_ij = p_i m_ij / Σ_j m_ij on the pattern with rows of 2 and 1 squares"""
        system = build_percolation_system(2, 0.5)
        index = [pattern.row_counts() for pattern in enumerate_patterns(2)].index([2, 1])
        P = optimal_row_distribution(system)
        np.testing.assert_allclose(P.weights[index], np.array([2 / 3, 1 / 3]) / 15, rtol=1e-12)

    def test_optimal_distribution_refuses_mixed_scales(self):
        """Test a system with unequal heights and widths is refused"""
        with self.assertRaises(ValueError):
            optimal_row_distribution(mcmullen_system())

    def test_objective_at_optimum_matches_closed_form(self):
        """Test λ + t at the optimal rows equals the closed form"""
        for q in (0.3, 0.5, 0.8):
            system = build_percolation_system(2, q)
            value = objective(system, optimal_row_distribution(system))
            self.assertAlmostEqual(value, closed_form_dim(2, q), delta=1e-10)
            result = closed_form_result(system, 2, q)
            self.assertLessEqual(result.diagnostics['formula_gap'], 1e-10)

    def test_optimizer_finds_closed_form(self):
        """Test the general optimiser recovers the closed form and its maximiser"""
        for q in (0.3, 0.5, 0.8):
            with self.subTest(q=q):
                system = build_percolation_system(2, q)
                result = dimension(system, DimensionOptions(starts=3))
                self.assertAlmostEqual(result.dimension, closed_form_dim(2, q), delta=1e-5)
                optimal = optimal_row_distribution(system).flat
                self.assertLessEqual(np.max(np.abs(result.P_star.flat - optimal)), 1e-4)
