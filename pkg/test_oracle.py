"""
Unit tests for oracle module
"""

import os
import unittest

import numpy as np

# Import the module to test
import sys
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from signal_core import from_weights
from path_solver import solve_path
from restoration import objective, reconstruct
from oracle import NonConvergenceError, full_merge_lambda, oracle_breakpoints, oracle_tv, segment_count


class TestOracleTV(unittest.TestCase):
    """Test the brute-force minimizer."""

    def setUp(self):
        """The three-point signal."""
        self.ws = from_weights([0.0, 1.0, 0.5], [1.0, 1.0, 1.0])

    def test_three_point_half(self):
        np.testing.assert_allclose(oracle_tv(self.ws, 0.5), [0.25, 0.625, 0.625], atol=1e-8)

    def test_lambda_zero(self):
        np.testing.assert_array_equal(oracle_tv(self.ws, 0.0), [0.0, 1.0, 0.5])

    def test_large_lambda(self):
        np.testing.assert_allclose(oracle_tv(self.ws, 10.0), [0.5, 0.5, 0.5], atol=1e-12)

    def test_full_merge_lambda(self):
        """The three-point signal becomes flat at lambda = 1."""
        self.assertAlmostEqual(full_merge_lambda(self.ws), 1.0, places=12)

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            oracle_tv(self.ws, -1.0)
        with self.assertRaises(ValueError):
            oracle_tv(self.ws, 0.5, tol=0.0)

    def test_iteration_cap(self):
        rng = np.random.default_rng(4)
        ws = from_weights(rng.normal(0.0, 1.0, 40), np.ones(40))
        with self.assertRaises(NonConvergenceError):
            oracle_tv(ws, 0.1 * full_merge_lambda(ws), max_updates=1)

    def test_segment_count(self):
        self.assertEqual(segment_count(np.array([1.0, 1.0 + 1e-10, 2.0])), 2)
        self.assertEqual(segment_count(np.array([3.0])), 1)


class TestOracleAgainstPath(unittest.TestCase):
    """Test agreement between the oracle and the path solver."""

    def setUp(self):
        """Seeded generator."""
        self.rng = np.random.default_rng(17)

    def test_restorations_agree(self):
        for _ in range(30):
            n = int(self.rng.integers(2, 33))
            ws = from_weights(self.rng.normal(0.0, 1.0, n), self.rng.uniform(0.5, 2.0, n))
            path = solve_path(ws)
            for lam in np.linspace(0.0, 1.5 * path.max_lambda, 11)[1:]:
                u_path = reconstruct(ws, path, float(lam)).per_sample()
                u_oracle = oracle_tv(ws, float(lam))
                self.assertLessEqual(float(np.max(np.abs(u_path - u_oracle))), 1e-6)

    def test_mutual_optimality(self):
        """Neither restoration has a noticeably lower objective than the other."""
        for _ in range(10):
            n = int(self.rng.integers(5, 40))
            ws = from_weights(self.rng.normal(0.0, 1.0, n), self.rng.uniform(0.5, 2.0, n))
            path = solve_path(ws)
            lam = float(self.rng.uniform(0.05, 0.8) * path.max_lambda)
            f_path = objective(ws, reconstruct(ws, path, lam).per_sample(), lam)
            f_oracle = objective(ws, oracle_tv(ws, lam), lam)
            self.assertLessEqual(f_path, f_oracle + 1e-10)
            self.assertLessEqual(f_oracle, f_path + 1e-10)

    def test_three_point_breakpoints(self):
        ws = from_weights([0.0, 1.0, 0.5], [1.0, 1.0, 1.0])
        found = oracle_breakpoints(ws)
        self.assertEqual(found.shape[0], 2)
        self.assertLessEqual(abs(found[0] - 1.0 / 3.0), 2e-6 / 3.0)
        self.assertLessEqual(abs(found[1] - 1.0), 2e-6)

    def test_breakpoints_match_path(self):
        for _ in range(5):
            n = int(self.rng.integers(3, 9))
            ws = from_weights(self.rng.normal(0.0, 1.0, n), np.ones(n))
            expected = solve_path(ws).distinct_breakpoints()
            found = oracle_breakpoints(ws)
            self.assertEqual(found.shape[0], expected.shape[0])
            np.testing.assert_allclose(found, expected, rtol=2e-6, atol=5e-8)

    def test_single_sample_has_no_breakpoints(self):
        self.assertEqual(oracle_breakpoints(from_weights([1.0], [1.0])).shape[0], 0)


if __name__ == '__main__':
    unittest.main()
