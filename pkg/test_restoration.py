"""
Unit tests for restoration module
"""

import os
import time
import unittest

import numpy as np

# Import the module to test
import sys
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from signal_core import from_weights, prepare_signal
from path_solver import solve_path
from restoration import (
    g_of_lambda,
    kkt_violation,
    mean_bound_violation,
    objective,
    optimality_residual,
    reconstruct,
    restoration_grid,
    total_variation,
)


class TestThreePointRestoration(unittest.TestCase):
    """Test the restoration of y = (0, 1, 0.5) at hand-computed lambdas."""

    def setUp(self):
        """Solve the path once."""
        self.ws = from_weights([0.0, 1.0, 0.5], [1.0, 1.0, 1.0])
        self.path = solve_path(self.ws)

    def test_lambda_zero_is_identity(self):
        r = reconstruct(self.ws, self.path, 0.0)
        self.assertEqual(r.K, 3)
        np.testing.assert_allclose(r.per_sample(), [0.0, 1.0, 0.5], atol=1e-12)
        self.assertAlmostEqual(total_variation(r), 1.5, places=12)

    def test_half(self):
        r = reconstruct(self.ws, self.path, 0.5)
        self.assertEqual(r.K, 2)
        np.testing.assert_array_equal(r.starts, [0, 1])
        np.testing.assert_allclose(r.levels, [0.25, 0.625], atol=1e-12)
        np.testing.assert_allclose(r.per_sample(), [0.25, 0.625, 0.625], atol=1e-12)
        self.assertAlmostEqual(total_variation(r), 0.375, places=12)

    def test_past_last_breakpoint(self):
        r = reconstruct(self.ws, self.path, 2.0)
        self.assertEqual(r.K, 1)
        self.assertAlmostEqual(r.levels[0], 0.5, places=12)
        self.assertEqual(total_variation(r), 0.0)

    def test_g_values(self):
        self.assertEqual(g_of_lambda(self.path, 0.1), 3)
        self.assertEqual(g_of_lambda(self.path, 0.5), 2)
        self.assertEqual(g_of_lambda(self.path, 2.0), 1)

    def test_breakpoint_returns_merged_structure(self):
        """At lambda = 1/3 the last two samples already share a segment."""
        r = reconstruct(self.ws, self.path, self.path.lambda_junction[1])
        self.assertEqual(r.K, 2)

    def test_to_dict(self):
        data = reconstruct(self.ws, self.path, 0.5).to_dict()
        self.assertEqual(data["breaks"], [0])
        self.assertEqual(data["lambda"], 0.5)
        self.assertEqual(len(data["levels"]), 2)

    def test_negative_lambda(self):
        with self.assertRaises(ValueError):
            reconstruct(self.ws, self.path, -0.1)
        with self.assertRaises(ValueError):
            g_of_lambda(self.path, -1.0)

    def test_size_mismatch(self):
        other = from_weights([0.0, 1.0], [1.0, 1.0])
        with self.assertRaises(ValueError):
            reconstruct(other, self.path, 0.5)


class TestOptimality(unittest.TestCase):
    """Test optimality certificates on random weighted signals."""

    def setUp(self):
        """Seeded generator."""
        self.rng = np.random.default_rng(5)

    def _signals(self, count, low=2, high=64):
        for _ in range(count):
            n = int(self.rng.integers(low, high + 1))
            yield from_weights(self.rng.normal(0.0, 1.0, n), self.rng.uniform(0.2, 3.0, n))

    def test_certificates_on_grid(self):
        """First-order conditions and the prefix/suffix mean inequalities hold everywhere."""
        for ws in self._signals(25):
            path = solve_path(ws)
            for lam in restoration_grid(ws, path):
                r = reconstruct(ws, path, lam)
                self.assertLessEqual(optimality_residual(r), 1e-9)
                self.assertLessEqual(kkt_violation(ws, r), 1e-9)
                self.assertLessEqual(mean_bound_violation(ws, r), 1e-9)

    def test_levels_affine_between_breakpoints(self):
        """Inside one interval the levels move by lambda times the segment slopes."""
        for ws in self._signals(10, low=5):
            path = solve_path(ws)
            bps = path.distinct_breakpoints()
            if bps.shape[0] < 2:
                continue
            lo, hi = bps[0], bps[1]
            lam_a = lo + 0.25 * (hi - lo)
            lam_b = lo + 0.75 * (hi - lo)
            ra = reconstruct(ws, path, lam_a)
            rb = reconstruct(ws, path, lam_b)
            np.testing.assert_array_equal(ra.cut_indices, rb.cut_indices)
            np.testing.assert_allclose(rb.levels - ra.levels, (lam_b - lam_a) * ra.betas, atol=1e-12)

    def test_objective_not_beaten_by_perturbation(self):
        for ws in self._signals(10, low=3):
            path = solve_path(ws)
            lam = 0.3 * path.max_lambda
            u = reconstruct(ws, path, lam).per_sample()
            best = objective(ws, u, lam)
            for _ in range(20):
                trial = u + self.rng.normal(0.0, 1e-3, ws.n)
                self.assertGreaterEqual(objective(ws, trial, lam), best - 1e-12)

    def test_monotone_along_path(self):
        """K, g and the total variation never increase with lambda."""
        for ws in self._signals(10, low=10, high=120):
            path = solve_path(ws)
            grid = restoration_grid(ws, path)
            restorations = [reconstruct(ws, path, lam) for lam in grid]
            K = [r.K for r in restorations]
            g = [g_of_lambda(path, lam) for lam in grid]
            tv = [total_variation(r) for r in restorations]
            self.assertTrue(all(a >= b for a, b in zip(K, K[1:])))
            self.assertTrue(all(a >= b for a, b in zip(g, g[1:])))
            self.assertTrue(all(a >= b - 1e-12 for a, b in zip(tv, tv[1:])))


class TestExpansion(unittest.TestCase):
    """Test restorations mapped back through collapsed runs."""

    def test_expand_to_original_grid(self):
        ws = prepare_signal([0, 1, 2, 3, 4, 5], [0.0, 0.0, 2.0, 2.0, 2.0, 1.0])
        path = solve_path(ws)
        u = reconstruct(ws, path, 0.0).expand(ws)
        np.testing.assert_allclose(u, [0.0, 0.0, 2.0, 2.0, 2.0, 1.0], atol=1e-12)
        u = reconstruct(ws, path, path.max_lambda).expand(ws)
        np.testing.assert_allclose(u, np.full(6, 7.0 / 6.0), atol=1e-12)


class TestScaling(unittest.TestCase):
    """Test that reconstruct stays linear in the signal length."""

    def best_time(self, ws, path, lam, repeats=5):
        best = float('inf')
        for _ in range(repeats):
            started = time.perf_counter()
            reconstruct(ws, path, lam)
            best = min(best, time.perf_counter() - started)
        return best

    def test_linear_runtime(self):
        """Quadrupling n at most sextuples the best-of-five time."""
        rng = np.random.default_rng(4)
        times = []
        for n in (1 << 16, 1 << 18):
            ws = from_weights(rng.normal(0.0, 1.0, n), np.ones(n))
            path = solve_path(ws)
            times.append(self.best_time(ws, path, float(np.median(path.lambda_junction))))
        self.assertLessEqual(times[1], 6.0 * times[0])


if __name__ == '__main__':
    unittest.main()
