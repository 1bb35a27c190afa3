"""
Unit tests for path_solver module
"""

import os
import unittest
from unittest.mock import patch

import numpy as np

# Import the module to test
import sys
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from signal_core import SignalError, from_weights
from path_solver import (
    PathConsistencyError,
    PathResult,
    compute_beta,
    delta_g_for_merge,
    segment_is_extremum,
    solve_path,
    solve_values,
)
from restoration import count_extrema, g_of_lambda, reconstruct


def random_signal(rng, n):
    """Gaussian values with random positive weights."""
    return from_weights(rng.normal(0.0, 1.0, n), rng.uniform(0.5, 2.0, n))


class TestWorkedExamples(unittest.TestCase):
    """Test small signals solved by hand."""

    def test_three_point_signal(self):
        """y = (0, 1, 0.5) merges at 1/3 then at 1."""
        path = solve_values([0.0, 1.0, 0.5])
        self.assertAlmostEqual(path.lambda_junction[0], 1.0, places=12)
        self.assertAlmostEqual(path.lambda_junction[1], 1.0 / 3.0, places=12)
        np.testing.assert_array_equal(path.dg_junction, [-1, -1])

    def test_symmetric_peak_merges_at_once(self):
        """Both junctions of (0, 1, 0) merge together and the drop is counted once."""
        path = solve_values([0.0, 1.0, 0.0])
        self.assertAlmostEqual(path.lambda_junction[0], 2.0 / 3.0, places=12)
        self.assertAlmostEqual(path.lambda_junction[1], 2.0 / 3.0, places=12)
        np.testing.assert_array_equal(path.dg_junction, [-2, 0])

    def test_lone_merges_use_sign_rule(self):
        """Single-junction merges take their delta from delta_g_for_merge; a tied pair does not."""
        with patch('path_solver.delta_g_for_merge', wraps=delta_g_for_merge) as rule:
            solve_values([0.0, 1.0, 0.5])
        self.assertEqual(rule.call_count, 2)
        self.assertEqual(sorted(call.args for call in rule.call_args_list), [(0, 1, 0), (1, -1, 0)])

        with patch('path_solver.delta_g_for_merge', wraps=delta_g_for_merge) as rule:
            solve_values([0.0, 1.0, 0.0])
        self.assertEqual(rule.call_count, 0)

    def test_single_sample(self):
        path = solve_values([4.2])
        self.assertEqual(path.n, 1)
        self.assertEqual(path.lambda_junction.shape[0], 0)
        self.assertEqual(path.max_lambda, 0.0)

    def test_two_samples(self):
        """Two unit-weight samples merge when lambda reaches their gap."""
        path = solve_values([0.0, 2.0])
        self.assertAlmostEqual(path.lambda_junction[0], 2.0, places=12)
        np.testing.assert_array_equal(path.dg_junction, [-1])

    def test_equal_neighbours_rejected(self):
        with self.assertRaises(SignalError) as ctx:
            solve_values([0.0, 1.0, 1.0, 2.0])
        self.assertEqual(ctx.exception.index, 1)


class TestSegmentModel(unittest.TestCase):
    """Test slopes and extremum bookkeeping."""

    def test_compute_beta(self):
        np.testing.assert_allclose(compute_beta([0, 1, -1, 0], [1, 1, 1]), [0.5, -1.0, 0.5])
        np.testing.assert_allclose(compute_beta([0, 1, 0], [1, 2]), [0.5, -0.25])

    def test_compute_beta_length_check(self):
        with self.assertRaises(ValueError):
            compute_beta([0, 1], [1.0, 1.0])

    def test_delta_g_examples(self):
        self.assertEqual(delta_g_for_merge(+1, -1, 0), -1)
        self.assertEqual(delta_g_for_merge(-1, +1, -1), -2)
        self.assertEqual(delta_g_for_merge(+1, +1, 0), 0)

    def test_delta_g_matches_extremum_status(self):
        """The closed form agrees with counting extremal segments before and after."""
        for s_left in (-1, 0, 1):
            for s_mid in (-1, 1):
                for s_right in (-1, 0, 1):
                    if s_left == s_mid == s_right:
                        continue
                    before = (int(segment_is_extremum(s_left, s_mid))
                              + int(segment_is_extremum(s_mid, s_right)))
                    after = int(segment_is_extremum(s_left, s_right))
                    self.assertEqual(delta_g_for_merge(s_left, s_mid, s_right), after - before,
                                     msg=f"signs {(s_left, s_mid, s_right)}")

    def test_zero_junction_sign(self):
        with self.assertRaises(PathConsistencyError):
            delta_g_for_merge(1, 0, -1)


class TestPathProperties(unittest.TestCase):
    """Test structural properties on random signals."""

    def setUp(self):
        """Seeded generator."""
        self.rng = np.random.default_rng(11)

    def test_dg_sums_to_initial_extrema(self):
        """All drops together take g from its value at lambda = 0 down to 1."""
        for _ in range(30):
            ws = random_signal(self.rng, int(self.rng.integers(2, 80)))
            path = solve_path(ws)
            self.assertEqual(1 - int(np.sum(path.dg_junction)), count_extrema(ws.y))

    def test_segment_count_drops_by_group_size(self):
        """Crossing a breakpoint removes exactly the junctions merging there."""
        for _ in range(20):
            ws = random_signal(self.rng, int(self.rng.integers(3, 60)))
            path = solve_path(ws)
            bps = path.distinct_breakpoints()
            previous = 0.0
            for bp in bps:
                below = reconstruct(ws, path, (previous + bp) / 2.0).K
                at = reconstruct(ws, path, bp).K
                self.assertEqual(below - at, int(np.sum(path.lambda_junction == bp)))
                previous = bp

    def test_g_matches_restored_extrema(self):
        """g computed from deltas equals the extremum count of the restored levels."""
        for _ in range(20):
            ws = random_signal(self.rng, int(self.rng.integers(3, 60)))
            path = solve_path(ws)
            bps = path.distinct_breakpoints()
            lambdas = np.concatenate((bps, (np.concatenate(([0.0], bps[:-1])) + bps) / 2.0))
            for lam in lambdas:
                r = reconstruct(ws, path, float(lam))
                self.assertEqual(g_of_lambda(path, float(lam)), count_extrema(r.levels))

    def test_full_merge_gives_weighted_mean(self):
        ws = random_signal(self.rng, 25)
        path = solve_path(ws)
        r = reconstruct(ws, path, path.max_lambda)
        self.assertEqual(r.K, 1)
        self.assertAlmostEqual(r.levels[0], ws.weighted_mean(), places=12)

    def test_scale_equivariance(self):
        """Scaling y scales every merge value by the same factor."""
        ws = random_signal(self.rng, 40)
        scaled = from_weights(3.0 * ws.y, ws.tau)
        np.testing.assert_allclose(solve_path(scaled).lambda_junction,
                                   3.0 * solve_path(ws).lambda_junction, rtol=1e-9)

    def test_deterministic(self):
        ws = random_signal(self.rng, 50)
        self.assertEqual(solve_path(ws), solve_path(ws))


class TestPathResult(unittest.TestCase):
    """Test PathResult serialization helpers."""

    def test_dict_round_trip(self):
        path = solve_values([0.0, 1.0, 0.5])
        data = path.to_dict()
        self.assertEqual(data["n"], 3)
        self.assertEqual(PathResult.from_dict(data), path)

    def test_inconsistent_dict(self):
        with self.assertRaises(ValueError):
            PathResult.from_dict({"n": 3, "lambda": [1.0], "dg": [-1]})
        with self.assertRaises(ValueError):
            PathResult.from_dict({"lambda": [1.0, 2.0], "dg": [-1]})


if __name__ == '__main__':
    unittest.main()
