"""
Unit tests for cli module
"""

import io
import json
import os
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pandas as pd

# Import the module to test
import sys
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from cli import is_header_line, main, parse_stream_line
from signal_core import SignalError, collapse_constant_pieces, read_signal_csv
from path_solver import solve_path
from restoration import reconstruct, restoration_grid
from utils.formatters import path_from_json


class CliTestCase(unittest.TestCase):
    """Temporary directory with a few input files."""

    def setUp(self):
        """Write the three-point signal and a noisy step signal."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name
        self.small = self.write("small.csv", "t,y\n0,0\n1,1\n2,0.5\n")
        rng = np.random.default_rng(0)
        y = np.repeat([0.0, 4.0, 1.0], 30) + rng.normal(0.0, 0.5, 90)
        self.steps = self.write("steps.csv", "t,y\n" + "".join(f"{i},{float(v)!r}\n" for i, v in enumerate(y)))

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, name, text):
        path = os.path.join(self.dir, name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        return path

    def run_cli(self, argv):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(argv)
        return code, out.getvalue(), err.getvalue()


class TestDenoise(CliTestCase):
    """Test the denoise command."""

    def test_fixed_lambda(self):
        output = os.path.join(self.dir, "u.csv")
        code, _, err = self.run_cli(['denoise', self.small, '--lambda', '0.5', '--output', output])
        self.assertEqual(code, 0)
        frame = pd.read_csv(output)
        self.assertEqual(list(frame.columns), ["t", "y", "u"])
        np.testing.assert_allclose(frame["u"], [0.25, 0.625, 0.625])
        self.assertIn("method=fixed", err)
        self.assertIn("K=2", err)

    def test_stdout_and_quiet(self):
        code, out, err = self.run_cli(['--quiet', 'denoise', self.small, '--lambda', '2'])
        self.assertEqual(code, 0)
        self.assertEqual(out.splitlines()[1], "0,0,0.5")
        self.assertEqual(err, "")

    def test_methods(self):
        for method in ('ours', 'aut', 'sure', 'cv'):
            code, out, _ = self.run_cli(['--quiet', 'denoise', self.steps, '--method', method, '--folds', '5'])
            self.assertEqual(code, 0, msg=method)
            self.assertEqual(len(out.splitlines()), 91)

    def test_side_outputs(self):
        gcurve = os.path.join(self.dir, "g.dat")
        criterion = os.path.join(self.dir, "sure.csv")
        restoration = os.path.join(self.dir, "r.json")
        code, _, _ = self.run_cli(['--quiet', 'denoise', self.steps, '--method', 'sure', '--sigma', '0.5',
                                   '--output', os.path.join(self.dir, "u.csv"), '--gcurve', gcurve,
                                   '--criterion', criterion, '--restoration-json', restoration])
        self.assertEqual(code, 0)
        self.assertEqual(list(pd.read_csv(criterion).columns), ["lambda", "criterion"])
        with open(restoration, 'r', encoding='utf-8') as f:
            self.assertIn("levels", json.load(f))
        with open(gcurve, 'r', encoding='utf-8') as f:
            self.assertEqual(len(f.readline().split()), 3)

    def test_bad_input_exit_code(self):
        bad = self.write("bad.csv", "t,y\n0,1\n1,nan\n")
        code, _, err = self.run_cli(['denoise', bad])
        self.assertEqual(code, 2)
        self.assertIn("Row 3", err)

    def test_missing_file(self):
        code, _, err = self.run_cli(['denoise', os.path.join(self.dir, "absent.csv")])
        self.assertEqual(code, 2)
        self.assertTrue(err.startswith("error:"))

    def test_negative_lambda(self):
        code, _, _ = self.run_cli(['denoise', self.small, '--lambda', '-1'])
        self.assertEqual(code, 2)


class TestPathAndVerify(CliTestCase):
    """Test the path and verify commands."""

    def test_path_json(self):
        code, out, _ = self.run_cli(['path', self.small])
        self.assertEqual(code, 0)
        path = path_from_json(out)
        np.testing.assert_allclose(path.lambda_junction, [1.0, 1.0 / 3.0], rtol=1e-12)

    def test_path_json_restores_identically(self):
        """Restorations from the dumped path equal those from a direct solve."""
        code, out, _ = self.run_cli(['path', self.steps])
        self.assertEqual(code, 0)
        loaded = path_from_json(out)
        with open(self.steps, 'r', encoding='utf-8') as f:
            ws = collapse_constant_pieces(read_signal_csv(f))
        direct = solve_path(ws)
        self.assertEqual(loaded, direct)
        for lam in restoration_grid(ws, direct):
            np.testing.assert_array_equal(reconstruct(ws, loaded, lam).expand(ws),
                                          reconstruct(ws, direct, lam).expand(ws))

    def test_verify(self):
        output = os.path.join(self.dir, "verify.json")
        code, _, _ = self.run_cli(['verify', self.small, '--output', output])
        self.assertEqual(code, 0)
        with open(output, 'r', encoding='utf-8') as f:
            payload = json.load(f)
        self.assertLessEqual(payload["max_gap"], 1e-6)
        self.assertEqual(payload["n"], 3)


class TestStream(CliTestCase):
    """Test the stream command."""

    def test_stream_rows(self):
        output = os.path.join(self.dir, "path.json")
        code, out, _ = self.run_cli(['stream', self.steps, '--emit-path', '--output', output])
        self.assertEqual(code, 0)
        rows = out.splitlines()
        self.assertEqual(len(rows), 90)
        self.assertEqual(rows[-1].split(',')[0], "90")
        with open(output, 'r', encoding='utf-8') as f:
            self.assertEqual(path_from_json(f.read()).n, 90)

    def test_stream_ends_where_denoise_does(self):
        """The last stream row matches a denoise run on the whole file."""
        code, out, _ = self.run_cli(['stream', self.steps])
        self.assertEqual(code, 0)
        n, lam, K, last_level = out.splitlines()[-1].split(',')

        code, denoised, err = self.run_cli(['denoise', self.steps])
        self.assertEqual(code, 0)
        self.assertIn(f"lambda={lam} K={K} ", err)
        self.assertEqual(denoised.splitlines()[-1].split(',')[2], last_level)
        self.assertEqual(int(n), len(denoised.splitlines()) - 1)

    def test_stream_empty_input(self):
        empty = self.write("empty.csv", "")
        code, out, err = self.run_cli(['stream', empty])
        self.assertEqual(code, 0)
        self.assertEqual(out, "")
        self.assertEqual(err, "")

    def test_stream_header_skipped(self):
        headed = self.write("headed.csv", "t;y\n0;1\n1;3\n")
        code, out, _ = self.run_cli(['stream', headed])
        self.assertEqual(code, 0)
        self.assertEqual([row.split(',')[0] for row in out.splitlines()], ["1", "2"])

    def test_stream_malformed_first_line(self):
        """Only a header of two non-numeric fields may be skipped."""
        for first in ("1,2,3\n", "0,abc\n"):
            bad = self.write("bad_first.csv", first + "1,2\n")
            code, _, err = self.run_cli(['stream', bad])
            self.assertEqual(code, 2, msg=first)
            self.assertIn("line 1", err)

    def test_is_header_line(self):
        self.assertTrue(is_header_line("t,y\n"))
        self.assertTrue(is_header_line("time\tvalue"))
        self.assertFalse(is_header_line("0,abc"))
        self.assertFalse(is_header_line("t,y,z"))

    def test_stream_bad_line(self):
        bad = self.write("bad_stream.csv", "0,1\n1,2\n2\n")
        code, _, err = self.run_cli(['stream', bad])
        self.assertEqual(code, 2)
        self.assertIn("line 3", err)

    def test_parse_stream_line(self):
        self.assertEqual(parse_stream_line("1;2.5\n", 1), [1.0, 2.5])
        self.assertEqual(parse_stream_line("1 2.5", 1), [1.0, 2.5])
        self.assertIsNone(parse_stream_line("   \n", 4))
        with self.assertRaises(SignalError):
            parse_stream_line("1,2,3", 2)


class TestBench(CliTestCase):
    """Test the bench command."""

    def test_bench_writes_reports(self):
        config = self.write("tiny.cfg", "name = tiny\nsignal = blocks\nn = 60\nselectors = ours, aut\n")
        reports = os.path.join(self.dir, "reports")
        code, _, err = self.run_cli(['bench', config, '--replications', '1', '--output-dir', reports])
        self.assertEqual(code, 0)
        self.assertTrue(os.path.exists(os.path.join(reports, "tiny.json")))
        self.assertIn("ours_auto", err)

    def test_bench_unknown_key(self):
        config = self.write("bad.cfg", "colour = blue\n")
        code, _, err = self.run_cli(['bench', config])
        self.assertEqual(code, 2)
        self.assertIn("unknown key", err)


if __name__ == '__main__':
    unittest.main()
