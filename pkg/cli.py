"""
Command Line Module for TVPath

Entry point tying the library together:
  denoise  - read `t,y`, select lambda, write `t,y,u`
  path     - dump the full merge path as JSON
  stream   - online restoration of samples read line by line
  bench    - run a benchmark config and write its reports
  verify   - cross-check the path solver against the brute-force oracle

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

import argparse
import logging
import sys
from contextlib import contextmanager
from typing import Iterator, List, Optional, TextIO

import numpy as np
import pandas as pd

from signal_core import SignalError, collapse_constant_pieces, read_signal_csv
from path_solver import PathConsistencyError, solve_path
from restoration import g_of_lambda, reconstruct, restoration_grid
from lambda_select import build_g_ladder, select_lambda
from baselines import aut_select, criterion_rows, cv_select, estimate_sigma, sure_select
from stream_solver import StreamState
from oracle import oracle_tv
from simbench import run_configured
from services.report_store import load_config, save_report
from utils.formatters import (format_stream_row, format_summary, path_to_json, to_json,
                              write_criterion_csv, write_denoised_csv, write_gcurve, write_text)

logger = logging.getLogger("tvpath")

METHODS = ('ours', 'aut', 'sure', 'cv')
STREAM_SEPARATORS = (',', ';', '\t')
VERIFY_TOL = 1e-6


@contextmanager
def open_input(name: str) -> Iterator[TextIO]:
    if name == '-':
        yield sys.stdin
    else:
        with open(name, 'r', encoding='utf-8') as f:
            yield f


@contextmanager
def open_output(name: Optional[str]) -> Iterator[TextIO]:
    if not name or name == '-':
        yield sys.stdout
    else:
        with open(name, 'w', encoding='utf-8', newline='') as f:
            yield f


def cmd_denoise(args: argparse.Namespace) -> int:
    """Read `t,y`, choose lambda, write `t,y,u`."""
    with open_input(args.input) as f:
        raw = read_signal_csv(f)
    ws = collapse_constant_pieces(raw)
    path = solve_path(ws)

    selection = None
    criterion = None
    if args.lam is not None:
        if args.lam < 0:
            raise ValueError(f"--lambda must be non-negative, got {args.lam!r}")
        lam, method = args.lam, 'fixed'
    elif args.method == 'ours':
        q = None if args.auto_q else args.q
        selection = select_lambda(build_g_ladder(path), q=q, rule=args.rule)
        lam, method = selection.lambda_ours, 'ours'
    elif args.method in ('aut', 'sure'):
        sigma = args.sigma
        if sigma is None:
            sigma = estimate_sigma(raw.y)
            logger.info("Estimated sigma %.6g", sigma)
        result = aut_select(ws, path, sigma) if args.method == 'aut' else sure_select(ws, path, sigma)
        lam, method, criterion = result.lam, args.method, result
    else:
        result = cv_select(raw, k_folds=args.folds, seed=args.seed)
        lam, method, criterion = result.lam, 'cv', result

    r = reconstruct(ws, path, lam)
    u = r.expand(ws)
    logger.info("Selected lambda %.9g with %s", lam, method)

    with open_output(args.output) as out:
        write_denoised_csv(out, raw.t, raw.y, u)

    if args.gcurve:
        if selection is None:
            selection = select_lambda(build_g_ladder(path), q=None if args.auto_q else args.q, rule=args.rule)
        ladder = selection.ladder
        write_gcurve(args.gcurve, pd.DataFrame({"lambda": ladder.breakpoints,
                                                "g": ladder.g_values[1:], "d2g": ladder.d2g}))
    if args.criterion and criterion is not None:
        write_criterion_csv(args.criterion, criterion_rows(criterion))
    if args.restoration_json:
        with open(args.restoration_json, 'w', encoding='utf-8') as f:
            f.write(to_json(r.to_dict()))

    if not args.quiet:
        write_text(sys.stderr, format_summary(lam, r.K, g_of_lambda(path, lam), method))
    return 0


def cmd_path(args: argparse.Namespace) -> int:
    """Dump the merge path as JSON."""
    with open_input(args.input) as f:
        ws = collapse_constant_pieces(read_signal_csv(f))
    path = solve_path(ws)
    with open_output(args.output) as out:
        write_text(out, path_to_json(path))
    return 0


def split_stream_fields(text: str) -> List[str]:
    """Fields of a stripped line, split on the first separator it contains."""
    for sep in STREAM_SEPARATORS:
        if sep in text:
            return [field.strip() for field in text.split(sep)]
    return text.split()


def is_header_line(line: str) -> bool:
    """Two fields, neither of them a number."""
    fields = split_stream_fields(line.strip())
    if len(fields) != 2:
        return False
    for field in fields:
        try:
            float(field)
        except ValueError:
            continue
        return False
    return True


def parse_stream_line(line: str, number: int) -> Optional[List[float]]:
    """Split a `t<sep>y` line; None for blank lines."""
    text = line.strip()
    if not text:
        return None
    fields = split_stream_fields(text)
    if len(fields) != 2:
        raise SignalError(f"line {number}: expected two fields t,y, got {text!r}", row=number)
    try:
        return [float(fields[0]), float(fields[1])]
    except ValueError:
        raise SignalError(f"line {number}: non-numeric value in {text!r}", row=number)


def cmd_stream(args: argparse.Namespace) -> int:
    """Push samples one line at a time and report the restoration after each."""
    state = StreamState(policy=args.lambda_hat_policy, q=None if args.auto_q else args.q, rule=args.rule)
    with open_input(args.input) as f:
        for number, line in enumerate(f, 1):
            try:
                sample = parse_stream_line(line, number)
            except SignalError:
                if number == 1 and is_header_line(line):
                    continue
                raise
            if sample is None:
                continue
            try:
                state.push(sample[0], sample[1])
            except SignalError as e:
                raise SignalError(f"line {number}: {e}", row=number)
            sys.stdout.write(format_stream_row(state.summary_row()) + '\n')
            sys.stdout.flush()

    if args.emit_path:
        text = path_to_json(state.path)
        if args.output:
            with open_output(args.output) as out:
                write_text(out, text)
        else:
            write_text(sys.stderr, text)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    """Run a benchmark config and write its reports."""
    overrides = {
        "replications": args.replications,
        "seed": args.seed,
        "workers": args.workers,
        "output_dir": args.output_dir,
        "mode": args.mode,
    }
    cfg = load_config(args.config, overrides)
    report = run_configured(cfg)
    written = save_report(report)
    if not args.quiet:
        if not report.summary.empty:
            write_text(sys.stderr, report.summary.to_string(index=False))
        for part, path in written.items():
            write_text(sys.stderr, f"{part}: {path}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    """Largest sup-norm gap between path restorations and the oracle."""
    with open_input(args.input) as f:
        ws = collapse_constant_pieces(read_signal_csv(f))
    path = solve_path(ws)
    lambdas = args.lam if args.lam else restoration_grid(ws, path)
    gaps = []
    for lam in lambdas:
        u_path = reconstruct(ws, path, lam).per_sample()
        u_oracle = oracle_tv(ws, lam)
        gaps.append(float(np.max(np.abs(u_path - u_oracle))))
    worst = max(gaps) if gaps else 0.0
    payload = {"n": ws.n, "lambdas": [float(l) for l in lambdas], "gaps": gaps, "max_gap": worst}
    with open_output(args.output) as out:
        write_text(out, to_json(payload))
    if worst > args.tol:
        raise PathConsistencyError(f"path and oracle differ by {worst:.3g} (> {args.tol:g})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvpath", description="1D total-variation denoising path tools")
    parser.add_argument('-v', '--verbose', action='store_true', help="debug logging")
    parser.add_argument('--quiet', action='store_true', help="no summary on standard error")
    sub = parser.add_subparsers(dest='command', required=True)

    def selection_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument('--q', type=float, default=None, help="log-scale step q (> 1); auto when omitted")
        p.add_argument('--auto-q', action='store_true', help="force automatic q")
        p.add_argument('--rule', choices=('d4g', 'first-drop'), default='d4g')

    p = sub.add_parser('denoise', help="denoise a t,y CSV")
    p.add_argument('input', help="CSV file or - for standard input")
    p.add_argument('--lambda', dest='lam', type=float, default=None)
    p.add_argument('--method', choices=METHODS, default='ours')
    p.add_argument('--sigma', type=float, default=None, help="noise std for aut/sure (MAD estimate if omitted)")
    p.add_argument('--folds', type=int, default=10)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--output', default=None)
    p.add_argument('--gcurve', default=None, help="write lambda g d2g data to this file")
    p.add_argument('--criterion', default=None, help="write the SURE/CV criterion curve to this CSV")
    p.add_argument('--restoration-json', default=None)
    selection_flags(p)
    p.set_defaults(handler=cmd_denoise)

    p = sub.add_parser('path', help="export the merge path as JSON")
    p.add_argument('input')
    p.add_argument('--output', default=None)
    p.set_defaults(handler=cmd_path)

    p = sub.add_parser('stream', help="online restoration of t,y lines")
    p.add_argument('input', nargs='?', default='-')
    p.add_argument('--lambda-hat-policy', default='ours', help="ours, 2ours or fixed:X")
    p.add_argument('--emit-path', action='store_true', help="dump the final path JSON")
    p.add_argument('--output', default=None, help="file for --emit-path (standard error otherwise)")
    selection_flags(p)
    p.set_defaults(handler=cmd_stream)

    p = sub.add_parser('bench', help="run a benchmark config")
    p.add_argument('config')
    p.add_argument('--replications', type=int, default=None)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--workers', type=int, default=None)
    p.add_argument('--output-dir', default=None)
    p.add_argument('--mode', choices=('experiment', 'timing', 'both'), default=None)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser('verify', help="compare the path solver with the oracle")
    p.add_argument('input')
    p.add_argument('--lambda', dest='lam', type=float, action='append', default=None)
    p.add_argument('--tol', type=float, default=VERIFY_TOL)
    p.add_argument('--output', default=None)
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except (ValueError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except RuntimeError as e:
        sys.stderr.write(f"error: {e}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
