"""
Lambda Selection Module for TVPath

Chooses the regularization weight from the extremum-count curve g(lambda).
The curve is a decreasing staircase: noise extremums vanish quickly at
small lambda, signal extremums slowly at large lambda. Log-scale discrete
derivatives of the staircase locate the transition between the two
regimes, and the selected lambda sits at the end of that transition.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional
import logging

import numpy as np

from path_solver import PathResult

logger = logging.getLogger(__name__)

# Fallback log-scale step when the ladder is too short to estimate one
DEFAULT_Q = 10 ** 0.75
# Range allowed for log10(q)
Q_LOG10_RANGE = (0.5, 1.0)
# Number of leading ladder steps ignored by auto_q
SKIPPED_STEPS = 2

RULES = ('d4g', 'first-drop')


class SelectionError(ValueError):
    """Selection cannot be performed on the given ladder or parameters."""
    pass


def _empty() -> np.ndarray:
    return np.zeros(0)


@dataclass(frozen=True, eq=False)
class GLadder:
    """
    Staircase g(lambda).

    Attributes:
        breakpoints: Strictly increasing lambdas at which g drops
        g_values: g below the first breakpoint, then g on [bp_i, bp_{i+1}),
            ending with 1 (length len(breakpoints) + 1)
        q: Log-scale step of the derivatives below (0 until computed)
        d_plus, d_minus, d2g, d4g: Discrete derivatives at every breakpoint
    """
    breakpoints: np.ndarray
    g_values: np.ndarray
    q: float = 0.0
    d_plus: np.ndarray = field(default_factory=_empty)
    d_minus: np.ndarray = field(default_factory=_empty)
    d2g: np.ndarray = field(default_factory=_empty)
    d4g: np.ndarray = field(default_factory=_empty)

    @property
    def size(self) -> int:
        return int(self.breakpoints.shape[0])

    def g(self, lam) -> np.ndarray:
        """g at one or many lambdas; a breakpoint itself belongs to the interval above it."""
        index = np.searchsorted(self.breakpoints, lam, side='right')
        return self.g_values[index]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": [float(v) for v in self.breakpoints],
            "g": [int(v) for v in self.g_values],
        }


@dataclass(frozen=True, eq=False)
class SelectionReport:
    """
    Outcome of select_lambda.

    lambda_ours is the value chosen by `rule`; both rule outcomes are kept
    for comparison.
    """
    lambda_ours: float
    lambda_trans: float
    q: float
    ladder: GLadder
    rule: str
    index_ours: int
    index_trans: int
    lambda_d4g: float
    lambda_first_drop: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda_ours": float(self.lambda_ours),
            "lambda_trans": float(self.lambda_trans),
            "q": float(self.q),
            "rule": self.rule,
            "ladder": self.ladder.to_dict(),
            "d2g": [int(v) for v in self.ladder.d2g],
            "d4g": [int(v) for v in self.ladder.d4g],
            "lambda_d4g": float(self.lambda_d4g),
            "lambda_first_drop": float(self.lambda_first_drop),
        }


def build_g_ladder(path: PathResult) -> GLadder:
    """
    Collapse the per-junction deltas of a path into the g(lambda) staircase.

    Deltas sharing one lambda are summed; lambdas whose summed delta is zero
    do not change g and are dropped.
    """
    return _aggregate_drops(path.lambda_junction, path.dg_junction)


def _aggregate_drops(lambdas: np.ndarray, dg: np.ndarray) -> GLadder:
    if lambdas.shape[0] == 0:
        return GLadder(breakpoints=_empty(), g_values=np.ones(1, dtype=np.int64))

    values, inverse = np.unique(lambdas, return_inverse=True)
    drops = np.bincount(inverse.ravel(), weights=dg, minlength=values.shape[0])
    drops = np.rint(drops).astype(np.int64)
    keep = drops != 0
    breakpoints = values[keep]
    drops = drops[keep]

    # g = 1 above the last breakpoint; walking down, each breakpoint adds back its drop
    g_values = np.ones(breakpoints.shape[0] + 1, dtype=np.int64)
    g_values[:-1] = 1 - np.cumsum(drops[::-1])[::-1]
    return GLadder(breakpoints=breakpoints, g_values=g_values)


def merge_g_ladder(ladder: GLadder, removed_lambda: np.ndarray, removed_dg: np.ndarray,
                   added_lambda: np.ndarray, added_dg: np.ndarray) -> GLadder:
    """
    Ladder of a path after some of its junctions changed.

    Args:
        ladder: Ladder of the path before the change
        removed_lambda: Old merge values of the changed junctions
        removed_dg: Their old deltas
        added_lambda: New merge values of the changed (and added) junctions
        added_dg: Their new deltas

    Returns:
        The same GLadder build_g_ladder gives on the changed path
    """
    lambdas = np.concatenate((ladder.breakpoints, removed_lambda, added_lambda))
    dg = np.concatenate((np.diff(ladder.g_values), -np.asarray(removed_dg, dtype=np.int64),
                         np.asarray(added_dg, dtype=np.int64)))
    return _aggregate_drops(lambdas, dg)


def discrete_derivatives(ladder: GLadder, q: float) -> GLadder:
    """
    Log-scale derivatives of g at every breakpoint.

    d+ = g(q l) - g(l), d- = g(l) - g(l/q), d2 = d+ - d-, and
    d4_i = d2_{i+2} - 2 d2_{i+1} + d2_i with indices past the end clamped to
    the last breakpoint.
    """
    if not q > 1:
        raise SelectionError(f"q must be greater than 1, got {q!r}")
    bps = ladder.breakpoints
    if bps.shape[0] == 0:
        return replace(ladder, q=float(q))

    g_here = ladder.g(bps)
    d_plus = ladder.g(bps * q) - g_here
    d_minus = g_here - ladder.g(bps / q)
    d2g = d_plus - d_minus

    last = bps.shape[0] - 1
    i = np.arange(bps.shape[0])
    d4g = d2g[np.minimum(i + 2, last)] - 2 * d2g[np.minimum(i + 1, last)] + d2g

    return replace(ladder, q=float(q), d_plus=d_plus, d_minus=d_minus, d2g=d2g, d4g=d4g)


def q_steps(ladder: GLadder) -> np.ndarray:
    """Log10 gaps between consecutive breakpoints that auto_q looks at."""
    bps = ladder.breakpoints
    return np.log10(bps[1:] / bps[:-1])[SKIPPED_STEPS:] if bps.shape[0] > 1 else _empty()


def auto_q(ladder: GLadder, warn: bool = True) -> float:
    """
    Pick q from the largest log gap between consecutive breakpoints, the two
    first steps excepted, clamped to 10**0.5..10**1.

    A ladder too short for an estimate gives DEFAULT_Q, logged as a warning
    unless warn is False.
    """
    steps = q_steps(ladder)
    if steps.shape[0] == 0:
        logger.log(logging.WARNING if warn else logging.DEBUG,
                   "Ladder has %d breakpoints, too few to estimate q; using 10^0.75", ladder.size)
        return DEFAULT_Q
    delta = float(np.clip(np.max(steps), *Q_LOG10_RANGE))
    return 10 ** delta


def first_drop_index(d2g: np.ndarray, start: int) -> int:
    """First index at or after start whose successor has a smaller second derivative."""
    drops = np.flatnonzero(d2g[start + 1:] < d2g[start:-1])
    if drops.size == 0:
        return d2g.shape[0] - 1
    return start + int(drops[0])


def select_lambda(ladder: GLadder, q: Optional[float] = None, rule: str = 'd4g') -> SelectionReport:
    """
    Select lambda from the g ladder.

    Args:
        ladder: Output of build_g_ladder
        q: Log-scale step; estimated with auto_q when None
        rule: 'd4g' (argmin of the fourth difference after the transition)
            or 'first-drop' (first decrease of the second difference)

    Returns:
        SelectionReport

    Raises:
        SelectionError: on an empty ladder, an unknown rule or q <= 1
    """
    if rule not in RULES:
        raise SelectionError(f"Unknown selection rule {rule!r}; expected one of {', '.join(RULES)}")
    if ladder.size == 0:
        raise SelectionError("signal too short for selection")

    if q is None:
        q = auto_q(ladder)
    ladder = discrete_derivatives(ladder, q)

    trans = int(np.argmax(ladder.d2g))
    by_d4g = trans + int(np.argmin(ladder.d4g[trans:]))
    by_drop = first_drop_index(ladder.d2g, trans)
    chosen = by_d4g if rule == 'd4g' else by_drop

    bps = ladder.breakpoints
    logger.debug("Selected lambda %.6g (trans %.6g, q %.4g, %d breakpoints)",
                 bps[chosen], bps[trans], q, ladder.size)
    return SelectionReport(
        lambda_ours=float(bps[chosen]),
        lambda_trans=float(bps[trans]),
        q=float(q),
        ladder=ladder,
        rule=rule,
        index_ours=chosen,
        index_trans=trans,
        lambda_d4g=float(bps[by_d4g]),
        lambda_first_drop=float(bps[by_drop]),
    )


# Convenience function
def select_from_path(path: PathResult, q: Optional[float] = None, rule: str = 'd4g') -> SelectionReport:
    """build_g_ladder followed by select_lambda."""
    return select_lambda(build_g_ladder(path), q=q, rule=rule)


if __name__ == "__main__":
    demo = GLadder(
        breakpoints=np.array([0.1, 0.15, 0.2, 0.3, 0.4, 5.0, 60.0, 700.0]),
        g_values=np.array([9, 8, 7, 6, 5, 4, 3, 2, 1]),
    )
    report = select_lambda(demo, q=10.0)
    print("d2g:", report.ladder.d2g)
    print("d4g:", report.ladder.d4g)
    print(f"lambda_trans={report.lambda_trans} lambda_ours={report.lambda_ours}")
