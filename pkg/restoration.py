"""
Restoration Module for TVPath

Rebuilds the denoised signal u*(lambda) and the extremum count g(lambda)
from a PathResult for any lambda, in O(n). Also hosts the checks used to
certify a restoration: objective value, first-order optimality and the
prefix/suffix mean inequalities every optimal segment satisfies.
"""

from dataclasses import dataclass
from typing import Any, Dict, List
import logging

import numpy as np

from signal_core import WeightedSignal
from path_solver import PathResult, compute_beta, segment_is_extremum

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Restoration:
    """
    Piecewise-constant restoration of a (collapsed) signal at a fixed lambda.

    Attributes:
        cut_indices: Junction indices still separating segments (lambda° > lambda)
        starts: First sample index of every segment
        levels: Segment values v*
        seg_weights: Segment weights T_j
        seg_means: Weighted means of y over each segment
        signs: Jump signs between segments, padded with 0 at both ends (length K+1)
        lam: The lambda this restoration solves
        n: Number of samples covered
    """
    cut_indices: np.ndarray
    starts: np.ndarray
    levels: np.ndarray
    seg_weights: np.ndarray
    seg_means: np.ndarray
    signs: np.ndarray
    lam: float
    n: int

    @property
    def K(self) -> int:
        return int(self.levels.shape[0])

    @property
    def lengths(self) -> np.ndarray:
        stops = np.concatenate((self.starts[1:], [self.n]))
        return stops - self.starts

    @property
    def betas(self) -> np.ndarray:
        return compute_beta(self.signs, self.seg_weights)

    def per_sample(self) -> np.ndarray:
        """Levels repeated over the samples of the collapsed signal."""
        return np.repeat(self.levels, self.lengths)

    def expand(self, ws: WeightedSignal) -> np.ndarray:
        """Levels on the original (uncollapsed) sample grid of ws."""
        return ws.expand(self.per_sample())

    def extremum_count(self) -> int:
        return sum(
            int(segment_is_extremum(int(self.signs[j]), int(self.signs[j + 1])))
            for j in range(self.K)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "breaks": [int(c) for c in self.cut_indices],
            "levels": [float(v) for v in self.levels],
            "lambda": float(self.lam),
        }


def reconstruct(ws: WeightedSignal, path: PathResult, lam: float) -> Restoration:
    """
    Restoration at lambda from the merge path.

    Segments are the maximal runs between junctions with lambda° > lambda
    (strict, so at a breakpoint the merged structure is returned); levels are
    segment means moved by lambda times their slope.

    Args:
        ws: The collapsed signal the path was solved on
        path: Its PathResult
        lam: Non-negative regularization weight

    Returns:
        Restoration
    """
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be a finite non-negative number, got {lam!r}")
    if path.n != ws.n:
        raise ValueError(f"Path was solved on {path.n} samples, signal has {ws.n}")

    cuts = np.flatnonzero(path.lambda_junction > lam)
    starts = np.concatenate(([0], cuts + 1)).astype(np.int64)
    T = np.add.reduceat(ws.tau, starts)
    S = np.add.reduceat(ws.tau * ws.y, starts)
    means = S / T
    jump_signs = np.sign(ws.y[cuts + 1] - ws.y[cuts]).astype(np.int64)
    signs = np.concatenate(([0], jump_signs, [0])).astype(np.int64)
    levels = means + lam * compute_beta(signs, T)
    return Restoration(cut_indices=cuts, starts=starts, levels=levels, seg_weights=T,
                       seg_means=means, signs=signs, lam=float(lam), n=ws.n)


def g_of_lambda(path: PathResult, lam: float) -> int:
    """Number of extremal segments at lambda, from the path deltas alone."""
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam!r}")
    return int(1 - np.sum(path.dg_junction[path.lambda_junction > lam]))


def total_variation(r: Restoration) -> float:
    """Sum of absolute jumps between consecutive segment levels."""
    return float(np.sum(np.abs(np.diff(r.levels))))


def objective(ws: WeightedSignal, u: np.ndarray, lam: float) -> float:
    """Weighted fidelity plus lambda times total variation, on the grid of ws."""
    u = np.asarray(u, dtype=float)
    return float(np.dot(ws.tau, (ws.y - u) ** 2) + lam * np.sum(np.abs(np.diff(u))))


def count_extrema(levels: np.ndarray) -> int:
    """Extremal segments of a level sequence with no two equal neighbours."""
    levels = np.asarray(levels, dtype=float)
    if levels.shape[0] <= 1:
        return int(levels.shape[0])
    s = np.concatenate(([0], np.sign(np.diff(levels)), [0]))
    return int(np.sum((s[:-1] != s[1:]) | (s[:-1] == 0)))


def optimality_residual(r: Restoration) -> float:
    """
    Largest relative deviation of a level from mean + lambda * slope, with the
    slope taken from the signs the levels actually show.
    """
    observed = np.concatenate(([0], np.sign(np.diff(r.levels)), [0]))
    expected = r.seg_means + r.lam * compute_beta(observed, r.seg_weights)
    return float(np.max(np.abs(r.levels - expected) / (1.0 + np.abs(r.levels))))


def kkt_violation(ws: WeightedSignal, r: Restoration) -> float:
    """
    Largest violation of the first-order conditions of the weighted TV problem.

    The dual variable p_i = sum_{k<=i} 2 tau_k (u_k - y_k) must stay in
    [-lambda, lambda], equal lambda * sign at every cut and vanish at the end.
    """
    u = r.per_sample()
    p = np.cumsum(2.0 * ws.tau * (u - ws.y))
    scale = 1.0 + float(np.max(np.abs(p))) if p.size else 1.0
    worst = abs(float(p[-1]))
    if p.shape[0] > 1:
        interior = np.abs(p[:-1]) - r.lam
        worst = max(worst, float(np.max(interior, initial=0.0)))
    if r.cut_indices.size:
        worst = max(worst, float(np.max(np.abs(p[r.cut_indices] - r.lam * r.signs[1:-1]))))
    return worst / scale


def mean_bound_violation(ws: WeightedSignal, r: Restoration) -> float:
    """
    Largest violation of the prefix/suffix mean inequalities of an optimal
    restoration.

    Inside a segment whose left neighbour is lower, every weighted prefix
    mean is at least the level (at most when the neighbour is higher). A
    segment whose right neighbour is higher has every weighted suffix mean
    at most the level (at least when it is lower).
    """
    n = ws.n
    CS = np.concatenate(([0.0], np.cumsum(ws.tau * ws.y)))
    CT = np.concatenate(([0.0], np.cumsum(ws.tau)))
    lengths = r.lengths
    seg_of = np.repeat(np.arange(r.K), lengths)
    start_of = np.repeat(r.starts, lengths)
    stop_of = np.repeat(np.concatenate((r.starts[1:], [n])), lengths)
    idx = np.arange(n)
    level = r.levels[seg_of]

    prefix = (CS[idx + 1] - CS[start_of]) / (CT[idx + 1] - CT[start_of])
    suffix = (CS[stop_of] - CS[idx]) / (CT[stop_of] - CT[idx])
    left = r.signs[:-1][seg_of]
    right = r.signs[1:][seg_of]

    worst = 0.0
    worst = max(worst, float(np.max(np.where(left > 0, level - prefix, 0.0))))
    worst = max(worst, float(np.max(np.where(left < 0, prefix - level, 0.0))))
    worst = max(worst, float(np.max(np.where(right > 0, suffix - level, 0.0))))
    worst = max(worst, float(np.max(np.where(right < 0, level - suffix, 0.0))))
    return worst


def restoration_grid(ws: WeightedSignal, path: PathResult) -> List[float]:
    """
    Lambda values probing every interval of the path: 0, a point inside each
    interval between distinct breakpoints, every breakpoint and one value past
    the last.
    """
    bps = path.distinct_breakpoints()
    grid = [0.0]
    previous = 0.0
    for bp in bps:
        if previous > 0:
            grid.append(float(np.sqrt(previous * bp)))
        else:
            grid.append(float(bp) / 2.0)
        grid.append(float(bp))
        previous = float(bp)
    grid.append(2.0 * previous if previous > 0 else 1.0)
    return grid


if __name__ == "__main__":
    from signal_core import from_weights
    from path_solver import solve_path

    ws = from_weights([0.0, 1.0, 0.5], [1.0, 1.0, 1.0])
    path = solve_path(ws)
    for lam in (0.0, 0.5, 1.0):
        r = reconstruct(ws, path, lam)
        print(f"lambda={lam}: u={r.per_sample()} K={r.K} g={g_of_lambda(path, lam)}")
