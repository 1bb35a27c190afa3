"""
Path Solver Module for TVPath

Offline computation of the complete 1D total-variation denoising path.
Starting from u*(0) = y, neighbouring segments move linearly in lambda and
merge one after another; the solver records for every junction the lambda
at which its two sides merge and the change in the number of extremal
segments caused by that merge.

Uses a binary heap with lazily invalidated entries as the merge queue,
which keeps the whole path at O(n log n).
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple
import heapq
import logging

import numpy as np

from signal_core import SignalError, WeightedSignal

logger = logging.getLogger(__name__)

# Merge estimates within this relative distance of the smallest one are merged together
GROUP_RTOL = 1e-12


class PathConsistencyError(RuntimeError):
    """Internal solver invariant violated."""
    pass


@dataclass(frozen=True, eq=False)
class PathResult:
    """
    Complete solution path of a signal with n samples.

    Attributes:
        lambda_junction: lambda_junction[i] is the lambda at which samples i and
            i+1 end up in the same segment (length n-1)
        dg_junction: Change of the extremum count attributed to junction i
            (length n-1). Only sums over a merge group are meaningful.
    """
    lambda_junction: np.ndarray
    dg_junction: np.ndarray

    @property
    def n(self) -> int:
        return int(self.lambda_junction.shape[0]) + 1

    @property
    def max_lambda(self) -> float:
        """Lambda at which the whole signal becomes a single segment (0 for n == 1)."""
        if self.lambda_junction.shape[0] == 0:
            return 0.0
        return float(np.max(self.lambda_junction))

    def distinct_breakpoints(self) -> np.ndarray:
        """Sorted distinct merge values."""
        return np.unique(self.lambda_junction)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "lambda": [float(v) for v in self.lambda_junction],
            "dg": [int(v) for v in self.dg_junction],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PathResult':
        lambdas = np.asarray(data.get("lambda", []), dtype=float)
        dg = np.asarray(data.get("dg", []), dtype=np.int64)
        if lambdas.shape != dg.shape:
            raise ValueError(f"Path has {lambdas.shape[0]} lambda values but {dg.shape[0]} dg values")
        n = int(data.get("n", lambdas.shape[0] + 1))
        if n != lambdas.shape[0] + 1:
            raise ValueError(f"Path declares n={n} but carries {lambdas.shape[0]} junctions")
        return cls(lambda_junction=lambdas, dg_junction=dg)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PathResult):
            return NotImplemented
        return (np.array_equal(self.lambda_junction, other.lambda_junction)
                and np.array_equal(self.dg_junction, other.dg_junction))

    def __hash__(self) -> int:
        return hash((self.lambda_junction.tobytes(), self.dg_junction.tobytes()))


def empty_path() -> PathResult:
    return PathResult(lambda_junction=np.zeros(0), dg_junction=np.zeros(0, dtype=np.int64))


def junction_signs(y: np.ndarray) -> np.ndarray:
    """Sign of every jump y[i+1] - y[i]; these signs hold until the junction merges."""
    return np.sign(np.diff(y)).astype(np.int64)


def compute_beta(s: Sequence[int], T: Sequence[float]) -> np.ndarray:
    """
    Slope of every segment level in lambda.

    Args:
        s: Junction signs padded with 0 at both ends (length K+1)
        T: Segment weights (length K)

    Returns:
        beta_j = (s_j - s_{j-1}) / (2 T_j)
    """
    s = np.asarray(s, dtype=float)
    T = np.asarray(T, dtype=float)
    if s.shape[0] != T.shape[0] + 1:
        raise ValueError(f"Expected {T.shape[0] + 1} signs for {T.shape[0]} segments, got {s.shape[0]}")
    return (s[1:] - s[:-1]) / (2.0 * T)


def segment_is_extremum(s_left: int, s_right: int) -> bool:
    """
    A segment is a min or max when the jumps on its two sides point in
    different directions. Boundary segments (one side 0) always count, and so
    does a lone segment covering the whole signal.
    """
    return s_left != s_right or s_left == 0


def delta_g_for_merge(s_left: int, s_mid: int, s_right: int) -> int:
    """
    Change of the extremum count when the junction with sign s_mid merges.

    Args:
        s_left: Sign of the junction left of the merging pair (0 at the signal start)
        s_mid: Sign of the merging junction
        s_right: Sign of the junction right of the merging pair (0 at the signal end)

    Returns:
        Delta g, one of 0, -1, -2
    """
    if s_mid == 0:
        raise PathConsistencyError("A live junction cannot have a zero sign")
    if s_left * s_right != 0:
        return -abs(s_left + s_right)
    return -1 if abs(s_left + s_mid + s_right) < 2 else 0


def _initial_estimates(y: np.ndarray, tau: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Merge estimates of every junction while all segments are single samples."""
    padded = np.concatenate(([0], signs, [0])).astype(float)
    beta = (padded[1:] - padded[:-1]) / (2.0 * tau)
    gamma = beta[:-1] - beta[1:]
    gap = y[1:] - y[:-1]
    with np.errstate(divide='ignore', invalid='ignore'):
        eta = np.where(gamma != 0, gap / gamma, np.inf)
    return np.maximum(eta, 0.0)


def solve_arrays(y: np.ndarray, tau: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve the merge path for raw arrays.

    Args:
        y: Sample values with no two equal neighbours
        tau: Positive weights

    Returns:
        (lambda_junction, dg_junction)
    """
    y = np.asarray(y, dtype=float)
    tau = np.asarray(tau, dtype=float)
    n = y.shape[0]
    if n <= 1:
        return np.zeros(0), np.zeros(0, dtype=np.int64)

    signs = junction_signs(y)
    zero = np.flatnonzero(signs == 0)
    if zero.size:
        raise SignalError(
            f"Equal neighbouring values at index {int(zero[0])}; collapse constant pieces first",
            index=int(zero[0]),
        )

    sign_list: List[int] = signs.tolist()
    S: List[float] = (tau * y).tolist()
    T: List[float] = tau.tolist()
    seg_last = list(range(n))
    first_of = list(range(n))
    alive = [True] * (n - 1)
    gen = [0] * (n - 1)

    def left_sign(first: int) -> int:
        return sign_list[first - 1] if first > 0 else 0

    def right_sign(first: int) -> int:
        last = seg_last[first]
        return sign_list[last] if last < n - 1 else 0

    def slope(first: int) -> float:
        return (right_sign(first) - left_sign(first)) / (2.0 * T[first])

    def estimate(j: int, lam: float) -> float:
        left = first_of[j]
        right = j + 1
        gamma = slope(left) - slope(right)
        if gamma == 0:
            return np.inf
        eta = (S[right] / T[right] - S[left] / T[left]) / gamma
        return eta if eta > lam else lam

    eta0 = _initial_estimates(y, tau, signs)
    heap = [(float(e), j, 0) for j, e in enumerate(eta0.tolist()) if np.isfinite(e)]
    heapq.heapify(heap)

    lambda_junction = np.zeros(n - 1)
    dg_junction = np.zeros(n - 1, dtype=np.int64)
    groups = 0

    while heap:
        lam, j, g = heapq.heappop(heap)
        if not alive[j] or gen[j] != g:
            continue

        threshold = lam + GROUP_RTOL * abs(lam)
        group = [j]
        while heap and heap[0][0] <= threshold:
            _, jj, gg = heapq.heappop(heap)
            if alive[jj] and gen[jj] == gg:
                group.append(jj)
        group.sort()
        groups += 1

        # Merge clusters of contiguous junctions; each cluster becomes one segment.
        # A lone junction takes its delta from the neighbouring signs, a longer
        # cluster compares extremum counts before and after.
        # cluster: [first sample, first junction, size, lone-junction signs, extrema before]
        clusters: List[List[Any]] = []
        for jj in group:
            left = first_of[jj]
            right = jj + 1
            if not clusters or clusters[-1][0] != left:
                clusters.append([left, jj, 0, (left_sign(left), sign_list[jj], right_sign(right)),
                                 int(segment_is_extremum(left_sign(left), right_sign(left)))])
            clusters[-1][2] += 1
            clusters[-1][4] += int(segment_is_extremum(left_sign(right), right_sign(right)))

            right_last = seg_last[right]
            S[left] += S[right]
            T[left] += T[right]
            seg_last[left] = right_last
            first_of[right_last] = left
            alive[jj] = False
            lambda_junction[jj] = lam

        for first, junction, size, signs, before in clusters:
            if size == 1:
                dg_junction[junction] = delta_g_for_merge(*signs)
            else:
                after = int(segment_is_extremum(left_sign(first), right_sign(first)))
                dg_junction[junction] = after - before
        merged_firsts = [cluster[0] for cluster in clusters]

        for first in merged_firsts:
            for jj in (first - 1, seg_last[first]):
                if 0 <= jj < n - 1 and alive[jj]:
                    gen[jj] += 1
                    eta = estimate(jj, lam)
                    if np.isfinite(eta):
                        heapq.heappush(heap, (eta, jj, gen[jj]))

    if any(alive):
        raise PathConsistencyError(f"{sum(alive)} junctions never merged")

    logger.debug("Solved path: n=%d, %d merge groups", n, groups)
    return lambda_junction, dg_junction


def solve_path(ws: WeightedSignal) -> PathResult:
    """
    Compute the full merge path of a collapsed signal.

    Args:
        ws: Signal without constant pieces (see collapse_constant_pieces)

    Returns:
        PathResult with per-junction merge values and extremum deltas
    """
    lambdas, dg = solve_arrays(ws.y, ws.tau)
    return PathResult(lambda_junction=lambdas, dg_junction=dg)


# Convenience function
def solve_values(y: Sequence[float], tau: Sequence[float] = None) -> PathResult:
    """Solve the path of raw values, with unit weights unless tau is given."""
    y = np.asarray(y, dtype=float)
    tau = np.ones_like(y) if tau is None else np.asarray(tau, dtype=float)
    lambdas, dg = solve_arrays(y, tau)
    return PathResult(lambda_junction=lambdas, dg_junction=dg)


if __name__ == "__main__":
    path = solve_values([0.0, 1.0, 0.5])
    print("lambda:", path.lambda_junction)
    print("dg:", path.dg_junction)
