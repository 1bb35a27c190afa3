"""
Oracle Module for TVPath

Brute-force minimizer of the weighted TV denoising objective, independent
of the merge path. It works on the dual problem: u = y - D^T p / (2 tau)
with p boxed in [-lambda, lambda]^(n-1), solved by projected coordinate
descent. Every coordinate step is a closed-form clip. Iterates are
periodically polished by guessing the segment structure from the dual and
certifying it against the first-order conditions.

Test support only; not meant for large n.
"""

from typing import List, Optional, Tuple
import logging

import numpy as np

from signal_core import WeightedSignal

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
POLISH_EVERY = 25
# Thresholds tried when guessing which junctions are cuts
POLISH_THRESHOLDS = (1e-3, 1e-6, 1e-9)


class NonConvergenceError(RuntimeError):
    """Coordinate descent hit its iteration cap."""
    pass


def full_merge_lambda(ws: WeightedSignal) -> float:
    """Smallest lambda at which the weighted mean is the optimal restoration."""
    if ws.n <= 1:
        return 0.0
    mean = ws.weighted_mean()
    p = np.cumsum(2.0 * ws.tau * (mean - ws.y))[:-1]
    return float(np.max(np.abs(p)))


def _certify(ws: WeightedSignal, lam: float, cuts: np.ndarray, signs: np.ndarray) -> Optional[np.ndarray]:
    """Exact restoration for a guessed cut set, or None if the guess is not optimal."""
    starts = np.concatenate(([0], cuts + 1)).astype(np.int64)
    T = np.add.reduceat(ws.tau, starts)
    S = np.add.reduceat(ws.tau * ws.y, starts)
    padded = np.concatenate(([0.0], signs, [0.0]))
    levels = S / T + lam * (padded[1:] - padded[:-1]) / (2.0 * T)

    if np.any(np.sign(np.diff(levels)) != signs):
        return None

    lengths = np.diff(np.concatenate((starts, [ws.n])))
    u = np.repeat(levels, lengths)
    p = np.cumsum(2.0 * ws.tau * (u - ws.y))[:-1]
    if np.any(np.abs(p) > lam * (1.0 + 1e-9) + 1e-12):
        return None
    return u


def _polish(ws: WeightedSignal, lam: float, p: np.ndarray, u: np.ndarray) -> Optional[np.ndarray]:
    candidates: List[Tuple[np.ndarray, np.ndarray]] = []
    jumps = np.diff(u)
    for threshold in POLISH_THRESHOLDS:
        cuts = np.flatnonzero(np.abs(p) >= lam * (1.0 - threshold))
        candidates.append((cuts, np.sign(p[cuts])))
        scale = threshold * (1.0 + float(np.max(np.abs(u))))
        cuts = np.flatnonzero(np.abs(jumps) > scale)
        candidates.append((cuts, np.sign(jumps[cuts])))
    for cuts, signs in candidates:
        u_exact = _certify(ws, lam, cuts, signs)
        if u_exact is not None:
            return u_exact
    return None


def oracle_tv(ws: WeightedSignal, lam: float, tol: float = DEFAULT_TOL,
              max_updates: Optional[int] = None) -> np.ndarray:
    """
    Minimize sum tau_i (y_i - u_i)^2 + lam * sum |u_{i+1} - u_i| directly.

    Args:
        ws: Signal (collapsed or not)
        lam: Non-negative regularization weight
        tol: Stop once a full sweep moves u by less than tol (relative to max |y|)
        max_updates: Cap on coordinate updates, 10^6 * n by default

    Returns:
        The minimizer u

    Raises:
        NonConvergenceError: when the cap is reached
    """
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam!r}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol!r}")

    y = np.asarray(ws.y, dtype=float)
    n = y.shape[0]
    if lam == 0 or n == 1:
        return y.copy()
    if lam >= full_merge_lambda(ws):
        return np.full(n, ws.weighted_mean())

    inv = 1.0 / (2.0 * np.asarray(ws.tau, dtype=float))
    h = inv[:-1] + inv[1:]
    p = np.zeros(n - 1)
    u = y.copy()
    blocks = (np.arange(0, n - 1, 2), np.arange(1, n - 1, 2))
    scale = 1.0 + float(np.max(np.abs(y)))

    if max_updates is None:
        max_updates = 10 ** 6 * n
    max_sweeps = max(1, max_updates // (n - 1))

    for sweep in range(max_sweeps):
        change = 0.0
        for idx in blocks:
            if idx.size == 0:
                continue
            new = np.clip(p[idx] + (u[idx + 1] - u[idx]) / h[idx], -lam, lam)
            step = new - p[idx]
            p[idx] = new
            u[idx] += step * inv[idx]
            u[idx + 1] -= step * inv[idx + 1]
            change = max(change, float(np.max(np.abs(step) * h[idx])))

        if sweep % POLISH_EVERY == POLISH_EVERY - 1:
            exact = _polish(ws, lam, p, u)
            if exact is not None:
                logger.debug("Oracle certified after %d sweeps (n=%d, lambda=%.6g)", sweep + 1, n, lam)
                return exact
        if change < tol * scale:
            exact = _polish(ws, lam, p, u)
            return exact if exact is not None else u

    raise NonConvergenceError(
        f"Coordinate descent did not converge in {max_updates} updates (n={n}, lambda={lam!r})"
    )


def segment_count(u: np.ndarray, count_tol: float = 1e-8) -> int:
    """Segments of u, treating jumps not larger than count_tol as flat."""
    return 1 + int(np.sum(np.abs(np.diff(u)) > count_tol))


def oracle_breakpoints(ws: WeightedSignal, grid_density: int = 20, rtol: float = 1e-6,
                       count_tol: float = 1e-8) -> np.ndarray:
    """
    Locate the lambdas where the segment count of the oracle minimizer changes.

    A geometric grid (grid_density points per decade) is swept up to the full
    merge lambda; every grid interval showing a change is bisected in log
    scale until its relative width is below rtol.

    Returns:
        Sorted approximate breakpoints
    """
    if ws.n <= 1:
        return np.zeros(0)
    top = full_merge_lambda(ws)

    def count(lam: float) -> int:
        return segment_count(oracle_tv(ws, lam), count_tol)

    bottom = top * 1e-6
    while count(bottom) < ws.n and bottom > top * 1e-15:
        bottom /= 1e3

    decades = np.log10(top / bottom)
    points = max(2, int(np.ceil(decades * grid_density)) + 1)
    grid = np.geomspace(bottom, top * (1.0 + 1e-9), points)
    counts = [count(float(lam)) for lam in grid]

    found: List[float] = []

    def bisect(lo: float, hi: float, k_lo: int, k_hi: int) -> None:
        if k_lo == k_hi:
            return
        if hi / lo - 1.0 <= rtol:
            found.append(float(np.sqrt(lo * hi)))
            return
        mid = float(np.sqrt(lo * hi))
        k_mid = count(mid)
        bisect(lo, mid, k_lo, k_mid)
        bisect(mid, hi, k_mid, k_hi)

    for i in range(points - 1):
        bisect(float(grid[i]), float(grid[i + 1]), counts[i], counts[i + 1])

    return np.asarray(sorted(found))


if __name__ == "__main__":
    from signal_core import from_weights

    ws = from_weights([0.0, 1.0, 0.5], [1.0, 1.0, 1.0])
    print("u(0.5):", oracle_tv(ws, 0.5))
    print("breakpoints:", oracle_breakpoints(ws))
