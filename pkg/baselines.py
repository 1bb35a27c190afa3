"""
Baselines Module for TVPath

Reference lambda selectors and the metrics used to compare them:
SURE (needs sigma), AUT (needs sigma), K-fold cross-validation, a MAD
noise estimator, the restoration error against a clean signal and the
exact error-optimal lambda.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from signal_core import WeightedSignal, build_weighted_signal, collapse_constant_pieces
from path_solver import PathResult, solve_path
from restoration import reconstruct

logger = logging.getLogger(__name__)

# Median absolute deviation of a standard normal
MAD_SCALE = 0.6745
# AUT thresholds are stated for a halved quadratic fidelity; the solver objective is unhalved
AUT_FIDELITY_SCALE = 2.0


@dataclass
class SelectorResult:
    """A selected lambda with the method that produced it and its working data."""
    lam: float
    method: str
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"lambda": float(self.lam), "method": self.method, "diagnostics": _plain(self.diagnostics)}


def _plain(value: Any) -> Any:
    """Convert numpy containers and scalars to JSON-friendly values."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def candidate_grid(path: PathResult) -> np.ndarray:
    """
    One lambda per distinct model on the path: 0, the geometric midpoint of
    every pair of consecutive distinct breakpoints, and the largest breakpoint
    (single segment).
    """
    bps = path.distinct_breakpoints()
    if bps.shape[0] == 0:
        return np.zeros(1)
    mids = np.sqrt(bps[:-1] * bps[1:])
    return np.concatenate(([0.0], mids, [bps[-1]]))


def estimate_sigma(y: Sequence[float]) -> float:
    """Noise standard deviation from the median absolute first difference."""
    y = np.asarray(y, dtype=float)
    if y.shape[0] < 2:
        raise ValueError("At least two samples are needed to estimate sigma")
    return float(np.median(np.abs(np.diff(y))) / (MAD_SCALE * math.sqrt(2.0)))


def restoration_error(u_net: Sequence[float], u_star: Sequence[float]) -> float:
    """Mean squared error between the clean signal and a restoration."""
    u_net = np.asarray(u_net, dtype=float)
    u_star = np.asarray(u_star, dtype=float)
    if u_net.shape != u_star.shape:
        raise ValueError(f"Length mismatch: {u_net.shape[0]} clean samples, {u_star.shape[0]} restored")
    return float(np.mean((u_net - u_star) ** 2))


def risk_function(ws: WeightedSignal, path: PathResult, u_net: Sequence[float]) -> Callable[[float], float]:
    """R(lambda) on the original sample grid of ws."""
    u_net = np.asarray(u_net, dtype=float)

    def risk(lam: float) -> float:
        return restoration_error(u_net, reconstruct(ws, path, lam).expand(ws))

    return risk


def compare_selectors(lam_1: float, lam_2: float, risk: Callable[[float], float]) -> float:
    """d = R(lam_1) - R(lam_2)."""
    if lam_1 == lam_2:
        return 0.0
    return risk(lam_1) - risk(lam_2)


def optimal_lambda(ws: WeightedSignal, path: PathResult, u_net: Sequence[float]) -> Tuple[float, float]:
    """
    Exact minimizer of R(lambda) over [0, inf).

    Between consecutive breakpoints every level is affine in lambda, so R is
    a quadratic there and its minimum over the closed interval is explicit.

    Returns:
        (lambda_op, R(lambda_op)); ties go to the smallest lambda
    """
    u_net = np.asarray(u_net, dtype=float)
    bps = path.distinct_breakpoints()
    bounds = np.concatenate(([0.0], bps))
    best_lam, best_risk = 0.0, math.inf
    for k, lo in enumerate(bounds):
        r = reconstruct(ws, path, lo)
        b = ws.expand(np.repeat(r.betas, r.lengths))
        residual = u_net - (r.expand(ws) - lo * b)
        bb = float(np.dot(b, b))
        if k + 1 < bounds.shape[0] and bb > 0:
            hi = bounds[k + 1]
            lam = float(np.clip(np.dot(b, residual) / bb, lo, hi))
        else:
            lam = float(lo)
        value = float(np.mean((residual - lam * b) ** 2))
        if value < best_risk:
            best_lam, best_risk = lam, value
    return best_lam, best_risk


def _uniform_weights(ws: WeightedSignal) -> bool:
    if ws.index_map is None:
        per_sample = ws.tau
    else:
        per_sample = ws.tau / np.diff(ws.index_map)
    return bool(np.allclose(per_sample, per_sample[0], rtol=1e-9, atol=0.0))


def sure_curve(ws: WeightedSignal, path: PathResult, sigma: float,
               candidates: Sequence[float]) -> np.ndarray:
    """SURE(lambda) = |y - u|^2 + 2 sigma^2 K - n sigma^2, unweighted, on the original grid."""
    y = ws.expand(ws.y)
    n = y.shape[0]
    values = []
    for lam in candidates:
        r = reconstruct(ws, path, float(lam))
        residual = y - r.expand(ws)
        values.append(float(np.dot(residual, residual)) + 2.0 * sigma ** 2 * r.K - n * sigma ** 2)
    return np.asarray(values)


def sure_select(ws: WeightedSignal, path: PathResult, sigma: float,
                candidates: Optional[Sequence[float]] = None) -> SelectorResult:
    """
    Minimize Stein's unbiased risk estimate over candidate lambdas.

    Args:
        ws: Collapsed signal
        path: Its PathResult
        sigma: Noise standard deviation
        candidates: Lambdas to try (candidate_grid by default)
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    candidates = candidate_grid(path) if candidates is None else np.sort(np.asarray(candidates, dtype=float))
    if candidates.shape[0] == 0:
        raise ValueError("SURE needs at least one candidate lambda")

    uniform = _uniform_weights(ws)
    if not uniform:
        logger.warning("SURE uses an unweighted fidelity but the sampling is not uniform")
    criterion = sure_curve(ws, path, sigma, candidates)
    best = int(np.argmin(criterion))
    return SelectorResult(
        lam=float(candidates[best]),
        method='sure',
        diagnostics={"sigma": sigma, "candidates": candidates, "criterion": criterion,
                     "uniform_sampling": uniform},
    )


def aut_lambda(sigma: float, n: float) -> float:
    """(sigma / 2) * sqrt(n ln ln n), for the fidelity (1/2)|y - u|^2."""
    return 0.5 * sigma * math.sqrt(n * math.log(math.log(n)))


def aut_select(ws: WeightedSignal, path: PathResult, sigma: float) -> SelectorResult:
    """
    Adaptive universal threshold.

    A first lambda_N from the full length gives a segment count K_hat; the
    threshold is then recomputed for n / K_hat samples. When n / K_hat <= e
    the second step is undefined and lambda_N is returned, flagged.

    Both thresholds are multiplied by AUT_FIDELITY_SCALE to act on the
    sum tau (y - u)^2 + lambda TV objective the path is solved for.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    n = ws.original_length
    if n < 3:
        raise ValueError(f"AUT needs at least 3 samples, got {n}")

    lam_n = AUT_FIDELITY_SCALE * aut_lambda(sigma, n)
    k_hat = reconstruct(ws, path, lam_n).K
    ratio = n / k_hat
    diagnostics = {"sigma": sigma, "lambda_n": lam_n, "k_hat": k_hat, "fallback": False}
    if ratio <= math.e:
        logger.warning("AUT: n/K_hat = %.3g is outside the ln ln domain; using lambda_N", ratio)
        diagnostics["fallback"] = True
        return SelectorResult(lam=lam_n, method='aut', diagnostics=diagnostics)
    return SelectorResult(lam=AUT_FIDELITY_SCALE * aut_lambda(sigma, ratio), method='aut', diagnostics=diagnostics)


def cv_curve(ws: WeightedSignal, k_folds: int, candidates: Sequence[float], seed: int) -> np.ndarray:
    """Fold-summed prediction error of every candidate lambda."""
    n = ws.n
    if k_folds < 2:
        raise ValueError(f"k_folds must be at least 2, got {k_folds}")
    if n < 2 * k_folds:
        raise ValueError(f"{k_folds}-fold cross-validation needs at least {2 * k_folds} samples, got {n}")

    rng = np.random.default_rng(seed)
    folds = np.array_split(rng.permutation(n), k_folds)
    candidates = np.asarray(candidates, dtype=float)
    total = np.zeros(candidates.shape[0])
    for held_out in folds:
        mask = np.ones(n, dtype=bool)
        mask[held_out] = False
        t_train, y_train = ws.t[mask], ws.y[mask]
        t_test, y_test = ws.t[~mask], ws.y[~mask]
        train = collapse_constant_pieces(build_weighted_signal(t_train, y_train))
        train_path = solve_path(train)
        for c, lam in enumerate(candidates):
            fitted = reconstruct(train, train_path, float(lam)).expand(train)
            predicted = np.interp(t_test, t_train, fitted)
            total[c] += float(np.mean((y_test - predicted) ** 2))
    return total


def cv_select(ws: WeightedSignal, k_folds: int = 10, candidates: Optional[Sequence[float]] = None,
              seed: int = 0) -> SelectorResult:
    """
    K-fold cross-validation.

    Folds are a seeded random partition of the samples of ws. Each fold is
    predicted from a fit on the others by linear interpolation between the
    retained sample times, held constant beyond the ends.

    Args:
        ws: Signal whose samples are split (normally the uncollapsed input)
        k_folds: Number of folds, at least 2
        candidates: Lambdas to try; candidate_grid of the full signal by default
        seed: Seed of the fold partition
    """
    if candidates is None:
        candidates = candidate_grid(solve_path(collapse_constant_pieces(ws)))
    candidates = np.sort(np.asarray(candidates, dtype=float))
    if candidates.shape[0] == 0:
        raise ValueError("Cross-validation needs at least one candidate lambda")

    criterion = cv_curve(ws, k_folds, candidates, seed)
    best = int(np.argmin(criterion))
    logger.debug("CV over %d candidates, %d folds: lambda=%.6g", candidates.shape[0], k_folds, candidates[best])
    return SelectorResult(
        lam=float(candidates[best]),
        method='cv',
        diagnostics={"k_folds": k_folds, "seed": seed, "candidates": candidates, "criterion": criterion},
    )


def criterion_rows(result: SelectorResult) -> List[Tuple[float, float]]:
    """(lambda, criterion) pairs of a selector that evaluated a criterion curve."""
    candidates = result.diagnostics.get("candidates")
    criterion = result.diagnostics.get("criterion")
    if candidates is None or criterion is None:
        return []
    return [(float(l), float(c)) for l, c in zip(candidates, criterion)]


if __name__ == "__main__":
    rng = np.random.default_rng(1)
    clean = np.repeat([0.0, 3.0, 1.0, 4.0], 50)
    noisy = clean + rng.normal(0, 1, clean.shape[0])
    ws = collapse_constant_pieces(build_weighted_signal(np.arange(clean.shape[0]), noisy))
    path = solve_path(ws)
    sigma_hat = estimate_sigma(noisy)
    print(f"sigma_hat={sigma_hat:.3f}")
    for result in (sure_select(ws, path, 1.0), aut_select(ws, path, 1.0), cv_select(ws, 5, seed=0)):
        print(result.method, result.lam)
    print("optimal:", optimal_lambda(ws, path, clean))
