"""
Simulation Benchmark Module for TVPath

Test-signal generators, noise models and the experiment runners used to
compare lambda selectors (mean restoration error, distance to the optimal
lambda) and to time the online solver against offline recomputation.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import math
import time

import numpy as np
import pandas as pd

from signal_core import build_weighted_signal, collapse_constant_pieces, read_signal_frame
from path_solver import solve_path
from lambda_select import build_g_ladder, select_lambda
from baselines import (aut_select, cv_select, estimate_sigma, optimal_lambda, risk_function,
                       sure_select)
from stream_solver import LambdaHatPolicy, StreamState

logger = logging.getLogger(__name__)

# Jump positions and heights of the standard blocks waveform
BLOCKS_JUMPS = (0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81)
BLOCKS_HEIGHTS = (4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2)
# Blocks are scaled so that the signal-to-noise ratio against unit noise is this many dB
BLOCKS_SNR_DB = 16.91

SIGNALS = ('blocks', 'periodic-pwc', 'periodic-pwl', 'nonperiodic', 'csv')
NOISES = ('gaussian', 'gaussian+uniform')
SELECTORS = ('ours', 'aut', 'sure', 'cv')
MODES = ('experiment', 'timing', 'both')


@dataclass
class ExperimentConfig:
    """
    Everything a benchmark run needs. Built from CLI flags or a key = value
    file (services.report_store.load_config).
    """
    mode: str = 'experiment'
    signal: str = 'blocks'
    n: int = 999
    noise: str = 'gaussian'
    sigma: float = 1.0
    uniform_half_width: float = 0.0
    replications: int = 100
    seed: int = 0
    selectors: Tuple[str, ...] = ('ours', 'aut', 'sure')
    q_values: Tuple[float, ...] = (0.5, 0.75, 1.0)
    period: int = 50
    levels: Tuple[float, ...] = (0.0, 4.0)
    csv_path: Optional[str] = None
    lambda_grid: str = 'exact'
    folds: int = 10
    workers: int = 1
    timing_sizes: Tuple[int, ...] = (50, 100, 150, 200, 250, 300, 350, 400, 450, 500)
    timing_lambda_hat: Tuple[str, ...] = ('ours',)
    output_dir: str = 'reports'
    name: str = 'experiment'

    def validate(self) -> 'ExperimentConfig':
        if self.mode not in MODES:
            raise ValueError(f"Unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.signal not in SIGNALS:
            raise ValueError(f"Unknown signal {self.signal!r}; expected one of {', '.join(SIGNALS)}")
        if self.noise not in NOISES:
            raise ValueError(f"Unknown noise {self.noise!r}; expected one of {', '.join(NOISES)}")
        if self.signal == 'csv' and not self.csv_path:
            raise ValueError("signal = csv needs csv_path")
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if self.replications < 1:
            raise ValueError(f"replications must be at least 1, got {self.replications}")
        if self.sigma < 0 or self.uniform_half_width < 0:
            raise ValueError("Noise parameters must be non-negative")
        unknown = [s for s in self.selectors if s not in SELECTORS]
        if unknown:
            raise ValueError(f"Unknown selectors: {', '.join(unknown)}")
        if self.period < 2:
            raise ValueError(f"period must be at least 2, got {self.period}")
        if len(self.levels) != 2:
            raise ValueError("levels takes exactly two values")
        parse_lambda_grid(self.lambda_grid)
        for policy in self.timing_lambda_hat:
            LambdaHatPolicy.parse(policy)
        return self

    @property
    def noise_std(self) -> float:
        return math.sqrt(self.sigma ** 2 + self.uniform_half_width ** 2 / 3.0)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}


# ----------------------------------------------------------------------
# Generators

def gen_blocks(n: int) -> np.ndarray:
    """
    The 11-jump blocks waveform sampled at the n midpoints (i + 0.5) / n of
    [0, 1], scaled so that 10 log10(mean(u^2)) equals BLOCKS_SNR_DB.
    """
    x = (np.arange(n) + 0.5) / n
    u = np.zeros(n)
    for position, height in zip(BLOCKS_JUMPS, BLOCKS_HEIGHTS):
        u += height * (x >= position)
    power = float(np.mean(u ** 2))
    target = 10 ** (BLOCKS_SNR_DB / 10.0)
    return u * math.sqrt(target / power)


def gen_periodic(kind: str, n: int, period: int = 50, levels: Sequence[float] = (0.0, 4.0)) -> np.ndarray:
    """
    Periodic test signals.

    'pwc' alternates between the two levels every half period; 'pwl' is a
    triangle wave rising from the low to the high level over half a period.
    """
    low, high = float(levels[0]), float(levels[1])
    phase = (np.arange(n) % period) / period
    if kind == 'pwc':
        return np.where(phase < 0.5, low, high)
    if kind == 'pwl':
        return low + (high - low) * (1.0 - np.abs(2.0 * phase - 1.0))
    raise ValueError(f"Unknown periodic kind {kind!r}; expected pwc or pwl")


def gen_nonperiodic(n: int) -> np.ndarray:
    """Deterministic mix of steps, a ramp and a slow bump over [0, 1)."""
    x = np.arange(n) / max(n, 1)
    u = 3.0 * (x >= 0.12) - 5.0 * (x >= 0.30)
    u += 6.0 * np.clip((x - 0.42) / 0.16, 0.0, 1.0)
    u -= 4.0 * (x >= 0.74)
    u += 2.5 * np.sin(np.pi * np.clip((x - 0.80) / 0.20, 0.0, 1.0))
    return u


def clean_signal(cfg: ExperimentConfig) -> np.ndarray:
    """The noiseless signal described by cfg."""
    if cfg.signal == 'blocks':
        return gen_blocks(cfg.n)
    if cfg.signal == 'periodic-pwc':
        return gen_periodic('pwc', cfg.n, cfg.period, cfg.levels)
    if cfg.signal == 'periodic-pwl':
        return gen_periodic('pwl', cfg.n, cfg.period, cfg.levels)
    if cfg.signal == 'nonperiodic':
        return gen_nonperiodic(cfg.n)
    _, y = read_signal_frame(cfg.csv_path)
    return y


def add_noise(u: np.ndarray, rng: np.random.Generator, sigma: float,
              uniform_half_width: float = 0.0) -> np.ndarray:
    """u + N(0, sigma^2) + U[-a, a] (the uniform part only when a > 0)."""
    noisy = u + rng.normal(0.0, sigma, u.shape[0]) if sigma > 0 else u.astype(float)
    if uniform_half_width > 0:
        noisy = noisy + rng.uniform(-uniform_half_width, uniform_half_width, u.shape[0])
    return noisy


def parse_lambda_grid(policy: str) -> int:
    """'exact' -> 0, 'grid:N' -> N (geometric grid of N points)."""
    if policy == 'exact':
        return 0
    if policy.startswith('grid:'):
        try:
            points = int(policy.split(':', 1)[1])
        except ValueError:
            points = 0
        if points >= 2:
            return points
    raise ValueError(f"Invalid lambda_grid {policy!r}; expected exact or grid:N with N >= 2")


# ----------------------------------------------------------------------
# Experiment runner

@dataclass
class ExperimentReport:
    """Per-run rows, per-selector summary and one g curve for figures."""
    config: ExperimentConfig
    runs: pd.DataFrame
    summary: pd.DataFrame
    gcurve: pd.DataFrame = field(default_factory=pd.DataFrame)
    timing: Optional[pd.DataFrame] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "summary": self.summary.to_dict(orient='records'),
        }


def _optimum(ws, path, u_net, grid_points: int, risk) -> Tuple[float, float]:
    if grid_points == 0:
        lam_op, _ = optimal_lambda(ws, path, u_net)
        return lam_op, risk(lam_op)
    top = path.max_lambda
    if top <= 0:
        return 0.0, risk(0.0)
    grid = np.concatenate(([0.0], np.geomspace(top * 1e-4, top, grid_points)))
    values = [risk(float(lam)) for lam in grid]
    best = int(np.argmin(values))
    return float(grid[best]), float(values[best])


def run_replication(cfg: ExperimentConfig, u_net: np.ndarray, seed: np.random.SeedSequence,
                    replication: int, keep_gcurve: bool = False) -> Tuple[List[Dict[str, Any]], Optional[pd.DataFrame]]:
    """
    One noisy realization evaluated by every selector in cfg.

    Returns:
        (rows, gcurve) where gcurve is only built when keep_gcurve is set
    """
    rng = np.random.default_rng(seed)
    n = u_net.shape[0]
    y = add_noise(u_net, rng, cfg.sigma, cfg.uniform_half_width)
    raw = build_weighted_signal(np.arange(n, dtype=float), y)
    ws = collapse_constant_pieces(raw)

    started = time.perf_counter()
    path = solve_path(ws)
    solve_seconds = time.perf_counter() - started

    risk = risk_function(ws, path, u_net)
    lam_op, risk_op = _optimum(ws, path, u_net, parse_lambda_grid(cfg.lambda_grid), risk)
    rows: List[Dict[str, Any]] = []

    def record(selector: str, lam: float, seconds: float, **extra: Any) -> None:
        value = risk(lam)
        row = {"replication": replication, "selector": selector, "lambda": lam,
               "risk100": 100.0 * value, "d": value - risk_op, "seconds": seconds}
        row.update(extra)
        rows.append(row)

    record('min', lam_op, 0.0)
    gcurve = None
    ladder = build_g_ladder(path)
    sigma_hat = estimate_sigma(y) if n >= 2 else 0.0
    known_sigma = cfg.noise_std

    for selector in cfg.selectors:
        if selector == 'ours':
            if ladder.size == 0:
                continue
            started = time.perf_counter()
            report = select_lambda(ladder)
            record('ours_auto', report.lambda_ours, time.perf_counter() - started + solve_seconds,
                   q=report.q, lambda_trans=report.lambda_trans)
            if keep_gcurve:
                gcurve = pd.DataFrame({"lambda": report.ladder.breakpoints,
                                       "g": report.ladder.g_values[1:],
                                       "d2g": report.ladder.d2g})
            for log_q in cfg.q_values:
                fixed = select_lambda(ladder, q=10 ** log_q)
                record(f"ours_q{log_q:g}", fixed.lambda_ours, solve_seconds, q=fixed.q,
                       lambda_trans=fixed.lambda_trans)
        elif selector in ('aut', 'sure'):
            run = aut_select if selector == 'aut' else sure_select
            for tag, sigma in ((selector, known_sigma), (f"{selector}_hat", sigma_hat)):
                if not sigma > 0:
                    logger.warning("Skipping %s: sigma is %g", tag, sigma)
                    continue
                started = time.perf_counter()
                result = run(ws, path, sigma)
                record(tag, result.lam, time.perf_counter() - started + solve_seconds, sigma=sigma)
        elif selector == 'cv':
            if n < 2 * cfg.folds:
                logger.warning("Skipping cv: %d samples for %d folds", n, cfg.folds)
                continue
            cv_seed = int(seed.generate_state(1)[0])
            started = time.perf_counter()
            result = cv_select(raw, cfg.folds, seed=cv_seed)
            record('cv', result.lam, time.perf_counter() - started)
    return rows, gcurve


def _replication_job(args) -> Tuple[List[Dict[str, Any]], Optional[pd.DataFrame]]:
    cfg, u_net, seed, replication = args
    return run_replication(cfg, u_net, seed, replication, keep_gcurve=(replication == 0))


def summarize(runs: pd.DataFrame) -> pd.DataFrame:
    """Mean 100 R, quartiles of d and mean time per selector, in first-seen order."""
    order = list(dict.fromkeys(runs["selector"]))
    grouped = runs.groupby("selector", sort=False)
    summary = pd.DataFrame({
        "runs": grouped.size(),
        "mean_risk100": grouped["risk100"].mean(),
        "std_risk100": grouped["risk100"].std(ddof=0),
        "mean_lambda": grouped["lambda"].mean(),
        "d_q25": grouped["d"].quantile(0.25),
        "d_q50": grouped["d"].quantile(0.50),
        "d_q75": grouped["d"].quantile(0.75),
        "mean_seconds": grouped["seconds"].mean(),
    })
    return summary.loc[order].reset_index()


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """
    Run cfg.replications noisy realizations of the configured signal.

    Every replication draws from its own stream spawned from cfg.seed, so the
    result does not depend on cfg.workers.
    """
    cfg.validate()
    u_net = clean_signal(cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    jobs = [(cfg, u_net, seed, i) for i, seed in enumerate(seeds)]
    logger.info("Running %d replications of %s (n=%d) with %s",
                cfg.replications, cfg.signal, u_net.shape[0], ', '.join(cfg.selectors))

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_replication_job, jobs))
    else:
        results = [_replication_job(job) for job in jobs]

    rows = [row for replication_rows, _ in results for row in replication_rows]
    runs = pd.DataFrame(rows)
    gcurve = results[0][1] if results[0][1] is not None else pd.DataFrame(columns=["lambda", "g", "d2g"])
    return ExperimentReport(config=cfg, runs=runs, summary=summarize(runs), gcurve=gcurve)


# ----------------------------------------------------------------------
# Timing runner

def _offline_step(t: np.ndarray, y: np.ndarray) -> None:
    ws = collapse_constant_pieces(build_weighted_signal(t, y))
    path = solve_path(ws)
    if ws.n >= 2:
        select_lambda(build_g_ladder(path))


def run_timing(cfg: ExperimentConfig) -> pd.DataFrame:
    """
    Per-push time of the online solver against a full offline solve, at every
    length in cfg.timing_sizes, averaged over replications.

    Returns:
        DataFrame with columns policy, n, seconds (policy 'offline' included)
    """
    cfg.validate()
    sizes = sorted(set(int(s) for s in cfg.timing_sizes))
    length = max(sizes)
    base = clean_signal(ExperimentConfig(**{**asdict(cfg), "n": length}))
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    samples: Dict[Tuple[str, int], List[float]] = {}

    for seed in seeds:
        rng = np.random.default_rng(seed)
        y = add_noise(base, rng, cfg.sigma, cfg.uniform_half_width)
        t = np.arange(length, dtype=float)
        for text in cfg.timing_lambda_hat:
            policy = LambdaHatPolicy.parse(text)
            state = StreamState(policy=policy)
            for i in range(length):
                started = time.perf_counter()
                state.push(t[i], y[i])
                elapsed = time.perf_counter() - started
                if i + 1 in sizes:
                    samples.setdefault((str(policy), i + 1), []).append(elapsed)
        for size in sizes:
            started = time.perf_counter()
            _offline_step(t[:size], y[:size])
            samples.setdefault(('offline', size), []).append(time.perf_counter() - started)

    rows = [{"policy": policy, "n": size, "seconds": float(np.mean(values))}
            for (policy, size), values in samples.items()]
    logger.info("Timed %d sizes over %d replications", len(sizes), cfg.replications)
    return pd.DataFrame(rows).sort_values(["policy", "n"]).reset_index(drop=True)


def run_configured(cfg: ExperimentConfig) -> ExperimentReport:
    """Run whatever cfg.mode asks for: the selector experiment, the timing study or both."""
    cfg.validate()
    if cfg.mode == 'timing':
        report = ExperimentReport(config=cfg, runs=pd.DataFrame(), summary=pd.DataFrame())
    else:
        report = run_experiment(cfg)
    if cfg.mode in ('timing', 'both'):
        report.timing = run_timing(cfg)
    return report


if __name__ == "__main__":
    demo = ExperimentConfig(replications=2, n=300, name='demo')
    report = run_experiment(demo)
    print(report.summary.to_string(index=False))
