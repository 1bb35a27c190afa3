"""
Signal Core Module for TVPath

Holds the solver input: sample times, sample values and the per-sample
weights derived from the sampling periods. Also provides constant-piece
collapsing (exactly equal consecutive samples are fused into one weighted
sample) and CSV ingestion of `t,y` files.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union
import csv
import logging
import re

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

ArrayLike = Union[Sequence[float], np.ndarray]


class SignalError(ValueError):
    """Invalid signal input. Carries the offending sample index or CSV row when known."""

    def __init__(self, message: str, index: Optional[int] = None, row: Optional[int] = None):
        super().__init__(message)
        self.index = index
        self.row = row


def _frozen(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class WeightedSignal:
    """
    Sampled signal with per-sample weights.

    Attributes:
        t: Strictly increasing sample times
        y: Sample values
        tau: Positive weights, tau_i = t_i - t_{i-1} and tau_1 = t_2 - t_1
        index_map: Run boundaries into the original samples after collapsing:
            collapsed sample k covers original samples [index_map[k], index_map[k+1]).
            None when the signal was never collapsed.
    """
    t: np.ndarray
    y: np.ndarray
    tau: np.ndarray
    index_map: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def original_length(self) -> int:
        if self.index_map is None:
            return self.n
        return int(self.index_map[-1])

    def weighted_sum(self) -> float:
        """Sum of tau_i * y_i."""
        return float(np.dot(self.tau, self.y))

    def total_weight(self) -> float:
        return float(np.sum(self.tau))

    def weighted_mean(self) -> float:
        return self.weighted_sum() / self.total_weight()

    def expand(self, values: ArrayLike) -> np.ndarray:
        """
        Expand per-sample values of this (possibly collapsed) signal back to the
        original sample grid, repeating each value over its collapsed run.
        """
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.n:
            raise SignalError(f"Expected {self.n} values, got {values.shape[0]}")
        if self.index_map is None:
            return values.copy()
        return np.repeat(values, np.diff(self.index_map))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedSignal):
            return NotImplemented
        same_map = (
            (self.index_map is None and other.index_map is None)
            or (self.index_map is not None and other.index_map is not None
                and np.array_equal(self.index_map, other.index_map))
        )
        return (same_map and np.array_equal(self.t, other.t)
                and np.array_equal(self.y, other.y)
                and np.array_equal(self.tau, other.tau))

    def __hash__(self) -> int:
        return hash((self.n, self.y.tobytes(), self.tau.tobytes()))


def compute_tau(t: ArrayLike) -> np.ndarray:
    """
    Derive sample weights from sample times.

    tau_i = t_i - t_{i-1} for i >= 2 and tau_1 = t_2 - t_1. A single sample
    gets tau = (1,) by convention.
    """
    t = np.asarray(t, dtype=float)
    if t.shape[0] == 1:
        return np.ones(1)
    steps = np.diff(t)
    return np.concatenate(([steps[0]], steps))


def build_weighted_signal(t: ArrayLike, y: ArrayLike) -> WeightedSignal:
    """
    Build a validated WeightedSignal from times and values.

    Args:
        t: Sample times, strictly increasing
        y: Sample values

    Returns:
        WeightedSignal with tau derived from t

    Raises:
        SignalError: on empty input, length mismatch, non-finite values or
            non-increasing times (index of the first violation attached)
    """
    t = np.array(t, dtype=float).reshape(-1)
    y = np.array(y, dtype=float).reshape(-1)

    if t.shape[0] != y.shape[0]:
        raise SignalError(f"Length mismatch: {t.shape[0]} times for {y.shape[0]} values")
    if t.shape[0] == 0:
        raise SignalError("Signal must contain at least one sample")

    bad = np.flatnonzero(~np.isfinite(t) | ~np.isfinite(y))
    if bad.size:
        raise SignalError(f"Non-finite sample at index {int(bad[0])}", index=int(bad[0]))

    not_increasing = np.flatnonzero(np.diff(t) <= 0)
    if not_increasing.size:
        index = int(not_increasing[0]) + 1
        raise SignalError(
            f"Times must be strictly increasing: t[{index}]={t[index]!r} <= t[{index - 1}]={t[index - 1]!r}",
            index=index,
        )

    return WeightedSignal(t=_frozen(t), y=_frozen(y), tau=_frozen(compute_tau(t)))


def from_weights(y: ArrayLike, tau: ArrayLike) -> WeightedSignal:
    """
    Build a WeightedSignal directly from values and weights.

    Times are the cumulative weights shifted so that t_1 = 0; the weights are
    kept exactly as given (including tau_1, which need not equal tau_2).
    """
    y = np.array(y, dtype=float).reshape(-1)
    tau = np.array(tau, dtype=float).reshape(-1)
    if y.shape[0] != tau.shape[0]:
        raise SignalError(f"Length mismatch: {tau.shape[0]} weights for {y.shape[0]} values")
    if y.shape[0] == 0:
        raise SignalError("Signal must contain at least one sample")
    if np.any(~np.isfinite(tau)) or np.any(tau <= 0):
        index = int(np.flatnonzero(~np.isfinite(tau) | (tau <= 0))[0])
        raise SignalError(f"Weights must be positive, got tau[{index}]={tau[index]!r}", index=index)
    if np.any(~np.isfinite(y)):
        index = int(np.flatnonzero(~np.isfinite(y))[0])
        raise SignalError(f"Non-finite sample at index {index}", index=index)
    t = np.concatenate(([0.0], np.cumsum(tau[1:])))
    return WeightedSignal(t=_frozen(t), y=_frozen(y), tau=_frozen(tau))


def constant_runs(y: np.ndarray) -> np.ndarray:
    """Start indices of maximal runs of exactly equal consecutive values, plus len(y)."""
    if y.shape[0] == 0:
        return np.zeros(1, dtype=np.int64)
    changes = np.flatnonzero(y[1:] != y[:-1]) + 1
    return np.concatenate(([0], changes, [y.shape[0]])).astype(np.int64)


def collapse_constant_pieces(ws: WeightedSignal) -> WeightedSignal:
    """
    Replace every maximal run of exactly equal consecutive values by one
    sample carrying the summed weight.

    The collapsed sample keeps the time of the run's first sample. index_map
    records the run boundaries on the original grid so that restorations can
    be expanded back; collapsing an already collapsed signal composes maps.
    """
    starts = constant_runs(ws.y)
    if starts.shape[0] - 1 == ws.n:
        if ws.index_map is not None:
            return ws
        return WeightedSignal(t=ws.t, y=ws.y, tau=ws.tau,
                              index_map=_frozen(np.arange(ws.n + 1, dtype=np.int64)))

    tau = np.add.reduceat(ws.tau, starts[:-1])
    y = ws.y[starts[:-1]].copy()
    t = ws.t[starts[:-1]].copy()

    if ws.index_map is None:
        index_map = starts.copy()
    else:
        index_map = ws.index_map[starts]

    logger.debug("Collapsed %d samples into %d", ws.n, y.shape[0])
    return WeightedSignal(t=_frozen(t), y=_frozen(y), tau=_frozen(tau),
                          index_map=_frozen(np.asarray(index_map, dtype=np.int64)))


def _parse_rows(frame: pd.DataFrame, first_row: int) -> Tuple[np.ndarray, np.ndarray]:
    """Convert a two-column string frame to floats, rejecting bad rows with their 1-based row number."""
    values = frame.apply(lambda col: pd.to_numeric(col.astype(str).str.strip(), errors='coerce'))
    t = values.iloc[:, 0].to_numpy(dtype=float)
    y = values.iloc[:, 1].to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(t) | ~np.isfinite(y))
    if bad.size:
        row = first_row + int(bad[0])
        raw = ','.join(str(v) for v in frame.iloc[int(bad[0])].tolist())
        raise SignalError(f"Row {row}: non-numeric or non-finite value ({raw})", row=row)
    return t, y


def read_signal_frame(source) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read a `t,y` table from a path or text stream.

    The separator is sniffed from the first line; a header is accepted when
    the first row is not numeric. Blank lines are skipped and do not count
    as rows. Rows are kept in file order.

    Returns:
        (t, y) float arrays
    """
    try:
        frame = pd.read_csv(source, sep=None, engine='python', header=None, dtype=str,
                            skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        return np.zeros(0), np.zeros(0)
    except (pd.errors.ParserError, csv.Error) as e:
        match = re.search(r"line (\d+)", str(e))
        row = int(match.group(1)) if match else None
        raise SignalError(f"Row {row}: malformed CSV line ({e})" if row else f"Malformed CSV: {e}", row=row)

    if frame.empty:
        return np.zeros(0), np.zeros(0)
    if frame.shape[1] < 2:
        raise SignalError(f"Row 1: expected two columns t,y, got {frame.shape[1]}", row=1)

    frame = frame.iloc[:, :2]
    first_row = 1
    header = pd.to_numeric(frame.iloc[0].astype(str).str.strip(), errors='coerce')
    if header.isna().all():
        frame = frame.iloc[1:].reset_index(drop=True)
        first_row = 2

    if frame.empty:
        return np.zeros(0), np.zeros(0)
    return _parse_rows(frame, first_row)


def read_signal_csv(source) -> WeightedSignal:
    """Read a `t,y` CSV file into a WeightedSignal (uncollapsed)."""
    t, y = read_signal_frame(source)
    return build_weighted_signal(t, y)


def prepare_signal(t: ArrayLike, y: ArrayLike) -> WeightedSignal:
    """Build and collapse in one step, the usual entry point before solving."""
    return collapse_constant_pieces(build_weighted_signal(t, y))


if __name__ == "__main__":
    demo = build_weighted_signal([0, 1, 3, 3.5], [1.0, 1.0, 2.0, 0.5])
    print("tau:", demo.tau)
    collapsed = collapse_constant_pieces(demo)
    print("collapsed y:", collapsed.y, "tau:", collapsed.tau, "map:", collapsed.index_map)
