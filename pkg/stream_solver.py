"""
Stream Solver Module for TVPath

Online maintenance of the merge path as samples arrive. The restoration at
a cutting point lambda_hat tells which trailing part of the signal a new
sample can affect. For each push the path is reassembled from three parts:
  - merges at or below lambda_hat before that part are kept as they are
  - merges at or below lambda_hat inside it come from solving the part alone,
    prefixed with a virtual anchor point that pins its left boundary
  - merges above lambda_hat come from solving the segment means of the new
    restoration at lambda_hat
The result always equals an offline solve of the whole signal; when a
consistency check fails the push falls back to one.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional
import logging

import numpy as np

from signal_core import SignalError, WeightedSignal
from path_solver import PathResult, empty_path, solve_arrays
from restoration import Restoration, reconstruct
from lambda_select import (GLadder, SelectionReport, auto_q, build_g_ladder, merge_g_ladder, q_steps,
                           select_lambda)

logger = logging.getLogger(__name__)

# Below this many (collapsed) samples every push re-solves offline
BOOTSTRAP_N = 10
# Offset of the virtual anchor merge above lambda_hat: max(ABS, REL * lambda_hat)
EPS_LAMBDA_ABS = 1e-9
EPS_LAMBDA_REL = 1e-9

POLICIES = ('ours', '2ours', 'fixed')


@dataclass(frozen=True)
class LambdaHatPolicy:
    """
    How the cutting point follows the data.

    'ours' uses the selected lambda of the previous step, '2ours' twice
    that, 'fixed' a constant value.
    """
    kind: str = 'ours'
    value: float = 0.0

    @classmethod
    def parse(cls, text: str) -> 'LambdaHatPolicy':
        """Parse 'ours', '2ours' or 'fixed:X'."""
        text = text.strip()
        if text in ('ours', '2ours'):
            return cls(kind=text)
        if text.startswith('fixed:'):
            try:
                value = float(text.split(':', 1)[1])
            except ValueError:
                raise ValueError(f"Invalid fixed lambda_hat policy {text!r}")
            if not value > 0 or not np.isfinite(value):
                raise ValueError(f"Fixed lambda_hat must be positive, got {value!r}")
            return cls(kind='fixed', value=value)
        raise ValueError(f"Unknown lambda_hat policy {text!r}; expected ours, 2ours or fixed:X")

    def apply(self, lambda_ours: Optional[float]) -> Optional[float]:
        if self.kind == 'fixed':
            return self.value
        if lambda_ours is None:
            return None
        return 2.0 * lambda_ours if self.kind == '2ours' else lambda_ours

    def __str__(self) -> str:
        return f"fixed:{self.value:g}" if self.kind == 'fixed' else self.kind


@dataclass(frozen=True, eq=False)
class VirtualSegment:
    """
    Trailing part of the signal prefixed with an anchor point.

    The anchor sits at v - (lambda_hat + eps) / (2 s) with unit weight, so on
    its own it would reach the boundary level v at lambda_hat + eps.
    """
    y_plus: np.ndarray
    tau_plus: np.ndarray
    start: int
    anchor_sign: int


@dataclass
class PushReport:
    """What a push did. mode is one of first, bootstrap, collapsed, online, fallback, offline."""
    n: int
    mode: str
    start: int = 0
    suffix_size: int = 0
    coarse_size: int = 0


def last_blocking_segment(levels: np.ndarray, y_new: float) -> Optional[int]:
    """
    Index of the segment where the influence of y_new stops, or None when it
    reaches the first segment.

    This is the last segment j >= 1 with sign(v_{j-1} - v_j) == sign(v_K - y_new).
    A new sample exactly at the last level only touches the last segment.
    """
    K = levels.shape[0]
    direction = np.sign(levels[-1] - y_new)
    if direction == 0:
        return K - 1 if K > 1 else None
    matches = np.flatnonzero(np.sign(levels[:-1] - levels[1:]) == direction)
    if matches.size == 0:
        return None
    return int(matches[-1]) + 1


def find_non_isolated_start(r: Restoration, y_new: float) -> int:
    """First sample index a new sample y_new can affect at the restoration's lambda (0 = all)."""
    j = last_blocking_segment(r.levels, y_new)
    return 0 if j is None else int(r.starts[j])


def build_virtual_segment(y: np.ndarray, tau: np.ndarray, r: Restoration, segment: int,
                          lambda_hat: float, eps: float, y_new: float, tau_new: float) -> VirtualSegment:
    """Anchor + samples of `segment` onwards + the new sample."""
    start = int(r.starts[segment])
    s = int(r.signs[segment])
    anchor = r.levels[segment] - (lambda_hat + eps) / (2.0 * s)
    return VirtualSegment(
        y_plus=np.concatenate(([anchor], y[start:], [y_new])),
        tau_plus=np.concatenate(([1.0], tau[start:], [tau_new])),
        start=start,
        anchor_sign=s,
    )


class StreamState:
    """
    Online solver state for one channel.

    Holds the collapsed signal received so far, its path, the cutting point
    and the latest selection. Not thread-safe; one owner per instance.
    """

    def __init__(self, policy: Any = 'ours', q: Optional[float] = None, rule: str = 'd4g',
                 bootstrap_n: int = BOOTSTRAP_N):
        """
        Initialize the stream.

        Args:
            policy: LambdaHatPolicy or its text form ('ours', '2ours', 'fixed:X')
            q: Log-scale step for selection (auto when None)
            rule: Selection rule passed to select_lambda
            bootstrap_n: Collapsed length below which pushes re-solve offline
        """
        self.policy = policy if isinstance(policy, LambdaHatPolicy) else LambdaHatPolicy.parse(policy)
        self.q = q
        self.rule = rule
        self.bootstrap_n = max(2, int(bootstrap_n))

        self._t: List[float] = []
        self._y: List[float] = []
        self._tau: List[float] = []
        self._runs: List[int] = [0]
        self.n_raw = 0
        self.last_t: Optional[float] = None

        self.path: PathResult = empty_path()
        self.ladder: GLadder = build_g_ladder(self.path)
        self._short_ladder_warned = False
        self.lambda_hat: Optional[float] = self.policy.apply(None)
        self.selection: Optional[SelectionReport] = None
        self.last_push: Optional[PushReport] = None
        self._ws: Optional[WeightedSignal] = None
        self._r_hat: Optional[Restoration] = None

    # ------------------------------------------------------------------
    @property
    def n(self) -> int:
        """Collapsed length."""
        return len(self._y)

    @property
    def eps_lambda(self) -> float:
        lam = self.lambda_hat or 0.0
        return max(EPS_LAMBDA_ABS, EPS_LAMBDA_REL * lam)

    @property
    def lambda_ours(self) -> Optional[float]:
        return self.selection.lambda_ours if self.selection is not None else None

    @property
    def ws(self) -> WeightedSignal:
        if self._ws is None:
            self._ws = WeightedSignal(
                t=np.array(self._t), y=np.array(self._y), tau=np.array(self._tau),
                index_map=np.array(self._runs, dtype=np.int64),
            )
        return self._ws

    def restoration_at_hat(self) -> Restoration:
        """Restoration at lambda_hat, cached until the next push."""
        if self._r_hat is None:
            self._r_hat = reconstruct(self.ws, self.path, self.lambda_hat or 0.0)
        return self._r_hat

    def current_restoration(self) -> Restoration:
        """Restoration at the latest selected lambda (lambda = 0 before any selection)."""
        lam = self.lambda_ours or 0.0
        if self._r_hat is not None and self._r_hat.lam == lam:
            return self._r_hat
        r = reconstruct(self.ws, self.path, lam)
        if self.lambda_hat == lam:
            self._r_hat = r
        return r

    # ------------------------------------------------------------------
    def push(self, t_new: float, y_new: float) -> PushReport:
        """
        Append one sample and bring the path up to date.

        Raises:
            SignalError: non-finite values or a time not after the previous one
        """
        t_new = float(t_new)
        y_new = float(y_new)
        if not (np.isfinite(t_new) and np.isfinite(y_new)):
            raise SignalError(f"Non-finite sample at index {self.n_raw}", index=self.n_raw)
        if self.last_t is not None and t_new <= self.last_t:
            raise SignalError(
                f"Times must be strictly increasing: {t_new!r} <= {self.last_t!r} at index {self.n_raw}",
                index=self.n_raw,
            )

        if self.n_raw == 0:
            self._t.append(t_new)
            self._y.append(y_new)
            self._tau.append(1.0)
            self._runs.append(1)
            report = PushReport(n=1, mode='first')
            self._commit(t_new, empty_path(), report)
            return report

        tau_new = t_new - self.last_t
        if self.n_raw == 1:
            self._tau[0] = tau_new

        if y_new == self._y[-1]:
            self._tau[-1] += tau_new
            self._runs[-1] += 1
            self._ws = None
            report = PushReport(n=self.n_raw + 1, mode='collapsed')
            self._commit(t_new, self._solve_offline(), report)
            return report

        online_path, ladder = None, None
        report = PushReport(n=self.n_raw + 1, mode='bootstrap')
        if self.n >= self.bootstrap_n and self.lambda_hat:
            online_path, ladder, report = self._online_path(y_new, tau_new)

        self._t.append(t_new)
        self._y.append(y_new)
        self._tau.append(tau_new)
        self._runs.append(self._runs[-1] + 1)
        self._ws = None

        path = online_path if online_path is not None else self._solve_offline()
        self._commit(t_new, path, report, ladder)
        return report

    def _solve_offline(self) -> PathResult:
        lambdas, dg = solve_arrays(np.array(self._y), np.array(self._tau))
        return PathResult(lambda_junction=lambdas, dg_junction=dg)

    def _commit(self, t_new: float, path: PathResult, report: PushReport,
                ladder: Optional[GLadder] = None) -> None:
        self.n_raw += 1
        self.last_t = t_new
        self.path = path
        self.ladder = ladder if ladder is not None else build_g_ladder(path)
        self._ws = None
        self._r_hat = None
        self.last_push = report
        self.update_lambda_hat()

    def _online_path(self, y_new: float, tau_new: float):
        """New path and ladder from the current ones, or (None, None, report) when a full solve is needed."""
        lam_hat = float(self.lambda_hat)
        n = self.n
        report = PushReport(n=self.n_raw + 1, mode='offline')
        r = self.restoration_at_hat()
        segment = last_blocking_segment(r.levels, y_new)
        if segment is None:
            logger.debug("Push %d reaches the first segment; solving offline", self.n_raw + 1)
            return None, None, report

        y_old = self.ws.y
        tau_old = self.ws.tau
        virtual = build_virtual_segment(y_old, tau_old, r, segment, lam_hat, self.eps_lambda, y_new, tau_new)
        m = virtual.start
        report.start = m
        if virtual.y_plus[0] == virtual.y_plus[1]:
            logger.debug("Anchor coincides with sample %d; solving offline", m)
            return None, None, report

        lam_a, dg_a = solve_arrays(virtual.y_plus, virtual.tau_plus)
        if lam_a[0] <= lam_hat:
            logger.warning("Anchor merged at %.17g <= lambda_hat %.17g; solving offline", lam_a[0], lam_hat)
            report.mode = 'fallback'
            return None, None, report
        lam_a = lam_a[1:]
        dg_a = dg_a[1:]

        old_lambda = self.path.lambda_junction
        old_dg = self.path.dg_junction
        keep_prefix = old_lambda[:m - 1] <= lam_hat
        keep_suffix = lam_a <= lam_hat
        keep = np.concatenate((keep_prefix, [False], keep_suffix))
        cuts = np.flatnonzero(~keep)

        y_all = np.append(y_old, y_new)
        tau_all = np.append(tau_old, tau_new)
        starts = np.concatenate(([0], cuts + 1))
        T = np.add.reduceat(tau_all, starts)
        S = np.add.reduceat(tau_all * y_all, starts)
        try:
            lam_b, dg_b = solve_arrays(S / T, T)
        except SignalError:
            logger.warning("Equal neighbouring segment means at push %d; solving offline", self.n_raw + 1)
            report.mode = 'fallback'
            return None, None, report
        if lam_b.size and float(np.min(lam_b)) <= lam_hat:
            logger.warning("Coarse merge at or below lambda_hat at push %d; solving offline", self.n_raw + 1)
            report.mode = 'fallback'
            return None, None, report

        lambdas = np.empty(n)
        dg = np.zeros(n, dtype=np.int64)
        lambdas[:m - 1] = old_lambda[:m - 1]
        dg[:m - 1] = old_dg[:m - 1]
        lambdas[m:] = lam_a
        dg[m:] = dg_a
        lambdas[cuts] = lam_b
        dg[cuts] = dg_b

        # Only the coarse junctions of the prefix and everything from m - 1 on changed
        changed_prefix = cuts[cuts < m - 1]
        was = np.concatenate((changed_prefix, np.arange(m - 1, n - 1)))
        now = np.concatenate((changed_prefix, np.arange(m - 1, n)))
        ladder = merge_g_ladder(self.ladder, old_lambda[was], old_dg[was], lambdas[now], dg[now])

        report.mode = 'online'
        report.suffix_size = int(virtual.y_plus.shape[0])
        report.coarse_size = int(T.shape[0])
        logger.debug("Push %d online: start=%d suffix=%d coarse=%d", report.n, m,
                     report.suffix_size, report.coarse_size)
        return PathResult(lambda_junction=lambdas, dg_junction=dg), ladder, report

    # ------------------------------------------------------------------
    def update_lambda_hat(self) -> Optional[float]:
        """
        Re-select lambda on the current path and move the cutting point per policy.

        Below two collapsed samples there is nothing to select; the previous
        cutting point is kept.
        """
        if self.n >= 2:
            q = self.q
            if q is None:
                # the short-ladder fallback is reported once per stream
                short = q_steps(self.ladder).shape[0] == 0
                q = auto_q(self.ladder, warn=not self._short_ladder_warned)
                self._short_ladder_warned = self._short_ladder_warned or short
            self.selection = select_lambda(self.ladder, q=q, rule=self.rule)
        new_hat = self.policy.apply(self.lambda_ours)
        if new_hat is not None and new_hat != self.lambda_hat:
            self.lambda_hat = new_hat
            self._r_hat = None
        return self.lambda_hat

    def summary_row(self) -> Dict[str, Any]:
        """n, selected lambda, segment count and last level at the selected lambda."""
        r = self.current_restoration()
        return {
            "n": self.n_raw,
            "lambda_ours": self.lambda_ours or 0.0,
            "K": r.K,
            "last_level": float(r.levels[-1]),
        }


# Convenience functions
def push_sample(state: StreamState, t_new: float, y_new: float) -> StreamState:
    """Push one sample into state and return it."""
    state.push(t_new, y_new)
    return state


def update_lambda_hat(state: StreamState) -> Optional[float]:
    return state.update_lambda_hat()


def stream_signal(t, y, policy: Any = 'ours', **kwargs) -> StreamState:
    """Feed a whole signal through a fresh StreamState."""
    state = StreamState(policy=policy, **kwargs)
    for t_i, y_i in zip(t, y):
        state.push(t_i, y_i)
    return state


if __name__ == "__main__":
    rng = np.random.default_rng(0)
    times = np.arange(60, dtype=float)
    values = np.where((times // 15) % 2 == 0, 0.0, 4.0) + rng.normal(0, 1, times.shape[0])
    state = StreamState()
    for t_i, y_i in zip(times, values):
        report = state.push(t_i, y_i)
    print("last push:", report)
    print("summary:", state.summary_row())
