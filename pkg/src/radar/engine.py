"""Within-epoch stochastic dual averaging and run traces."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import LpGeometry, dual_averaging_step, l1_subgradient, lp_norm

TRACE_HEADER = ["trial", "algorithm", "iteration", "epoch", "error_l2_sq", "error_l1", "radius", "lambda"]


def trace_grid(T: int, stride: int | None = None, n_log: int = 60) -> np.ndarray:
    """Iterations at which a run of ``T`` steps is traced.

    Union of every ``stride``-th iteration, a log-spaced set for the early
    phase, and ``0`` and ``T``. Depends only on ``(T, stride, n_log)`` so all
    runs of an experiment share it.
    """
    if stride is None:
        stride = max(1, T // 500)
    pts = set(range(stride, T + 1, stride))
    pts.update(int(v) for v in np.unique(np.round(np.geomspace(1, max(T, 1), n_log))))
    pts.update((0, T))
    return np.array(sorted(p for p in pts if 0 <= p <= T), dtype=np.int64)


@dataclass
class TracePoint:
    iteration: int
    epoch: int
    error_l2_sq: float
    error_l1: float
    radius: float
    lam: float


@dataclass
class RunTrace:
    """Errors of the iterate ``theta_t``, sampled on a fixed iteration grid.

    When ``theta_star`` is None the ``error_l2_sq`` column carries the
    objective value from ``objective`` instead and ``error_l1`` is NaN;
    ``metric`` records which.
    """

    grid: np.ndarray
    theta_star: Optional[np.ndarray] = None
    objective: Optional[Callable[[np.ndarray], float]] = None
    points: list[TracePoint] = field(default_factory=list)
    boundaries: list[int] = field(default_factory=list)
    forced_terminations: list[int] = field(default_factory=list)

    def __post_init__(self):
        self._on_grid = np.zeros(int(self.grid.max(initial=0)) + 1, dtype=bool)
        self._on_grid[self.grid] = True

    @property
    def metric(self) -> str:
        return "error" if self.theta_star is not None else "objective"

    def wants(self, iteration: int) -> bool:
        return iteration < self._on_grid.size and bool(self._on_grid[iteration])

    def record(self, iteration: int, epoch: int, estimate: np.ndarray, radius: float, lam: float) -> None:
        if not self.wants(iteration):
            return
        if self.points and iteration <= self.points[-1].iteration:
            return
        if self.theta_star is not None:
            diff = estimate - self.theta_star
            l2 = float(diff @ diff)
            l1 = float(np.abs(diff).sum())
        elif self.objective is not None:
            l2, l1 = float(self.objective(estimate)), math.nan
        else:
            l2 = l1 = math.nan
        self.points.append(TracePoint(iteration, epoch, l2, l1, float(radius), float(lam)))

    def iterations(self) -> np.ndarray:
        return np.array([p.iteration for p in self.points], dtype=np.int64)

    def errors(self) -> np.ndarray:
        return np.array([p.error_l2_sq for p in self.points])


@dataclass
class EpochState:
    center: np.ndarray
    radius: float
    lam: float
    alpha: float
    mu: np.ndarray = None
    theta: np.ndarray = None
    iterate_sum: np.ndarray = None
    t: int = 0
    epoch_index: int = 1

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.mu is None:
            self.mu = np.zeros_like(self.center)
        if self.theta is None:
            self.theta = self.center.copy()
        if self.iterate_sum is None:
            self.iterate_sum = np.zeros_like(self.center)


def run_epoch(
    oracle,
    state: EpochState,
    T_epoch: int,
    geom: LpGeometry,
    trace: RunTrace | None = None,
    stop_rule: Callable[[np.ndarray, int], bool] | None = None,
    global_offset: int = 0,
    on_iterate: Callable[[np.ndarray, EpochState], None] | None = None,
):
    """Run up to ``T_epoch`` dual-averaging steps on ``f + lam ||.||_1``.

    Each step queries the oracle at ``theta_t``, adds ``g_t + lam sign(theta_t)``
    to the dual average ``mu`` and maps it back with step ``alpha / sqrt(t + 1)``.
    ``stop_rule(average, t)`` is checked after every step. Returns the average
    of ``theta_1 .. theta_T`` and the number of steps taken.
    """
    if T_epoch < 1:
        return state.center.copy(), 0
    center, radius, lam, alpha = state.center, state.radius, state.lam, state.alpha
    used = 0
    avg = center.copy()
    for t in range(T_epoch):
        theta = state.theta
        g = oracle.query(theta)
        if lam != 0.0:
            state.mu += g + lam * l1_subgradient(theta)
        else:
            state.mu += g
        theta = dual_averaging_step(state.mu, center, radius, alpha / math.sqrt(t + 1), geom)
        state.theta = theta
        state.iterate_sum += theta
        state.t = t + 1
        used = t + 1
        if on_iterate is not None:
            on_iterate(theta, state)
        it = global_offset + used
        stop = stop_rule is not None and stop_rule(state.iterate_sum / used, used)
        if stop or used == T_epoch or (trace is not None and trace.wants(it)):
            avg = state.iterate_sum / used
            if trace is not None:
                trace.record(it, state.epoch_index, theta, radius, lam)
        if stop:
            break
    return avg, used


def halving_rule(theta_star: np.ndarray, center: np.ndarray, p: float) -> Callable[[np.ndarray, int], bool]:
    """Stop once ``||avg - theta*||_p^2 <= ||center - theta*||_p^2 / 2``."""
    target = lp_norm(center - theta_star, p) ** 2 / 2.0

    def rule(avg: np.ndarray, t: int) -> bool:
        return lp_norm(avg - theta_star, p) ** 2 <= target

    return rule


def write_trace_csv(path, rows) -> None:
    """Write ``(trial, algorithm, TracePoint)`` rows with round-trip floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for trial, algorithm, p in rows:
            w.writerow(
                [trial, algorithm, p.iteration, p.epoch, repr(p.error_l2_sq), repr(p.error_l1), repr(p.radius), repr(p.lam)]
            )


def read_trace_csv(path) -> list[tuple[int, str, TracePoint]]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected trace header {header}")
        for r in reader:
            if not r:
                continue
            out.append(
                (int(r[0]), r[1], TracePoint(int(r[2]), int(r[3]), float(r[4]), float(r[5]), float(r[6]), float(r[7])))
            )
    return out
