"""RADAR and the comparison methods.

* ``radar``: epochs of dual averaging on ``f + lambda_i ||.||_1`` over shrinking
  l_p balls, with ``lambda_i`` annealed alongside the radius.
* ``radar_const``: the same with equal epoch lengths.
* ``eda``: RADAR's epochs with one fixed penalty ``4 eta sqrt(ln d / T)``.
* ``rda``: a single dual-averaging phase with that fixed penalty.
* ``sgd``: projected SGD on the l1 ball of radius ``R1``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .engine import EpochState, RunTrace, halving_rule, run_epoch, trace_grid
from .geometry import LpGeometry, lp_norm, project_l1_ball
from .schedule import (
    CONSTANT,
    DOUBLING,
    ORACLE_HALVING,
    Epoch,
    EpochPlan,
    ProblemConstants,
    build_plan,
    fixed_lambda,
    step_multiplier,
)

logger = logging.getLogger(__name__)

ALGORITHMS = ("radar", "radar_const", "eda", "rda", "sgd")
THEORETICAL = "theoretical"
EPOCH_MODES = (THEORETICAL, ORACLE_HALVING)


@dataclass
class AlgorithmConfig:
    kind: str
    R1: float
    total_budget: int
    constants: ProblemConstants
    epoch_mode: str = THEORETICAL
    c1: float = 1.0
    seed: int = 0
    trials: int = 1
    trace_stride: Optional[int] = None
    sgd_gamma: Optional[float] = None
    overrun_factor: float = 4.0

    def __post_init__(self):
        if self.kind not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.kind!r}; choose from {ALGORITHMS}")
        if self.epoch_mode not in EPOCH_MODES:
            raise ValueError(f"unknown epoch mode {self.epoch_mode!r}")
        if self.R1 <= 0:
            raise ValueError("R1 must be positive")
        if self.total_budget < 1:
            raise ValueError("total_budget must be at least 1")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass
class RunResult:
    final_iterate: np.ndarray
    trace: RunTrace
    epochs_completed: int
    plan_used: EpochPlan
    iterations: int = 0
    centers: list = field(default_factory=list)


def _new_trace(oracle, config: AlgorithmConfig) -> RunTrace:
    objective = None
    if oracle.theta_star is None and getattr(oracle, "pool", None) is not None:
        objective = oracle.objective
    return RunTrace(trace_grid(config.total_budget, config.trace_stride), oracle.theta_star, objective)


def _check_kind(config: AlgorithmConfig, *kinds: str) -> None:
    if config.kind not in kinds:
        raise ValueError(f"config.kind is {config.kind!r}, expected one of {kinds}")


def _run_epochs(oracle, config: AlgorithmConfig, plan: EpochPlan, adaptive: bool, on_iterate=None) -> RunResult:
    """Shared epoch loop: each epoch's average becomes the next prox center."""
    c = config.constants
    geom = LpGeometry.from_dimension(c.d)
    T = config.total_budget
    trace = _new_trace(oracle, config)
    center = np.zeros(c.d)
    first = plan.epoch(1)
    trace.record(0, 1, center, first.radius, first.lam)
    executed: list[Epoch] = []
    centers = [center]
    used_total = 0
    completed = 0
    i = 1
    while used_total < T:
        if not adaptive and i > len(plan.epochs):
            break
        e = plan.epoch(i)
        if e.radius_sq == 0.0:
            logger.warning("radius underflowed at epoch %d; stopping early", i)
            break
        stop_rule = None
        full = e.length
        if adaptive:
            if oracle.theta_star is None:
                raise ValueError("oracle_halving mode needs an oracle with known theta_star")
            full = max(1, math.ceil(config.overrun_factor * e.length))
            stop_rule = halving_rule(oracle.theta_star, center, geom.p)
        length = min(full, T - used_total)
        state = EpochState(center, e.radius, e.lam, e.alpha, epoch_index=i)
        avg, used = run_epoch(oracle, state, length, geom, trace, stop_rule, used_total, on_iterate)
        halted = stop_rule is not None and used < length
        if adaptive and not halted and used == full:
            trace.forced_terminations.append(i)
            logger.info("epoch %d hit the overrun cap of %d iterations", i, full)
        if halted or used == full:
            completed += 1
        used_total += used
        executed.append(replace(e, length=used))
        trace.boundaries.append(used_total)
        center = avg
        centers.append(center)
        i += 1
    used_plan = EpochPlan(
        plan.mode, T, c, config.R1, config.c1, executed, plan.constant_length, plan.lambda_override
    )
    return RunResult(center, trace, completed, used_plan, used_total, centers)


def _plan_mode(config: AlgorithmConfig) -> tuple[str, bool]:
    if config.epoch_mode == ORACLE_HALVING:
        return ORACLE_HALVING, True
    return DOUBLING, False


def run_radar(oracle, config: AlgorithmConfig, on_iterate=None) -> RunResult:
    _check_kind(config, "radar")
    mode, adaptive = _plan_mode(config)
    plan = build_plan(config.constants, config.R1, config.total_budget, mode, config.c1)
    return _run_epochs(oracle, config, plan, adaptive, on_iterate)


def run_radar_const(oracle, config: AlgorithmConfig, on_iterate=None) -> RunResult:
    """RADAR with equal epoch lengths; never looks at ``theta*``."""
    _check_kind(config, "radar_const")
    plan = build_plan(config.constants, config.R1, config.total_budget, CONSTANT, config.c1)
    return _run_epochs(oracle, config, plan, False, on_iterate)


def _fixed_lambda(config: AlgorithmConfig) -> float:
    c = config.constants
    return fixed_lambda(c.noise_eta, c.d, config.total_budget)


def run_eda(oracle, config: AlgorithmConfig, on_iterate=None) -> RunResult:
    _check_kind(config, "eda")
    mode, adaptive = _plan_mode(config)
    plan = build_plan(
        config.constants, config.R1, config.total_budget, mode, config.c1, lambda_override=_fixed_lambda(config)
    )
    return _run_epochs(oracle, config, plan, adaptive, on_iterate)


def run_rda(oracle, config: AlgorithmConfig, on_iterate=None) -> RunResult:
    """One dual-averaging phase of length ``T`` on the ball ``||theta||_p <= R1``."""
    _check_kind(config, "rda")
    c = config.constants
    lam = _fixed_lambda(config)
    epoch = Epoch(1, config.total_budget, config.R1 * config.R1, lam, step_multiplier(c, config.R1, lam))
    plan = EpochPlan("single", config.total_budget, c, config.R1, config.c1, [epoch], lambda_override=lam)
    return _run_epochs(oracle, config, plan, False, on_iterate)


def run_sgd(oracle, config: AlgorithmConfig, on_iterate=None) -> RunResult:
    """Projected SGD with step ``1 / (gamma t)``; returns the last iterate."""
    _check_kind(config, "sgd")
    c = config.constants
    gamma = config.sgd_gamma
    if gamma is None:
        gamma = c.cov_min_eig if c.cov_min_eig is not None else c.rsc_gamma
    T = config.total_budget
    trace = _new_trace(oracle, config)
    theta = np.zeros(c.d)
    trace.record(0, 1, theta, config.R1, 0.0)
    for t in range(1, T + 1):
        g = oracle.query(theta)
        theta = project_l1_ball(theta - g / (gamma * t), config.R1)
        if on_iterate is not None:
            on_iterate(theta, None)
        trace.record(t, 1, theta, config.R1, 0.0)
    plan = EpochPlan("single", T, c, config.R1, config.c1, [Epoch(1, T, config.R1**2, 0.0, 1.0 / gamma)])
    trace.boundaries.append(T)
    return RunResult(theta, trace, 1, plan, T)


DRIVERS: dict[str, Callable] = {
    "radar": run_radar,
    "radar_const": run_radar_const,
    "eda": run_eda,
    "rda": run_rda,
    "sgd": run_sgd,
}


def run(oracle, config: AlgorithmConfig, on_iterate=None) -> RunResult:
    return DRIVERS[config.kind](oracle, config, on_iterate)


def halving_satisfied(result: RunResult, theta_star: np.ndarray, centers: list[np.ndarray], p: float) -> bool:
    """Check ``||y_{i+1} - theta*||_p^2 <= ||y_i - theta*||_p^2 / 2`` along ``centers``."""
    errs = [lp_norm(y - theta_star, p) ** 2 for y in centers]
    return all(b <= a / 2.0 * (1 + 1e-12) for a, b in zip(errs, errs[1:]))
