"""Experiment orchestration, trace persistence, summaries and rate fits.

An experiment is a pure function of its :class:`ExperimentSpec`: trial ``k``
draws its target and sample stream from ``SeedSequence([seed, k])``, and all
algorithms in a trial see the same problem and the same sample stream.
Output files are written by the parent process in a fixed order, so worker
scheduling never changes them.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .drivers import ALGORITHMS, EPOCH_MODES, ORACLE_HALVING, THEORETICAL, AlgorithmConfig, run
from .engine import TracePoint, read_trace_csv, write_trace_csv
from .oracles import (
    FINITE_POOL,
    FRESH_SAMPLE,
    LEAST_SQUARES,
    LOGISTIC,
    GradientOracle,
    ProblemInstance,
    default_sparsity,
    make_pool,
    make_sparse_target,
)
from .schedule import ProblemConstants

logger = logging.getLogger(__name__)

SUMMARY_HEADER = ["algorithm", "iteration", "mean_error_l2_sq", "stderr", "slope_trailing_decade"]
RATE_HEADER = ["algorithm", "iteration", "mean_error_l2_sq", "slope_trailing_decade"]


class ValidationError(ValueError):
    def __init__(self, problems: dict[str, str]):
        self.problems = problems
        super().__init__("; ".join(f"{k}: {v}" for k, v in problems.items()))


class NotEnoughDataError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    """Everything that determines an experiment's output files.

    ``sparsity`` and ``R1`` of ``None`` mean ``ceil(ln d)`` and
    ``||theta*||_1``. Constants left at ``None`` take their least-squares or
    logistic defaults. ``c1`` defaults to the desk-scale value 4096 (the
    schedule functions themselves default to 1).
    """

    dim: int = 1000
    sparsity: int | None = None
    loss: str = LEAST_SQUARES
    B: float = 1.0
    eta_sq: float = 0.5
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    trials: int = 5
    seed: int = 0
    out: str = "radar_out"
    stride: int | None = None
    budget: int = 20000
    epoch_mode: str = ORACLE_HALVING
    c1: float = 4096.0
    R1: float | None = None
    magnitude: str = "sign"
    omega: float | None = None
    gamma: float | None = None
    tau: float = 0.0
    G: float | None = None
    sigma: float | None = None
    cov_min_eig: float | None = None
    sgd_gamma: float | None = None
    overrun_factor: float = 4.0
    oracle_mode: str = FRESH_SAMPLE
    pool_size: int = 1000

    def validate(self) -> None:
        bad = {}
        if not isinstance(self.dim, int) or self.dim < 3:
            bad["dim"] = "must be an integer >= 3"
        if self.sparsity is not None and not (1 <= self.sparsity <= max(self.dim, 1)):
            bad["sparsity"] = "must lie in [1, dim]"
        if self.loss not in (LEAST_SQUARES, LOGISTIC):
            bad["loss"] = f"must be {LEAST_SQUARES} or {LOGISTIC}"
        if not self.B > 0:
            bad["B"] = "must be positive"
        if not self.eta_sq >= 0:
            bad["eta_sq"] = "must be nonnegative"
        if not self.algorithms:
            bad["algorithms"] = "need at least one algorithm"
        elif any(a not in ALGORITHMS for a in self.algorithms):
            bad["algorithms"] = f"unknown entries; choose from {', '.join(ALGORITHMS)}"
        if self.trials < 1:
            bad["trials"] = "must be >= 1"
        if self.budget < 1:
            bad["budget"] = "must be >= 1"
        if self.stride is not None and self.stride < 1:
            bad["stride"] = "must be >= 1"
        if self.epoch_mode not in EPOCH_MODES:
            bad["epoch_mode"] = f"must be one of {', '.join(EPOCH_MODES)}"
        if not self.c1 > 0:
            bad["c1"] = "must be positive"
        if self.R1 is not None and not self.R1 > 0:
            bad["R1"] = "must be positive"
        if self.tau < 0:
            bad["tau"] = "must be nonnegative"
        if self.oracle_mode not in (FRESH_SAMPLE, FINITE_POOL):
            bad["oracle_mode"] = f"must be {FRESH_SAMPLE} or {FINITE_POOL}"
        if self.pool_size < 1:
            bad["pool_size"] = "must be >= 1"
        if self.magnitude not in ("sign", "gaussian", "uniform"):
            bad["magnitude"] = "must be sign, gaussian or uniform"
        if bad:
            raise ValidationError(bad)

    @property
    def s(self) -> int:
        return self.sparsity if self.sparsity is not None else default_sparsity(self.dim)


_INT_KEYS = {"dim", "sparsity", "trials", "seed", "stride", "budget", "pool_size"}
_FLOAT_KEYS = {
    "B", "eta_sq", "c1", "R1", "omega", "gamma", "tau", "G", "sigma", "cov_min_eig", "sgd_gamma", "overrun_factor",
}
_ALIASES = {"algo": "algorithms", "dimension": "dim", "seed_base": "seed", "epoch-mode": "epoch_mode"}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError({f"line {lineno}": f"expected key=value, got {raw!r}"})
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def spec_from_mapping(values: dict, base: ExperimentSpec | None = None) -> ExperimentSpec:
    """Apply string (or typed) overrides to ``base`` and validate the result."""
    spec = ExperimentSpec() if base is None else ExperimentSpec(**asdict(base))
    known = {f.name for f in fields(ExperimentSpec)}
    bad = {}
    for key, value in values.items():
        name = _ALIASES.get(key, key).replace("-", "_")
        if name not in known:
            bad[key] = "unknown setting"
            continue
        if value is None:
            continue
        try:
            setattr(spec, name, _coerce(name, value))
        except ValueError as exc:
            bad[key] = str(exc)
    if bad:
        raise ValidationError(bad)
    spec.validate()
    return spec


def _coerce(name: str, value):
    if not isinstance(value, str):
        return value
    v = value.strip()
    if v.lower() in ("", "auto", "none", "default"):
        if name in ("sparsity", "R1", "omega", "gamma", "G", "sigma", "cov_min_eig", "sgd_gamma", "stride"):
            return None
        raise ValueError(f"{v!r} is not allowed here")
    if name == "algorithms":
        return [a.strip().replace("-", "_") for a in v.split(",") if a.strip()]
    if name == "epoch_mode":
        return v.replace("-", "_")
    if name in _INT_KEYS:
        try:
            return int(v)
        except ValueError:
            f = float(v)
            if f != int(f):
                raise ValueError(f"expected an integer, got {v!r}") from None
            return int(f)
    if name in _FLOAT_KEYS:
        try:
            return float(v)
        except ValueError:
            raise ValueError(f"expected a number, got {v!r}") from None
    return v


def load_spec(path=None, overrides: dict | None = None) -> ExperimentSpec:
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return spec_from_mapping(values)


def trial_problem(spec: ExperimentSpec, trial: int):
    """Instance, oracle seed and pool for one trial (shared by every algorithm)."""
    target_ss, oracle_ss, pool_ss = np.random.SeedSequence([spec.seed, trial]).spawn(3)
    theta_star = make_sparse_target(spec.dim, spec.s, np.random.default_rng(target_ss), spec.magnitude)
    instance = ProblemInstance(theta_star, spec.dim, spec.B, spec.eta_sq, spec.loss)
    pool = None
    if spec.oracle_mode == FINITE_POOL:
        pool = make_pool(instance, spec.pool_size, np.random.default_rng(pool_ss))
    return instance, oracle_ss, pool


def problem_constants(spec: ExperimentSpec, R1: float) -> ProblemConstants:
    overrides = {}
    if spec.gamma is not None:
        overrides["rsc_gamma"] = spec.gamma
    if spec.tau:
        overrides["rsc_tolerance"] = spec.tau
    if spec.loss == LEAST_SQUARES:
        c = ProblemConstants.least_squares(spec.dim, spec.s, spec.B, spec.eta_sq, spec.omega, **overrides)
    else:
        c = ProblemConstants.logistic(
            spec.dim, spec.s, R1, spec.B, spec.cov_min_eig, spec.omega, eta_sq=spec.eta_sq, **overrides
        )
    changes = {}
    if spec.G is not None:
        changes["lipschitz_g"] = spec.G
    if spec.sigma is not None:
        changes["noise_sigma"] = spec.sigma
    if spec.cov_min_eig is not None:
        changes["cov_min_eig"] = spec.cov_min_eig
    if changes:
        from dataclasses import replace

        c = replace(c, **changes)
    return c


def algorithm_config(spec: ExperimentSpec, kind: str, R1: float) -> AlgorithmConfig:
    return AlgorithmConfig(
        kind=kind,
        R1=R1,
        total_budget=spec.budget,
        constants=problem_constants(spec, R1),
        epoch_mode=spec.epoch_mode if kind in ("radar", "eda") else THEORETICAL,
        c1=spec.c1,
        seed=spec.seed,
        trials=spec.trials,
        trace_stride=spec.stride,
        sgd_gamma=spec.sgd_gamma,
        overrun_factor=spec.overrun_factor,
    )


def run_single(spec: ExperimentSpec, kind: str, trial: int):
    """Run one (algorithm, trial) pair; returns its result."""
    instance, oracle_ss, pool = trial_problem(spec, trial)
    R1 = spec.R1 if spec.R1 is not None else float(np.abs(instance.theta_star).sum())
    mode = FINITE_POOL if pool is not None else FRESH_SAMPLE
    oracle = GradientOracle(instance, np.random.default_rng(oracle_ss), mode, pool)
    return run(oracle, algorithm_config(spec, kind, R1))


def _job(args):
    spec, kind, trial = args
    res = run_single(spec, kind, trial)
    return kind, trial, res.trace.points, res.trace.forced_terminations, res.plan_used


def worker_count() -> int:
    env = os.environ.get("RADAR_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> dict[str, Path]:
    """Run every algorithm x trial and write traces, summary and rate report.

    Returns the paths written, keyed by ``"traces"``, ``"summary"``,
    ``"rate_fit"``, ``"run:<algorithm>:<trial>"`` and ``"plan:<algorithm>:<trial>"``.
    """
    spec.validate()
    out = Path(spec.out)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "plans").mkdir(exist_ok=True)
    jobs = [(spec, kind, trial) for kind in spec.algorithms for trial in range(spec.trials)]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]

    paths: dict[str, Path] = {}
    by_alg: dict[str, list[list[TracePoint]]] = {}
    merged = []
    for kind, trial, points, forced, plan in results:
        if forced:
            logger.warning("%s trial %d: epochs %s hit the overrun cap", kind, trial, forced)
        rows = [(trial, kind, p) for p in points]
        path = out / "traces" / f"{kind}_trial{trial}.csv"
        write_trace_csv(path, rows)
        paths[f"run:{kind}:{trial}"] = path
        # executed epochs, so adaptive runs record their actual lengths
        paths[f"plan:{kind}:{trial}"] = out / "plans" / f"{kind}_trial{trial}.csv"
        plan.to_csv(paths[f"plan:{kind}:{trial}"])
        merged.extend(rows)
        by_alg.setdefault(kind, []).append(points)
    paths["traces"] = out / "traces.csv"
    write_trace_csv(paths["traces"], merged)

    summary = []
    for kind in spec.algorithms:
        summary.extend(summarize(by_alg[kind], kind))
    paths["summary"] = out / "summary.csv"
    write_summary_csv(paths["summary"], summary)
    paths["rate_fit"] = out / "rate_fit.csv"
    write_rate_report(paths["rate_fit"], summary)
    return paths


def fit_rate(points) -> float:
    """Least-squares slope of ``ln(error)`` on ``ln(iteration)`` over the trailing decade.

    ``points`` is a sequence of ``(iteration, error)``; the window is
    ``[t_max / 10, t_max]``.
    """
    pts = np.asarray([(float(t), float(e)) for t, e in points if t > 0], dtype=float).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise NotEnoughDataError("need at least 3 points with positive iteration")
    t_max = pts[:, 0].max()
    if pts[:, 0].min() > t_max / 10.0:
        raise NotEnoughDataError("iterations must span at least one decade")
    win = pts[pts[:, 0] >= t_max / 10.0 * (1 - 1e-12)]
    if win.shape[0] < 3:
        raise NotEnoughDataError("fewer than 3 points in the trailing decade")
    if np.any(win[:, 1] <= 0):
        raise NotEnoughDataError("errors must be positive for a log-log fit")
    x, y = np.log(win[:, 0]), np.log(win[:, 1])
    x = x - x.mean()
    return float(x @ (y - y.mean()) / (x @ x))


@dataclass
class SummaryRow:
    algorithm: str
    iteration: int
    mean_error_l2_sq: float
    stderr: float
    slope_trailing_decade: float


def summarize(traces, algorithm: str = "") -> list[SummaryRow]:
    """Mean and standard error across trials per grid point, with trailing-decade slopes.

    ``traces`` holds one sequence of :class:`TracePoint` (or a RunTrace) per
    trial; all must share the iteration grid.
    """
    traces = [t.points if hasattr(t, "points") else t for t in traces]
    if not traces:
        raise AlignmentError("no traces to summarise")
    grid = [p.iteration for p in traces[0]]
    for tr in traces[1:]:
        if [p.iteration for p in tr] != grid:
            raise AlignmentError("traces do not share an iteration grid")
    errs = np.array([[p.error_l2_sq for p in tr] for tr in traces], dtype=float)
    n = errs.shape[0]
    mean = errs.mean(axis=0)
    se = errs.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    rows = []
    for k, t in enumerate(grid):
        try:
            slope = fit_rate(zip(grid[: k + 1], mean[: k + 1]))
        except NotEnoughDataError:
            slope = math.nan
        rows.append(SummaryRow(algorithm, int(t), float(mean[k]), float(se[k]), slope))
    return rows


def write_summary_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow([r.algorithm, r.iteration, repr(r.mean_error_l2_sq), repr(r.stderr), _fmt(r.slope_trailing_decade)])


def read_summary_csv(path) -> list[SummaryRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader) != SUMMARY_HEADER:
            raise ValueError(f"{path}: unexpected summary header")
        return [
            SummaryRow(r[0], int(r[1]), float(r[2]), float(r[3]), float(r[4]) if r[4] else math.nan)
            for r in reader
            if r
        ]


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(x)


def write_rate_report(path, summary: list[SummaryRow]) -> None:
    """One line per algorithm: final grid point, its mean error and slope."""
    last: dict[str, SummaryRow] = {}
    for r in summary:
        last[r.algorithm] = r
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATE_HEADER)
        for alg, r in last.items():
            w.writerow([alg, r.iteration, repr(r.mean_error_l2_sq), _fmt(r.slope_trailing_decade)])


def summarize_trace_files(paths) -> list[SummaryRow]:
    """Summaries from trace CSVs (per-run or merged), grouped by algorithm."""
    grouped: dict[str, dict[int, list[TracePoint]]] = {}
    for path in paths:
        for trial, alg, p in read_trace_csv(path):
            grouped.setdefault(alg, {}).setdefault(trial, []).append(p)
    rows = []
    for alg, trials in grouped.items():
        rows.extend(summarize([trials[k] for k in sorted(trials)], alg))
    return rows
