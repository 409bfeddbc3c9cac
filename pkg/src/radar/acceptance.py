"""Acceptance checks, runnable from the CLI (``radar selftest``) and pytest.

Each check returns a :class:`CheckResult`; none of them raise on failure.
Checks 3 to 5 share one desk-scale experiment, cached per process.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .drivers import AlgorithmConfig, run
from .geometry import LpGeometry, lp_norm
from .harness import ExperimentSpec, run_experiment, read_summary_csv
from .oracles import GradientOracle, ProblemInstance, default_sparsity, make_sparse_target
from .schedule import (
    InfeasibleSparsityError,
    ProblemConstants,
    approx_error,
    effective_rsc,
    epoch_length,
    epoch_lambda,
    kappa_T,
    logistic_constants,
    ls_constants,
    omega_i,
)
from .verification import prox_check

DESK_DIM = 1000
DESK_BUDGET = 20000
DESK_TRIALS = 5
DESK_SEED = 2024


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(number, name, fn) -> CheckResult:
    t0 = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crash is a failed check, not a crashed suite
        passed, detail = False, f"raised {type(exc).__name__}: {exc}"
    return CheckResult(number, name, bool(passed), detail, time.perf_counter() - t0)


def check_prox_kernel(instances: int = 100, dims=(3, 10, 50)) -> CheckResult:
    def body():
        parts, ok = [], True
        for d in dims:
            r = prox_check(d, instances)
            ok &= r.passed(1e-6, 1e-8)
            parts.append(f"d={d} linf={r.max_linf:.1e} gap={r.max_objective_gap:.1e}")
        return ok, "; ".join(parts)

    return _timed(1, "prox kernel vs numerical minimiser", body)


def check_feasibility(d: int = DESK_DIM, T: int = DESK_BUDGET, seed: int = DESK_SEED) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        s = default_sparsity(d)
        theta_star = make_sparse_target(d, s, rng)
        inst = ProblemInstance(theta_star, d)
        R1 = float(np.abs(theta_star).sum())
        cfg = AlgorithmConfig("radar", R1, T, ProblemConstants.least_squares(d, s), "oracle_halving", c1=4096)
        p = LpGeometry.from_dimension(d).p
        worst = [0.0]

        def watch(theta, state):
            worst[0] = max(worst[0], lp_norm(theta - state.center, p) / state.radius)

        res = run(GradientOracle(inst, rng), cfg, on_iterate=watch)
        sq = [e.radius_sq for e in res.plan_used.epochs]
        chain = all(b == a / 2.0 for a, b in zip(sq, sq[1:]))
        ok = worst[0] <= 1.0 + 1e-9 and chain and len(sq) >= 2
        return ok, f"max ||theta-c||_p/R = {worst[0]:.12f} over {res.iterations} iterates; {len(sq)} epochs, chain exact={chain}"

    return _timed(2, "feasibility and radius chain", body)


_desk_cache: dict = {}


def desk_summary(workdir=None) -> dict:
    """Final error, error at T/10 and slope per algorithm for the desk-scale experiment."""
    key = workdir
    if key in _desk_cache:
        return _desk_cache[key]
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(workdir or tmp) / "desk"
        spec = ExperimentSpec(dim=DESK_DIM, budget=DESK_BUDGET, trials=DESK_TRIALS, seed=DESK_SEED, out=str(out))
        paths = run_experiment(spec)
        rows = read_summary_csv(paths["summary"])
    table = {}
    for r in rows:
        entry = table.setdefault(r.algorithm, {})
        if r.iteration == DESK_BUDGET // 10:
            entry["tenth"] = r.mean_error_l2_sq
        entry["final"] = r.mean_error_l2_sq
        entry["slope"] = r.slope_trailing_decade
    _desk_cache[key] = table
    return table


def check_rates() -> CheckResult:
    def body():
        t = desk_summary()
        a, b = t["radar"]["slope"], t["rda"]["slope"]
        ok = -1.4 <= a <= -0.6 and -0.8 <= b <= -0.2 and a <= b - 0.25
        return ok, f"slope radar={a:.3f} rda={b:.3f}"

    return _timed(3, "trailing-decade rates", body)


def check_final_ordering() -> CheckResult:
    def body():
        t = desk_summary()
        r, rda, sgd = t["radar"]["final"], t["rda"]["final"], t["sgd"]["final"]
        ok = 2 * r <= rda and 2 * r <= sgd
        return ok, f"final radar={r:.4g} rda={rda:.4g} sgd={sgd:.4g}"

    return _timed(4, "final error ordering vs RDA and SGD", body)


def check_variants() -> CheckResult:
    def body():
        t = desk_summary()
        r, eda, rc = t["radar"], t["eda"], t["radar_const"]
        ok = r["final"] <= eda["final"] and rc["tenth"] > r["tenth"] and rc["final"] <= 10 * r["final"]
        return ok, (
            f"final radar={r['final']:.4g} eda={eda['final']:.4g} const={rc['final']:.4g}; "
            f"at T/10 radar={r['tenth']:.4g} const={rc['tenth']:.4g}"
        )

    return _timed(5, "EDA and constant-epoch comparison", body)


def check_unbiasedness(n: int = 100_000, d: int = 10, seed: int = 5) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        theta_star = make_sparse_target(d, 3, rng)
        theta = rng.standard_normal(d)
        oracle = GradientOracle(ProblemInstance(theta_star, d, 1.0, 0.5), rng)
        total = np.zeros(d)
        total_sq = np.zeros(d)
        for _ in range(n):
            g = oracle.query(theta)
            total += g
            total_sq += g * g
        mean = total / n
        se = np.sqrt((total_sq / n - mean**2) / n)
        z = np.abs(mean - (theta - theta_star) / 3.0) / se
        return bool(np.all(z <= 3.0)), f"max |z| = {z.max():.2f} over {d} coordinates, n={n}"

    return _timed(6, "gradient oracle unbiasedness", body)


def _close(a, b, rel=1e-9) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=0.0 if b else 1e-12)


def schedule_examples() -> list[tuple[str, bool]]:
    """Hand-computed schedule values; each pair is ``(label, matched)``."""
    d3 = math.exp(3.0)
    unit = ProblemConstants(d=d3, sparsity_s=1, lipschitz_g=1.0, noise_sigma=1.0, rsc_gamma=1.0, omega=0.0)
    # ln d = 3 and G^2 + sigma^2 = 1/3, so (G^2 + sigma^2) ln d + omega^2 sigma^2 = 1
    sixth = math.sqrt(1.0 / 6.0)
    lnd1 = ProblemConstants(d=d3, sparsity_s=1, lipschitz_g=sixth, noise_sigma=sixth, rsc_gamma=1.0, omega=0.0)
    out = [
        ("epoch_length unit example = 9", epoch_length(unit, 1.0, 1, 1.0) == 9),
        ("epoch_lambda unit example = 1", _close(epoch_lambda(lnd1, 1.0, 1, 1), 1.0)),
        ("kappa_T unit example = ln d", _close(kappa_T(lnd1, 1.0, 2), 3.0)),
        ("omega_i(0, e) = sqrt(24)", _close(omega_i(0.0, math.e), math.sqrt(24.0))),
        ("omega_i(w, 1) = w", _close(omega_i(1.7, 1), 1.7)),
        ("ls_constants(1, 0.5, 1) G", _close(ls_constants(1.0, 0.5, 1.0)[0], 1.0 / 3.0)),
        ("ls_constants(1, 0.5, 1) sigma", _close(ls_constants(1.0, 0.5, 1.0)[1], math.sqrt(42.0))),
        ("logistic_constants gamma = 1/12", _close(logistic_constants(1.0, 0.0, 1.0 / 3.0)[2], 1.0 / 12.0)),
        ("logistic_constants sigma/G = 2", _close(logistic_constants(0.7, 1.0, 0.2)[1] / 0.7, 2.0)),
        ("approx_error((1, .5), {0}) = 0.25", _close(approx_error(np.array([1.0, 0.5]), [0]), 0.25)),
        ("effective_rsc(1, .01, 5) = 0.2", _close(effective_rsc(1.0, 0.01, 5), 0.2)),
    ]
    try:
        effective_rsc(1.0, 0.01, 7)
        out.append(("effective_rsc(1, .01, 7) rejected", False))
    except InfeasibleSparsityError:
        out.append(("effective_rsc(1, .01, 7) rejected", True))
    return out


def check_schedule() -> CheckResult:
    def body():
        results = schedule_examples()
        bad = [label for label, ok in results if not ok]
        return not bad, f"{len(results) - len(bad)}/{len(results)} examples" + (f"; failed: {bad}" if bad else "")

    return _timed(7, "schedule arithmetic", body)


def check_determinism(dim: int = 100, budget: int = 4000, trials: int = 3) -> CheckResult:
    def body():
        with tempfile.TemporaryDirectory() as tmp:
            outs = []
            for tag, workers in (("serial", 1), ("parallel", None)):
                spec = ExperimentSpec(dim=dim, budget=budget, trials=trials, seed=99, out=str(Path(tmp) / tag))
                n_jobs = trials * len(spec.algorithms)
                outs.append(run_experiment(spec, workers=workers or n_jobs))
            names = sorted(outs[0])
            diff = [k for k in names if not filecmp.cmp(outs[0][k], outs[1][k], shallow=False)]
            return not diff, f"{len(names)} files compared, {len(diff)} differ" + (f": {diff}" if diff else "")

    return _timed(8, "byte-identical reruns under parallelism", body)


CHECKS = (
    check_prox_kernel,
    check_feasibility,
    check_rates,
    check_final_ordering,
    check_variants,
    check_unbiasedness,
    check_schedule,
    check_determinism,
)


def run_all(echo=print) -> list[CheckResult]:
    results = []
    for fn in CHECKS:
        r = fn()
        if echo is not None:
            echo(r.line())
        results.append(r)
    return results
