import numpy as np
import pytest

from radar.drivers import ALGORITHMS, AlgorithmConfig, halving_satisfied, run, run_radar, run_sgd
from radar.geometry import LpGeometry, lp_norm
from radar.oracles import GradientOracle, ProblemInstance, make_sparse_target
from radar.schedule import ProblemConstants, fixed_lambda


def problem(d=100, s=5, seed=0):
    rng = np.random.default_rng(seed)
    th = make_sparse_target(d, s, rng)
    return ProblemInstance(th, d), float(np.abs(th).sum()), rng


def cfg(kind, R1, T, d=100, s=5, **kw):
    kw.setdefault("c1", 4096)
    return AlgorithmConfig(kind, R1, T, ProblemConstants.least_squares(d, s), **kw)


@pytest.mark.parametrize("kind", ALGORITHMS)
@pytest.mark.parametrize("mode", ["theoretical", "oracle_halving"])
def test_budget_is_spent_exactly(kind, mode):
    inst, R1, rng = problem()
    oracle = GradientOracle(inst, rng)
    res = run(oracle, cfg(kind, R1, 3000, epoch_mode=mode))
    assert oracle.n_queries == 3000 == res.iterations
    assert sum(e.length for e in res.plan_used.epochs) == 3000
    assert res.trace.iterations()[0] == 0 and res.trace.iterations()[-1] == 3000
    assert res.trace.boundaries[-1] == 3000


@pytest.mark.parametrize("kind", ["radar", "radar_const", "eda", "rda"])
def test_iterates_feasible_and_radius_chain(kind):
    inst, R1, rng = problem()
    p = LpGeometry.from_dimension(100).p
    ratios = []
    res = run(
        GradientOracle(inst, rng),
        cfg(kind, R1, 4000, epoch_mode="oracle_halving" if kind in ("radar", "eda") else "theoretical"),
        on_iterate=lambda th, st: ratios.append(lp_norm(th - st.center, p) / st.radius),
    )
    assert max(ratios) <= 1 + 1e-9
    sq = [e.radius_sq for e in res.plan_used.epochs]
    assert sq[0] == R1 * R1
    assert all(b == a / 2 for a, b in zip(sq, sq[1:]))


def test_oracle_halving_centers_halve():
    inst, R1, rng = problem(d=200, s=5, seed=3)
    res = run_radar(GradientOracle(inst, rng), cfg("radar", R1, 20000, d=200, epoch_mode="oracle_halving"))
    p = LpGeometry.from_dimension(200).p
    # drop the trailing partial epoch, which may stop on the budget
    done = res.centers[: len(res.trace.boundaries)]
    forced = set(res.trace.forced_terminations)
    assert not forced
    assert len(done) >= 3
    assert halving_satisfied(res, inst.theta_star, done, p)


def test_eda_and_rda_use_fixed_lambda():
    inst, R1, rng = problem()
    lam = fixed_lambda(np.sqrt(0.5), 100, 3000)
    for kind in ("eda", "rda"):
        res = run(GradientOracle(inst, np.random.default_rng(1)), cfg(kind, R1, 3000))
        assert {e.lam for e in res.plan_used.epochs} == {lam}
    assert len(run(GradientOracle(inst, rng), cfg("rda", R1, 3000)).plan_used.epochs) == 1


def test_radar_lambda_shrinks():
    inst, R1, rng = problem()
    # radius-free constants keep the first epochs short enough to fit several in the budget
    c = ProblemConstants(d=100, sparsity_s=5, lipschitz_g=1.0, noise_sigma=1.0, rsc_gamma=1 / 3)
    res = run(GradientOracle(inst, rng), AlgorithmConfig("radar", R1, 20000, c))
    lams = [e.lam for e in res.plan_used.epochs]
    assert len(lams) >= 2 and all(b < a for a, b in zip(lams, lams[1:]))


def test_sgd_stays_in_l1_ball():
    inst, R1, rng = problem()
    norms = []
    run_sgd(GradientOracle(inst, rng), cfg("sgd", R1, 2000), on_iterate=lambda th, _: norms.append(np.abs(th).sum()))
    assert max(norms) <= R1 * (1 + 1e-9)


def test_runs_reduce_error():
    inst, R1, _ = problem(d=100, s=5, seed=4)
    start = float(inst.theta_star @ inst.theta_star)
    for kind in ALGORITHMS:
        res = run(GradientOracle(inst, np.random.default_rng(7)), cfg(kind, R1, 5000, epoch_mode="oracle_halving"))
        assert res.trace.errors()[-1] < 0.5 * start, kind


def test_same_seed_same_result():
    inst, R1, _ = problem()
    a = run(GradientOracle(inst, 9), cfg("radar", R1, 2000))
    b = run(GradientOracle(inst, 9), cfg("radar", R1, 2000))
    assert a.trace.points == b.trace.points
    np.testing.assert_array_equal(a.final_iterate, b.final_iterate)


def test_halving_mode_needs_theta_star():
    X = np.random.default_rng(0).standard_normal((20, 10))
    oracle = GradientOracle(ProblemInstance(None, 10), 0, "finite_pool", (X, X[:, 0]))
    with pytest.raises(ValueError):
        run(oracle, cfg("radar", 1.0, 100, d=10, s=2, epoch_mode="oracle_halving"))
    # the theoretical schedule works without theta* and traces the objective
    res = run(oracle, cfg("radar", 1.0, 100, d=10, s=2))
    assert res.trace.metric == "objective"


@pytest.mark.parametrize(
    "kw",
    [dict(kind="adam"), dict(R1=0.0), dict(total_budget=0), dict(epoch_mode="fast"), dict(trials=0)],
)
def test_config_validation(kw):
    base = dict(kind="radar", R1=1.0, total_budget=10, constants=ProblemConstants.least_squares(10, 2))
    base.update(kw)
    with pytest.raises(ValueError):
        AlgorithmConfig(**base)


def test_driver_rejects_wrong_kind():
    inst, R1, rng = problem()
    with pytest.raises(ValueError):
        run_sgd(GradientOracle(inst, rng), cfg("radar", R1, 10))
