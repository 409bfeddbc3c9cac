import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radar.geometry import (
    InvalidDimensionError,
    LpGeometry,
    ShapeError,
    conjugate_exponents,
    dual_averaging_step,
    l1_subgradient,
    lp_norm,
    project_l1_ball,
    prox_value,
)
from radar.verification import numerical_prox_step, prox_objective, random_prox_instance

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def vec(n_min=3, n_max=40):
    return st.integers(n_min, n_max).flatmap(lambda n: arrays(np.float64, n, elements=finite))


def test_exponents_at_1000():
    p, q = conjugate_exponents(1000)
    L = math.log(1000)
    assert p == pytest.approx(2 * L / (2 * L - 1), rel=1e-15)
    assert q == pytest.approx(2 * L, rel=1e-15)
    assert p == pytest.approx(1.0780, abs=1e-4)


@pytest.mark.parametrize("d", [0, 1, 2, 2.5, -4])
def test_exponents_reject_small_or_fractional(d):
    with pytest.raises(InvalidDimensionError):
        conjugate_exponents(d)


@given(st.integers(3, 10**7))
def test_exponents_are_conjugate(d):
    p, q = conjugate_exponents(d)
    assert 1 < p < 2 or d < 8  # p < 2 once 2 ln d > 2
    assert 1.0 / p + 1.0 / q == pytest.approx(1.0, abs=1e-12)


def test_a_prox():
    g = LpGeometry.from_dimension(50)
    assert g.a_prox == pytest.approx(math.e * math.log(50))


def test_with_exponent_bounds():
    assert LpGeometry.with_exponent(5, 2.0).q == 2.0
    with pytest.raises(ValueError):
        LpGeometry.with_exponent(5, 1.0)
    with pytest.raises(ValueError):
        LpGeometry.with_exponent(5, 2.5)


@given(vec(), st.sampled_from([1.0, 1.07, 1.5, 2.0, 7.3]))
def test_lp_norm_matches_numpy(x, p):
    assert lp_norm(x, p) == pytest.approx(np.linalg.norm(x, ord=p), rel=1e-10, abs=1e-300)


def test_lp_norm_no_overflow():
    x = np.full(10, 1e300)
    assert lp_norm(x, 1.5) == pytest.approx(1e300 * 10 ** (1 / 1.5))


@given(vec(3, 30))
def test_norm_sandwich(x):
    # ||x||_1 / e <= ||x||_p <= ||x||_1 for the dimension-tuned p
    p = LpGeometry.from_dimension(max(x.size, 3)).p
    n1 = np.abs(x).sum()
    assert lp_norm(x, p) <= n1 * (1 + 1e-12)
    assert lp_norm(x, p) >= n1 / math.e * (1 - 1e-12)


def test_prox_value_at_center_is_zero():
    g = LpGeometry.from_dimension(4)
    c = np.arange(4.0)
    assert prox_value(c, c, 1.0, g) == 0.0
    with pytest.raises(ValueError):
        prox_value(c, c, 0.0, g)


def test_step_zero_mu_returns_center():
    g = LpGeometry.from_dimension(5)
    c = np.array([1.0, -2.0, 0.0, 3.0, 4.0])
    out = dual_averaging_step(np.zeros(5), c, 2.0, 0.1, g)
    assert np.array_equal(out, c) and out is not c


def test_step_shape_errors():
    g = LpGeometry.from_dimension(5)
    with pytest.raises(ShapeError):
        dual_averaging_step(np.ones(4), np.zeros(5), 1.0, 1.0, g)
    with pytest.raises(ShapeError):
        dual_averaging_step(np.ones((5, 1)), np.zeros(5), 1.0, 1.0, g)
    with pytest.raises(ValueError):
        dual_averaging_step(np.ones(5), np.zeros(5), 0.0, 1.0, g)


def test_euclidean_case_is_projected_gradient_step():
    # with p = 2 the step is the Euclidean projection of c - eta R^2 mu onto the ball
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = 6
        g = LpGeometry.with_exponent(d, 2.0)
        mu, c = rng.standard_normal(d), rng.standard_normal(d)
        R, eta = rng.uniform(0.1, 3), rng.uniform(0.01, 2)
        v = -eta * R * R * mu
        nv = np.linalg.norm(v)
        expected = c + (v if nv <= R else v * R / nv)
        np.testing.assert_allclose(dual_averaging_step(mu, c, R, eta, g), expected, rtol=1e-12, atol=1e-12)


def test_interior_solution_is_stationary():
    d = 8
    g = LpGeometry.from_dimension(d)
    rng = np.random.default_rng(0)
    mu, c = rng.standard_normal(d), rng.standard_normal(d)
    R = 5.0
    eta = 1e-3
    th = dual_averaging_step(mu, c, R, eta, g)
    assert lp_norm(th - c, g.p) < R
    # gradient of eta <mu, th> + ||th - c||_p^2 / (2 (p-1) R^2) vanishes
    u = th - c
    n = lp_norm(u, g.p)
    grad = eta * mu + n ** (2 - g.p) * np.abs(u) ** (g.p - 1) * np.sign(u) / ((g.p - 1) * R * R)
    assert np.max(np.abs(grad)) < 1e-12


@pytest.mark.parametrize("d", [3, 7, 20])
def test_matches_numerical_minimiser(d):
    g = LpGeometry.from_dimension(d)
    rng = np.random.default_rng(d)
    for _ in range(10):
        mu, c, R, eta = random_prox_instance(d, rng)
        closed = dual_averaging_step(mu, c, R, eta, g)
        ref = numerical_prox_step(mu, c, R, eta, g)
        assert np.max(np.abs(closed - ref)) < 1e-6
        assert prox_objective(closed, mu, c, R, eta, g) <= prox_objective(ref, mu, c, R, eta, g) + 1e-8


@settings(max_examples=60, deadline=None)
@given(
    st.integers(3, 60),
    st.integers(0, 2**32 - 1),
    st.floats(1e-3, 1e3),
    st.floats(1e-4, 1e2),
)
def test_step_is_feasible_and_beats_random_points(d, seed, R, eta):
    g = LpGeometry.from_dimension(d)
    rng = np.random.default_rng(seed)
    mu, c = rng.standard_normal(d) * 10, rng.standard_normal(d)
    th = dual_averaging_step(mu, c, R, eta, g)
    assert lp_norm(th - c, g.p) <= R * (1 + 1e-9)
    best = prox_objective(th, mu, c, R, eta, g)
    for _ in range(20):
        z = rng.standard_normal(d)
        z *= R * rng.uniform() ** (1 / d) / lp_norm(z, g.p)
        assert best <= prox_objective(c + z, mu, c, R, eta, g) + 1e-9 * (1 + abs(best))


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 30), st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_step_invariant_to_trading_mu_scale_for_eta(d, seed, k):
    g = LpGeometry.from_dimension(d)
    rng = np.random.default_rng(seed)
    mu, c = rng.standard_normal(d), rng.standard_normal(d)
    a = dual_averaging_step(mu, c, 1.3, 0.2, g)
    b = dual_averaging_step(k * mu, c, 1.3, 0.2 / k, g)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def test_step_handles_huge_and_tiny_mu():
    g = LpGeometry.from_dimension(100)
    c = np.zeros(100)
    for scale in (1e-250, 1e250):
        mu = np.linspace(-1, 1, 100) * scale
        th = dual_averaging_step(mu, c, 1.0, 1.0, g)
        assert np.all(np.isfinite(th))


def test_l1_subgradient():
    np.testing.assert_array_equal(l1_subgradient([-2.0, 0.0, 3.0]), [-1.0, 0.0, 1.0])


def _cvxpy_l1_projection(v, radius):
    cp = pytest.importorskip("cvxpy")
    x = cp.Variable(v.size)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(x - v)), [cp.norm1(x) <= radius])
    prob.solve()
    return np.asarray(x.value).ravel()


def test_l1_projection_matches_cvxpy():
    rng = np.random.default_rng(11)
    for _ in range(15):
        n = int(rng.integers(2, 30))
        v = rng.standard_normal(n) * 3
        R = float(rng.uniform(0.1, 5))
        np.testing.assert_allclose(project_l1_ball(v, R), _cvxpy_l1_projection(v, R), atol=1e-6)


def test_l1_projection_known_value():
    # (2, 0) -> (1, 0) and (1, -1) -> (.5, -.5) on the unit l1 ball
    np.testing.assert_allclose(project_l1_ball(np.array([2.0, 0.0]), 1.0), [1.0, 0.0])
    np.testing.assert_allclose(project_l1_ball(np.array([1.0, -1.0]), 1.0), [0.5, -0.5])


@given(vec(1, 30), st.floats(1e-3, 1e3))
def test_l1_projection_properties(v, R):
    x = project_l1_ball(v, R)
    assert np.abs(x).sum() <= R * (1 + 1e-9)
    assert np.all(x * v >= 0)
    np.testing.assert_allclose(project_l1_ball(x, R), x, rtol=0, atol=1e-9 * max(1.0, R))
    if np.abs(v).sum() <= R:
        np.testing.assert_array_equal(x, v)


pairs = st.integers(2, 20).flatmap(
    lambda n: st.tuples(arrays(np.float64, n, elements=finite), arrays(np.float64, n, elements=finite))
)


@given(pairs, st.floats(0.1, 10))
def test_l1_projection_is_nonexpansive(ab, R):
    a, b = ab
    pa, pb = project_l1_ball(a, R), project_l1_ball(b, R)
    assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) * (1 + 1e-9) + 1e-9


def test_l1_projection_large_entries_tiny_radius():
    v = np.full(17, 683.04029791)
    x = project_l1_ball(v, 2.0**-8)
    assert np.abs(x).sum() <= 2.0**-8 * (1 + 1e-9)
    np.testing.assert_allclose(x, 2.0**-8 / 17, rtol=1e-6)
