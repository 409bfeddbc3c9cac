"""Numerical reference solutions used to validate the closed-form kernels.

Nothing here is on the hot path. The prox-step reference is a generic SQP
solve polished by accelerated projected gradient; its only geometric
ingredient is a bisection-based Euclidean projection onto an l_p ball, so it
shares no algebra with :func:`radar.geometry.dual_averaging_step`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .geometry import LpGeometry, dual_averaging_step, lp_norm


def _shrink(v_abs: np.ndarray, nu: float, p: float, iters: int = 200) -> np.ndarray:
    """Solve ``a + nu a^(p-1) = v`` for ``a`` in [0, v] coordinatewise (monotone, bisection)."""
    lo = np.zeros_like(v_abs)
    hi = v_abs.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        over = mid + nu * mid ** (p - 1.0) > v_abs
        hi = np.where(over, mid, hi)
        lo = np.where(over, lo, mid)
    return 0.5 * (lo + hi)


def project_lp_ball(v, center, radius: float, p: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{x : ||x - center||_p <= radius}``.

    KKT gives ``|x_j| + nu |x_j|^(p-1) = |v_j|`` for a multiplier ``nu``
    chosen so the constraint is tight; both levels are solved by bisection.
    """
    v = np.asarray(v, dtype=float)
    center = np.asarray(center, dtype=float)
    w = v - center
    if lp_norm(w, p) <= radius:
        return v.copy()
    aw = np.abs(w)
    lo, hi = 0.0, 1.0
    while lp_norm(_shrink(aw, hi, p), p) > radius:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if lp_norm(_shrink(aw, mid, p), p) > radius:
            lo = mid
        else:
            hi = mid
    x = np.sign(w) * _shrink(aw, hi, p)
    return center + x


def prox_objective(theta, mu, center, radius: float, eta: float, geom: LpGeometry) -> float:
    """``eta <mu, theta> + ||theta - center||_p^2 / (2 (p - 1) R^2)``."""
    diff = np.asarray(theta, dtype=float) - center
    dist = lp_norm(diff, geom.p)
    return float(eta * np.dot(mu, theta) + dist * dist / (2.0 * (geom.p - 1.0) * radius * radius))


def _objective_grad(theta, mu, center, radius, eta, geom):
    p = geom.p
    diff = theta - center
    n = lp_norm(diff, p)
    if n == 0.0:
        return eta * mu
    # grad of ||u||_p^2 / 2 is ||u||_p^(2-p) |u|^(p-1) sign(u)
    g = n ** (2.0 - p) * np.abs(diff) ** (p - 1.0) * np.sign(diff)
    return eta * mu + g / ((p - 1.0) * radius * radius)


def _sqp_start(mu, center, radius, eta, geom) -> np.ndarray:
    # variables scaled so the feasible set is the unit l_p ball
    p = geom.p

    def f(z):
        return prox_objective(center + radius * z, mu, center, radius, eta, geom)

    def g(z):
        return radius * _objective_grad(center + radius * z, mu, center, radius, eta, geom)

    cons = {
        "type": "ineq",
        "fun": lambda z: 1.0 - np.sum(np.abs(z) ** p),
        "jac": lambda z: -p * np.abs(z) ** (p - 1.0) * np.sign(z),
    }
    res = minimize(f, np.zeros_like(center), jac=g, constraints=[cons], method="SLSQP",
                   options={"ftol": 1e-16, "maxiter": 1000})
    return project_lp_ball(center + radius * res.x, center, radius, p)


def numerical_prox_step(mu, center, radius: float, eta: float, geom: LpGeometry, tol: float = 1e-10,
                        max_iter: int = 5000, start=None) -> np.ndarray:
    """Minimise the prox objective numerically.

    An SLSQP solve (or ``start``) seeds accelerated projected gradient with
    backtracking and momentum restarts, which runs until a step moves the
    point by less than ``tol`` in sup norm or ``max_iter`` is reached.
    """
    mu = np.asarray(mu, dtype=float)
    center = np.asarray(center, dtype=float)

    def f(x):
        return prox_objective(x, mu, center, radius, eta, geom)

    def grad(x):
        return _objective_grad(x, mu, center, radius, eta, geom)

    if start is None:
        x = _sqp_start(mu, center, radius, eta, geom)
    else:
        x = project_lp_ball(np.asarray(start, dtype=float), center, radius, geom.p)
    y, t_mom, L = x.copy(), 1.0, 1.0 / ((geom.p - 1.0) * radius * radius)
    fx = f(x)
    for _ in range(max_iter):
        gy = grad(y)
        fy = f(y)
        while True:
            x_new = project_lp_ball(y - gy / L, center, radius, geom.p)
            step = x_new - y
            if f(x_new) <= fy + gy @ step + 0.5 * L * (step @ step) + 1e-15 * abs(fy):
                break
            L *= 2.0
        f_new = f(x_new)
        if f_new > fx:
            if t_mom == 1.0:
                break  # a plain step from x no longer helps
            y, t_mom = x.copy(), 1.0
            continue
        moved = float(np.max(np.abs(x_new - x)))
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = x_new + ((t_mom - 1.0) / t_next) * (x_new - x)
        x, fx, t_mom = x_new, f_new, t_next
        L *= 0.9
        if moved < tol:
            break
    return x


@dataclass
class ProxCheckResult:
    d: int
    instances: int
    max_linf: float
    max_objective_gap: float
    max_violation: float

    def passed(self, linf_tol: float = 1e-6, gap_tol: float = 1e-8) -> bool:
        return self.max_linf <= linf_tol and self.max_objective_gap <= gap_tol and self.max_violation <= 1e-9


def random_prox_instance(d: int, rng: np.random.Generator):
    """Random ``(mu, center, radius, eta)``; about half land on the ball boundary."""
    mu = rng.standard_normal(d) * 10.0 ** rng.uniform(-1, 1)
    center = rng.standard_normal(d)
    radius = 10.0 ** rng.uniform(-1, 1)
    eta = 10.0 ** rng.uniform(-2, 1) / (np.abs(mu).sum() * radius)
    return mu, center, radius, eta


def prox_check(d: int, instances: int = 100, seed: int = 0) -> ProxCheckResult:
    """Compare the closed-form step with :func:`numerical_prox_step` on random instances.

    The objective gap is ``f(closed) - f(numeric)``; a negative gap means the
    closed form did better and counts as zero.
    """
    geom = LpGeometry.from_dimension(d)
    rng = np.random.default_rng([seed, d])
    worst_inf = worst_gap = worst_viol = 0.0
    for _ in range(instances):
        mu, center, radius, eta = random_prox_instance(d, rng)
        closed = dual_averaging_step(mu, center, radius, eta, geom)
        ref = numerical_prox_step(mu, center, radius, eta, geom)
        worst_inf = max(worst_inf, float(np.max(np.abs(closed - ref))))
        gap = prox_objective(closed, mu, center, radius, eta, geom) - prox_objective(ref, mu, center, radius, eta, geom)
        worst_gap = max(worst_gap, gap)
        worst_viol = max(worst_viol, lp_norm(closed - center, geom.p) / radius - 1.0)
    return ProxCheckResult(d, instances, worst_inf, worst_gap, worst_viol)
