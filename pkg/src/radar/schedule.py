"""Epoch lengths, regularisation levels, step multipliers and radii.

The schedule follows the doubling rule: epoch ``i`` runs on the ball of
radius ``R_i`` with ``R_{i+1}^2 = R_i^2 / 2`` and with a penalty
``lambda_i`` that shrinks in proportion to ``R_i``. Logarithms are natural
unless written ``log2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Union

import numpy as np

DOUBLING = "doubling"
CONSTANT = "constant"
ORACLE_HALVING = "oracle_halving"
PLAN_MODES = (DOUBLING, CONSTANT, ORACLE_HALVING)

RadiusFunction = Union[float, Callable[[float], float]]


class InfeasibleSparsityError(ValueError):
    pass


class BudgetTooSmallError(ValueError):
    pass


class InvalidSupportError(ValueError):
    pass


def _ls_lipschitz(radius: float, B: float) -> float:
    return ls_constants(B, 0.0, radius)[0]


def _ls_sigma(radius: float, B: float, eta_sq: float) -> float:
    return ls_constants(B, eta_sq, radius)[1]


@dataclass(frozen=True)
class ProblemConstants:
    """Assumption-level constants for one problem.

    ``lipschitz_g`` and ``noise_sigma`` are numbers or callables of a radius.
    With ``radius_doubling`` set (least squares) a callable is evaluated at
    ``2 R_i`` in epoch ``i``; otherwise at ``R_i``.
    """

    d: int
    sparsity_s: int
    lipschitz_g: RadiusFunction
    noise_sigma: RadiusFunction
    rsc_gamma: float
    rsc_tolerance: float = 0.0
    omega: float | None = None
    covariate_bound: float = 1.0
    cov_min_eig: float | None = None
    noise_eta: float = 0.0
    radius_doubling: bool = False

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("dimension must be at least 3")
        if self.sparsity_s < 1:
            raise ValueError("sparsity must be at least 1")
        if self.rsc_gamma <= 0:
            raise ValueError("rsc_gamma must be positive")
        if self.rsc_tolerance < 0:
            raise ValueError("rsc_tolerance must be nonnegative")
        if self.omega is None:
            # omega^2 = ln d, i.e. delta = 1 in the high-probability corollaries
            object.__setattr__(self, "omega", math.sqrt(math.log(self.d)))

    @property
    def log_d(self) -> float:
        return math.log(self.d)

    @property
    def a_prox(self) -> float:
        return math.e * math.log(self.d)

    @property
    def gamma_bar(self) -> float:
        return effective_rsc(self.rsc_gamma, self.rsc_tolerance, self.sparsity_s)

    def at_radius(self, radius: float) -> tuple[float, float]:
        """``(G_i, sigma_i)`` for an epoch of radius ``radius``."""
        r = 2.0 * radius if self.radius_doubling else radius
        g = self.lipschitz_g(r) if callable(self.lipschitz_g) else float(self.lipschitz_g)
        sig = self.noise_sigma(r) if callable(self.noise_sigma) else float(self.noise_sigma)
        return g, sig

    @classmethod
    def least_squares(cls, d, s, B=1.0, eta_sq=0.5, omega=None, **kw) -> "ProblemConstants":
        """Constants for least squares with Unif[-B, B] covariates."""
        return cls(
            d=d,
            sparsity_s=s,
            lipschitz_g=partial(_ls_lipschitz, B=B),
            noise_sigma=partial(_ls_sigma, B=B, eta_sq=eta_sq),
            rsc_gamma=kw.pop("rsc_gamma", B * B / 3.0),
            omega=omega,
            covariate_bound=B,
            cov_min_eig=B * B / 3.0,
            noise_eta=math.sqrt(eta_sq),
            radius_doubling=True,
            **kw,
        )

    @classmethod
    def logistic(cls, d, s, R1, B=1.0, cov_min_eig=None, omega=None, eta_sq=0.0, **kw) -> "ProblemConstants":
        cov_min_eig = B * B / 3.0 if cov_min_eig is None else cov_min_eig
        g, sig, gamma = logistic_constants(B, R1, cov_min_eig)
        return cls(
            d=d,
            sparsity_s=s,
            lipschitz_g=g,
            noise_sigma=sig,
            rsc_gamma=kw.pop("rsc_gamma", gamma),
            omega=omega,
            covariate_bound=B,
            cov_min_eig=cov_min_eig,
            noise_eta=math.sqrt(eta_sq),
            **kw,
        )


def effective_rsc(gamma: float, tau: float, s: int) -> float:
    gamma_bar = gamma - 16.0 * s * tau
    if gamma_bar <= 0:
        raise InfeasibleSparsityError(
            f"gamma - 16 s tau = {gamma_bar:g} is not positive (gamma={gamma}, tau={tau}, s={s})"
        )
    return gamma_bar


def omega_i(omega: float, epoch_index: int) -> float:
    if epoch_index < 1:
        raise ValueError("epoch_index starts at 1")
    return math.sqrt(omega * omega + 24.0 * math.log(epoch_index))


def _noise_term(c: ProblemConstants, g: float, sig: float, om: float) -> float:
    """``(G^2 + sigma^2) L + omega^2 sigma^2`` with ``L = ln d`` or ``A_psi`` when tau > 0."""
    scale = c.a_prox if c.rsc_tolerance > 0 else c.log_d
    return (g * g + sig * sig) * scale + om * om * sig * sig


def epoch_length(constants: ProblemConstants, R_i: float, epoch_index: int, c1: float = 1.0) -> int:
    """Iterations needed in epoch ``i`` to halve the squared radius.

    With ``tau > 0`` the RSC-tolerant form is used, where ``gamma`` is
    replaced by ``gamma_bar^2 / gamma`` and ``ln d`` by ``A_psi``.
    """
    if R_i <= 0:
        raise ValueError("R_i must be positive")
    c = constants
    g, sig = c.at_radius(R_i)
    noise = _noise_term(c, g, sig, omega_i(c.omega, epoch_index))
    s = c.sparsity_s
    if c.rsc_tolerance > 0:
        gb = c.gamma_bar
        value = s * s * c.rsc_gamma**2 / (gb**4 * R_i * R_i) * noise + c.rsc_gamma * c.a_prox / gb
    else:
        value = s * s / (c.rsc_gamma**2 * R_i * R_i) * noise + c.log_d
    return max(1, math.ceil(c1 * value))


def epoch_lambda(constants: ProblemConstants, R_i: float, T_i: int, epoch_index: int) -> float:
    if T_i < 1 or R_i <= 0:
        raise ValueError("need T_i >= 1 and R_i > 0")
    c = constants
    g, sig = c.at_radius(R_i)
    noise = _noise_term(c, g, sig, omega_i(c.omega, epoch_index))
    gamma = c.gamma_bar if c.rsc_tolerance > 0 else c.rsc_gamma
    lam_sq = R_i * gamma / (c.sparsity_s * math.sqrt(T_i)) * math.sqrt(noise)
    return math.sqrt(lam_sq)


def step_multiplier(constants: ProblemConstants, R_i: float, lambda_i: float) -> float:
    """``alpha_i``; the step at iteration ``t`` (1-based) of the epoch is ``alpha_i / sqrt(t)``."""
    if R_i <= 0:
        raise ValueError("R_i must be positive")
    c = constants
    g, sig = c.at_radius(R_i)
    scale = c.a_prox if c.rsc_tolerance > 0 else c.log_d
    denom = g * g + lambda_i * lambda_i + sig * sig
    if denom <= 0:
        raise ValueError("G^2 + lambda^2 + sigma^2 must be positive")
    return 5.0 * R_i * math.sqrt(scale / denom)


def kappa_T(constants: ProblemConstants, R1: float, T: int, d: int | None = None) -> float:
    """Epoch-count shorthand; ``kappa_T / ln d`` is the number of affordable halvings."""
    c = constants
    d = c.d if d is None else d
    log_d = math.log(d)
    g, sig = c.at_radius(R1)
    s = c.sparsity_s
    if c.rsc_tolerance > 0:
        gb = c.gamma_bar
        arg = gb**4 * R1 * R1 * T / (c.rsc_gamma**2 * s * s * ((g * g + sig * sig) * c.a_prox + c.omega**2 * sig * sig))
        factor = c.rsc_gamma * log_d / gb
    else:
        arg = c.rsc_gamma**2 * R1 * R1 * T / (s * s * ((g * g + sig * sig) * log_d + c.omega**2 * sig * sig))
        factor = log_d
    if not arg > 1.0:
        raise BudgetTooSmallError(f"log2 argument {arg:g} <= 1: budget T={T} too small for one halving")
    return math.log2(arg) * factor


def ls_constants(B: float, eta_sq: float, R: float) -> tuple[float, float]:
    """``(G(R), sigma(R))`` for least squares with Unif[-B, B] covariates.

    ``G(R) = rho(Sigma) R`` with ``rho(Sigma) = B^2 / 3`` and
    ``sigma(R)^2 = 24 B^4 R^2 + 36 B^2 eta^2``.
    """
    if R < 0:
        raise ValueError("R must be nonnegative")
    return B * B / 3.0 * R, math.sqrt(24.0 * B**4 * R * R + 36.0 * B * B * eta_sq)


def logistic_curvature(a: float) -> float:
    """Second derivative of ``log(1 + exp(-a))``: ``exp(a) / (1 + exp(a))^2``."""
    a = -abs(a)
    e = math.exp(a)
    return e / (1.0 + e) ** 2


def logistic_constants(B: float, R1: float, cov_min_eig: float) -> tuple[float, float, float]:
    if B <= 0:
        raise ValueError("B must be positive")
    return B, 2.0 * B, logistic_curvature(B * R1) * cov_min_eig


def approx_error(theta_star, support, tau: float = 0.0, gamma_bar: float = 1.0) -> float:
    """``||theta*_{S^c}||_1^2 / |S| * (1 + |S| tau / gamma_bar)``."""
    theta_star = np.asarray(theta_star, dtype=float)
    support = np.unique(np.asarray(list(support), dtype=int))
    if support.size == 0:
        raise InvalidSupportError("support must be nonempty")
    off = np.ones(theta_star.size, dtype=bool)
    off[support] = False
    tail = float(np.abs(theta_star[off]).sum())
    s = support.size
    return tail * tail / s * (1.0 + s * tau / gamma_bar)


def fixed_lambda(eta: float, d: int, T: int) -> float:
    """Single penalty ``4 eta sqrt(ln d / T)`` used by the fixed-lambda baselines."""
    return 4.0 * eta * math.sqrt(math.log(d) / T)


@dataclass(frozen=True)
class Epoch:
    index: int
    length: int
    radius_sq: float
    lam: float
    alpha: float

    @property
    def radius(self) -> float:
        return math.sqrt(self.radius_sq)


@dataclass
class EpochPlan:
    """Epoch parameters for a run.

    ``epochs`` lists planned epochs for the doubling and constant modes. In
    ``oracle_halving`` mode the driver ends epochs adaptively and asks
    :meth:`epoch` for the parameters of each one as it starts.
    """

    mode: str
    total_budget: int
    constants: ProblemConstants
    R1: float
    c1: float = 1.0
    epochs: list[Epoch] = field(default_factory=list)
    constant_length: int | None = None
    lambda_override: float | None = None

    def epoch(self, i: int) -> Epoch:
        """Parameters of epoch ``i`` (1-based) ignoring the budget."""
        if self.mode != ORACLE_HALVING and i <= len(self.epochs):
            return self.epochs[i - 1]
        radius_sq = self.R1 * self.R1
        for _ in range(i - 1):
            radius_sq = radius_sq / 2.0
        radius = math.sqrt(radius_sq)
        doubling_length = epoch_length(self.constants, radius, i, self.c1)
        length = doubling_length if self.constant_length is None else self.constant_length
        lam = self.lambda_override
        if lam is None:
            # the penalty follows the doubling rule in every mode
            lam = epoch_lambda(self.constants, radius, doubling_length, i)
        alpha = step_multiplier(self.constants, radius, lam)
        return Epoch(i, length, radius_sq, lam, alpha)

    @property
    def planned_iterations(self) -> int:
        return sum(e.length for e in self.epochs)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch_index", "T_i", "R_i", "lambda_i", "alpha_i"])
            for e in self.epochs:
                w.writerow([e.index, e.length, repr(e.radius), repr(e.lam), repr(e.alpha)])


def constant_epoch_length(constants: ProblemConstants, R1: float, T: int) -> int:
    """Common epoch length for the constant schedule.

    ``max(ceil(T ln d / kappa_T), ceil(ln T))`` when ``kappa_T`` is defined.
    Otherwise the budget is split into ``ceil(ln T)`` equal epochs.
    """
    n_epochs = max(1, math.ceil(math.log(T))) if T > 1 else 1
    try:
        kappa = kappa_T(constants, R1, T)
    except BudgetTooSmallError:
        return max(1, math.ceil(T / n_epochs))
    return max(math.ceil(T * constants.log_d / kappa), n_epochs)


def build_plan(
    constants: ProblemConstants,
    R1: float,
    T: int,
    mode: str = DOUBLING,
    c1: float = 1.0,
    lambda_override: float | None = None,
    constant_length: int | None = None,
) -> EpochPlan:
    """Plan epochs for a budget of ``T`` iterations.

    The last planned epoch is truncated to fit the budget. ``lambda_override``
    fixes the penalty in every epoch (the fixed-lambda baseline).
    """
    if T < 1:
        raise ValueError("budget must be at least 1")
    if R1 <= 0:
        raise ValueError("R1 must be positive")
    if mode not in PLAN_MODES:
        raise ValueError(f"unknown plan mode {mode!r}")
    if mode == CONSTANT and constant_length is None:
        constant_length = constant_epoch_length(constants, R1, T)
    plan = EpochPlan(mode, T, constants, R1, c1, constant_length=constant_length, lambda_override=lambda_override)
    if mode == ORACLE_HALVING:
        return plan
    used = 0
    i = 1
    while used < T:
        e = plan.epoch(i)
        if used + e.length > T:
            e = replace(e, length=T - used)
        plan.epochs.append(e)
        used += e.length
        i += 1
    return plan
