"""Problem instances and stochastic gradient oracles.

Two losses are supported, least squares ``(y - <theta, x>)^2 / 2`` and the
logistic loss ``log(1 + exp(-y <theta, x>))``. An oracle either draws a fresh
sample per query from the generative model or resamples, with replacement,
from a fixed pool of observations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import expit

LEAST_SQUARES = "least_squares"
LOGISTIC = "logistic"
FRESH_SAMPLE = "fresh_sample"
FINITE_POOL = "finite_pool"


class InvalidSparsityError(ValueError):
    pass


class InvalidLabelError(ValueError):
    pass


class EmptyPoolError(ValueError):
    pass


class Sample(NamedTuple):
    x: np.ndarray
    y: float


@dataclass
class ProblemInstance:
    """Ground truth and data-generating constants for one problem."""

    theta_star: np.ndarray | None
    d: int
    covariate_bound: float = 1.0
    noise_std_sq: float = 0.5
    loss_kind: str = LEAST_SQUARES
    s: int = field(default=-1)

    def __post_init__(self):
        if self.covariate_bound <= 0:
            raise ValueError("covariate_bound must be positive")
        if self.noise_std_sq < 0:
            raise ValueError("noise_std_sq must be nonnegative")
        if self.loss_kind not in (LEAST_SQUARES, LOGISTIC):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        if self.theta_star is not None:
            self.theta_star = np.asarray(self.theta_star, dtype=float)
            if self.theta_star.shape != (self.d,):
                raise ValueError("theta_star must have length d")
            self.s = int(np.count_nonzero(self.theta_star))


def default_sparsity(d: int) -> int:
    """``ceil(ln d)``, the sparsity level used in the least-squares simulations."""
    return int(math.ceil(math.log(d)))


def make_sparse_target(d: int, s: int, rng: np.random.Generator, magnitude: str = "sign") -> np.ndarray:
    """Random ``s``-sparse vector on a uniformly chosen support.

    ``magnitude`` picks the nonzero values: ``"sign"`` draws from {-1, +1},
    ``"gaussian"`` from N(0, 1) and ``"uniform"`` from +/-Unif[0.5, 1.5].
    """
    if not 1 <= s <= d:
        raise InvalidSparsityError(f"sparsity must lie in [1, {d}], got {s}")
    support = rng.choice(d, size=s, replace=False)
    if magnitude == "sign":
        values = rng.choice(np.array([-1.0, 1.0]), size=s)
    elif magnitude == "gaussian":
        values = rng.standard_normal(s)
        values[values == 0.0] = 1.0
    elif magnitude == "uniform":
        values = rng.choice(np.array([-1.0, 1.0]), size=s) * rng.uniform(0.5, 1.5, size=s)
    else:
        raise ValueError(f"unknown magnitude rule {magnitude!r}")
    theta = np.zeros(d)
    theta[support] = values
    return theta


def sample_ls(instance: ProblemInstance, rng: np.random.Generator) -> Sample:
    b = instance.covariate_bound
    x = rng.uniform(-b, b, size=instance.d)
    w = rng.normal(0.0, math.sqrt(instance.noise_std_sq))
    return Sample(x, float(x @ instance.theta_star) + w)


def sample_logistic(instance: ProblemInstance, rng: np.random.Generator) -> Sample:
    """Label ``sign(<x, theta*> + w)``; a zero margin is labelled +1."""
    b = instance.covariate_bound
    x = rng.uniform(-b, b, size=instance.d)
    w = rng.normal(0.0, math.sqrt(instance.noise_std_sq))
    return Sample(x, 1.0 if float(x @ instance.theta_star) + w >= 0 else -1.0)


def ls_gradient(theta: np.ndarray, sample: Sample) -> np.ndarray:
    x, y = sample
    return (float(x @ theta) - y) * x


def logistic_gradient(theta: np.ndarray, sample: Sample) -> np.ndarray:
    x, y = sample
    if y not in (-1.0, 1.0):
        raise InvalidLabelError(f"logistic labels must be -1 or +1, got {y!r}")
    # -y x / (1 + exp(y <theta, x>)) == -y x * expit(-y <theta, x>)
    return (-y * float(expit(-y * float(x @ theta)))) * x


def ls_loss(theta, X, y) -> float:
    r = X @ theta - y
    return float(0.5 * np.mean(r * r))


def logistic_loss(theta, X, y) -> float:
    return float(np.mean(np.logaddexp(0.0, -y * (X @ theta))))


_GRADIENTS = {LEAST_SQUARES: ls_gradient, LOGISTIC: logistic_gradient}
_SAMPLERS = {LEAST_SQUARES: sample_ls, LOGISTIC: sample_logistic}
_LOSSES = {LEAST_SQUARES: ls_loss, LOGISTIC: logistic_loss}


class GradientOracle:
    """Stochastic (sub)gradient source for one problem instance.

    In ``fresh_sample`` mode each query draws a new sample from the generative
    model; in ``finite_pool`` mode it picks a pool row uniformly at random with
    replacement. Each query consumes exactly one sample from ``rng``. An
    oracle is single-consumer; give every run its own instance.
    """

    def __init__(self, instance: ProblemInstance, rng, mode: str = FRESH_SAMPLE, pool=None):
        if mode not in (FRESH_SAMPLE, FINITE_POOL):
            raise ValueError(f"unknown oracle mode {mode!r}")
        self.instance = instance
        self.mode = mode
        self.rng = np.random.default_rng(rng)
        self._grad = _GRADIENTS[instance.loss_kind]
        self._sampler = _SAMPLERS[instance.loss_kind]
        self.n_queries = 0
        if mode == FINITE_POOL:
            if pool is None:
                raise EmptyPoolError("finite_pool mode requires a pool")
            X, y = pool
            X = np.atleast_2d(np.asarray(X, dtype=float))
            y = np.asarray(y, dtype=float).ravel()
            if X.shape[0] != y.shape[0]:
                raise ValueError("pool covariates and responses differ in length")
            if X.shape[0] and X.shape[1] != instance.d:
                raise ValueError("pool covariates do not match the instance dimension")
            if instance.loss_kind == LOGISTIC and not np.all(np.isin(y, (-1.0, 1.0))):
                raise InvalidLabelError("logistic pool labels must be -1 or +1")
            self.pool = (X, y)
        else:
            if instance.theta_star is None:
                raise ValueError("fresh_sample mode needs theta_star to generate data")
            self.pool = None

    @property
    def theta_star(self):
        return self.instance.theta_star

    def draw(self) -> Sample:
        self.n_queries += 1
        if self.mode == FRESH_SAMPLE:
            return self._sampler(self.instance, self.rng)
        X, y = self.pool
        if X.shape[0] == 0:
            raise EmptyPoolError("cannot sample from an empty pool")
        i = int(self.rng.integers(X.shape[0]))
        return Sample(X[i], float(y[i]))

    def query(self, theta: np.ndarray) -> np.ndarray:
        return self._grad(theta, self.draw())

    def objective(self, theta: np.ndarray) -> float:
        """Empirical loss over the pool (finite_pool mode only)."""
        if self.pool is None:
            raise ValueError("objective needs a pool")
        X, y = self.pool
        return _LOSSES[self.instance.loss_kind](theta, X, y)


def query(oracle: GradientOracle, theta: np.ndarray) -> np.ndarray:
    return oracle.query(theta)


def make_pool(instance: ProblemInstance, n: int, rng: np.random.Generator):
    """Draw ``n`` samples from the generative model as ``(X, y)`` arrays."""
    sampler = _SAMPLERS[instance.loss_kind]
    X = np.empty((n, instance.d))
    y = np.empty(n)
    for i in range(n):
        X[i], y[i] = sampler(instance, rng)
    return X, y


def write_pool_csv(path, X, y) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x_{j + 1}" for j in range(X.shape[1])] + ["y"])
        for row, target in zip(X, y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def read_pool_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "y" or any(h != f"x_{j + 1}" for j, h in enumerate(header[:-1])):
            raise ValueError(f"{path}: expected header x_1..x_d,y")
        rows = [[float(v) for v in r] for r in reader if r]
    d = len(header) - 1
    data = np.array(rows, dtype=float).reshape(-1, d + 1)
    return data[:, :d], data[:, d]
