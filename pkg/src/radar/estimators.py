"""scikit-learn style estimators over a finite sample pool.

``fit`` treats the rows of ``X`` as a pool and runs one of the stochastic
methods on it, resampling rows with replacement. Without a known target the
halving rule is unavailable, so RADAR runs on its planned schedule; the
default ``radar_const`` needs the fewest problem constants to behave well.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .drivers import ALGORITHMS, AlgorithmConfig, run
from .oracles import FINITE_POOL, LEAST_SQUARES, LOGISTIC, GradientOracle, ProblemInstance, default_sparsity
from .schedule import ProblemConstants


def _check_params(est, n_features: int) -> None:
    if est.algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {est.algorithm!r}")
    if n_features < 3:
        raise ValueError("need at least 3 features")
    if est.n_iter is not None and est.n_iter < 1:
        raise ValueError("n_iter must be positive")
    if est.radius is not None and est.radius <= 0:
        raise ValueError("radius must be positive")
    if est.sparsity is not None and not 1 <= est.sparsity <= n_features:
        raise ValueError("sparsity must lie in [1, n_features]")
    if est.c1 <= 0:
        raise ValueError("c1 must be positive")


class _PoolEstimator(BaseEstimator):
    _loss = LEAST_SQUARES

    def __init__(self, algorithm="radar_const", n_iter=None, radius=None, sparsity=None, c1=4096.0,
                 noise_var=None, random_state=None):
        self.algorithm = algorithm
        self.n_iter = n_iter
        self.radius = radius
        self.sparsity = sparsity
        self.c1 = c1
        self.noise_var = noise_var
        self.random_state = random_state

    def _default_radius(self, X, y, s, gamma) -> float:
        raise NotImplementedError

    def _constants(self, d, s, B, R1, X, y) -> ProblemConstants:
        raise NotImplementedError

    def _fit_pool(self, X, y):
        n, d = X.shape
        _check_params(self, d)
        s = self.sparsity or default_sparsity(d)
        B = float(np.abs(X).max()) or 1.0
        gamma = max(float(np.min(np.mean(X * X, axis=0))), 1e-12)
        R1 = self.radius or self._default_radius(X, y, s, gamma)
        T = self.n_iter or max(20 * n, 2000)
        constants = self._constants(d, s, B, R1, X, y)
        inst = ProblemInstance(None, d, B, constants.noise_eta**2, self._loss)
        rng = np.random.default_rng(self.random_state)
        oracle = GradientOracle(inst, rng, FINITE_POOL, (X, y))
        config = AlgorithmConfig(self.algorithm, R1, T, constants, c1=self.c1)
        result = run(oracle, config)
        self.coef_ = result.final_iterate
        self.n_iter_ = result.iterations
        self.radius_ = R1
        self.trace_ = result.trace
        self.n_features_in_ = d
        return self


class RadarRegressor(RegressorMixin, _PoolEstimator):
    """Sparse least-squares regression by annealed epoch dual averaging.

    Parameters
    ----------
    algorithm : {"radar_const", "radar", "eda", "rda", "sgd"}
    n_iter : int, optional
        Oracle queries; defaults to ``max(20 n, 2000)``.
    radius : float, optional
        Initial l1-scale radius ``R1``. By default ``sqrt(s var(y) / gamma)``,
        an upper bound on ``||theta||_1`` for an ``s``-sparse ``theta`` when
        ``gamma`` is the smallest feature second moment.
    sparsity : int, optional
        Assumed support size ``s``; defaults to ``ceil(ln d)``.
    c1 : float
        Epoch-length constant.
    noise_var : float, optional
        Response noise variance; defaults to ``var(y)``, an upper bound.
    fit_intercept : bool
        Centre ``X`` and ``y`` before fitting.
    """

    def __init__(self, algorithm="radar_const", n_iter=None, radius=None, sparsity=None, c1=4096.0,
                 noise_var=None, fit_intercept=True, random_state=None):
        super().__init__(algorithm, n_iter, radius, sparsity, c1, noise_var, random_state)
        self.fit_intercept = fit_intercept

    def _default_radius(self, X, y, s, gamma):
        return max(math.sqrt(s * float(np.var(y)) / gamma), 1e-8)

    def _constants(self, d, s, B, R1, X, y):
        eta_sq = float(np.var(y)) if self.noise_var is None else float(self.noise_var)
        return ProblemConstants.least_squares(d, s, B, eta_sq)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if self.fit_intercept:
            self._x_mean, y_mean = X.mean(axis=0), float(y.mean())
        else:
            self._x_mean, y_mean = np.zeros(X.shape[1]), 0.0
        self._fit_pool(X - self._x_mean, y - y_mean)
        self.intercept_ = y_mean - float(self._x_mean @ self.coef_)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_ + self.intercept_


class RadarClassifier(ClassifierMixin, _PoolEstimator):
    """Sparse binary logistic regression; no intercept is fitted.

    Takes the same parameters as :class:`RadarRegressor` apart from
    ``fit_intercept``. ``radius`` defaults to ``s``.
    """

    _loss = LOGISTIC

    def _default_radius(self, X, y, s, gamma):
        return float(s)

    def _constants(self, d, s, B, R1, X, y):
        gamma = max(float(np.min(np.mean(X * X, axis=0))), 1e-12)
        eta_sq = 0.0 if self.noise_var is None else float(self.noise_var)
        return ProblemConstants.logistic(d, s, R1, B, cov_min_eig=gamma, eta_sq=eta_sq)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise ValueError(f"need exactly two classes, got {self.classes_.size}")
        signed = np.where(y == self.classes_[1], 1.0, -1.0)
        return self._fit_pool(X, signed)

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]
