import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from radar.estimators import RadarClassifier, RadarRegressor


@pytest.fixture(scope="module")
def sparse_data():
    rng = np.random.default_rng(0)
    d, n = 40, 400
    X = rng.uniform(-1, 1, (n, d))
    theta = np.zeros(d)
    theta[[3, 11, 27]] = [1.0, -1.0, 1.0]
    y = X @ theta + rng.normal(0, 0.2, n) + 1.5
    return X, y, theta


@pytest.mark.parametrize("algorithm", ["radar_const", "radar", "eda", "rda", "sgd"])
def test_regressor_recovers_support(sparse_data, algorithm):
    X, y, theta = sparse_data
    est = RadarRegressor(algorithm=algorithm, random_state=1).fit(X, y)
    assert est.coef_.shape == (40,)
    top = set(np.argsort(-np.abs(est.coef_))[:3])
    assert top == {3, 11, 27}
    assert est.score(X, y) > 0.7
    assert est.intercept_ == pytest.approx(1.5, abs=0.15)
    assert est.n_iter_ == 8000


def test_regressor_is_deterministic(sparse_data):
    X, y, _ = sparse_data
    a = RadarRegressor(random_state=5).fit(X, y).coef_
    b = RadarRegressor(random_state=5).fit(X, y).coef_
    np.testing.assert_array_equal(a, b)


def test_params_round_trip():
    est = RadarRegressor(algorithm="rda", n_iter=10, c1=8.0)
    assert est.get_params()["algorithm"] == "rda"
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    est.set_params(radius=2.0)
    assert est.radius == 2.0


def test_regressor_validation(sparse_data):
    X, y, _ = sparse_data
    with pytest.raises(ValueError):
        RadarRegressor(algorithm="lbfgs").fit(X, y)
    with pytest.raises(ValueError):
        RadarRegressor().fit(X[:, :2], y)
    with pytest.raises(ValueError):
        RadarRegressor().fit(X, y[:-1])
    with pytest.raises(ValueError):
        RadarRegressor().fit(np.where(X > 0.99, np.nan, X), y)
    with pytest.raises(NotFittedError):
        RadarRegressor().predict(X)
    est = RadarRegressor(n_iter=100).fit(X, y)
    with pytest.raises(ValueError):
        est.predict(X[:, :5])


def test_classifier(sparse_data):
    X, _, theta = sparse_data
    labels = np.where(X @ theta > 0, "pos", "neg")
    clf = RadarClassifier(random_state=0).fit(X, labels)
    assert list(clf.classes_) == ["neg", "pos"]
    assert clf.score(X, labels) > 0.9
    proba = clf.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert set(np.argsort(-np.abs(clf.coef_))[:3]) == {3, 11, 27}


def test_classifier_rejects_multiclass(sparse_data):
    X, _, _ = sparse_data
    with pytest.raises(ValueError):
        RadarClassifier().fit(X, np.arange(len(X)) % 3)
