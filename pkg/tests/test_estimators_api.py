"""Scikit-learn estimator surface: params, cloning, prediction, intervals."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import make_dataset
from rarefit import (
    CauchyLogisticRegression,
    Dataset,
    FirthLogisticRegression,
    FLACLogisticRegression,
    FLICLogisticRegression,
    LogFLogisticRegression,
    MLLogisticRegression,
    RidgeLogisticRegression,
    fit_cauchy,
    fit_firth,
    fit_flac,
    fit_flic,
    fit_logf,
    fit_ml,
    fit_ridge,
    intervals_for,
)

ALL_CLASSES = [
    MLLogisticRegression,
    FirthLogisticRegression,
    FLICLogisticRegression,
    FLACLogisticRegression,
    LogFLogisticRegression,
    CauchyLogisticRegression,
    RidgeLogisticRegression,
]


def _data(seed=90, n=120, p=3):
    ds, _ = make_dataset(seed=seed, n=n, p=p)
    return ds.X[:, 1:], ds.y


@pytest.mark.parametrize("cls,fitter", [
    (MLLogisticRegression, fit_ml),
    (FirthLogisticRegression, fit_firth),
    (FLICLogisticRegression, fit_flic),
    (FLACLogisticRegression, fit_flac),
    (LogFLogisticRegression, fit_logf),
    (CauchyLogisticRegression, fit_cauchy),
    (RidgeLogisticRegression, fit_ridge),
])
def test_estimator_matches_functional_layer(cls, fitter):
    X, y = _data()
    est = cls().fit(X, y)
    reference = fitter(Dataset.from_covariates(y, X))
    assert_allclose(est.intercept_, reference.beta[0], rtol=1e-10)
    assert_allclose(est.coef_, reference.beta[1:], rtol=1e-10)
    assert est.converged_ == reference.converged
    assert est.result_.method == reference.method


def test_predict_proba_shape_and_consistency():
    X, y = _data()
    est = FirthLogisticRegression().fit(X, y)
    proba = est.predict_proba(X)
    assert proba.shape == (len(y), 2)
    assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    assert_allclose(
        proba[:, 1],
        1.0 / (1.0 + np.exp(-(X @ est.coef_ + est.intercept_))),
        rtol=1e-12,
    )


def test_predict_maps_original_labels():
    X, y = _data()
    labels = np.where(y == 1.0, "case", "control")
    est = FLACLogisticRegression().fit(X, labels)
    # Classes are sorted; the second one is modeled as the positive outcome.
    assert est.classes_.tolist() == ["case", "control"]
    predictions = est.predict(X)
    decision = est.decision_function(X)
    assert np.array_equal(predictions == est.classes_[1], decision > 0)
    proba = est.predict_proba(X)
    assert_allclose(proba[:, 1], 1.0 / (1.0 + np.exp(-decision)), rtol=1e-12)


def test_get_params_set_params_clone():
    est = FirthLogisticRegression(tau=0.2, max_iter=50)
    params = est.get_params()
    assert params["tau"] == 0.2 and params["max_iter"] == 50
    est.set_params(tau=0.4)
    assert est.tau == 0.4
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()
    X, y = _data()
    cloned.fit(X, y)
    assert not hasattr(est, "result_")


def test_unfitted_estimator_raises():
    X, _ = _data()
    with pytest.raises(NotFittedError):
        FirthLogisticRegression().predict_proba(X)


def test_sample_weight_equals_replication():
    X, y = _data(seed=91, n=60, p=2)
    X_rep = np.vstack([X, X[:20]])
    y_rep = np.concatenate([y, y[:20]])
    weights = np.ones(60)
    weights[:20] = 2.0
    a = FirthLogisticRegression().fit(X_rep, y_rep)
    b = FirthLogisticRegression().fit(X, y, sample_weight=weights)
    assert_allclose(a.coef_, b.coef_, atol=1e-8)
    assert_allclose(a.intercept_, b.intercept_, atol=1e-8)


def test_binary_only():
    X = np.arange(9.0).reshape(-1, 1)
    y = np.array([0, 1, 2] * 3)
    with pytest.raises(ValueError):
        MLLogisticRegression().fit(X, y)


def test_weakened_firth_tag():
    X, y = _data()
    est = FirthLogisticRegression(tau=0.1).fit(X, y)
    assert est.result_.method == "wf"
    assert est.result_.extras["tau"] == 0.1


def test_ridge_fixed_lambda_wiring():
    X, y = _data()
    est = RidgeLogisticRegression(fixed_lambda=2.5).fit(X, y)
    assert est.result_.extras["lambda"] == 2.5


def test_conf_int_matches_functional_intervals():
    X, y = _data(seed=92, n=100, p=2)
    est = FLICLogisticRegression().fit(X, y)
    iv = est.conf_int()
    reference = intervals_for(Dataset.from_covariates(y, X), est.result_)
    assert_allclose(iv.lower, reference.lower, atol=1e-8)
    assert_allclose(iv.upper, reference.upper, atol=1e-8)
    assert iv.methods == reference.methods


def test_ml_separation_surfaces_in_attributes():
    x = np.array([-2.0, -1.0, 1.0, 2.0]).reshape(-1, 1)
    y = np.array([0.0, 0.0, 1.0, 1.0])
    est = MLLogisticRegression().fit(x, y)
    assert not est.converged_
    assert est.result_.extras["separation"]


@pytest.mark.parametrize("cls", ALL_CLASSES)
def test_score_accuracy_available(cls):
    X, y = _data(seed=93)
    est = cls().fit(X, y)
    assert 0.0 <= est.score(X, y) <= 1.0
