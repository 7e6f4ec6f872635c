"""Scikit-learn compatible estimator classes.

Each class wraps one fitting routine behind the usual ``fit`` /
``predict_proba`` / ``predict`` surface, so the penalized fits compose with
pipelines, model selection and anything else expecting the estimator API.
`X` is passed without an intercept column; the intercept is handled
internally and reported through ``intercept_``. The full fitting record
(covariance, penalized objective value, method-specific extras) is kept in
``result_``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.preprocessing import LabelEncoder
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import Dataset
from .fitting import (
    EstimatorSettings,
    RidgeSettings,
    fit_cauchy,
    fit_firth,
    fit_flac,
    fit_flic,
    fit_logf,
    fit_ml,
    fit_ridge,
)
from .inference import intervals_for

__all__ = [
    "MLLogisticRegression",
    "FirthLogisticRegression",
    "FLICLogisticRegression",
    "FLACLogisticRegression",
    "LogFLogisticRegression",
    "CauchyLogisticRegression",
    "RidgeLogisticRegression",
]


class _BaseRareEventLogit(BaseEstimator, ClassifierMixin):
    """Shared fit/predict plumbing for the binary penalized-logit family."""

    def __init__(self, max_iter=100, tol=1e-8, max_step=5.0, step_halvings=25):
        self.max_iter = max_iter
        self.tol = tol
        self.max_step = max_step
        self.step_halvings = step_halvings

    def _more_tags(self):
        return {"binary_only": True}

    def _settings(self):
        return EstimatorSettings(
            max_iter=self.max_iter,
            tol=self.tol,
            max_step=self.max_step,
            step_halvings=self.step_halvings,
        )

    def _fit_dataset(self, ds):
        raise NotImplementedError

    def fit(self, X, y, sample_weight=None):
        """Fit on covariates `X` (no intercept column) and binary `y`."""
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        self._label_encoder = LabelEncoder().fit(y)
        self.classes_ = self._label_encoder.classes_
        if len(self.classes_) != 2:
            raise ValueError(
                f"only binary outcomes are supported (got {len(self.classes_)} classes)"
            )
        y01 = self._label_encoder.transform(y).astype(float)
        if sample_weight is not None:
            sample_weight = np.asarray(sample_weight, dtype=float)
        ds = Dataset.from_covariates(y01, X, sample_weight)
        result = self._fit_dataset(ds)
        self._dataset = ds
        self.result_ = result
        self.coef_ = result.beta[1:].copy()
        self.intercept_ = float(result.beta[0])
        self.n_iter_ = result.iterations
        self.converged_ = bool(result.converged)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p1 = expit(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]

    def conf_int(self, level=0.95):
        """Per-coefficient confidence bounds of the method's usual type,
        intercept first. Returns an :class:`~rarefit.inference.IntervalSet`."""
        check_is_fitted(self, "result_")
        return intervals_for(self._dataset, self.result_, level, self._settings())


class MLLogisticRegression(_BaseRareEventLogit):
    """Plain maximum likelihood logit.

    Does not converge under separation; the fitted ``converged_`` flag and
    ``result_.extras['separation']`` report that outcome instead of raising.
    """

    def _fit_dataset(self, ds):
        return fit_ml(ds, self._settings())


class FirthLogisticRegression(_BaseRareEventLogit):
    """Jeffreys-prior penalized logit with adjustable penalty weight.

    ``tau=0.5`` is the standard bias-reducing penalty; values below weaken
    it toward plain ML while retaining finite estimates under separation.
    """

    def __init__(self, tau=0.5, max_iter=100, tol=1e-8, max_step=5.0, step_halvings=25):
        super().__init__(max_iter, tol, max_step, step_halvings)
        self.tau = tau

    def _fit_dataset(self, ds):
        return fit_firth(ds, self.tau, self._settings())


class FLICLogisticRegression(_BaseRareEventLogit):
    """Jeffreys-penalized slopes with an ML-recalibrated intercept, making
    the average predicted probability equal the observed event rate."""

    def _fit_dataset(self, ds):
        return fit_flic(ds, self._settings())


class FLACLogisticRegression(_BaseRareEventLogit):
    """ML on the Jeffreys data-augmentation rows with a pseudo-observation
    indicator, giving penalized-strength slopes and an event rate matching
    the observed one."""

    def _fit_dataset(self, ds):
        return fit_flac(ds, self._settings())


class LogFLogisticRegression(_BaseRareEventLogit):
    """Log-F(1,1) prior on each slope, intercept unpenalized."""

    def _fit_dataset(self, ds):
        return fit_logf(ds, self._settings())


class CauchyLogisticRegression(_BaseRareEventLogit):
    """Posterior mode under independent Cauchy priors after centering and
    scaling the covariates (range 1 for binaries, SD 1/2 otherwise)."""

    def __init__(self, slope_scale=2.5, intercept_scale=10.0,
                 max_iter=100, tol=1e-8, max_step=5.0, step_halvings=25):
        super().__init__(max_iter, tol, max_step, step_halvings)
        self.slope_scale = slope_scale
        self.intercept_scale = intercept_scale

    def _fit_dataset(self, ds):
        return fit_cauchy(ds, self._settings(), self.slope_scale, self.intercept_scale)


class RidgeLogisticRegression(_BaseRareEventLogit):
    """Ridge-penalized logit on unit-variance covariates with the penalty
    strength minimizing the penalized AIC (or fixed via ``fixed_lambda``).

    The chosen strength and effective degrees of freedom are available as
    ``result_.extras['lambda']`` and ``result_.extras['df_e']``.
    """

    def __init__(self, lambda_grid=None, fixed_lambda=None,
                 max_iter=100, tol=1e-8, max_step=5.0, step_halvings=25):
        super().__init__(max_iter, tol, max_step, step_halvings)
        self.lambda_grid = lambda_grid
        self.fixed_lambda = fixed_lambda

    def _fit_dataset(self, ds):
        if self.lambda_grid is None:
            ridge = RidgeSettings(fixed_lambda=self.fixed_lambda)
        else:
            ridge = RidgeSettings(
                lambda_grid=tuple(self.lambda_grid), fixed_lambda=self.fixed_lambda
            )
        return fit_ridge(ds, ridge, self._settings())
