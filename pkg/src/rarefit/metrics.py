"""Evaluation measures for fitted models and simulation replications."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .core import Dataset
from .fitting import DEFAULT_SETTINGS, fit_ml

__all__ = [
    "EvalReport",
    "c_statistic",
    "calibration_slope",
    "event_rate_bias",
    "standardized_coef_summary",
]


@dataclass(frozen=True)
class EvalReport:
    """Aggregated performance of one method over a set of replications.

    Event-rate quantities are relative to the observed rate; prediction
    bias and RMSE compare per-row predictions to the true probabilities;
    coefficient bias and RMSE refer to standardized slopes on the
    thousandfold scale, absolute values averaged over slopes.
    """

    event_rate_rel_bias: float
    event_rate_rel_rmse: float
    pred_bias: float
    pred_rmse: float
    coef_abs_bias: float
    coef_rmse: float
    cal_slope: float
    c_index: float


def c_statistic(pi, y) -> float:
    """Concordance probability over all event/non-event pairs, ties count 1/2.

    Computed through midranks, which is algebraically identical to the
    pairwise count.
    """
    pi = np.asarray(pi, dtype=float)
    y = np.asarray(y, dtype=float)
    if pi.shape != y.shape or pi.ndim != 1:
        raise ValueError("pi and y must be one-dimensional and equally long")
    n_events = int(np.sum(y == 1))
    n_nonevents = int(np.sum(y == 0))
    if n_events == 0 or n_nonevents == 0:
        raise ValueError("c-statistic needs both outcome classes")
    ranks = rankdata(pi)
    u = float(np.sum(ranks[y == 1])) - n_events * (n_events + 1) / 2.0
    return u / (n_events * n_nonevents)


def calibration_slope(eta, y_new) -> float:
    """ML slope of a logistic regression of fresh outcomes on fitted
    linear predictors (own intercept); 1 is ideal.

    Returns NaN when the slope model itself fails to converge.
    """
    eta = np.asarray(eta, dtype=float)
    y_new = np.asarray(y_new, dtype=float)
    if np.ptp(eta) == 0:
        raise ValueError("linear predictors are constant; slope is undefined")
    ds = Dataset.from_covariates(y_new, eta)
    result = fit_ml(ds, DEFAULT_SETTINGS)
    if not result.converged:
        return float("nan")
    return float(result.beta[1])


def event_rate_bias(pi, y):
    """Relative bias of the average prediction against the observed rate.

    Returns ``(rel_bias, rel_value)`` where ``rel_value`` is the estimated
    rate as a multiple of the observed one, so ``rel_bias = rel_value - 1``.
    """
    pi = np.asarray(pi, dtype=float)
    y = np.asarray(y, dtype=float)
    observed = float(np.mean(y))
    if observed == 0:
        raise ValueError("no observed events; relative bias is undefined")
    estimated = float(np.mean(pi))
    return (estimated - observed) / observed, estimated / observed


def standardized_coef_summary(fits, truth, sds):
    """Absolute bias and RMSE of standardized slopes, thousandfold scale.

    Slopes (intercept omitted) are multiplied by the covariate standard
    deviations before comparing to the truth; `sds` may be one vector or
    one row per replication. Bias and RMSE are computed per slope across
    replications, their absolute values averaged over slopes, and returned
    multiplied by 1000.
    """
    truth = np.asarray(truth, dtype=float)
    slopes = np.array([np.asarray(f.beta, dtype=float)[1:] for f in fits])
    if slopes.size == 0:
        raise ValueError("need at least one replication")
    sds = np.asarray(sds, dtype=float)
    if sds.ndim == 1:
        sds = np.broadcast_to(sds, slopes.shape)
    errors = (slopes - truth[None, 1:]) * sds
    bias_per_slope = errors.mean(axis=0)
    rmse_per_slope = np.sqrt((errors**2).mean(axis=0))
    return (
        1000.0 * float(np.mean(np.abs(bias_per_slope))),
        1000.0 * float(np.mean(rmse_per_slope)),
    )
