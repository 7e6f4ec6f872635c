"""Coefficient-producing fitting procedures.

Implements maximum likelihood, Jeffreys-penalized likelihood with an
adjustable penalty weight (full strength at ``tau = 0.5``, weakened below),
the intercept-corrected and added-covariate variants of the Jeffreys fit,
log-F(1,1) and Cauchy prior penalization, and ridge with AIC-tuned strength.
Every routine returns a :class:`FitResult`; every maximized objective is
available standalone (value, gradient, exact negative Hessian) for
diagnostics and testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve, solve_triangular
from scipy.special import expit

from .core import (
    Dataset,
    _chol_information,
    _hat_diagonals,
    _information,
    _logdet_information,
    _loglik,
    _probabilities,
    _score,
    check_full_rank,
)
from .exceptions import ConvergenceError, DataError, SingularInformationError

__all__ = [
    "EstimatorSettings",
    "RidgeSettings",
    "FitResult",
    "AugmentedDataset",
    "Objective",
    "ml_objective",
    "jeffreys_objective",
    "logf_objective",
    "cauchy_objective",
    "ridge_objective",
    "fit_ml",
    "fit_firth",
    "fit_flic",
    "fit_flac",
    "build_flac_augmented",
    "fit_logf",
    "fit_cauchy",
    "fit_ridge",
    "fit_method",
    "METHODS",
]

# Beyond this coefficient magnitude probabilities are numerically 0 or 1,
# so an ML path still carrying score is diagnosed as separation.
_SEPARATION_BOUND = 25.0

# Newton matrices switch from their cheap surrogate to the exact negative
# Hessian once the gradient sup-norm falls below this, so the tail of the
# iteration converges quadratically.
_EXACT_HESSIAN_THRESHOLD = 1e-3

METHODS = ("ml", "fl", "wf", "flic", "flac", "lf", "cp", "rr")


@dataclass(frozen=True)
class EstimatorSettings:
    """Controls for the Newton iterations shared by all fits."""

    max_iter: int = 100
    tol: float = 1e-8
    max_step: float = 5.0
    step_halvings: int = 25

    def __post_init__(self):
        if self.max_iter <= 0 or self.tol <= 0 or self.max_step <= 0 or self.step_halvings <= 0:
            raise ValueError("all estimator settings must be positive")


DEFAULT_SETTINGS = EstimatorSettings()

_DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-4.0, 4.0, 60))


@dataclass(frozen=True)
class RidgeSettings:
    """Tuning-parameter search space for the ridge fit."""

    lambda_grid: tuple = _DEFAULT_LAMBDA_GRID
    fixed_lambda: Optional[float] = None

    def __post_init__(self):
        grid = tuple(float(v) for v in self.lambda_grid)
        if len(grid) == 0:
            raise ValueError("lambda grid must be nonempty")
        if any(v <= 0 for v in grid):
            raise ValueError("lambda grid values must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda grid must be sorted strictly ascending")
        object.__setattr__(self, "lambda_grid", grid)
        if self.fixed_lambda is not None and self.fixed_lambda <= 0:
            raise ValueError("fixed_lambda must be positive")


@dataclass
class FitResult:
    """Outcome of a fitting procedure.

    ``beta`` is the coefficient vector (index 0 is the intercept), ``cov``
    the inverse of the negative Hessian of the fitted objective, ``loglik``
    the unpenalized log-likelihood at ``beta`` and ``penloglik`` the value
    of the fitted objective. ``extras`` holds method-specific scalars such
    as the penalty weight, the chosen ridge strength, or the corrected
    intercept's provenance.
    """

    beta: np.ndarray
    cov: np.ndarray
    loglik: float
    penloglik: float
    iterations: int
    converged: bool
    method: str
    extras: dict = field(default_factory=dict)

    @property
    def se(self):
        """Wald standard errors from the diagonal of ``cov``."""
        d = np.diag(self.cov)
        return np.sqrt(np.where(d >= 0, d, np.nan))


@dataclass(frozen=True)
class Objective:
    """A differentiable objective to maximize.

    ``neg_hessian`` is exact (it is what covariance estimates invert);
    ``newton_matrix`` may be a cheaper positive-definite surrogate used
    only to propose Newton steps.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    neg_hessian: Callable[[np.ndarray], np.ndarray]
    newton_matrix: Callable[[np.ndarray], np.ndarray] = None

    def __post_init__(self):
        if self.newton_matrix is None:
            object.__setattr__(self, "newton_matrix", self.neg_hessian)


# ----------------------------------------------------------------------
# Objective builders. Array-level variants are reused on augmented
# pseudo-data whose intercept column is not all ones.

def _ml_objective_arrays(y, X, w):
    return Objective(
        value=lambda b: _loglik(y, X, w, b),
        gradient=lambda b: _score(y, X, w, b),
        neg_hessian=lambda b: _information(X, w, _probabilities(X, b)),
    )


def ml_objective(ds: Dataset) -> Objective:
    """Plain log-likelihood objective for `ds`."""
    return _ml_objective_arrays(ds.y, ds.X, ds.w)


def _jeffreys_pieces(X, w, beta):
    pi = _probabilities(X, beta)
    v = w * pi * (1.0 - pi)
    info = _information(X, w, pi)
    chol = _chol_information(info)
    S = solve_triangular(chol, X.T, lower=True)
    h = v * np.einsum("ji,ji->i", S, S)
    return pi, v, info, chol, S, h


def _jeffreys_neg_hessian(X, tau, pieces):
    pi, v, info, chol, S, h = pieces
    # Hessian of logdet I: -A'(M o M)A + X' diag(h ((1-2pi)^2 - 2pi(1-pi))) X
    # with M = X I^-1 X' and A = X scaled by dW/deta.
    M = S.T @ S
    u = v * (1.0 - 2.0 * pi)
    A = X * u[:, None]
    curv = h * ((1.0 - 2.0 * pi) ** 2 - 2.0 * pi * (1.0 - pi))
    logdet_hess = -A.T @ (M * M) @ A + (X * curv[:, None]).T @ X
    H = info - tau * logdet_hess
    return (H + H.T) / 2.0


def jeffreys_objective(ds: Dataset, tau: float) -> Objective:
    """Log-likelihood penalized by `tau` times the log-determinant of the
    Fisher information.

    The gradient is the modified score with per-row adjustment
    ``2 * tau * h * (1/2 - pi)``. Far from the optimum, Newton steps use
    the augmented information ``X' W (1 + 2 tau h) X`` (the iteration
    matrix of the equivalent pseudo-data representation); once the
    modified score is small the exact negative Hessian takes over, which
    restores quadratic tail convergence. The exact Hessian forms a dense
    n-by-n smoother matrix, so its cost grows quadratically in the number
    of rows.
    """
    if not 0.0 < tau <= 0.5:
        raise ValueError("tau must lie in (0, 0.5]")
    y, X, w = ds.y, ds.X, ds.w

    def value(beta):
        pi, v, info, chol, S, h = _jeffreys_pieces(X, w, beta)
        return _loglik(y, X, w, beta) + tau * _logdet_information(chol)

    def modified_score(pieces):
        pi, v, info, chol, S, h = pieces
        return X.T @ (w * (y - pi) + 2.0 * tau * h * (0.5 - pi))

    def gradient(beta):
        return modified_score(_jeffreys_pieces(X, w, beta))

    def neg_hessian(beta):
        return _jeffreys_neg_hessian(X, tau, _jeffreys_pieces(X, w, beta))

    def newton_matrix(beta):
        pieces = _jeffreys_pieces(X, w, beta)
        if float(np.max(np.abs(modified_score(pieces)))) < _EXACT_HESSIAN_THRESHOLD:
            return _jeffreys_neg_hessian(X, tau, pieces)
        pi, v, info, chol, S, h = pieces
        d = v * (1.0 + 2.0 * tau * h)
        M = (X * d[:, None]).T @ X
        return (M + M.T) / 2.0

    return Objective(value, gradient, neg_hessian, newton_matrix)


def _logf_pseudo_rows(n_params):
    """Two weight-1/2 pseudo-rows per slope: x_j = 1, everything else 0."""
    p = n_params - 1
    X_pseudo = np.zeros((2 * p, n_params))
    y_pseudo = np.zeros(2 * p)
    for j in range(p):
        X_pseudo[2 * j, j + 1] = 1.0
        X_pseudo[2 * j + 1, j + 1] = 1.0
        y_pseudo[2 * j] = 1.0
    w_pseudo = np.full(2 * p, 0.5)
    return y_pseudo, X_pseudo, w_pseudo


def _logf_augmented_arrays(ds):
    y_p, X_p, w_p = _logf_pseudo_rows(ds.n_params)
    y = np.concatenate([ds.y, y_p])
    X = np.vstack([ds.X, X_p])
    w = np.concatenate([ds.w, w_p])
    return y, X, w


def logf_objective(ds: Dataset) -> Objective:
    """Log-likelihood plus the log-F(1,1) penalty on each slope.

    The penalty per slope is ``beta_j / 2 - log(1 + exp(beta_j))``; the
    intercept is left unpenalized. Identical to the likelihood of the
    pseudo-data augmentation used by :func:`fit_logf`.
    """
    return _ml_objective_arrays(*_logf_augmented_arrays(ds))


def cauchy_objective(ds: Dataset, slope_scale: float = 2.5,
                     intercept_scale: float = 10.0) -> Objective:
    """Log-likelihood with independent Cauchy log-priors on all coefficients.

    Slopes share `slope_scale`; the intercept gets the wider
    `intercept_scale`. The penalty applies to the coefficients of `ds` as
    given; :func:`fit_cauchy` standardizes the data before building this
    objective.
    """
    y, X, w = ds.y, ds.X, ds.w
    scales = np.full(ds.n_params, slope_scale)
    scales[0] = intercept_scale
    s2 = scales**2

    def penalty(beta):
        return -float(np.sum(np.log1p((beta / scales) ** 2)))

    def value(beta):
        return _loglik(y, X, w, beta) + penalty(beta)

    def gradient(beta):
        return _score(y, X, w, beta) - 2.0 * beta / (s2 + beta**2)

    def neg_hessian(beta):
        info = _information(X, w, _probabilities(X, beta))
        d = 2.0 * (s2 - beta**2) / (s2 + beta**2) ** 2
        return info + np.diag(d)

    def newton_matrix(beta):
        # The prior curvature flips sign for |beta| > scale; clip it at zero
        # far from the optimum so step proposals stay positive definite, and
        # use the exact curvature once the gradient is small.
        if float(np.max(np.abs(gradient(beta)))) < _EXACT_HESSIAN_THRESHOLD:
            return neg_hessian(beta)
        info = _information(X, w, _probabilities(X, beta))
        d = 2.0 * (s2 - beta**2) / (s2 + beta**2) ** 2
        return info + np.diag(np.maximum(d, 0.0))

    return Objective(value, gradient, neg_hessian, newton_matrix)


def ridge_objective(ds: Dataset, lam: float) -> Objective:
    """Log-likelihood minus ``lam`` times the squared norm of the slopes."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    y, X, w = ds.y, ds.X, ds.w
    mask = np.ones(ds.n_params)
    mask[0] = 0.0
    D = np.diag(mask)

    def value(beta):
        return _loglik(y, X, w, beta) - lam * float(np.sum(mask * beta**2))

    def gradient(beta):
        return _score(y, X, w, beta) - 2.0 * lam * mask * beta

    def neg_hessian(beta):
        return _information(X, w, _probabilities(X, beta)) + 2.0 * lam * D

    return Objective(value, gradient, neg_hessian)


# ----------------------------------------------------------------------
# Newton engine.

def _solve_step(H, g):
    try:
        return cho_solve(cho_factor(H, lower=True), g)
    except np.linalg.LinAlgError:
        pass
    # Indefinite or ill-conditioned matrix: escalate a ridge until the
    # factorization succeeds so the proposal stays an ascent direction.
    scale = float(np.mean(np.abs(np.diag(H)))) or 1.0
    ridge = 1e-8 * scale
    eye = np.eye(H.shape[0])
    for _ in range(24):
        try:
            return cho_solve(cho_factor(H + ridge * eye, lower=True), g)
        except np.linalg.LinAlgError:
            ridge *= 10.0
    return np.linalg.pinv(H) @ g


def _safe_value(objective, beta):
    try:
        val = objective.value(beta)
    except SingularInformationError:
        return -np.inf
    return val if np.isfinite(val) else -np.inf


def _halving_slack(value):
    # Rounding noise in the objective near the optimum must not be read as
    # a decrease, or halving would shrink steps to nothing.
    return 1e-10 * (1.0 + abs(value)) if np.isfinite(value) else 0.0


def _maximize(objective, beta0, settings, detect_separation=False):
    """Newton iteration with a step cap and step-halving on the objective.

    Returns ``(beta, iterations, converged, separated)``. Convergence means
    the sup-norm of the gradient fell below ``settings.tol``.
    """
    beta = np.array(beta0, dtype=float)
    value = _safe_value(objective, beta)
    for it in range(1, settings.max_iter + 1):
        grad = objective.gradient(beta)
        if float(np.max(np.abs(grad))) < settings.tol:
            return beta, it - 1, True, False
        step = _solve_step(objective.newton_matrix(beta), grad)
        largest = float(np.max(np.abs(step)))
        if largest > settings.max_step:
            step = step * (settings.max_step / largest)
        proposal = beta + step
        new_value = _safe_value(objective, proposal)
        halvings = 0
        slack = _halving_slack(value)
        while new_value < value - slack and halvings < settings.step_halvings:
            step = step * 0.5
            proposal = beta + step
            new_value = _safe_value(objective, proposal)
            halvings += 1
        beta, value = proposal, new_value
        if detect_separation and float(np.max(np.abs(beta))) > _SEPARATION_BOUND:
            if float(np.max(np.abs(objective.gradient(beta)))) >= settings.tol:
                return beta, it, False, True
    converged = float(np.max(np.abs(objective.gradient(beta)))) < settings.tol
    return beta, settings.max_iter, converged, False


def _invert_pd(matrix):
    chol = _chol_information(matrix)
    return cho_solve((chol, True), np.eye(matrix.shape[0]))


def _covariance_or_nan(matrix):
    try:
        return _invert_pd(matrix)
    except SingularInformationError:
        return np.full(matrix.shape, np.nan)


def _require_both_classes(ds):
    events = float(ds.w @ ds.y)
    nonevents = float(ds.w @ (1.0 - ds.y))
    if events <= 0 or nonevents <= 0:
        raise DataError("both outcome classes need positive weight for this fit")


# ----------------------------------------------------------------------
# Fitting procedures.

def _perfectly_classified(ds, beta):
    # A finite optimum that reproduces every outcome to within 1e-6 means a
    # separating hyperplane exists; the clipped score can vanish on such a
    # path before the coefficient bound is crossed.
    pi = _probabilities(ds.X, beta)
    active = ds.w > 0
    return bool(np.max(np.abs(ds.y[active] - pi[active])) <= 1e-6)


def fit_ml(ds: Dataset, settings: EstimatorSettings = DEFAULT_SETTINGS) -> FitResult:
    """Maximum likelihood fit.

    Separation (a coefficient path diverging while the score stays away
    from zero, or the score vanishing only because every row is fitted
    perfectly) is reported through ``converged=False`` together with
    ``extras['separation']=True``; no exception is raised so callers can
    inspect the flagged result.
    """
    _require_both_classes(ds)
    check_full_rank(ds.X, ds.w)
    objective = ml_objective(ds)
    beta, iterations, converged, separated = _maximize(
        objective, np.zeros(ds.n_params), settings, detect_separation=True
    )
    if converged and _perfectly_classified(ds, beta):
        converged, separated = False, True
    nh = objective.neg_hessian(beta)
    cov = _invert_pd(nh) if converged else _covariance_or_nan(nh)
    ll = _loglik(ds.y, ds.X, ds.w, beta)
    return FitResult(
        beta=beta,
        cov=cov,
        loglik=ll,
        penloglik=ll,
        iterations=iterations,
        converged=converged,
        method="ml",
        extras={"separation": separated},
    )


def fit_firth(ds: Dataset, tau: float = 0.5,
              settings: EstimatorSettings = DEFAULT_SETTINGS) -> FitResult:
    """Jeffreys-penalized fit with penalty weight `tau` in (0, 0.5].

    ``tau = 0.5`` is the standard bias-reducing penalty (method tag
    ``"fl"``); smaller values give the weakened compromise (tag ``"wf"``).
    Estimates stay finite under separation. The covariance is the inverse
    of the exact negative Hessian of the penalized objective at the
    optimum.
    """
    check_full_rank(ds.X, ds.w)
    objective = jeffreys_objective(ds, tau)
    beta, iterations, converged, _ = _maximize(objective, np.zeros(ds.n_params), settings)
    if not converged:
        raise ConvergenceError(
            f"penalized fit (tau={tau}) did not converge in {settings.max_iter} iterations"
        )
    cov = _invert_pd(objective.neg_hessian(beta))
    return FitResult(
        beta=beta,
        cov=cov,
        loglik=_loglik(ds.y, ds.X, ds.w, beta),
        penloglik=objective.value(beta),
        iterations=iterations,
        converged=True,
        method="fl" if tau == 0.5 else "wf",
        extras={"tau": tau},
    )


def _fit_intercept_with_offset(y, w, offset, start, settings):
    """One-parameter ML fit of an intercept given fixed linear predictors."""
    gamma = float(start)
    info = np.nan
    for it in range(1, settings.max_iter + 1):
        pi = np.clip(expit(gamma + offset), np.finfo(float).tiny, np.nextafter(1.0, 0.0))
        grad = float(w @ (y - pi))
        info = float(w @ (pi * (1.0 - pi)))
        if abs(grad) < settings.tol:
            return gamma, info, it - 1, True
        step = grad / info
        if abs(step) > settings.max_step:
            step = math.copysign(settings.max_step, step)
        gamma += step
    pi = np.clip(expit(gamma + offset), np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    grad = float(w @ (y - pi))
    info = float(w @ (pi * (1.0 - pi)))
    return gamma, info, settings.max_iter, abs(grad) < settings.tol


def fit_flic(ds: Dataset, settings: EstimatorSettings = DEFAULT_SETTINGS,
             firth_fit: Optional[FitResult] = None) -> FitResult:
    """Jeffreys fit with the intercept re-estimated by offset ML.

    Keeps the penalized slopes untouched and replaces the intercept by the
    ML solution of an intercept-only model that carries the penalized
    linear predictor as a fixed offset, which makes the average predicted
    probability match the observed event rate. ``extras`` records the
    corrected intercept and its offset-model variance.
    """
    _require_both_classes(ds)
    fl = firth_fit if firth_fit is not None else fit_firth(ds, 0.5, settings)
    _check_firth_base(ds, fl)
    eta = ds.X[:, 1:] @ fl.beta[1:]
    gamma0, info, offset_iters, converged = _fit_intercept_with_offset(
        ds.y, ds.w, eta, fl.beta[0], settings
    )
    if not converged:
        raise ConvergenceError("intercept correction did not converge")
    beta = fl.beta.copy()
    beta[0] = gamma0
    gamma0_var = 1.0 / info
    # No joint intercept/slope covariance exists for this two-stage
    # estimator; the cross terms are left at zero.
    cov = np.zeros_like(fl.cov)
    cov[1:, 1:] = fl.cov[1:, 1:]
    cov[0, 0] = gamma0_var
    ll = _loglik(ds.y, ds.X, ds.w, beta)
    return FitResult(
        beta=beta,
        cov=cov,
        loglik=ll,
        penloglik=ll,
        iterations=fl.iterations + offset_iters,
        converged=True,
        method="flic",
        extras={
            "gamma0": gamma0,
            "gamma0_var": gamma0_var,
            "fl_intercept": float(fl.beta[0]),
            "tau": 0.5,
        },
    )


@dataclass(frozen=True)
class AugmentedDataset:
    """Original rows stacked with the mirrored pseudo-rows of the Jeffreys
    data-augmentation representation.

    Block one repeats the original rows at their own weights, blocks two
    and three repeat them at half their leverage with the observed and the
    flipped outcome respectively. ``g`` is 0 on block one and 1 elsewhere.
    """

    dataset: Dataset
    g: np.ndarray
    n_original: int

    @property
    def design_with_g(self):
        """Design matrix with the pseudo-row indicator appended as a column."""
        return np.column_stack([self.dataset.X, self.g])


def _check_firth_base(ds, fl):
    if fl.method != "fl" or fl.extras.get("tau") != 0.5:
        raise ValueError("expected a full-strength Jeffreys fit (method 'fl')")
    if not fl.converged:
        raise ValueError("the base Jeffreys fit has not converged")
    if fl.beta.shape != (ds.n_params,):
        raise DataError("base fit does not match the dataset's parameter count")


def build_flac_augmented(ds: Dataset, fl: FitResult) -> AugmentedDataset:
    """Three-block augmented data at the leverages of a converged Jeffreys fit."""
    _check_firth_base(ds, fl)
    h = _hat_diagonals(ds.X, ds.w, _probabilities(ds.X, fl.beta))
    y = np.concatenate([ds.y, ds.y, 1.0 - ds.y])
    X = np.vstack([ds.X, ds.X, ds.X])
    w = np.concatenate([ds.w, ds.w * h / 2.0, ds.w * h / 2.0])
    g = np.concatenate([np.zeros(ds.n), np.ones(2 * ds.n)])
    g.flags.writeable = False
    return AugmentedDataset(dataset=Dataset(y, X, w), g=g, n_original=ds.n)


def fit_flac(ds: Dataset, settings: EstimatorSettings = DEFAULT_SETTINGS,
             firth_fit: Optional[FitResult] = None) -> FitResult:
    """ML on the augmented data with the pseudo-row indicator as covariate.

    The reported coefficients exclude the indicator's coefficient (kept in
    ``extras['g_coef']``). The covariance inverts the full augmented-fit
    information and then drops the indicator's row and column, so the
    remaining block is the profile variance.
    """
    fl = firth_fit if firth_fit is not None else fit_firth(ds, 0.5, settings)
    aug = build_flac_augmented(ds, fl)
    y_a = aug.dataset.y
    X_a = aug.design_with_g
    w_a = aug.dataset.w
    check_full_rank(X_a, w_a)
    objective = _ml_objective_arrays(y_a, X_a, w_a)
    start = np.concatenate([fl.beta, [0.0]])
    beta_full, iterations, converged, _ = _maximize(objective, start, settings)
    if not converged:
        raise ConvergenceError("augmented-data ML fit did not converge")
    cov_full = _invert_pd(objective.neg_hessian(beta_full))
    beta = beta_full[:-1]
    cov = cov_full[:-1, :-1]
    return FitResult(
        beta=beta,
        cov=cov,
        loglik=_loglik(ds.y, ds.X, ds.w, beta),
        penloglik=objective.value(beta_full),
        iterations=iterations,
        converged=True,
        method="flac",
        extras={"g_coef": float(beta_full[-1]), "tau": 0.5},
    )


def fit_logf(ds: Dataset, settings: EstimatorSettings = DEFAULT_SETTINGS) -> FitResult:
    """Log-F(1,1) penalized fit via weighted ML on pseudo-augmented data.

    Each slope contributes two weight-1/2 pseudo-rows (one event, one
    non-event) whose only nonzero entry is that covariate, leaving the
    intercept unpenalized. With no covariates this reduces to plain ML.
    """
    _require_both_classes(ds)
    check_full_rank(ds.X, ds.w)
    y_a, X_a, w_a = _logf_augmented_arrays(ds)
    objective = _ml_objective_arrays(y_a, X_a, w_a)
    beta, iterations, converged, _ = _maximize(objective, np.zeros(ds.n_params), settings)
    if not converged:
        raise ConvergenceError("log-F penalized fit did not converge")
    cov = _invert_pd(objective.neg_hessian(beta))
    return FitResult(
        beta=beta,
        cov=cov,
        loglik=_loglik(ds.y, ds.X, ds.w, beta),
        penloglik=objective.value(beta),
        iterations=iterations,
        converged=True,
        method="lf",
        extras={},
    )


def _weighted_mean_sd(col, w):
    wsum = float(w.sum())
    mean = float(w @ col) / wsum
    var = float(w @ (col - mean) ** 2) / wsum
    return mean, math.sqrt(var)


def _cauchy_standardize(ds):
    """Center covariates; scale binaries to range 1, everything else to SD 1/2."""
    X = np.array(ds.X)
    means = np.zeros(ds.n_params)
    scales = np.ones(ds.n_params)
    for j in range(1, ds.n_params):
        col = ds.X[:, j]
        mean, sd = _weighted_mean_sd(col, ds.w)
        distinct = np.unique(col)
        if distinct.size == 2:
            scale = float(distinct[1] - distinct[0])
        else:
            scale = 2.0 * sd
        if scale <= 0:
            raise DataError(f"covariate column {j} is constant")
        X[:, j] = (col - mean) / scale
        means[j] = mean
        scales[j] = scale
    return Dataset(ds.y, X, ds.w), means, scales


def _unstandardize_transform(means, scales):
    k = means.shape[0]
    T = np.zeros((k, k))
    T[0, 0] = 1.0
    for j in range(1, k):
        T[j, j] = 1.0 / scales[j]
        T[0, j] = -means[j] / scales[j]
    return T


def fit_cauchy(ds: Dataset, settings: EstimatorSettings = DEFAULT_SETTINGS,
               slope_scale: float = 2.5, intercept_scale: float = 10.0) -> FitResult:
    """Posterior mode under independent Cauchy priors after standardization.

    Covariates are centered; columns with exactly two distinct values are
    scaled to range 1 and all others to standard deviation 1/2. Slopes get
    a Cauchy(0, `slope_scale`) prior, the intercept Cauchy(0,
    `intercept_scale`). Coefficients and covariance are reported on the
    original scale. The prior's curvature can turn the objective
    non-concave, which the step-halving line search absorbs.
    """
    check_full_rank(ds.X, ds.w)
    ds_std, means, scales = _cauchy_standardize(ds)
    objective = cauchy_objective(ds_std, slope_scale, intercept_scale)
    beta_std, iterations, converged, _ = _maximize(
        objective, np.zeros(ds.n_params), settings
    )
    if not converged:
        raise ConvergenceError("Cauchy-prior fit did not converge")
    T = _unstandardize_transform(means, scales)
    beta = T @ beta_std
    cov = T @ _invert_pd(objective.neg_hessian(beta_std)) @ T.T
    return FitResult(
        beta=beta,
        cov=cov,
        loglik=_loglik(ds.y, ds.X, ds.w, beta),
        penloglik=objective.value(beta_std),
        iterations=iterations,
        converged=True,
        method="cp",
        extras={"slope_scale": slope_scale, "intercept_scale": intercept_scale},
    )


def fit_ridge(ds: Dataset, ridge: RidgeSettings = RidgeSettings(),
              settings: EstimatorSettings = DEFAULT_SETTINGS) -> FitResult:
    """Ridge-penalized fit with the tuning parameter chosen by penalized AIC.

    Covariates are scaled to unit standard deviation before fitting; the
    intercept is unpenalized. For each candidate strength the effective
    degrees of freedom are ``trace(H_unpen H_pen^-1)`` of the negative
    Hessians at that fit's optimum, and the strength minimizing
    ``-2 loglik + 2 df_e`` wins, ties going to the smaller value. A
    minimum sitting on either end of the grid is flagged through
    ``extras['boundary_lambda']``.
    """
    _require_both_classes(ds)
    check_full_rank(ds.X, ds.w)
    scales = np.ones(ds.n_params)
    X = np.array(ds.X)
    for j in range(1, ds.n_params):
        _, sd = _weighted_mean_sd(ds.X[:, j], ds.w)
        if sd <= 0:
            raise DataError(f"covariate column {j} is constant")
        scales[j] = sd
        X[:, j] = ds.X[:, j] / sd
    ds_std = Dataset(ds.y, X, ds.w)

    if ridge.fixed_lambda is not None:
        grid = [float(ridge.fixed_lambda)]
    else:
        grid = list(ridge.lambda_grid)

    fits = [None] * len(grid)
    warm = np.zeros(ds.n_params)
    n_failed = 0
    # Walk the grid from the most shrunken end down, warm-starting each fit.
    for idx in reversed(range(len(grid))):
        objective = ridge_objective(ds_std, grid[idx])
        beta, iters, converged, _ = _maximize(objective, warm, settings)
        if converged:
            fits[idx] = (beta, iters, objective)
            warm = beta
        else:
            n_failed += 1

    if all(f is None for f in fits):
        raise ConvergenceError("no ridge candidate converged")

    aic = np.full(len(grid), np.inf)
    df_values = np.full(len(grid), np.nan)
    for idx, entry in enumerate(fits):
        if entry is None:
            continue
        beta, _, objective = entry
        info = _information(ds_std.X, ds_std.w, _probabilities(ds_std.X, beta))
        pen_hess = objective.neg_hessian(beta)
        df_values[idx] = float(np.trace(solve(pen_hess, info, assume_a="pos")))
        aic[idx] = -2.0 * _loglik(ds_std.y, ds_std.X, ds_std.w, beta) + 2.0 * df_values[idx]

    best = int(np.argmin(aic))
    beta_std, iterations, objective = fits[best]
    boundary = ridge.fixed_lambda is None and len(grid) > 1 and best in (0, len(grid) - 1)

    T = np.diag(1.0 / scales)
    beta = T @ beta_std
    cov = T @ _invert_pd(objective.neg_hessian(beta_std)) @ T.T
    return FitResult(
        beta=beta,
        cov=cov,
        loglik=_loglik(ds.y, ds.X, ds.w, beta),
        penloglik=objective.value(beta_std),
        iterations=iterations,
        converged=True,
        method="rr",
        extras={
            "lambda": grid[best],
            "df_e": float(df_values[best]),
            "aic": float(aic[best]),
            "boundary_lambda": bool(boundary),
            "n_lambda_failed": n_failed,
        },
    )


def fit_method(ds: Dataset, method: str,
               settings: EstimatorSettings = DEFAULT_SETTINGS,
               wf_tau: float = 0.1,
               ridge: RidgeSettings = RidgeSettings()) -> FitResult:
    """Dispatch a fit by its short method name.

    Recognized names: ml, fl, wf, flic, flac, lf, cp, rr. The weakened
    Jeffreys fit uses `wf_tau` (default 0.1).
    """
    if method == "ml":
        return fit_ml(ds, settings)
    if method == "fl":
        return fit_firth(ds, 0.5, settings)
    if method == "wf":
        if not 0.0 < wf_tau < 0.5:
            raise ValueError("wf_tau must lie strictly between 0 and 0.5")
        return fit_firth(ds, wf_tau, settings)
    if method == "flic":
        return fit_flic(ds, settings)
    if method == "flac":
        return fit_flac(ds, settings)
    if method == "lf":
        return fit_logf(ds, settings)
    if method == "cp":
        return fit_cauchy(ds, settings)
    if method == "rr":
        return fit_ridge(ds, ridge, settings)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
