"""Confidence intervals: Wald, profile penalized likelihood, and the
offset-model interval for the corrected intercept.

Profile bounds are found by walking outward from the estimate in steps of
one Wald standard error until the likelihood-ratio statistic crosses its
chi-square threshold, then bisecting. The objective that gets profiled is
the one the estimate maximized: the plain likelihood for ML, the
Jeffreys-penalized likelihood at the fit's own penalty weight, the
augmented-data likelihood (indicator included) for the added-covariate
variant, and the log-F penalized likelihood.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

from .core import Dataset
from .exceptions import ConvergenceError
from .fitting import (
    DEFAULT_SETTINGS,
    EstimatorSettings,
    FitResult,
    _halving_slack,
    _ml_objective_arrays,
    _safe_value,
    _solve_step,
    build_flac_augmented,
    fit_firth,
    jeffreys_objective,
    logf_objective,
    ml_objective,
)

__all__ = ["IntervalSet", "wald_ci", "profile_ci", "flic_intercept_ci", "intervals_for"]

_PROFILE_METHODS = ("ml", "fl", "wf", "flac", "lf")
_WALD_METHODS = ("ml", "cp", "rr")
_MAX_BRACKET_STEPS = 20
_LR_TOL = 1e-6


@dataclass(frozen=True)
class IntervalSet:
    """Per-coefficient confidence bounds with their construction tags."""

    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    methods: tuple
    level: float

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")

    @property
    def excludes_zero(self):
        """True where the interval lies entirely on one side of zero."""
        return (self.lower > 0.0) | (self.upper < 0.0)


def wald_ci(fit: FitResult, level: float = 0.95) -> IntervalSet:
    """Symmetric normal-quantile intervals from the fit's covariance."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    variances = np.diag(fit.cov)
    if np.any(variances < 0):
        raise ValueError("covariance has negative diagonal entries")
    z = norm.ppf(0.5 * (1.0 + level))
    half = z * np.sqrt(variances)
    return IntervalSet(
        estimate=fit.beta.copy(),
        lower=fit.beta - half,
        upper=fit.beta + half,
        methods=("wald",) * fit.beta.shape[0],
        level=level,
    )


def _profile_target(ds, fit, settings):
    """Objective, full parameter vector and index map for profiling `fit`."""
    method = fit.method
    if method == "ml":
        return ml_objective(ds), fit.beta.copy()
    if method in ("fl", "wf"):
        return jeffreys_objective(ds, fit.extras["tau"]), fit.beta.copy()
    if method == "flic":
        beta = fit.beta.copy()
        beta[0] = fit.extras["fl_intercept"]
        return jeffreys_objective(ds, 0.5), beta
    if method == "lf":
        return logf_objective(ds), fit.beta.copy()
    if method == "flac":
        fl = fit_firth(ds, 0.5, settings)
        aug = build_flac_augmented(ds, fl)
        objective = _ml_objective_arrays(aug.dataset.y, aug.design_with_g, aug.dataset.w)
        beta = np.concatenate([fit.beta, [fit.extras["g_coef"]]])
        return objective, beta
    raise ValueError(
        f"profile intervals are not defined for method {method!r}; use wald_ci"
    )


def _maximize_with_fixed(objective, beta_start, fixed, value, settings):
    """Newton over the free coefficients with component `fixed` pinned."""
    beta = np.array(beta_start, dtype=float)
    beta[fixed] = value
    free = np.arange(beta.shape[0]) != fixed
    current = _safe_value(objective, beta)
    for _ in range(settings.max_iter):
        grad = objective.gradient(beta)[free]
        if float(np.max(np.abs(grad))) < settings.tol:
            break
        H = objective.newton_matrix(beta)[np.ix_(free, free)]
        step = _solve_step(H, grad)
        largest = float(np.max(np.abs(step)))
        if largest > settings.max_step:
            step = step * (settings.max_step / largest)
        proposal = beta.copy()
        proposal[free] += step
        new_value = _safe_value(objective, proposal)
        halvings = 0
        slack = _halving_slack(current)
        while new_value < current - slack and halvings < settings.step_halvings:
            step = step * 0.5
            proposal = beta.copy()
            proposal[free] += step
            new_value = _safe_value(objective, proposal)
            halvings += 1
        beta, current = proposal, new_value
    else:
        grad = objective.gradient(beta)[free]
        if float(np.max(np.abs(grad))) >= settings.tol:
            raise ConvergenceError("constrained maximization did not converge")
    return _safe_value(objective, beta), beta


def profile_ci(ds: Dataset, fit: FitResult, r: int, level: float = 0.95,
               settings: EstimatorSettings = DEFAULT_SETTINGS):
    """Profile likelihood-ratio interval for coefficient `r`.

    Returns ``(lower, upper)``. A side whose bracket never crosses the
    chi-square threshold within 20 standard-error steps is reported as an
    open bound (``-inf`` or ``inf``) with a warning. For the
    intercept-corrected method only slope coefficients can be profiled;
    its intercept has the dedicated :func:`flic_intercept_ci`.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if not fit.converged:
        raise ValueError("cannot profile a fit that has not converged")
    if fit.method == "flic" and r == 0:
        raise ValueError("the corrected intercept has its own interval; "
                         "use flic_intercept_ci")
    objective, beta_hat = _profile_target(ds, fit, settings)
    if not 0 <= r < fit.beta.shape[0]:
        raise IndexError(f"coefficient index {r} out of range")
    max_value = _safe_value(objective, beta_hat)
    target = float(chi2.ppf(level, 1))

    variance = float(fit.cov[r, r]) if np.isfinite(fit.cov[r, r]) else np.nan
    se = np.sqrt(variance) if variance > 0 else np.nan
    if not np.isfinite(se) or se == 0.0:
        se = max(0.5, 0.1 * abs(float(beta_hat[r])))

    center = float(beta_hat[r])

    def lr_at(value, start):
        constrained, beta_c = _maximize_with_fixed(objective, start, r, value, settings)
        return 2.0 * (max_value - constrained), beta_c

    def one_side(direction):
        prev_b = center
        prev_lr = 0.0
        start = beta_hat
        for k in range(1, _MAX_BRACKET_STEPS + 1):
            b = center + direction * k * se
            lr, start = lr_at(b, start)
            if lr >= target:
                return _bisect(prev_b, b, prev_lr, lr, start)
            prev_b, prev_lr = b, lr
        warnings.warn(
            f"profile for coefficient {r} stayed below the threshold after "
            f"{_MAX_BRACKET_STEPS} steps; reporting an open bound",
            RuntimeWarning,
        )
        return direction * np.inf

    def _bisect(lo, hi, lr_lo, lr_hi, start):
        # lo carries lr < target, hi carries lr >= target (signs may be
        # swapped relative to the axis; only the lr ordering matters).
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lr, start = lr_at(mid, start)
            if abs(lr - target) <= _LR_TOL:
                return mid
            if lr < target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    lower = one_side(-1.0)
    upper = one_side(+1.0)
    return float(lower), float(upper)


def flic_intercept_ci(ds: Dataset, flic: FitResult, level: float = 0.95):
    """Wald interval for the corrected intercept from the offset model."""
    if flic.method != "flic":
        raise ValueError("expected an intercept-corrected fit")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    gamma0 = flic.extras["gamma0"]
    variance = flic.extras["gamma0_var"]
    if variance < 0:
        raise ValueError("offset-model variance is negative")
    z = norm.ppf(0.5 * (1.0 + level))
    half = z * np.sqrt(variance)
    return float(gamma0 - half), float(gamma0 + half)


def intervals_for(ds: Dataset, fit: FitResult, level: float = 0.95,
                  settings: EstimatorSettings = DEFAULT_SETTINGS) -> IntervalSet:
    """Intervals of the type conventionally paired with the fit's method.

    Wald for ML, the Cauchy-prior and ridge fits; profile likelihood for
    the Jeffreys-type, added-covariate and log-F fits; for the
    intercept-corrected fit, profile intervals for the slopes plus the
    offset-model interval for the intercept.
    """
    k = fit.beta.shape[0]
    if fit.method in _WALD_METHODS:
        return wald_ci(fit, level)
    lower = np.empty(k)
    upper = np.empty(k)
    tags = []
    if fit.method == "flic":
        lower[0], upper[0] = flic_intercept_ci(ds, fit, level)
        tags.append("flic-intercept")
        first_profiled = 1
    elif fit.method in _PROFILE_METHODS:
        first_profiled = 0
    else:
        raise ValueError(f"no interval convention for method {fit.method!r}")
    for r in range(first_profiled, k):
        lower[r], upper[r] = profile_ci(ds, fit, r, level, settings)
        tags.append("profile")
    return IntervalSet(
        estimate=fit.beta.copy(),
        lower=lower,
        upper=upper,
        methods=tuple(tags),
        level=level,
    )
