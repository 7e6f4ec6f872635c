"""Scenario generator and Monte Carlo runner for the ten-covariate design.

Covariates arise from correlated standard normals pushed through fixed
transformations: four continuous variables (truncated at the third quartile
plus five interquartile distances, per generated dataset), four binaries and
two three-level ordinals. Slopes attach an odds ratio of 2 to binaries, the
square root of 2 per ordinal step, and an odds ratio of 2 across the outer
sextile span of each continuous variable; the intercept is calibrated so a
large reference sample hits the requested event rate. Scenario runs fit any
subset of methods replication by replication and aggregate bias, RMSE,
calibration and discrimination against the generating truth.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, logit

from .core import Dataset
from .fitting import (
    DEFAULT_SETTINGS,
    EstimatorSettings,
    fit_firth,
    fit_flac,
    fit_flic,
    fit_method,
    fit_ml,
)
from .inference import intervals_for
from .metrics import EvalReport, c_statistic, calibration_slope
from .predictions import predict_ab, predict_au

__all__ = [
    "CovariateRecipe",
    "DEFAULT_RECIPE",
    "TrueModel",
    "ScenarioConfig",
    "ScenarioSummary",
    "MethodSummary",
    "generate_covariates",
    "calibrate_continuous_coefs",
    "calibrate_intercept",
    "build_true_model",
    "full_scenario_grid",
    "run_scenario",
    "resolve_workers",
    "SIMULATION_METHODS",
]

SIMULATION_METHODS = ("ml", "wf", "fl", "flic", "flac", "lf", "cp", "rr", "ab", "au")
_COEFFICIENT_METHODS = ("ml", "wf", "fl", "flic", "flac", "lf", "cp", "rr")

_CALIBRATION_SEED = 424242
_CALIBRATION_SIZE = 1_000_000

# Binary slopes carry log(2), ordinal slopes log(2)/2 per step.
_BINARY_SLOPE = 0.69
_ORDINAL_SLOPE = 0.345

_CONTINUOUS = (0, 3, 4, 7)
_BINARY = (1, 5, 8, 9)
_ORDINAL = (2, 6)
_NEGATED_MIXED = (5, 6, 7, 8, 9)  # zero-based indices of covariates 6..10


@dataclass(frozen=True)
class CovariateRecipe:
    """Correlation structure of the latent normals behind the ten covariates.

    Pairs are one-based latent indices with their correlation; unlisted
    pairs are zero. The assembled matrix is validated symmetric positive
    definite on first use.
    """

    n_vars: int = 10
    correlations: tuple = (
        (1, 2, 0.8),
        (1, 7, 0.3),
        (3, 4, -0.5),
        (3, 5, -0.3),
        (4, 5, 0.5),
        (4, 7, 0.3),
        (4, 8, 0.5),
        (4, 9, 0.3),
        (5, 8, 0.3),
        (5, 9, 0.3),
        (6, 7, -0.3),
        (6, 8, 0.3),
        (8, 9, 0.5),
    )

    def correlation_matrix(self):
        R = np.eye(self.n_vars)
        for i, j, rho in self.correlations:
            if not (1 <= i <= self.n_vars and 1 <= j <= self.n_vars) or i == j:
                raise ValueError(f"bad correlation pair ({i}, {j})")
            R[i - 1, j - 1] = rho
            R[j - 1, i - 1] = rho
        try:
            np.linalg.cholesky(R)
        except np.linalg.LinAlgError as exc:
            raise ValueError("correlation matrix is not positive definite") from exc
        return R


DEFAULT_RECIPE = CovariateRecipe()


def _truncate_upper(values):
    q1, q3 = np.percentile(values, [25.0, 75.0])
    cap = q3 + 5.0 * (q3 - q1)
    return np.minimum(values, cap)


def generate_covariates(recipe: CovariateRecipe, n: int, rng) -> np.ndarray:
    """Draw an (n, 10) covariate matrix.

    `rng` may be a seed or a numpy Generator. The integer-part brackets of
    the design drop the fractional part (truncation toward zero), and the
    four continuous columns are capped at Q3 + 5 IQR within the generated
    sample itself.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    L = np.linalg.cholesky(recipe.correlation_matrix())
    Z = rng.standard_normal((n, recipe.n_vars)) @ L.T
    X = np.empty((n, recipe.n_vars))
    X[:, 0] = np.trunc(10.0 * Z[:, 0] + 55.0)
    X[:, 1] = (Z[:, 1] < 0.6).astype(float)
    X[:, 2] = (Z[:, 2] >= -1.2).astype(float) + (Z[:, 2] >= 0.75).astype(float)
    X[:, 3] = np.trunc(np.maximum(0.0, 100.0 * np.exp(Z[:, 3]) - 20.0))
    X[:, 4] = np.trunc(np.maximum(0.0, 80.0 * np.exp(Z[:, 4]) - 20.0))
    X[:, 5] = (Z[:, 5] < -0.35).astype(float)
    X[:, 6] = (Z[:, 6] >= 0.5).astype(float) + (Z[:, 6] >= 1.5).astype(float)
    X[:, 7] = np.trunc(10.0 * Z[:, 7] + 55.0)
    X[:, 8] = (Z[:, 8] < 0.0).astype(float)
    X[:, 9] = (Z[:, 9] < 0.0).astype(float)
    for col in _CONTINUOUS:
        X[:, col] = _truncate_upper(X[:, col])
    return X


_reference_cache = {}


def _reference_sample(recipe, seed, size):
    key = (recipe, seed, size)
    if key not in _reference_cache:
        _reference_cache[key] = generate_covariates(recipe, size, np.random.default_rng(seed))
    return _reference_cache[key]


def calibrate_continuous_coefs(recipe: CovariateRecipe = DEFAULT_RECIPE,
                               seed: int = _CALIBRATION_SEED,
                               size: int = _CALIBRATION_SIZE) -> np.ndarray:
    """Slopes of the four continuous covariates.

    Each slope is log(2) divided by the spread between the 1/6 and 5/6
    empirical quantiles of that covariate in a large seeded reference
    sample, so that spread corresponds to an odds ratio of 2.
    """
    X = _reference_sample(recipe, seed, size)
    values = []
    for col in _CONTINUOUS:
        q_lo, q_hi = np.percentile(X[:, col], [100.0 / 6.0, 500.0 / 6.0])
        spread = q_hi - q_lo
        if spread <= 0:
            raise ValueError(f"degenerate sextile spread for covariate {col + 1}")
        values.append(np.log(2.0) / spread)
    return np.array(values)


def calibrate_intercept(slopes, recipe: CovariateRecipe = DEFAULT_RECIPE,
                        target_rate: float = 0.05,
                        seed: int = _CALIBRATION_SEED,
                        size: int = _CALIBRATION_SIZE) -> float:
    """Intercept at which the reference sample's mean probability hits
    `target_rate` (within 1e-4), found by bisection.

    With all slopes zero the answer is the logit of the rate, returned
    exactly.
    """
    if not 0.0 < target_rate < 1.0:
        raise ValueError("target_rate must lie in (0, 1)")
    slopes = np.asarray(slopes, dtype=float)
    if np.all(slopes == 0.0):
        return float(logit(target_rate))
    X = _reference_sample(recipe, seed, size)
    eta = X @ slopes
    lo, hi = -40.0, 15.0
    mean_lo = float(np.mean(expit(lo + eta)))
    mean_hi = float(np.mean(expit(hi + eta)))
    if not mean_lo < target_rate < mean_hi:
        raise ValueError("bisection bracket does not contain the target rate")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        mean_mid = float(np.mean(expit(mid + eta)))
        if abs(mean_mid - target_rate) <= 1e-4:
            return mid
        if mean_mid < target_rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class TrueModel:
    """Generating coefficients of a scenario (index 0 is the intercept)."""

    beta: np.ndarray
    effect_size: float
    sign_pattern: str
    target_rate: float


def build_true_model(effect_size: float, sign_pattern: str, target_rate: float,
                     recipe: CovariateRecipe = DEFAULT_RECIPE,
                     seed: int = _CALIBRATION_SEED,
                     size: int = _CALIBRATION_SIZE) -> TrueModel:
    """Assemble the generating coefficient vector for a scenario."""
    if sign_pattern not in ("all-positive", "mixed"):
        raise ValueError("sign_pattern must be 'all-positive' or 'mixed'")
    base = np.zeros(10)
    base[list(_BINARY)] = _BINARY_SLOPE
    base[list(_ORDINAL)] = _ORDINAL_SLOPE
    base[list(_CONTINUOUS)] = calibrate_continuous_coefs(recipe, seed, size)
    slopes = effect_size * base
    if sign_pattern == "mixed":
        slopes[list(_NEGATED_MIXED)] *= -1.0
    intercept = calibrate_intercept(slopes, recipe, target_rate, seed, size)
    beta = np.concatenate([[intercept], slopes])
    beta.flags.writeable = False
    return TrueModel(
        beta=beta,
        effect_size=effect_size,
        sign_pattern=sign_pattern,
        target_rate=target_rate,
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario."""

    n: int
    target_rate: float
    effect_size: float
    sign_pattern: str = "all-positive"
    replications: int = 200
    seed: int = 1
    name: Optional[str] = None
    ci_level: Optional[float] = None

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        if not 0.0 < self.target_rate < 1.0:
            raise ValueError("target_rate must lie in (0, 1)")
        if self.effect_size < 0:
            raise ValueError("effect_size must be nonnegative")
        if self.sign_pattern not in ("all-positive", "mixed"):
            raise ValueError("sign_pattern must be 'all-positive' or 'mixed'")
        if self.effect_size == 0.0 and self.sign_pattern != "all-positive":
            raise ValueError("a zero effect size admits only the all-positive pattern")
        if self.replications <= 0:
            raise ValueError("replications must be positive")
        if self.ci_level is not None and not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0, 1)")
        if self.name is None:
            label = (
                f"N{self.n}_rate{self.target_rate:g}_a{self.effect_size:g}"
                f"_{'mix' if self.sign_pattern == 'mixed' else 'pos'}"
            )
            object.__setattr__(self, "name", label)


def full_scenario_grid(replications: int = 1000, base_seed: int = 1):
    """The full 45-scenario grid: every sample size and event rate with an
    expected event count above 20, crossed with effect sizes 0, 0.5 and 1
    and both sign patterns (the null effect counted once)."""
    pairs = [
        (n, rate)
        for n in (500, 1400, 3000)
        for rate in (0.01, 0.02, 0.05, 0.10)
        if n * rate > 20
    ]
    configs = []
    for n, rate in pairs:
        variants = [(0.0, "all-positive")]
        for a in (0.5, 1.0):
            variants.append((a, "all-positive"))
            variants.append((a, "mixed"))
        for a, signs in variants:
            configs.append(
                ScenarioConfig(
                    n=n,
                    target_rate=rate,
                    effect_size=a,
                    sign_pattern=signs,
                    replications=replications,
                    seed=base_seed + len(configs),
                )
            )
    return configs


@dataclass(frozen=True)
class MethodSummary:
    """Aggregated results of one method in one scenario."""

    report: EvalReport
    n_used: int
    n_failed: int
    ci_coverage: Optional[float] = None
    ci_power: Optional[float] = None
    ci_width: Optional[float] = None


@dataclass(frozen=True)
class ScenarioSummary:
    """Scenario-level aggregation across replications."""

    config: ScenarioConfig
    truth: TrueModel
    methods: tuple
    n_replications: int
    n_excluded_separation: int
    per_method: dict
    records: Optional[list] = None


def resolve_workers(requested=None):
    """Worker count for replication-level parallelism.

    ``RAREFIT_THREADS`` caps the count and serves as the default when no
    explicit request is made.
    """
    cap = os.environ.get("RAREFIT_THREADS")
    cap = int(cap) if cap else None
    if requested is None:
        requested = cap if cap is not None else 1
    workers = max(1, int(requested))
    if cap is not None:
        workers = min(workers, max(1, cap))
    return workers


def _fit_for(method, ds, settings, wf_tau, fl_fit):
    if method == "fl":
        return fl_fit
    if method == "flic":
        return fit_flic(ds, settings, firth_fit=fl_fit)
    if method == "flac":
        return fit_flac(ds, settings, firth_fit=fl_fit)
    return fit_method(ds, method, settings, wf_tau=wf_tau)


def _replication_record(task):
    """Generate one dataset, fit every requested method, score it."""
    (seed_seq, n, truth_beta, methods, wf_tau, ci_level, recipe, settings) = task
    rng = np.random.default_rng(seed_seq)
    covariates = generate_covariates(recipe, n, rng)
    eta_true = truth_beta[0] + covariates @ truth_beta[1:]
    pi_true = expit(eta_true)
    y = (rng.random(n) < pi_true).astype(float)
    y_new = (rng.random(n) < pi_true).astype(float)

    record = {"excluded": False, "methods": {}}
    if y.sum() == 0 or y.sum() == n:
        record["excluded"] = True
        return record
    ds = Dataset.from_covariates(y, covariates)

    ml_fit = fit_ml(ds, settings)
    if ml_fit.extras.get("separation") or not ml_fit.converged:
        record["excluded"] = True
        return record

    sds = covariates.std(axis=0)
    needs_fl = any(m in methods for m in ("fl", "flic", "flac", "ab", "au"))
    fl_fit = fit_firth(ds, 0.5, settings) if needs_fl else None

    for method in methods:
        entry = {"failed": False}
        try:
            if method in _COEFFICIENT_METHODS:
                fit = ml_fit if method == "ml" else _fit_for(method, ds, settings, wf_tau, fl_fit)
                pi_hat = expit(ds.X @ fit.beta)
                eta_hat = ds.X @ fit.beta
                entry["coef_err"] = (fit.beta[1:] - truth_beta[1:]) * sds
                if ci_level is not None:
                    iv = intervals_for(ds, fit, ci_level, settings)
                    lo, hi = iv.lower[1:], iv.upper[1:]
                    entry["ci_cover"] = float(
                        np.mean((lo <= truth_beta[1:]) & (truth_beta[1:] <= hi))
                    )
                    entry["ci_power"] = float(np.mean(iv.excludes_zero[1:]))
                    widths = hi - lo
                    entry["ci_width"] = float(
                        np.mean(widths[np.isfinite(widths)])
                    ) if np.any(np.isfinite(widths)) else float("nan")
            else:
                pred = predict_ab(ds, fl_fit) if method == "ab" else predict_au(ds, fl_fit)
                pi_hat = pred.pi
                inside = np.all((pi_hat > 0.0) & (pi_hat < 1.0))
                eta_hat = logit(pi_hat) if inside else None
        except Exception:
            entry["failed"] = True
            record["methods"][method] = entry
            continue

        entry["rel_bias"] = float(np.mean(pi_hat) - np.mean(y)) / float(np.mean(y))
        errors = pi_hat - pi_true
        entry["pred_err_mean"] = float(np.mean(errors))
        entry["pred_sqerr_mean"] = float(np.mean(errors**2))
        try:
            entry["cal_slope"] = (
                calibration_slope(eta_hat, y_new) if eta_hat is not None else float("nan")
            )
        except ValueError:
            entry["cal_slope"] = float("nan")
        try:
            entry["c_index"] = c_statistic(pi_hat, y_new)
        except ValueError:
            entry["c_index"] = float("nan")
        record["methods"][method] = entry
    return record


def _aggregate(config, truth, methods, records, keep_records):
    used = [r for r in records if not r["excluded"]]
    n_excluded = len(records) - len(used)
    per_method = {}
    for method in methods:
        entries = [r["methods"][method] for r in used if method in r["methods"]]
        ok = [e for e in entries if not e["failed"]]
        n_failed = len(entries) - len(ok)
        if ok:
            rel = np.array([e["rel_bias"] for e in ok])
            pred_means = np.array([e["pred_err_mean"] for e in ok])
            pred_sq = np.array([e["pred_sqerr_mean"] for e in ok])
            slopes = np.array([e["cal_slope"] for e in ok])
            cidx = np.array([e["c_index"] for e in ok])
            if method in _COEFFICIENT_METHODS:
                errs = np.array([e["coef_err"] for e in ok])
                bias_per = errs.mean(axis=0)
                rmse_per = np.sqrt((errs**2).mean(axis=0))
                coef_bias = 1000.0 * float(np.mean(np.abs(bias_per)))
                coef_rmse = 1000.0 * float(np.mean(rmse_per))
            else:
                coef_bias = float("nan")
                coef_rmse = float("nan")
            report = EvalReport(
                event_rate_rel_bias=float(rel.mean()),
                event_rate_rel_rmse=float(np.sqrt((rel**2).mean())),
                pred_bias=float(pred_means.mean()),
                pred_rmse=float(np.sqrt(pred_sq.mean())),
                coef_abs_bias=coef_bias,
                coef_rmse=coef_rmse,
                cal_slope=float(np.nanmean(slopes)) if np.any(np.isfinite(slopes)) else float("nan"),
                c_index=float(np.nanmean(cidx)) if np.any(np.isfinite(cidx)) else float("nan"),
            )
        else:
            nan = float("nan")
            report = EvalReport(nan, nan, nan, nan, nan, nan, nan, nan)
        ci_cov = ci_pow = ci_wid = None
        if config.ci_level is not None and method in _COEFFICIENT_METHODS and ok:
            cov_vals = np.array([e.get("ci_cover", np.nan) for e in ok])
            pow_vals = np.array([e.get("ci_power", np.nan) for e in ok])
            wid_vals = np.array([e.get("ci_width", np.nan) for e in ok])
            ci_cov = float(np.nanmean(cov_vals))
            ci_pow = float(np.nanmean(pow_vals))
            ci_wid = float(np.nanmean(wid_vals))
        per_method[method] = MethodSummary(
            report=report,
            n_used=len(ok),
            n_failed=n_failed,
            ci_coverage=ci_cov,
            ci_power=ci_pow,
            ci_width=ci_wid,
        )
    return ScenarioSummary(
        config=config,
        truth=truth,
        methods=tuple(methods),
        n_replications=config.replications,
        n_excluded_separation=n_excluded,
        per_method=per_method,
        records=records if keep_records else None,
    )


def run_scenario(config: ScenarioConfig, methods=SIMULATION_METHODS,
                 workers=None, wf_tau: float = 0.1,
                 settings: EstimatorSettings = DEFAULT_SETTINGS,
                 recipe: CovariateRecipe = DEFAULT_RECIPE,
                 keep_records: bool = False,
                 calibration_seed: int = _CALIBRATION_SEED,
                 calibration_size: int = _CALIBRATION_SIZE) -> ScenarioSummary:
    """Run one scenario and aggregate per-method results.

    Each replication draws from its own counter-derived substream, so
    results are bit-identical for a given seed regardless of the worker
    count. Replications in which maximum likelihood detects separation
    (or the outcome is single-class) are excluded from aggregation and
    counted in ``n_excluded_separation``; individual method failures are
    recorded per method, never fatal.
    """
    methods = tuple(methods)
    unknown = [m for m in methods if m not in SIMULATION_METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; choose from {SIMULATION_METHODS}")
    truth = build_true_model(
        config.effect_size, config.sign_pattern, config.target_rate,
        recipe, calibration_seed, calibration_size,
    )
    root = np.random.SeedSequence(config.seed)
    children = root.spawn(config.replications)
    tasks = [
        (child, config.n, truth.beta, methods, wf_tau, config.ci_level, recipe, settings)
        for child in children
    ]
    n_workers = resolve_workers(workers)
    if n_workers == 1:
        records = [_replication_record(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(_replication_record, tasks, chunksize=4))
    return _aggregate(config, truth, methods, records, keep_records)
