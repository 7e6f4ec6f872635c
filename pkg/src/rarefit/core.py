"""Logistic-model kernel shared by every estimator in the package.

All fitting routines are assembled from the handful of quantities computed
here: predicted probabilities, the log-likelihood, the score vector, the
Fisher information, the diagonal of the weighted hat matrix, and the
Jeffreys-penalized objective. Data travel as a :class:`Dataset`, which keeps
the outcome vector, a design matrix whose first column is the intercept, and
nonnegative per-row case weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, qr, solve_triangular
from scipy.special import expit

from .exceptions import DataError, RankDeficiencyError, SingularInformationError

__all__ = [
    "Dataset",
    "WorkingState",
    "predict_probabilities",
    "log_likelihood",
    "score",
    "fisher_information",
    "hat_diagonals",
    "jeffreys_penalized_loglik",
    "working_state",
    "check_full_rank",
]

# Probabilities are clamped into the open unit interval so that logs, logits
# and the Jeffreys determinant stay finite for any finite linear predictor.
_PI_MIN = np.finfo(float).tiny
_PI_MAX = np.nextafter(1.0, 0.0)

# Relative pivot tolerance for the rank check at fit entry.
_RANK_TOL = 1e-10


class Dataset:
    """Binary-outcome data with an explicit intercept column and case weights.

    Parameters
    ----------
    y : array-like of shape (n,)
        Outcomes, each exactly 0 or 1.
    X : array-like of shape (n, p + 1)
        Design matrix. Column 0 must be identically 1 (the intercept).
    w : array-like of shape (n,), optional
        Nonnegative case weights. Defaults to unit weights.

    Arrays are copied, converted to float64 and frozen, so a Dataset can be
    shared freely across threads.
    """

    __slots__ = ("y", "X", "w")

    def __init__(self, y, X, w=None):
        y = np.ascontiguousarray(y, dtype=float)
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2:
            raise DataError("X must be a two-dimensional matrix")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError("y must be one-dimensional with one entry per row of X")
        if X.shape[1] < 1:
            raise DataError("X needs at least the intercept column")
        if not np.all(np.isfinite(X)):
            raise DataError("X contains non-finite values")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise DataError("every outcome must be exactly 0 or 1")
        if not np.all(X[:, 0] == 1.0):
            raise DataError("column 0 of X must be identically 1 (intercept)")
        if w is None:
            w = np.ones(X.shape[0])
        else:
            w = np.ascontiguousarray(w, dtype=float)
            if w.shape != y.shape:
                raise DataError("w must have one weight per row")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise DataError("weights must be finite and nonnegative")
        for a in (y, X, w):
            a.flags.writeable = False
        self.y = y
        self.X = X
        self.w = w

    @classmethod
    def from_covariates(cls, y, covariates, w=None):
        """Build a Dataset by prepending an intercept column to `covariates`."""
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates[:, None]
        X = np.column_stack([np.ones(covariates.shape[0]), covariates])
        return cls(y, X, w)

    @property
    def n(self):
        """Number of rows."""
        return self.X.shape[0]

    @property
    def n_params(self):
        """Number of coefficients, intercept included."""
        return self.X.shape[1]

    @property
    def n_events(self):
        """Weighted count of outcome-1 rows."""
        return float(self.w @ self.y)

    @property
    def event_rate(self):
        """Weighted proportion of outcome-1 rows."""
        return self.n_events / float(self.w.sum())

    def __repr__(self):
        return f"Dataset(n={self.n}, n_params={self.n_params}, events={self.n_events:g})"


@dataclass(frozen=True)
class WorkingState:
    """Per-row quantities at a given coefficient vector.

    ``pi`` holds the predicted probabilities, ``w_diag`` the weighted
    binomial variances ``w * pi * (1 - pi)`` and ``h`` the diagonal of the
    weighted hat matrix.
    """

    pi: np.ndarray
    w_diag: np.ndarray
    h: np.ndarray


def _check_beta(ds, beta):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (ds.n_params,):
        raise DataError(
            f"coefficient vector has length {beta.shape}, expected ({ds.n_params},)"
        )
    if not np.all(np.isfinite(beta)):
        raise DataError("coefficient vector contains non-finite values")
    return beta


# ----------------------------------------------------------------------
# Array-level kernel. These accept raw (y, X, w) triples so the fitting
# layer can reuse them on pseudo-data whose intercept column is not all
# ones (log-F augmentation rows, for instance).

def _probabilities(X, beta):
    return np.clip(expit(X @ beta), _PI_MIN, _PI_MAX)


def _loglik(y, X, w, beta):
    eta = X @ beta
    # y*eta - log(1 + exp(eta)) evaluated without overflow at either sign.
    return float(w @ (y * eta - np.logaddexp(0.0, eta)))


def _score(y, X, w, beta, pi=None):
    if pi is None:
        pi = _probabilities(X, beta)
    return X.T @ (w * (y - pi))


def _information(X, w, pi):
    d = w * pi * (1.0 - pi)
    M = (X * d[:, None]).T @ X
    # Force exact symmetry; downstream factorizations assume it.
    return (M + M.T) / 2.0


def _chol_information(info):
    try:
        return cholesky(info, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError(
            "Fisher information is not positive definite"
        ) from exc


def _hat_diagonals(X, w, pi, chol=None):
    d = w * pi * (1.0 - pi)
    if chol is None:
        chol = _chol_information(_information(X, w, pi))
    S = solve_triangular(chol, X.T, lower=True)
    return d * np.einsum("ji,ji->i", S, S)


def _logdet_information(chol):
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def check_full_rank(X, w=None):
    """Verify that the (weight-scaled) design matrix has full column rank.

    Uses a pivoted QR factorization with relative pivot tolerance 1e-10 and
    raises :class:`RankDeficiencyError` carrying the redundant column
    indices. Rows with zero weight do not count towards the rank.
    """
    A = np.asarray(X, dtype=float)
    if w is not None:
        A = A * np.sqrt(np.asarray(w, dtype=float))[:, None]
    R, piv = qr(A, mode="r", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        raise RankDeficiencyError(piv.tolist())
    rank = int(np.sum(diag > _RANK_TOL * diag[0]))
    if rank < A.shape[1]:
        raise RankDeficiencyError(sorted(piv[rank:].tolist()))


# ----------------------------------------------------------------------
# Public operations on a Dataset.

def predict_probabilities(ds, beta):
    """Predicted event probabilities, strictly inside (0, 1).

    The logistic function is evaluated in an overflow-safe form and the
    result is clamped away from exactly 0 and 1 so that leverages and the
    Jeffreys determinant remain well defined near the boundary.
    """
    beta = _check_beta(ds, beta)
    return _probabilities(ds.X, beta)


def log_likelihood(ds, beta):
    """Weighted binomial log-likelihood at `beta`."""
    beta = _check_beta(ds, beta)
    return _loglik(ds.y, ds.X, ds.w, beta)


def score(ds, beta):
    """Gradient of the log-likelihood: sum of w * (y - pi) * x per column."""
    beta = _check_beta(ds, beta)
    return _score(ds.y, ds.X, ds.w, beta)


def fisher_information(ds, beta):
    """Fisher information X' W X with W = diag(w * pi * (1 - pi)).

    Equals the negative Hessian of the log-likelihood; the returned matrix
    is exactly symmetric.
    """
    beta = _check_beta(ds, beta)
    return _information(ds.X, ds.w, _probabilities(ds.X, beta))


def hat_diagonals(ds, beta):
    """Diagonal of the weighted hat matrix W^(1/2) X (X'WX)^-1 X' W^(1/2).

    Entries lie in [0, 1] and sum to the number of coefficients when the
    design has full rank. Raises :class:`SingularInformationError` if the
    information matrix cannot be factorized.
    """
    beta = _check_beta(ds, beta)
    return _hat_diagonals(ds.X, ds.w, _probabilities(ds.X, beta))


def jeffreys_penalized_loglik(ds, beta, tau):
    """Log-likelihood plus `tau` times the log-determinant of the information.

    ``tau = 0.5`` is the full Jeffreys-prior penalty, ``tau = 0`` recovers
    the plain log-likelihood. The determinant is computed through a
    Cholesky factorization; a non-positive pivot raises
    :class:`SingularInformationError` rather than returning -inf.
    """
    if not 0.0 <= tau <= 0.5:
        raise ValueError("tau must lie in [0, 0.5]")
    beta = _check_beta(ds, beta)
    ll = _loglik(ds.y, ds.X, ds.w, beta)
    if tau == 0.0:
        return ll
    pi = _probabilities(ds.X, beta)
    chol = _chol_information(_information(ds.X, ds.w, pi))
    return ll + tau * _logdet_information(chol)


def working_state(ds, beta):
    """Probabilities, weighted variances and hat diagonals at `beta`."""
    beta = _check_beta(ds, beta)
    pi = _probabilities(ds.X, beta)
    w_diag = ds.w * pi * (1.0 - pi)
    h = _hat_diagonals(ds.X, ds.w, pi)
    return WorkingState(pi=pi, w_diag=w_diag, h=h)
