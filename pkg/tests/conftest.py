"""Shared fixtures and independent numeric oracles for the test suite."""

import numpy as np
import pytest
from scipy.special import expit

from rarefit import Dataset


def make_dataset(seed=0, n=80, p=3, beta=None, weights=None):
    """Random logistic dataset with known generating coefficients."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    if beta is None:
        beta = np.concatenate([[-0.5], rng.normal(scale=0.7, size=p)])
    beta = np.asarray(beta, dtype=float)
    y = (rng.random(n) < expit(beta[0] + X @ beta[1:])).astype(float)
    return Dataset.from_covariates(y, X, weights), beta


def make_2x2_dataset(n00=95, n01=5, n10=4, n11=1):
    """Row-level dataset for a 2x2 table: (x=0, x=1) x (controls, events)."""
    y = np.concatenate([np.zeros(n00), np.ones(n01), np.zeros(n10), np.ones(n11)])
    x = np.concatenate([np.zeros(n00 + n01), np.ones(n10 + n11)])
    return Dataset.from_covariates(y, x)


def make_separated_dataset():
    """Canonical completely separated data: the sign of x determines y."""
    x = np.array([-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0])
    return Dataset.from_covariates((x > 0).astype(float), x)


def fd_gradient(f, beta, eps=1e-6):
    """Central finite-difference gradient of a scalar function."""
    beta = np.asarray(beta, dtype=float)
    grad = np.zeros_like(beta)
    for i in range(beta.size):
        step = np.zeros_like(beta)
        step[i] = eps
        grad[i] = (f(beta + step) - f(beta - step)) / (2.0 * eps)
    return grad


def fd_jacobian(g, beta, eps=1e-6):
    """Central finite-difference Jacobian of a vector function."""
    beta = np.asarray(beta, dtype=float)
    columns = []
    for i in range(beta.size):
        step = np.zeros_like(beta)
        step[i] = eps
        columns.append((g(beta + step) - g(beta - step)) / (2.0 * eps))
    return np.column_stack(columns)


def fd_hessian_of_value(f, beta, eps=1e-4):
    """Second-order central differences of a scalar function."""
    beta = np.asarray(beta, dtype=float)
    k = beta.size
    H = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = eps
            ej[j] = eps
            H[i, j] = (
                f(beta + ei + ej) - f(beta + ei - ej)
                - f(beta - ei + ej) + f(beta - ei - ej)
            ) / (4.0 * eps * eps)
            H[j, i] = H[i, j]
    return H


def assert_matrix_close(actual, expected, rtol=1e-4):
    """Compare matrices with a tolerance scaled to the larger entry."""
    scale = max(float(np.max(np.abs(expected))), 1.0)
    np.testing.assert_allclose(actual, expected, rtol=0, atol=rtol * scale)


@pytest.fixture(scope="session")
def table_2x2():
    return make_2x2_dataset()


@pytest.fixture(scope="session")
def separated():
    return make_separated_dataset()
