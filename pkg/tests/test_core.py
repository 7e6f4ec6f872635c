"""Kernel operations: probabilities, likelihood, score, information, leverages."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import (
    assert_matrix_close,
    fd_gradient,
    fd_hessian_of_value,
    make_dataset,
)
from rarefit import (
    Dataset,
    DataError,
    SingularInformationError,
    check_full_rank,
    fisher_information,
    fit_firth,
    fit_ml,
    hat_diagonals,
    jeffreys_penalized_loglik,
    log_likelihood,
    predict_probabilities,
    score,
    working_state,
)
from rarefit.exceptions import RankDeficiencyError

# Closed-form ML solution of the 2x2 worked example.
_ML_BETA_2X2 = np.array([np.log(5.0 / 95.0), np.log(4.75)])


def test_probabilities_zero_beta(table_2x2):
    pi = predict_probabilities(table_2x2, np.zeros(2))
    assert_allclose(pi, 0.5)


def test_probabilities_2x2_at_ml(table_2x2):
    pi = predict_probabilities(table_2x2, _ML_BETA_2X2)
    assert_allclose(pi[:100], 0.05, atol=1e-12)
    assert_allclose(pi[100:], 0.20, atol=1e-12)


def test_probabilities_overflow_safe():
    ds = Dataset(np.array([0.0, 1.0]), np.ones((2, 1)))
    low = predict_probabilities(ds, np.array([-745.0]))
    high = predict_probabilities(ds, np.array([745.0]))
    assert np.all(low > 0.0) and np.all(np.isfinite(low))
    assert np.all(high < 1.0) and np.all(np.isfinite(high))


def test_probabilities_dimension_mismatch(table_2x2):
    with pytest.raises(DataError):
        predict_probabilities(table_2x2, np.zeros(3))


def test_loglik_zero_beta(table_2x2):
    assert_allclose(log_likelihood(table_2x2, np.zeros(2)), 105 * np.log(0.5))


def test_loglik_2x2_saturated(table_2x2):
    # Saturated-model value: each group contributes its own entropy.
    expected = 100 * (0.05 * np.log(0.05) + 0.95 * np.log(0.95)) + 5 * (
        0.2 * np.log(0.2) + 0.8 * np.log(0.8)
    )
    assert_allclose(log_likelihood(table_2x2, _ML_BETA_2X2), expected, rtol=1e-12)


def test_loglik_maximal_at_ml():
    ds, _ = make_dataset(seed=5, n=100, p=2)
    fit = fit_ml(ds)
    best = log_likelihood(ds, fit.beta)
    rng = np.random.default_rng(0)
    for _ in range(20):
        other = fit.beta + rng.normal(scale=0.5, size=fit.beta.size)
        assert log_likelihood(ds, other) <= best + 1e-12


def test_score_vanishes_at_ml():
    ds, _ = make_dataset(seed=1, n=120, p=3)
    fit = fit_ml(ds)
    assert np.max(np.abs(score(ds, fit.beta))) < 1e-6


def test_score_intercept_only_zero_beta():
    y = np.array([1.0] * 3 + [0.0] * 7)
    ds = Dataset(y, np.ones((10, 1)))
    assert_allclose(score(ds, np.zeros(1)), [3 - 10 / 2])


def test_score_matches_finite_differences():
    ds, beta = make_dataset(seed=2, n=40, p=3)
    point = beta + 0.3
    fd = fd_gradient(lambda b: log_likelihood(ds, b), point, eps=1e-6)
    assert_allclose(score(ds, point), fd, atol=1e-5)


def test_score_intercept_component_is_rate_gap():
    ds, beta = make_dataset(seed=8, n=60, p=2)
    pi = predict_probabilities(ds, beta)
    expected = ds.n * (ds.y.mean() - pi.mean())
    assert_allclose(score(ds, beta)[0], expected, rtol=1e-10)


def test_fisher_intercept_only():
    ds = Dataset(np.array([0.0, 1.0] * 5), np.ones((10, 1)))
    assert_allclose(fisher_information(ds, np.zeros(1)), [[10 / 4]])


def test_fisher_exactly_symmetric():
    ds, beta = make_dataset(seed=3, n=50, p=4)
    info = fisher_information(ds, beta)
    assert np.array_equal(info, info.T)


def test_fisher_matches_finite_difference_hessian():
    ds, beta = make_dataset(seed=4, n=30, p=2)
    point = beta * 0.5
    fd = -fd_hessian_of_value(lambda b: log_likelihood(ds, b), point, eps=1e-4)
    assert_matrix_close(fisher_information(ds, point), fd, rtol=1e-4)


def test_hat_intercept_only_uniform():
    ds = Dataset(np.array([0.0, 1.0] * 6), np.ones((12, 1)))
    assert_allclose(hat_diagonals(ds, np.array([0.3])), np.full(12, 1 / 12), rtol=1e-12)


def test_hat_trace_and_range():
    ds, beta = make_dataset(seed=6, n=90, p=4)
    h = hat_diagonals(ds, beta)
    assert_allclose(h.sum(), 5.0, atol=1e-8)
    assert np.all(h >= 0.0) and np.all(h <= 1.0)


def test_hat_group_constant_at_firth_solution(table_2x2):
    fl = fit_firth(table_2x2)
    h = hat_diagonals(table_2x2, fl.beta)
    assert np.ptp(h[:100]) < 1e-10
    assert np.ptp(h[100:]) < 1e-10


def test_hat_singular_information_raises():
    X = np.column_stack([np.ones(6), np.arange(6.0), np.arange(6.0)])
    ds = Dataset(np.array([0, 1, 0, 1, 0, 1], dtype=float), X)
    with pytest.raises(SingularInformationError):
        hat_diagonals(ds, np.zeros(3))


def test_jeffreys_tau_zero_is_plain_loglik(table_2x2):
    beta = np.array([-2.0, 1.0])
    assert jeffreys_penalized_loglik(table_2x2, beta, 0.0) == log_likelihood(table_2x2, beta)


def test_jeffreys_intercept_only_value():
    n = 16
    ds = Dataset(np.array([0.0, 1.0] * (n // 2)), np.ones((n, 1)))
    expected = n * np.log(0.5) + 0.5 * np.log(n / 4)
    assert_allclose(jeffreys_penalized_loglik(ds, np.zeros(1), 0.5), expected, rtol=1e-12)


def test_jeffreys_tau_out_of_range(table_2x2):
    with pytest.raises(ValueError):
        jeffreys_penalized_loglik(table_2x2, np.zeros(2), 0.6)
    with pytest.raises(ValueError):
        jeffreys_penalized_loglik(table_2x2, np.zeros(2), -0.1)


def test_affine_reparametrization_consistency():
    ds, beta = make_dataset(seed=7, n=50, p=3)
    shift = 2.5
    X2 = np.array(ds.X)
    X2[:, 2] += shift
    ds2 = Dataset(ds.y, X2)
    beta2 = beta.copy()
    beta2[0] -= shift * beta[2]
    assert_allclose(
        predict_probabilities(ds2, beta2), predict_probabilities(ds, beta), atol=1e-10
    )


def test_working_state_consistency():
    ds, beta = make_dataset(seed=9, n=40, p=2)
    state = working_state(ds, beta)
    assert_allclose(state.pi, predict_probabilities(ds, beta))
    assert_allclose(state.w_diag, ds.w * state.pi * (1 - state.pi))
    assert_allclose(state.h.sum(), ds.n_params, atol=1e-8)


def test_weighted_rows_equal_replication():
    ds, beta = make_dataset(seed=10, n=30, p=2)
    replicated = Dataset(
        np.concatenate([ds.y, ds.y[:10]]),
        np.vstack([ds.X, ds.X[:10]]),
    )
    weights = np.ones(30)
    weights[:10] = 2.0
    weighted = Dataset(ds.y, ds.X, weights)
    assert_allclose(
        log_likelihood(weighted, beta), log_likelihood(replicated, beta), rtol=1e-12
    )
    assert_allclose(score(weighted, beta), score(replicated, beta), rtol=1e-10)
    assert_allclose(
        fisher_information(weighted, beta),
        fisher_information(replicated, beta),
        rtol=1e-10,
    )


def test_dataset_validation_errors():
    with pytest.raises(DataError):
        Dataset(np.array([0.0, 2.0]), np.ones((2, 1)))
    with pytest.raises(DataError):
        Dataset(np.array([0.0, 1.0]), np.array([[1.0], [0.0]]))
    with pytest.raises(DataError):
        Dataset(np.array([0.0, 1.0]), np.ones((2, 1)), w=np.array([1.0, -1.0]))
    with pytest.raises(DataError):
        Dataset(np.array([0.0, 1.0, 1.0]), np.ones((2, 1)))
    with pytest.raises(DataError):
        Dataset(np.array([0.0, 1.0]), np.array([[1.0, np.inf], [1.0, 0.0]]))


def test_dataset_immutable_and_summary():
    ds, _ = make_dataset(seed=11, n=20, p=1)
    with pytest.raises(ValueError):
        ds.y[0] = 1.0
    assert ds.n == 20
    assert ds.n_params == 2
    assert 0.0 <= ds.event_rate <= 1.0


def test_check_full_rank_flags_redundant_column():
    X = np.column_stack([np.ones(10), np.arange(10.0), 2.0 * np.arange(10.0)])
    with pytest.raises(RankDeficiencyError) as excinfo:
        check_full_rank(X)
    assert len(excinfo.value.columns) == 1
    assert excinfo.value.columns[0] in (1, 2)


def test_check_full_rank_honors_weights():
    # The second covariate only varies on rows whose weight is zero.
    X = np.column_stack([np.ones(8), np.r_[np.zeros(4), np.ones(4)]])
    w = np.r_[np.ones(4), np.zeros(4)]
    with pytest.raises(RankDeficiencyError):
        check_full_rank(X, w)
    check_full_rank(X)  # unweighted it is fine
