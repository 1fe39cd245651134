import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from tvme.dataio import ReturnsPanel
from tvme.exceptions import InsufficientDataError, NumericalError
from tvme.var import (
    fit_var,
    hansen_lc,
    lag_matrix,
    lc_critical_value,
    lc_null_draws,
    newey_west_bandwidth,
    newey_west_cov,
    select_var_lag_bic,
)

from oracles import naive_hansen_lc, naive_newey_west, ols_constant_var, simulate_var

A1 = np.array([[0.2, 0.1], [0.0, 0.3]])


def test_lag_matrix_layout():
    y = np.arange(12.0).reshape(6, 2)
    Y, Z = lag_matrix(y, 2)
    assert_allclose(Y, y[2:])
    assert_allclose(Z[0], np.concatenate([y[1], y[0]]))
    assert_allclose(Z[-1], np.concatenate([y[4], y[3]]))


def test_bic_pmax_one():
    assert select_var_lag_bic(np.random.default_rng(0).standard_normal((50, 2)), 1) == 1


def test_bic_selects_var1_mostly():
    picks = [select_var_lag_bic(simulate_var(np.random.default_rng([21, r]), 500, 0.0, [A1]), 8)
             for r in range(100)]
    assert np.mean(np.array(picks) == 1) >= 0.9


def test_bic_selects_var2_with_strong_second_lag():
    A2 = np.array([[0.5, 0.0], [0.0, 0.5]])
    picks = [select_var_lag_bic(simulate_var(np.random.default_rng([22, r]), 500, 0.0, [0.1 * np.eye(2), A2]), 8)
             for r in range(100)]
    assert np.mean(np.array(picks) == 2) >= 0.9


def test_bic_rejects_short_sample():
    with pytest.raises(InsufficientDataError):
        select_var_lag_bic(np.zeros((10, 3)), 4)


def test_fit_matches_lstsq_oracle(rng):
    y = simulate_var(rng, 300, np.array([0.01, -0.02]), [A1, 0.1 * np.eye(2)])
    est = fit_var(y, 2)
    nu, A = ols_constant_var(y, 2)
    assert_allclose(est.nu, nu, atol=1e-12)
    assert_allclose(est.A, A, atol=1e-12)
    assert est.residuals.shape == (298, 2)
    assert est.coef.shape == (2, 5)
    assert est.sample_span == (2, 300)


def test_residual_means_and_orthogonality(rng):
    est = fit_var(simulate_var(rng, 400, np.array([0.3, 0.1]), [A1]), 1)
    assert_allclose(est.residuals.mean(axis=0), 0.0, atol=1e-10)
    assert_allclose(est.regressors.T @ est.residuals, 0.0, atol=1e-8)


def _noise_free_path(A, nu, y0, T):
    y = np.zeros((T, len(y0)))
    y[0] = y0
    for t in range(1, T):
        y[t] = nu + A @ y[t - 1]
    return y


def test_noise_free_half_identity_is_rank_deficient():
    # deviations from the fixed point shrink along one ray, collinear with the constant
    y = _noise_free_path(0.5 * np.eye(2), np.array([0.1, 0.2]), [1.0, -2.0], 30)
    with pytest.raises(NumericalError, match="rank-deficient"):
        fit_var(y, 1)


def test_noise_free_recursion_recovered_exactly():
    A = np.array([[0.5, 0.0], [0.0, -0.4]])
    y = _noise_free_path(A, np.array([0.1, 0.2]), [1.0, -2.0], 25)
    est = fit_var(y, 1)
    assert_allclose(est.A[0], A, atol=1e-8)
    assert_allclose(est.nu, [0.1, 0.2], atol=1e-8)


def test_iid_coefficients_within_three_se():
    y = np.random.default_rng(23).standard_normal((2000, 2))
    est = fit_var(y, 1)
    se = est.nw_se
    assert np.all(np.abs(est.A[0]) < 3 * se[:, 1:])


def test_column_permutation_equivariance(rng):
    y = simulate_var(rng, 200, np.array([0.1, 0.0, -0.1]), [0.2 * np.eye(3) + 0.05])
    perm = [2, 0, 1]
    a, b = fit_var(y, 2), fit_var(y[:, perm], 2)
    assert_allclose(b.nu, a.nu[perm], atol=1e-12)
    for l in range(2):
        assert_allclose(b.A[l], a.A[l][np.ix_(perm, perm)], atol=1e-12)


def test_rank_deficiency_names_column():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(100)
    y = np.column_stack([x, 2 * x])
    panel = ReturnsPanel.from_array(y, markets=["US", "CA"])
    with pytest.raises(NumericalError, match=r"(US|CA)\(t-1\)"):
        fit_var(panel, 1)


def test_adj_r2_formula(rng):
    est = fit_var(simulate_var(rng, 150, 0.0, [A1]), 1)
    Y = est.targets
    n, m = est.regressors.shape
    ssr = np.sum(est.residuals**2, axis=0)
    sst = np.sum((Y - Y.mean(0)) ** 2, axis=0)
    assert_allclose(est.adj_r2, 1 - (ssr / (n - m)) / (sst / (n - 1)), rtol=1e-12)


def test_nw_bandwidth_rule():
    assert newey_west_bandwidth(100) == 4
    assert newey_west_bandwidth(518) == 5


@pytest.mark.parametrize("L", [0, 1, 5])
def test_newey_west_matches_loop_oracle(rng, L):
    est = fit_var(simulate_var(rng, 120, 0.0, [A1]), 1, bandwidth=L)
    m = est.regressors.shape[1]
    for i in range(2):
        block = est.coef_cov_nw[i * m:(i + 1) * m, i * m:(i + 1) * m]
        assert_allclose(block, naive_newey_west(est.regressors, est.residuals[:, i], L), rtol=1e-10, atol=1e-14)


def test_bandwidth_zero_is_white(rng):
    X = np.column_stack([np.ones(80), rng.standard_normal(80)])
    u = rng.standard_normal(80) * (1 + np.abs(X[:, 1]))
    B = np.linalg.inv(X.T @ X)
    white = B @ (X.T * u**2) @ X @ B
    assert_allclose(newey_west_cov(X, u[:, None], 0), white, rtol=1e-12)


def test_nw_close_to_classical_under_iid():
    ratios = []
    for r in range(200):
        rng = np.random.default_rng([24, r])
        X = np.column_stack([np.ones(500), rng.standard_normal(500)])
        u = rng.standard_normal(500)
        b = np.linalg.lstsq(X, u, rcond=None)[0]
        e = u - X @ b
        classical = e @ e / (500 - 2) * np.linalg.inv(X.T @ X)
        nw = newey_west_cov(X, e[:, None])
        ratios.append(np.sqrt(np.diag(nw) / np.diag(classical)))
    assert np.all(np.abs(np.mean(ratios, axis=0) - 1) < 0.15)


def test_nw_exceeds_white_under_ar1_errors():
    wins = 0
    for r in range(200):
        rng = np.random.default_rng([25, r])
        e = rng.standard_normal(501)
        u = np.empty(500)
        u[0] = e[0]
        for t in range(1, 500):
            u[t] = 0.5 * u[t - 1] + e[t]
        X = np.column_stack([np.ones(500), rng.standard_normal(500)])
        res = u - X @ np.linalg.lstsq(X, u, rcond=None)[0]
        wins += newey_west_cov(X, res[:, None])[0, 0] > newey_west_cov(X, res[:, None], 0)[0, 0]
    assert wins / 200 >= 0.9


def test_hansen_matches_loop_oracle(rng):
    est = fit_var(simulate_var(rng, 80, 0.0, [A1]), 1)
    res = hansen_lc(est)
    assert_allclose(res.lc, naive_hansen_lc(est.regressors, est.residuals), rtol=1e-10)
    for i in range(2):
        assert_allclose(res.per_equation[i], naive_hansen_lc(est.regressors, est.residuals[:, i:i + 1]), rtol=1e-10)
    assert res.n_params == 2 * (2 * 1 + 1) + 2
    assert res.lc >= 0
    assert res.reject_hint is None


def test_hansen_critical_value_hint(rng):
    est = fit_var(simulate_var(rng, 200, 0.0, [A1]), 1)
    res = hansen_lc(est, critical_value=1e6)
    assert res.reject_hint is False and res.level == 0.01


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.floats(1e-3, 1e3))
def test_hansen_scale_invariance(seed, c):
    y = simulate_var(np.random.default_rng(seed), 150, 0.0, [A1])
    assert abs(hansen_lc(fit_var(c * y, 1)).lc - hansen_lc(fit_var(y, 1)).lc) < 1e-8


def test_singular_score_matrix(rng):
    est = fit_var(simulate_var(rng, 60, 0.0, [A1]), 1)
    degenerate = dataclasses.replace(est, residuals=np.zeros_like(est.residuals))
    with pytest.raises(NumericalError, match="singular"):
        hansen_lc(degenerate)


@pytest.mark.parametrize("n", [1, 4, 8])
def test_null_law_moments(n):
    d = lc_null_draws(n, reps=100_000, seed=n)
    assert abs(d.mean() - n / 6) < 4 * np.sqrt(n / 45 / d.size)
    assert_allclose(d.var(), n / 45, rtol=0.03)


def test_null_law_single_score_quantiles():
    d = lc_null_draws(1, reps=200_000, seed=1)
    assert_allclose(np.quantile(d, [0.90, 0.95, 0.99]), [0.353, 0.470, 0.748], atol=0.015)


def test_critical_value_is_deterministic():
    assert lc_critical_value(8, reps=5000, seed=3) == lc_critical_value(8, reps=5000, seed=3)
