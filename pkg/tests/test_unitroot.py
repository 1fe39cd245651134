import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from tvme.exceptions import InsufficientDataError
from tvme.unitroot import (
    CRITICAL_VALUE_1PCT_TREND,
    adf_gls_test,
    default_kmax,
    gls_detrend,
    select_adf_lag_mbic,
)


def _ar1(rng, n, phi=0.5):
    e = rng.standard_normal(n + 50)
    y = np.zeros_like(e)
    for t in range(1, e.size):
        y[t] = phi * y[t - 1] + e[t]
    return y[50:]


def _quasi_diff_fit(y, cbar=-13.5):
    """Two-parameter normal equations written out by hand (Cramer's rule)."""
    n = len(y)
    a = 1.0 + cbar / n
    s11 = s12 = s22 = r1 = r2 = 0.0
    for t in range(n):
        if t == 0:
            z1, z2, yy = 1.0, 1.0, y[0]
        else:
            z1, z2, yy = 1.0 - a, (t + 1) - a * t, y[t] - a * y[t - 1]
        s11 += z1 * z1
        s12 += z1 * z2
        s22 += z2 * z2
        r1 += z1 * yy
        r2 += z2 * yy
    det = s11 * s22 - s12 * s12
    b0 = (r1 * s22 - r2 * s12) / det
    b1 = (s11 * r2 - s12 * r1) / det
    return np.array([y[t] - b0 - b1 * (t + 1) for t in range(n)]), np.array([b0, b1])


def test_constant_series_detrends_to_zero():
    yd, phi = gls_detrend(np.full(40, 5.0), model="constant")
    assert_allclose(yd, 0.0, atol=1e-12)
    assert_allclose(phi, [5.0], rtol=1e-12)


def test_exact_trend_absorbed():
    t = np.arange(1, 101)
    yd, phi = gls_detrend(2.0 + 3.0 * t, model="trend")
    assert_allclose(yd, 0.0, atol=1e-10)
    assert_allclose(phi, [2.0, 3.0], rtol=1e-10)


def test_detrend_matches_hand_normal_equations(rng):
    y = _ar1(rng, 200)
    yd, phi = gls_detrend(y, model="trend")
    yd_ref, phi_ref = _quasi_diff_fit(y)
    assert_allclose(yd, yd_ref, rtol=0, atol=1e-10)
    assert_allclose(phi, phi_ref, rtol=1e-10)


def test_short_series_rejected():
    with pytest.raises(InsufficientDataError):
        gls_detrend(np.arange(9.0))


def test_kmax_zero_returns_zero(rng):
    assert select_adf_lag_mbic(rng.standard_normal(50), 0) == 0


def test_kmax_too_large_for_sample(rng):
    with pytest.raises(InsufficientDataError):
        select_adf_lag_mbic(rng.standard_normal(20), 10)


def test_default_kmax_rules():
    assert default_kmax(519) == 4
    assert default_kmax(13) == 2
    assert default_kmax(519, "schwert") == 18
    assert default_kmax(100, "schwert") == 12


def test_ma_contaminated_unit_root_selects_positive_lag():
    picks = []
    for r in range(200):
        e = np.random.default_rng([11, r]).standard_normal(520)
        y = np.cumsum(e[1:] - 0.8 * e[:-1])
        picks.append(select_adf_lag_mbic(gls_detrend(y)[0], default_kmax(y.size)))
    assert np.mean(np.array(picks) > 0) >= 0.9


@pytest.mark.xfail(strict=True, reason="the MBIC penalty term tau favours long lags on GLS-detrended white noise; "
                                       "lag 0 is chosen in only about 5% of draws")
def test_white_noise_selects_lag_zero_mostly():
    picks = []
    for r in range(200):
        e = np.random.default_rng([12, r]).standard_normal(519)
        picks.append(select_adf_lag_mbic(gls_detrend(e)[0], default_kmax(e.size)))
    assert np.mean(np.array(picks) == 0) > 0.5


def test_result_invariants(rng):
    res = adf_gls_test(rng.standard_normal(300))
    assert 0 <= res.lag <= res.kmax
    assert res.reject_at_1pct == (res.statistic < res.critical_value_1pct)
    assert res.critical_value_1pct == CRITICAL_VALUE_1PCT_TREND
    assert res.detrend_model == "constant+trend"
    assert res.phi_hat.shape == (2,)
    assert res.nobs == 300


def test_constant_model_needs_critical_value(rng):
    y = rng.standard_normal(100)
    with pytest.raises(ValueError, match="critical_value"):
        adf_gls_test(y, model="constant")
    res = adf_gls_test(y, model="constant", critical_value=-2.58)
    assert res.phi_hat.shape == (1,)
    assert res.detrend_model == "constant"


def test_fixed_lag_t_ratio_matches_direct_regression(rng):
    y = _ar1(rng, 150, 0.7)
    res = adf_gls_test(y, lag=2)
    yd, _ = _quasi_diff_fit(y)
    dy = np.diff(yd)
    rows = range(3, len(yd))
    X = np.array([[yd[t - 1], dy[t - 2], dy[t - 3]] for t in rows])
    d = np.array([dy[t - 1] for t in rows])
    b = np.linalg.lstsq(X, d, rcond=None)[0]
    e = d - X @ b
    s2 = e @ e / (len(d) - 3)
    se = math.sqrt(s2 * np.linalg.inv(X.T @ X)[0, 0])
    assert res.lag == 2
    assert_allclose(res.statistic, b[0] / se, rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-100, 100), st.floats(-5, 5), st.floats(0.01, 100))
def test_trend_and_scale_invariance(seed, a, b, c):
    y = _ar1(np.random.default_rng(seed), 120, 0.6)
    base = adf_gls_test(y)
    t = np.arange(1, y.size + 1)
    shifted = adf_gls_test(y + a + b * t, lag=base.lag)
    assert abs(shifted.statistic - base.statistic) < 1e-8
    scaled = adf_gls_test(c * y, lag=base.lag)
    assert abs(scaled.statistic - base.statistic) < 1e-10


def test_random_walk_rarely_rejected_small():
    rej = [adf_gls_test(np.cumsum(np.random.default_rng([13, r]).standard_normal(519))).reject_at_1pct
           for r in range(200)]
    assert np.mean(rej) <= 0.05


def test_iid_usually_rejected_small():
    rej = [adf_gls_test(np.random.default_rng([14, r]).standard_normal(519)).reject_at_1pct
           for r in range(200)]
    assert np.mean(rej) >= 0.95
