"""ADF-GLS unit-root test (Elliott, Rothenberg and Stock) with MBIC lag choice.

The series is GLS-detrended by quasi-differencing with ``alpha = 1 + cbar/T``,
then an augmented Dickey-Fuller regression without deterministic terms is run
on the detrended series. The augmentation lag is picked by the modified BIC of
Ng and Perron (2001).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientDataError, NumericalError

__all__ = [
    "UnitRootResult",
    "CBAR",
    "CRITICAL_VALUE_1PCT_TREND",
    "DEFAULT_KMAX",
    "default_kmax",
    "gls_detrend",
    "select_adf_lag_mbic",
    "adf_gls_test",
]

CBAR = {"trend": -13.5, "constant": -7.0}
CRITICAL_VALUE_1PCT_TREND = -3.42
DEFAULT_KMAX = 4

_MODELS = {"trend": "constant+trend", "constant": "constant", "ct": "constant+trend", "c": "constant",
           "constant+trend": "constant+trend"}


@dataclass(frozen=True)
class UnitRootResult:
    statistic: float
    lag: int
    phi_hat: np.ndarray
    critical_value_1pct: float
    reject_at_1pct: bool
    detrend_model: str
    kmax: int
    nobs: int


def _model(model):
    try:
        return _MODELS[model]
    except KeyError:
        raise ValueError(f"unknown detrend model {model!r}; use 'trend' or 'constant'") from None


def default_kmax(nobs, rule="fixed"):
    """Largest augmentation lag tried.

    ``rule='fixed'`` gives ``DEFAULT_KMAX`` (4), shortened if the sample
    cannot afford it. ``rule='schwert'`` gives ``floor(12 (T/100)^(1/4))``;
    with the MBIC penalty that long a search drives the chosen lag up on
    stationary series and costs most of the test's power.
    """
    if rule == "schwert":
        return int(math.floor(12.0 * (nobs / 100.0) ** 0.25))
    if rule != "fixed":
        raise ValueError(f"unknown kmax rule {rule!r}")
    return max(0, min(DEFAULT_KMAX, nobs - 11))


def _deterministics(nobs, model):
    if _model(model) == "constant":
        return np.ones((nobs, 1))
    return np.column_stack([np.ones(nobs), np.arange(1, nobs + 1, dtype=float)])


def gls_detrend(series, model="trend", cbar=None):
    """Quasi-difference and remove deterministic terms by GLS.

    Parameters
    ----------
    series : array_like, shape (T,)
    model : {'trend', 'constant'}
        Deterministic regressors ``(1, t)`` or ``(1)``.
    cbar : float, optional
        Local-to-unity constant; defaults to -13.5 (trend) or -7.0 (constant).

    Returns
    -------
    detrended : ndarray, shape (T,)
        ``y_t - z_t' phi_hat``.
    phi_hat : ndarray
        Coefficients of the quasi-differenced regression.
    """
    y = np.asarray(series, dtype=float).ravel()
    nobs = y.size
    if nobs < 10:
        raise InsufficientDataError(f"GLS detrending needs T >= 10, got {nobs}")
    if cbar is None:
        cbar = CBAR["constant" if _model(model) == "constant" else "trend"]
    alpha = 1.0 + cbar / nobs
    z = _deterministics(nobs, model)
    yq = np.concatenate([y[:1], y[1:] - alpha * y[:-1]])
    zq = np.vstack([z[:1], z[1:] - alpha * z[:-1]])
    gram = zq.T @ zq
    if np.linalg.cond(gram) > 1e14:
        raise NumericalError("singular cross-product of quasi-differenced deterministic regressors")
    phi = np.linalg.solve(gram, zq.T @ yq)
    return y - z @ phi, phi


def _adf_design(yd, lag, start):
    """ADF regression ``dy_t = rho0 y_{t-1} + sum_j rho_j dy_{t-j}`` on rows t >= start (0-based)."""
    dy = np.diff(yd)  # dy[i] = y[i+1] - y[i]
    # target index t runs over yd positions start..T-1, so dy index t-1
    t = np.arange(start, yd.size)
    cols = [yd[t - 1]] + [dy[t - 1 - j] for j in range(1, lag + 1)]
    return dy[t - 1], np.column_stack(cols)


def _ols(target, x):
    coef, _, rank, _ = np.linalg.lstsq(x, target, rcond=None)
    if rank < x.shape[1]:
        raise NumericalError("rank-deficient ADF regression")
    resid = target - x @ coef
    return coef, resid


def select_adf_lag_mbic(detrended, kmax):
    """Modified-BIC choice of the ADF augmentation lag.

    All candidates ``k = 0..kmax`` are fitted on the common sample that the
    largest lag allows, ``T_eff = T - kmax - 1`` observations, and

        MBIC(k) = ln(s2_k) + ln(T_eff) * (tau_k + k) / T_eff,
        tau_k = rho0_k**2 * sum(y_{t-1}**2) / s2_k.

    Ties go to the smaller lag.
    """
    yd = np.asarray(detrended, dtype=float).ravel()
    kmax = int(kmax)
    if kmax < 0:
        raise ValueError("kmax must be non-negative")
    n_eff = yd.size - kmax - 1
    if n_eff < 10:
        raise InsufficientDataError(f"T - kmax - 1 = {n_eff} < 10")
    if kmax == 0:
        return 0
    start = kmax + 1
    crits = []
    for k in range(kmax + 1):
        target, x = _adf_design(yd, k, start)
        coef, resid = _ols(target, x)
        s2 = resid @ resid / n_eff
        tau = coef[0] ** 2 * np.sum(x[:, 0] ** 2) / s2
        crits.append(math.log(s2) + math.log(n_eff) * (tau + k) / n_eff)
    return int(np.argmin(crits))  # first minimum, i.e. ties to the smaller lag


def adf_gls_test(series, model="trend", kmax=None, cbar=None, critical_value=None, lag=None):
    """ADF-GLS test of a unit root against (trend-)stationarity.

    Parameters
    ----------
    series : array_like, shape (T,)
    model : {'trend', 'constant'}
    kmax : int, 'auto' or 'schwert', optional
        Largest augmentation lag tried; see :func:`default_kmax`.
    cbar : float, optional
        See :func:`gls_detrend`.
    critical_value : float, optional
        Rejection threshold. Only the 1% value for the trend model (-3.42) is
        built in; the constant-only model needs an explicit value.
    lag : int, optional
        Fix the augmentation lag and skip MBIC selection.

    Returns
    -------
    UnitRootResult
        The t-ratio is computed from the regression at the chosen lag using
        every observation that lag allows.
    """
    y = np.asarray(series, dtype=float).ravel()
    mname = _model(model)
    if kmax is None or kmax == "auto":
        kmax = default_kmax(y.size)
    elif kmax == "schwert":
        kmax = default_kmax(y.size, "schwert")
    kmax = int(kmax)
    if critical_value is None:
        if mname != "constant+trend":
            raise ValueError("no built-in critical value for the constant-only model; pass critical_value")
        critical_value = CRITICAL_VALUE_1PCT_TREND
    yd, phi = gls_detrend(y, model, cbar)
    if lag is None:
        lag = select_adf_lag_mbic(yd, kmax)
    target, x = _adf_design(yd, lag, lag + 1)
    if target.size <= x.shape[1]:
        raise InsufficientDataError("not enough observations for the ADF regression")
    coef, resid = _ols(target, x)
    dof = target.size - x.shape[1]
    s2 = resid @ resid / dof
    cov = s2 * np.linalg.inv(x.T @ x)
    stat = float(coef[0] / math.sqrt(cov[0, 0]))
    return UnitRootResult(
        statistic=stat,
        lag=int(lag),
        phi_hat=phi,
        critical_value_1pct=float(critical_value),
        reject_at_1pct=bool(stat < critical_value),
        detrend_model=mname,
        kmax=kmax,
        nobs=int(y.size),
    )
