"""Time-invariant VAR(p): OLS fit, BIC lag choice, Newey-West errors, Hansen L_C.

Coefficients are held as ``nu`` (k,) and ``A`` (p, k, k) so that

    y_t = nu + A[0] y_{t-1} + ... + A[p-1] y_{t-p} + u_t.

Stacked coefficient vectors are equation-major: for equation ``i`` the
regressors are ``(1, y_{t-1}', ..., y_{t-p}')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .dataio import ReturnsPanel
from .exceptions import InsufficientDataError, NumericalError

__all__ = [
    "VarEstimate",
    "ConstancyResult",
    "DEFAULT_PMAX",
    "lag_matrix",
    "var_bic",
    "select_var_lag_bic",
    "fit_var",
    "newey_west_bandwidth",
    "newey_west_cov",
    "hansen_scores",
    "hansen_lc",
    "lc_null_draws",
    "lc_critical_value",
]

DEFAULT_PMAX = 8


def _as_returns(returns):
    if isinstance(returns, ReturnsPanel):
        return returns
    return ReturnsPanel.from_array(returns)


def lag_matrix(y, p, start=None):
    """Regressor rows ``Z_{t-1} = (y_{t-1}', ..., y_{t-p}')`` for ``t = start..T-1``.

    ``start`` defaults to ``p``. Returns ``(Y, Z)`` with ``Y`` the matching
    targets. Works on a leading batch axis: ``y`` may be ``(..., T, k)``.
    """
    y = np.asarray(y, dtype=float)
    start = p if start is None else start
    if start < p:
        raise ValueError("start must be >= p")
    T = y.shape[-2]
    Z = np.concatenate([y[..., start - l:T - l, :] for l in range(1, p + 1)], axis=-1)
    return y[..., start:, :], Z


def _regressors(Z):
    return np.concatenate([np.ones(Z.shape[:-1] + (1,)), Z], axis=-1)


@dataclass(frozen=True)
class VarEstimate:
    p: int
    nu: np.ndarray
    A: np.ndarray
    residuals: np.ndarray
    regressors: np.ndarray
    targets: np.ndarray
    coef_cov_nw: np.ndarray
    nw_bandwidth: int
    adj_r2: np.ndarray
    sample_span: tuple
    markets: tuple = ()
    dates: np.ndarray | None = None

    @property
    def k(self):
        return self.nu.size

    @property
    def nobs(self):
        return self.residuals.shape[0]

    @property
    def coef(self):
        """``(k, 1 + k p)`` matrix, row ``i`` holding equation ``i``'s coefficients."""
        return np.column_stack([self.nu] + [self.A[l] for l in range(self.p)])

    @property
    def nw_se(self):
        """Newey-West standard errors shaped like :attr:`coef`."""
        return np.sqrt(np.diag(self.coef_cov_nw)).reshape(self.k, -1)

    @property
    def sigma_u(self):
        """Residual covariance with divisor ``T_eff`` (ML)."""
        u = self.residuals
        return u.T @ u / u.shape[0]


@dataclass(frozen=True)
class ConstancyResult:
    lc: float
    n_params: int
    per_equation: np.ndarray
    critical_value: float | None = None
    level: float | None = None
    reject_hint: bool | None = None
    meta: dict = field(default_factory=dict)


def _check_sample(T, k, p):
    if T - p <= k * p + 1:
        raise InsufficientDataError(f"T - p = {T - p} observations cannot identify {k * p + 1} regressors")


def var_bic(y, p, start=None):
    """``ln det Sigma_u + ln(T_eff)/T_eff * p k^2`` on rows ``t >= start``."""
    y = np.asarray(y, dtype=float)
    k = y.shape[1]
    Y, Z = lag_matrix(y, p, start)
    X = _regressors(Z)
    B, *_ = np.linalg.lstsq(X, Y, rcond=None)
    U = Y - X @ B
    n = U.shape[0]
    sign, logdet = np.linalg.slogdet(U.T @ U / n)
    if sign <= 0:
        return np.inf
    return logdet + math.log(n) / n * p * k * k


def select_var_lag_bic(returns, pmax=DEFAULT_PMAX):
    """Lag order in ``1..pmax`` minimizing the system BIC on a common sample.

    Every candidate is fitted on ``t = pmax+1..T`` so the criteria are
    comparable. Ties go to the smaller lag.
    """
    y = _as_returns(returns).returns
    T, k = y.shape
    pmax = int(pmax)
    if pmax < 1:
        raise ValueError("pmax must be >= 1")
    _check_sample(T, k, pmax)
    if pmax == 1:
        return 1
    crit = [var_bic(y, p, start=pmax) for p in range(1, pmax + 1)]
    return int(np.argmin(crit)) + 1


def _rank_check(X):
    _, r, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(X.shape) * np.finfo(float).eps
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        bad = piv[rank]
        return bad
    return None


def _column_name(j, k, markets):
    if j == 0:
        return "constant"
    lag, i = divmod(j - 1, k)
    name = markets[i] if markets else f"y{i + 1}"
    return f"{name}(t-{lag + 1})"


def fit_var(returns, p, bandwidth="auto"):
    """OLS fit of a VAR(p) with intercept, equation by equation.

    With common regressors the per-equation estimates coincide with the
    seemingly-unrelated system estimates.

    Parameters
    ----------
    returns : ReturnsPanel or array_like, shape (T, k)
    p : int
    bandwidth : int or 'auto'
        Newey-West truncation lag passed to :func:`newey_west_cov`.
    """
    panel = _as_returns(returns)
    y = panel.returns
    T, k = y.shape
    p = int(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    _check_sample(T, k, p)
    Y, Z = lag_matrix(y, p)
    X = _regressors(Z)
    bad = _rank_check(X)
    if bad is not None:
        raise NumericalError(f"rank-deficient regressor matrix: column {_column_name(bad, k, panel.markets)!r}")
    B, *_ = np.linalg.lstsq(X, Y, rcond=None)  # (1 + kp, k)
    U = Y - X @ B
    n, nreg = X.shape
    ssr = np.sum(U**2, axis=0)
    sst = np.sum((Y - Y.mean(axis=0)) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        adj_r2 = 1.0 - (ssr / (n - nreg)) / (sst / (n - 1))
    coef = B.T
    L, cov = newey_west_cov(X, U, bandwidth, return_bandwidth=True)
    return VarEstimate(
        p=p,
        nu=coef[:, 0].copy(),
        A=coef[:, 1:].reshape(k, p, k).transpose(1, 0, 2).copy(),
        residuals=U,
        regressors=X,
        targets=Y,
        coef_cov_nw=cov,
        nw_bandwidth=L,
        adj_r2=adj_r2,
        sample_span=(p, T),
        markets=panel.markets,
        dates=panel.dates[p:],
    )


def newey_west_bandwidth(nobs):
    """``floor(4 (T/100)^(2/9))``."""
    return int(math.floor(4.0 * (nobs / 100.0) ** (2.0 / 9.0)))


def newey_west_cov(estimate_or_x, resid=None, bandwidth="auto", return_bandwidth=False):
    """Bartlett-kernel HAC covariance of the stacked VAR coefficients.

    Accepts either a :class:`VarEstimate` or the pair ``(X, U)`` of regressors
    ``(n, m)`` and residuals ``(n, k)``. The result is ``(k m, k m)``,
    equation-major, and includes cross-equation blocks. Each diagonal block is
    the single-equation Newey-West covariance. No small-sample scaling; with
    ``bandwidth=0`` this is White's HC0 estimator.
    """
    if isinstance(estimate_or_x, VarEstimate):
        X, U = estimate_or_x.regressors, estimate_or_x.residuals
    else:
        X, U = np.asarray(estimate_or_x, float), np.asarray(resid, float)
    U = U.reshape(U.shape[0], -1)
    n, m = X.shape
    k = U.shape[1]
    L = newey_west_bandwidth(n) if bandwidth in (None, "auto") else int(bandwidth)
    if L < 0:
        raise ValueError("bandwidth must be >= 0")
    # scores g_t = u_t (x) x_t, equation-major
    g = (U[:, :, None] * X[:, None, :]).reshape(n, k * m)
    S = g.T @ g
    for j in range(1, min(L, n - 1) + 1):
        w = 1.0 - j / (L + 1.0)
        G = g[j:].T @ g[:-j]
        S += w * (G + G.T)
    bread = np.linalg.inv(X.T @ X)
    bread = np.kron(np.eye(k), bread)
    cov = bread @ S @ bread
    cov = (cov + cov.T) / 2
    return (L, cov) if return_bandwidth else cov


def hansen_scores(estimate):
    """Per-observation scores: ``x_t u_{i,t}`` and ``u_{i,t}^2 - s2_i`` per equation.

    Returns an ``(n, k, m + 1)`` array.
    """
    X, U = estimate.regressors, estimate.residuals
    s2 = np.mean(U**2, axis=0)
    f_coef = U[:, :, None] * X[:, None, :]
    f_var = (U**2 - s2)[:, :, None]
    return np.concatenate([f_coef, f_var], axis=2)


def _lc(f):
    S = np.cumsum(f, axis=0)
    V = f.T @ f
    try:
        c, low = linalg.cho_factor(V)
    except linalg.LinAlgError:
        raise NumericalError("singular score outer-product matrix (redundant regressors?)") from None
    return float(np.sum(S * linalg.cho_solve((c, low), S.T).T) / f.shape[0])


def hansen_lc(estimate, critical_value=None, level=0.01, simulate=False, reps=20000, seed=0):
    """Hansen's joint parameter-constancy statistic including the variance terms.

        L_C = (1/n) sum_t S_t' V^{-1} S_t,  S_t = sum_{s<=t} f_s,  V = sum_t f_t f_t'

    with ``f_t`` stacking, for each equation, the regressor scores and the
    variance score. Per-equation statistics are returned alongside.

    If ``simulate`` is true (or ``critical_value`` is given) a rejection hint
    is attached; simulated critical values come from
    :func:`lc_critical_value`.
    """
    f = hansen_scores(estimate)
    n, k, q = f.shape
    lc = _lc(f.reshape(n, k * q))
    per_eq = np.array([_lc(f[:, i, :]) for i in range(k)])
    meta = {}
    if critical_value is None and simulate:
        critical_value = lc_critical_value(k * q, level=level, reps=reps, seed=seed)
        meta = {"critical_value_method": "asymptotic-simulated", "reps": reps, "seed": seed}
    reject = None if critical_value is None else bool(lc > critical_value)
    return ConstancyResult(
        lc=lc,
        n_params=k * q,
        per_equation=per_eq,
        critical_value=critical_value,
        level=level if critical_value is not None else None,
        reject_hint=reject,
        meta=meta,
    )


def lc_null_draws(n_params, reps=20000, seed=0, terms=500):
    """Draws from the limiting null law of L_C with ``n_params`` scores.

    The limit is the sum of ``n_params`` independent ``int_0^1 B(r)^2 dr``
    with ``B`` a Brownian bridge. Through the Karhunen-Loeve expansion this is
    ``sum_j chi2_j / (j pi)^2`` with ``chi2_j`` independent chi-square
    variables on ``n_params`` degrees of freedom. The series is cut after
    ``terms`` terms and the tail replaced by its mean.
    """
    rng = np.random.default_rng(seed)
    j = np.arange(1, terms + 1)
    w = 1.0 / (j * math.pi) ** 2
    tail = n_params * (1.0 / 6.0 - w.sum())
    out = np.empty(reps)
    chunk = max(1, 1_000_000 // terms)
    for s in range(0, reps, chunk):
        e = min(reps, s + chunk)
        out[s:e] = rng.chisquare(n_params, (e - s, terms)) @ w + tail
    return out


def lc_critical_value(n_params, level=0.01, reps=20000, seed=0):
    """Upper ``level`` quantile of the simulated limiting null of L_C."""
    draws = lc_null_draws(n_params, reps=reps, seed=seed)
    return float(np.quantile(draws, 1.0 - level))
