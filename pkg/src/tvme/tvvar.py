"""Random-walk time-varying VAR estimated as one stacked least-squares problem.

Observation rows and state rows share the coefficient path
``beta = (vec A_1, ..., vec A_T, nu)``::

    y_t                    = nu + (Z_{t-1}' kron I_k) vec A_t + u_t
    vec A_0 (anchor)       = vec A_1 + v_1              (anchored mode only)
    0                      = vec A_t - vec A_{t-1} + v_t,   t >= 2

with ``Z_{t-1} = (y_{t-1}', ..., y_{t-p}')'`` and ``vec`` column-major, so
``A_t = [A_{1,t} ... A_{p,t}]`` is ``k x kp``. The state rows are weighted
by ``lam`` and

    beta_hat = argmin ||y - D beta||^2 + lam^2 ||gamma - W beta||^2.

The normal equations are block tridiagonal in ``t`` (block size ``k^2 p``)
bordered by the ``k`` intercept columns. They are solved by a block LU sweep
followed by a Schur complement for ``nu``, linear in ``T``. Every routine
accepts leading batch axes so that many panels (e.g. band replications) are
solved in one sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .dataio import ReturnsPanel
from .exceptions import InsufficientDataError, NumericalError
from .var import DEFAULT_PMAX, lag_matrix, select_var_lag_bic

__all__ = [
    "ANCHOR_MODES",
    "StackedSystem",
    "TvVarEstimate",
    "build_stacked_system",
    "solve_stacked",
    "fit_tvvar",
    "default_lambda_grid",
    "lambda_grid_search",
    "tv_coefficient_paths",
]

ANCHOR_MODES = ("ols", "diffuse")


def _as_returns(returns):
    if isinstance(returns, ReturnsPanel):
        return returns
    return ReturnsPanel.from_array(returns)


def _ols_anchor(Y, Z):
    """Full-sample constant-coefficient OLS, batched. Returns (nu, vec A) per batch item.

    Uses a pseudo-inverse so that degenerate panels (e.g. constant data)
    still yield the minimum-norm fit instead of failing.
    """
    X = np.concatenate([np.ones(Z.shape[:-1] + (1,)), Z], axis=-1)
    XtX = np.swapaxes(X, -1, -2) @ X
    XtY = np.swapaxes(X, -1, -2) @ Y
    try:
        B = np.linalg.solve(XtX, XtY)
        if not np.all(np.isfinite(B)) or np.any(np.linalg.cond(XtX) > 1e12):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        B = np.linalg.pinv(XtX, rcond=1e-12, hermitian=True) @ XtY
    # B[1 + j, i] is the coefficient of Z_j in equation i -> vec index j*k + i
    return B[..., 0, :], B[..., 1:, :].reshape(B.shape[:-2] + (-1,))


@dataclass(frozen=True)
class StackedSystem:
    """Inputs of the stacked regression in compact form.

    ``y`` holds the targets ``y_t`` (``T_eff x k``), ``Z`` the lag vectors
    ``Z_{t-1}`` (``T_eff x kp``, with a leading 1 when the intercept is
    time-varying). ``D``, ``W`` and ``gamma`` are assembled on demand as
    sparse matrices; the solver never forms them.
    """

    y: np.ndarray
    Z: np.ndarray
    k: int
    p: int
    lam: float
    anchor_mode: str = "ols"
    anchor: np.ndarray | None = None
    tv_intercept: bool = False
    dates: np.ndarray | None = None
    markets: tuple = ()

    @property
    def T_eff(self):
        return self.y.shape[-2]

    @property
    def m(self):
        """Length of ``vec A_t``."""
        return self.k * self.Z.shape[-1]

    @property
    def n_nu(self):
        return 0 if self.tv_intercept else self.k

    @property
    def n_params(self):
        return self.T_eff * self.m + self.n_nu

    @property
    def n_state_rows(self):
        n = self.T_eff if self.anchor_mode == "ols" else self.T_eff - 1
        return n * self.m

    @property
    def D(self):
        """Observation design, ``T_eff k`` rows by ``T_eff k^2 p + k`` columns."""
        T, k, m = self.T_eff, self.k, self.m
        blocks = [sparse.kron(self.Z[t][None, :], sparse.identity(k)) for t in range(T)]
        D = sparse.block_diag(blocks, format="csr")
        if self.n_nu:
            D = sparse.hstack([D, sparse.vstack([sparse.identity(k)] * T)], format="csr")
        return D

    @property
    def W(self):
        """First-difference operator on the coefficient path (anchored rows first)."""
        T, m = self.T_eff, self.m
        diff = sparse.diags([np.ones(T), -np.ones(T - 1)], [0, -1], shape=(T, T))
        W = sparse.kron(diff, sparse.identity(m), format="csr")
        if self.anchor_mode == "diffuse":
            W = W[m:]
        if self.n_nu:
            W = sparse.hstack([W, sparse.csr_matrix((W.shape[0], self.n_nu))], format="csr")
        return W

    @property
    def gamma(self):
        g = np.zeros(self.n_state_rows)
        if self.anchor_mode == "ols":
            g[: self.m] = self.anchor
        return g

    @property
    def y_vec(self):
        return self.y.reshape(-1)

    def dense(self):
        """``([D; lam W], [y; lam gamma])`` as dense arrays, for checking small cases."""
        M = np.vstack([self.D.toarray(), self.lam * self.W.toarray()])
        rhs = np.concatenate([self.y_vec, self.lam * self.gamma])
        return M, rhs


@dataclass(frozen=True)
class TvVarEstimate:
    """Solution of the stacked system.

    ``A_path[t, l]`` is the lag-``l+1`` matrix at effective period ``t``.
    ``nu`` is ``(k,)``, or ``(T_eff, k)`` when the intercept is time-varying.
    """

    A_path: np.ndarray
    nu: np.ndarray
    residuals_u: np.ndarray
    innovations_v: np.ndarray
    sigma_u: float
    sigma_v: float
    lam: float
    p: int
    anchor_mode: str
    anchor: np.ndarray | None
    y: np.ndarray
    dates: np.ndarray | None = None
    markets: tuple = ()
    edf: float = float("nan")
    loglike: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def T_eff(self):
        return self.A_path.shape[0]

    @property
    def k(self):
        return self.A_path.shape[-1]

    @property
    def fitted(self):
        return self.y - self.residuals_u

    @property
    def coef_sum(self):
        """``A_{1,t} + ... + A_{p,t}`` for every ``t``."""
        return self.A_path.sum(axis=1)


def build_stacked_system(returns, p, lam=1.0, anchor_mode="ols", tv_intercept=False):
    """Assemble the stacked observation and state equations.

    Parameters
    ----------
    returns : ReturnsPanel or array_like, shape (T, k)
    p : int
        VAR lag order; the first ``p`` rows only serve as lags.
    lam : float
        Weight of the state rows (ratio of observation to state noise scale).
    anchor_mode : {'ols', 'diffuse'}
        ``ols`` ties ``vec A_1`` to the full-sample constant-coefficient OLS
        estimate; ``diffuse`` drops that row.
    tv_intercept : bool
        Let the intercept follow its own random walk instead of being fixed.
    """
    panel = _as_returns(returns)
    y = panel.returns
    T, k = y.shape
    p = int(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    if T <= p:
        raise InsufficientDataError(f"T = {T} leaves no observations after {p} lags")
    if not lam > 0:
        raise ValueError("lam must be positive")
    if anchor_mode not in ANCHOR_MODES:
        raise ValueError(f"anchor_mode must be one of {ANCHOR_MODES}")
    Y, Z = lag_matrix(y, p)
    n_z = Z.shape[1] + 1
    if anchor_mode == "diffuse" and Y.shape[0] < n_z:
        # without the anchor row the path level is identified only by the observations
        raise InsufficientDataError(f"diffuse anchoring needs T - p >= {n_z}, got {Y.shape[0]}")
    anchor = None
    if anchor_mode == "ols":
        nu0, a0 = _ols_anchor(Y, Z)
        anchor = np.concatenate([nu0, a0]) if tv_intercept else a0
    if tv_intercept:
        Z = np.concatenate([np.ones((Z.shape[0], 1)), Z], axis=1)
    return StackedSystem(
        y=Y, Z=Z, k=k, p=p, lam=float(lam), anchor_mode=anchor_mode, anchor=anchor,
        tv_intercept=bool(tv_intercept), dates=panel.dates[p:], markets=panel.markets,
    )


def _penalty_counts(T, anchor_mode):
    """Diagonal multiplicity of ``W'W`` per period."""
    c = np.full(T, 2.0)
    c[-1] = 1.0
    if anchor_mode == "diffuse":
        c[0] -= 1.0
    return c


def _block_sweep(Sinv, R, wm):
    """Forward and backward substitution with the factored block-tridiagonal matrix."""
    T = R.shape[-3]
    g = np.empty_like(R)
    g[..., 0, :, :] = R[..., 0, :, :]
    for t in range(1, T):
        g[..., t, :, :] = R[..., t, :, :] + wm * (Sinv[..., t - 1, :, :] @ g[..., t - 1, :, :])
    x = np.empty_like(g)
    x[..., T - 1, :, :] = Sinv[..., T - 1, :, :] @ g[..., T - 1, :, :]
    for t in range(T - 2, -1, -1):
        x[..., t, :, :] = Sinv[..., t, :, :] @ (g[..., t, :, :] + wm * x[..., t + 1, :, :])
    return x


def _solve_core(Y, Z, w, anchor, anchor_mode, border, want_edf=False, refine_steps=2):
    """Solve the normal equations for a batch of systems.

    Y : (..., T, k); Z : (..., T, q); w : lam^2, shape broadcastable to the
    batch shape; anchor : (..., m) or None. Returns a dict of arrays.

    Forming the normal equations squares the condition number of the
    stacked matrix, so the solution is refined ``refine_steps`` times with
    residuals recomputed from the original rows (corrected semi-normal
    equations). This recovers the accuracy of an orthogonal factorization
    when lam is small.
    """
    batch = Y.shape[:-2]
    T, k = Y.shape[-2:]
    q = Z.shape[-1]
    m = k * q
    w = np.broadcast_to(np.asarray(w, dtype=float), batch)
    wm = w[..., None, None]
    eye_m = np.eye(m)

    ZZ = Z[..., :, None] * Z[..., None, :]
    XtX = (ZZ[..., :, None, :, None] * np.eye(k)[:, None, :]).reshape(batch + (T, m, m))
    counts = _penalty_counts(T, anchor_mode)

    Sinv = np.empty(batch + (T, m, m))
    logdet = np.zeros(batch)
    prev_inv = None
    for t in range(T):
        S = XtX[..., t, :, :] + (counts[t] * wm) * eye_m
        if t:
            S = S - (wm * wm) * prev_inv
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise NumericalError(
                f"normal equations not positive definite at period {t} "
                f"(block condition {np.max(np.linalg.cond(S)):.3g})"
            ) from None
        Linv = np.linalg.inv(L)
        prev_inv = np.swapaxes(Linv, -1, -2) @ Linv
        Sinv[..., t, :, :] = prev_inv
        logdet += 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)

    if border:
        # C_t = X_t' (m x k): coupling of the period-t block with the intercept
        C = (Z[..., :, :, None, None] * np.eye(k)).reshape(batch + (T, m, k))
        V = _block_sweep(Sinv, C, wm)
        CtV = np.einsum("...tj,...tjil->...il", Z, V.reshape(batch + (T, q, k, k)))
        Sc = T * np.eye(k) - CtV
        try:
            Lc = np.linalg.cholesky(Sc)
        except np.linalg.LinAlgError:
            raise NumericalError("intercept Schur complement not positive definite") from None
        logdet = logdet + 2.0 * np.sum(np.log(np.diagonal(Lc, axis1=-2, axis2=-1)), axis=-1)

    def solve(rhs_a, rhs_nu):
        u = _block_sweep(Sinv, rhs_a[..., None], wm)[..., 0]
        if not border:
            return u, None
        Ctu = np.einsum("...tj,...tji->...i", Z, u.reshape(batch + (T, q, k)))
        nu = np.linalg.solve(Sc, (rhs_nu - Ctu)[..., None])[..., 0]
        return u - np.einsum("...tmi,...i->...tm", V, nu), nu

    def gradient(a, nu):
        """``M'(rhs - M beta)`` split into path and intercept parts."""
        fit = np.einsum("...tj,...tji->...ti", Z, a.reshape(batch + (T, q, k)))
        if border:
            fit = fit + nu[..., None, :]
        r = Y - fit
        g_a = (Z[..., :, :, None] * r[..., :, None, :]).reshape(batch + (T, m))
        d = np.empty_like(a)  # state-row residuals, d_t = -(row t of W a - gamma)
        d[..., 1:, :] = a[..., :-1, :] - a[..., 1:, :]
        d[..., 0, :] = anchor - a[..., 0, :] if anchor_mode == "ols" else 0.0
        Wd = d.copy()
        Wd[..., :-1, :] -= d[..., 1:, :]
        return g_a + w[..., None, None] * Wd, r.sum(axis=-2)

    b = (Z[..., :, :, None] * Y[..., :, None, :]).reshape(batch + (T, m))
    if anchor_mode == "ols":
        b[..., 0, :] += w[..., None] * anchor
    a, nu = solve(b, Y.sum(axis=-2))
    for _ in range(refine_steps):
        da, dnu = solve(*gradient(a, nu))
        a = a + da
        if border:
            nu = nu + dnu
    out = {"logdet_H": logdet, "a": a, "nu": nu}

    if want_edf:
        # diagonal blocks of H^{-1} by the backward selected-inversion recursion
        P = np.empty_like(Sinv)
        P[..., T - 1, :, :] = Sinv[..., T - 1, :, :]
        for t in range(T - 2, -1, -1):
            Si = Sinv[..., t, :, :]
            P[..., t, :, :] = Si + (wm * wm) * (Si @ P[..., t + 1, :, :] @ Si)
        if border:
            Sc_inv = np.linalg.inv(Sc)
            P = P + V @ Sc_inv[..., None, :, :] @ np.swapaxes(V, -1, -2)
            Ptnu = -(V @ Sc_inv[..., None, :, :])
            edf = (
                np.einsum("...tab,...tba->...", P, XtX)
                + 2.0 * np.einsum("...tai,...tai->...", Ptnu, C)
                + T * np.trace(Sc_inv, axis1=-2, axis2=-1)
            )
        else:
            edf = np.einsum("...tab,...tba->...", P, XtX)
        out["edf"] = edf
    return out


def _unpack(sol, Y, Z, k, p, anchor, anchor_mode, tv_intercept):
    batch = Y.shape[:-2]
    T = Y.shape[-2]
    q = Z.shape[-1]
    a = sol["a"]
    ar = a.reshape(batch + (T, q, k))
    fit = np.einsum("...tj,...tji->...ti", Z, ar)
    if tv_intercept:
        nu = ar[..., :, 0, :]
        A_cols = ar[..., :, 1:, :]
    else:
        nu = sol["nu"]
        fit = fit + nu[..., None, :]
        A_cols = ar
    A_path = np.swapaxes(A_cols.reshape(batch + (T, p, k, k)), -1, -2)
    resid = Y - fit
    if anchor_mode == "ols":
        v = np.concatenate([(a[..., :1, :] - anchor[..., None, :]), np.diff(a, axis=-2)], axis=-2)
    else:
        v = np.diff(a, axis=-2)
    return A_path, nu, resid, v


def _loglike(rss, vss, w, logdet_H, n_obs, n_flat, n_state_rows, m, T, anchor_mode):
    """Restricted Gaussian log-likelihood with the noise scale profiled out."""
    dof = n_obs - n_flat
    if dof <= 0:
        return np.full(np.shape(rss), np.nan)[()]
    S = rss + w * vss
    log_pdet_Q = n_state_rows * np.log(w)
    if anchor_mode == "diffuse":
        log_pdet_Q = log_pdet_Q + m * math.log(T)
    # S = 0 (exact fit with a flat path) makes the likelihood unbounded
    with np.errstate(divide="ignore", invalid="ignore"):
        logS = np.where(S > 0, np.log(np.where(S > 0, S, 1.0) / dof), np.nan)
    return -0.5 * (dof * logS + dof + dof * math.log(2 * math.pi) + logdet_H - log_pdet_Q)


def solve_stacked(system: StackedSystem, compute_edf=True):
    """Least-squares solution of a :class:`StackedSystem`.

    Returns a :class:`TvVarEstimate` with the coefficient path, residuals,
    state innovations, noise-scale estimates (degrees of freedom adjusted by
    the effective parameter count ``edf`` = trace of the observation hat
    matrix) and the restricted log-likelihood at this ``lam``.
    """
    s = system
    w = s.lam**2
    sol = _solve_core(s.y, s.Z, w, s.anchor, s.anchor_mode, border=not s.tv_intercept, want_edf=compute_edf)
    A_path, nu, resid, v = _unpack(sol, s.y, s.Z, s.k, s.p, s.anchor, s.anchor_mode, s.tv_intercept)
    rss = float(np.sum(resid**2))
    vss = float(np.sum(v**2))
    n_obs = s.T_eff * s.k
    n_flat = s.n_nu + (s.m if s.anchor_mode == "diffuse" else 0)
    loglike = float(_loglike(rss, vss, w, sol["logdet_H"], n_obs, n_flat, s.n_state_rows, s.m, s.T_eff, s.anchor_mode))
    edf = float(sol["edf"]) if compute_edf else float("nan")
    if compute_edf:
        dof_u = max(n_obs - edf, 1.0)
        dof_v = max(s.n_state_rows - (s.n_params - edf), 1.0)
        sigma_u = math.sqrt(rss / dof_u)
        sigma_v = math.sqrt(vss / dof_v)
    else:
        sigma_u = sigma_v = float("nan")
    return TvVarEstimate(
        A_path=A_path,
        nu=nu,
        residuals_u=resid,
        innovations_v=v,
        sigma_u=sigma_u,
        sigma_v=sigma_v,
        lam=s.lam,
        p=s.p,
        anchor_mode=s.anchor_mode,
        anchor=s.anchor,
        y=s.y,
        dates=s.dates,
        markets=s.markets,
        edf=edf,
        loglike=loglike,
        meta={
            "solver": "block-tridiagonal LU with intercept Schur complement",
            "tv_intercept": s.tv_intercept,
            "rss": rss,
            "state_ss": vss,
            "noise_scale_dof": "sigma_u: T_eff*k - edf; sigma_v: state rows - (params - edf)",
        },
    )


def default_lambda_grid(y, num=33):
    """``lam`` candidates spanning coefficient-noise scales 1e-3..10 for data of this scale."""
    scale = float(np.std(np.asarray(y, dtype=float)))
    if scale == 0:
        scale = 1.0
    return scale * np.logspace(-1, 3, num)


def lambda_grid_search(returns, p, grid=None, anchor_mode="ols", tv_intercept=False):
    """Restricted log-likelihood over a ``lam`` grid, solved as one batch.

    Returns ``(best_lam, grid, loglikes)``.
    """
    base = build_stacked_system(returns, p, 1.0, anchor_mode, tv_intercept)
    grid = default_lambda_grid(base.y) if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("lambda grid must be positive")
    n = grid.size
    Y = np.broadcast_to(base.y, (n,) + base.y.shape)
    Z = np.broadcast_to(base.Z, (n,) + base.Z.shape)
    anchor = None if base.anchor is None else np.broadcast_to(base.anchor, (n, base.anchor.size))
    w = grid**2
    sol = _solve_core(Y, Z, w, anchor, anchor_mode, border=not tv_intercept)
    _, _, resid, v = _unpack(sol, Y, Z, base.k, base.p, anchor, anchor_mode, tv_intercept)
    rss = np.sum(resid**2, axis=(-1, -2))
    vss = np.sum(v**2, axis=(-1, -2))
    n_obs = base.T_eff * base.k
    n_flat = base.n_nu + (base.m if anchor_mode == "diffuse" else 0)
    ll = _loglike(rss, vss, w, sol["logdet_H"], n_obs, n_flat, base.n_state_rows, base.m, base.T_eff, anchor_mode)
    if np.all(np.isnan(ll)):
        raise InsufficientDataError("no residual degrees of freedom left for the likelihood")
    return float(grid[int(np.nanargmax(ll))]), grid, ll


def fit_tvvar(returns, p="auto", lam=1.0, anchor_mode="ols", refine=None, lam_grid=None,
              tv_intercept=False, pmax=DEFAULT_PMAX):
    """Estimate the time-varying VAR in one shot.

    Parameters
    ----------
    returns : ReturnsPanel or array_like, shape (T, k)
    p : int or 'auto'
        Lag order; ``'auto'`` picks it by BIC up to ``pmax``.
    lam : float or 'auto'
        State-row weight. ``'auto'`` maximizes the restricted likelihood over
        ``lam_grid`` (default :func:`default_lambda_grid`).
    anchor_mode : {'ols', 'diffuse'}
    refine : {None, 'fgls'}
        ``'fgls'`` re-solves once with ``lam = sigma_u / sigma_v`` taken from
        the first solution.
    tv_intercept : bool
        Non-default extension: intercept follows a random walk too.
    """
    panel = _as_returns(returns)
    meta = {}
    if p == "auto" or p is None:
        p = select_var_lag_bic(panel, pmax)
        meta["p_selection"] = {"method": "bic", "pmax": pmax, "p": p}
    p = int(p)
    if isinstance(lam, str):
        if lam != "auto":
            raise ValueError("lam must be a positive number or 'auto'")
        lam, grid, ll = lambda_grid_search(panel, p, lam_grid, anchor_mode, tv_intercept)
        meta["lambda_search"] = {"grid": grid.tolist(), "loglike": ll.tolist(), "lambda": lam}
    est = solve_stacked(build_stacked_system(panel, p, lam, anchor_mode, tv_intercept))
    if refine == "fgls":
        lam1 = est.sigma_u / est.sigma_v
        if not (np.isfinite(lam1) and lam1 > 0):
            raise NumericalError("feasible GLS refinement produced a non-positive lambda")
        meta["fgls"] = {"lambda_initial": est.lam, "lambda": lam1}
        est = solve_stacked(build_stacked_system(panel, p, lam1, anchor_mode, tv_intercept))
    elif refine is not None:
        raise ValueError("refine must be None or 'fgls'")
    est.meta.update(meta)
    return est


def tv_coefficient_paths(Y, p, lam, anchor_mode="ols"):
    """Coefficient paths for a batch of raw panels ``(..., T, k)``; no edf, no metadata.

    Returns ``A_path`` of shape ``(..., T - p, p, k, k)``. Used for band
    replications, where thousands of panels go through one sweep.
    """
    Y = np.asarray(Y, dtype=float)
    k = Y.shape[-1]
    Yt, Z = lag_matrix(Y, p)
    anchor = _ols_anchor(Yt, Z)[1] if anchor_mode == "ols" else None
    sol = _solve_core(Yt, Z, lam**2, anchor, anchor_mode, border=True)
    A_path, *_ = _unpack(sol, Yt, Z, k, p, anchor, anchor_mode, False)
    return A_path
