"""Long-run multiplier, degree of market efficiency and its null confidence bands.

For each period the long-run multiplier is ``Phi_t(1) = (I - A_{1,t} - ... - A_{p,t})^{-1}``
and the degree of efficiency is the spectral norm ``zeta_t = ||Phi_t(1) - I||_2``.
``zeta_t = 0`` means the markets in the system are jointly efficient at ``t``.

Bands are pointwise quantiles of ``zeta_t`` over panels simulated under the
efficiency null (i.i.d. returns), each pushed through the same TV-VAR fit.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DataDomainError, SingularMultiplierError
from .tvvar import TvVarEstimate, tv_coefficient_paths

__all__ = [
    "COND_CAP",
    "ZetaSeries",
    "Band",
    "long_run_multiplier",
    "spectral_distance",
    "zeta_from_coef_sums",
    "efficiency_degree",
    "null_zeta_draws",
    "band_from_draws",
    "mc_band",
    "bootstrap_band",
    "attach_band",
]

COND_CAP = 1e10
_CHUNK = 250


@dataclass(frozen=True)
class Band:
    lo: np.ndarray
    hi: np.ndarray
    level: float
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ZetaSeries:
    """Degree-of-efficiency path. Undefined periods hold NaN in ``zeta``."""

    dates: np.ndarray | None
    zeta: np.ndarray
    band_lo: np.ndarray | None = None
    band_hi: np.ndarray | None = None
    band_meta: dict = field(default_factory=dict)
    markets: tuple = ()

    @property
    def undefined(self):
        return np.isnan(self.zeta)

    @property
    def inefficient(self):
        """``zeta_t`` above the upper band; False where undefined or without a band."""
        if self.band_hi is None:
            return np.zeros(self.zeta.shape, dtype=bool)
        with np.errstate(invalid="ignore"):
            return np.asarray(self.zeta > self.band_hi)

    def __len__(self):
        return self.zeta.size


def long_run_multiplier(A_blocks, cond_cap=COND_CAP):
    """``(I - A_1 - ... - A_p)^{-1}`` for a stack of ``p`` ``k x k`` blocks.

    Raises
    ------
    SingularMultiplierError
        If ``I - sum A`` is singular or its condition number exceeds ``cond_cap``.
    """
    A = np.asarray(A_blocks, dtype=float)
    if A.ndim == 2:
        A = A[None]
    k = A.shape[-1]
    M = np.eye(k) - A.sum(axis=0)
    if not np.all(np.isfinite(M)):
        raise DataDomainError("coefficient blocks contain non-finite values")
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > cond_cap:
        raise SingularMultiplierError(f"I - sum(A) has condition number {cond:.3g} > {cond_cap:.3g}")
    return np.linalg.inv(M)


def _largest_singular_value(M):
    """sqrt of the largest eigenvalue of ``M'M`` (batched over leading axes)."""
    gram = np.swapaxes(M, -1, -2) @ M
    lam_max = np.linalg.eigvalsh(gram)[..., -1]
    return np.sqrt(np.maximum(lam_max, 0.0))


def spectral_distance(phi):
    """Spectral-norm distance ``||phi - I||_2`` of a square matrix from the identity."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ValueError("phi must be a square matrix")
    if not np.all(np.isfinite(phi)):
        raise DataDomainError("phi contains non-finite entries")
    return float(_largest_singular_value(phi - np.eye(phi.shape[0])))


def zeta_from_coef_sums(coef_sums, cond_cap=COND_CAP):
    """Vectorized ``zeta`` from ``sum_l A_{l,t}`` of shape ``(..., k, k)``.

    Periods where ``I - sum A`` is singular (condition above ``cond_cap``)
    come back as NaN.
    """
    S = np.asarray(coef_sums, dtype=float)
    k = S.shape[-1]
    M = np.eye(k) - S
    finite = np.all(np.isfinite(M), axis=(-1, -2))
    M_safe = np.where(finite[..., None, None], M, np.eye(k))
    sv = np.linalg.svd(M_safe, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = sv[..., 0] / sv[..., -1]
    ok = finite & np.isfinite(cond) & (cond <= cond_cap)
    M_ok = np.where(ok[..., None, None], M_safe, np.eye(k))
    # Phi - I = M^{-1} (I - M) = M^{-1} S
    D = np.linalg.solve(M_ok, np.where(ok[..., None, None], S, 0.0))
    z = _largest_singular_value(D)
    return np.where(ok, z, np.nan)


def efficiency_degree(estimate: TvVarEstimate, cond_cap=COND_CAP):
    """``zeta_t`` for every effective period of a TV-VAR estimate (no band)."""
    zeta = zeta_from_coef_sums(estimate.coef_sum, cond_cap)
    return ZetaSeries(dates=estimate.dates, zeta=zeta, markets=estimate.markets)


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("TVME_THREADS", os.cpu_count() or 1))
    return max(1, int(threads))


def null_zeta_draws(generate, replications, T, p, lam, anchor_mode="ols", seed=0,
                    threads=None, cond_cap=COND_CAP):
    """``zeta`` paths for ``replications`` null panels, shape ``(replications, T - p)``.

    ``generate(rng)`` returns one ``(T, k)`` panel. Replication ``r`` always
    draws from the generator spawned as child ``r`` of ``seed``, and panels
    are fitted in fixed-size chunks, so results do not depend on thread count
    or scheduling.
    """
    children = np.random.SeedSequence(seed).spawn(replications)
    starts = list(range(0, replications, _CHUNK))

    def run(s):
        e = min(replications, s + _CHUNK)
        Y = np.stack([generate(np.random.default_rng(children[r])) for r in range(s, e)])
        A_path = tv_coefficient_paths(Y, p, lam, anchor_mode)
        return zeta_from_coef_sums(A_path.sum(axis=-3), cond_cap)

    n = _threads(threads)
    if n == 1 or len(starts) == 1:
        parts = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            parts = list(pool.map(run, starts))
    return np.concatenate(parts, axis=0)


def band_from_draws(draws, level=0.99):
    """Pointwise two-sided quantiles ``(1-level)/2`` and ``1-(1-level)/2``.

    Undefined draws (NaN) are excluded from each period's quantiles.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    a = (1.0 - level) / 2.0
    lo, hi = np.nanquantile(draws, [a, 1.0 - a], axis=0)
    return lo, hi


def _check_reps(replications):
    if replications < 100:
        raise ValueError("at least 100 replications are required")


def mc_band(T_eff, k, p, replications=5000, level=0.99, null_moments=None, seed=0,
            lam=1.0, anchor_mode="ols", threads=None, keep_draws=False):
    """Monte Carlo band under the efficiency null.

    Each replication draws ``T_eff + p`` i.i.d. Gaussian vectors with the
    given ``(mean, cov)`` (default zero mean, identity covariance), fits the
    TV-VAR with the same ``(p, lam, anchor_mode)`` and computes ``zeta_t``.

    Returns
    -------
    Band
        Pointwise quantiles, with ``meta`` recording the settings. With
        ``keep_draws`` the raw ``(replications, T_eff)`` draws are stored in
        ``meta['draws']``.
    """
    _check_reps(replications)
    if null_moments is None:
        mean, cov = np.zeros(k), np.eye(k)
        moments = "identity"
    else:
        mean, cov = (np.asarray(v, dtype=float) for v in null_moments)
        moments = "supplied"
    chol = np.linalg.cholesky(np.atleast_2d(cov))
    T = int(T_eff) + int(p)

    def generate(rng):
        return mean + rng.standard_normal((T, k)) @ chol.T

    draws = null_zeta_draws(generate, replications, T, p, lam, anchor_mode, seed, threads)
    lo, hi = band_from_draws(draws, level)
    meta = {
        "method": "montecarlo",
        "replications": int(replications),
        "level": float(level),
        "seed": seed,
        "null_moments": moments,
        "lambda": float(lam),
        "anchor_mode": anchor_mode,
        "p": int(p),
        "pointwise": True,
        "undefined_draws": int(np.isnan(draws).sum()),
    }
    if keep_draws:
        meta["draws"] = draws
    return Band(lo, hi, float(level), meta)


def bootstrap_band(estimate: TvVarEstimate, replications=5000, level=0.99, seed=0,
                   threads=None, keep_draws=False):
    """Residual-bootstrap band under the efficiency null.

    Null panels are ``ybar + u*_t`` with ``u*_t`` drawn with replacement
    (whole rows, keeping the cross-market correlation) from the centered
    observation residuals of ``estimate``. The rest of the pipeline is the
    one used by :func:`mc_band`.
    """
    _check_reps(replications)
    if estimate.meta.get("tv_intercept"):
        raise ValueError("bands are only defined for the fixed-intercept model")
    u = estimate.residuals_u - estimate.residuals_u.mean(axis=0)
    ybar = estimate.y.mean(axis=0)
    T = estimate.T_eff + estimate.p
    n = u.shape[0]

    def generate(rng):
        return ybar + u[rng.integers(0, n, size=T)]

    draws = null_zeta_draws(generate, replications, T, estimate.p, estimate.lam,
                            estimate.anchor_mode, seed, threads)
    lo, hi = band_from_draws(draws, level)
    meta = {
        "method": "bootstrap",
        "replications": int(replications),
        "level": float(level),
        "seed": seed,
        "lambda": float(estimate.lam),
        "anchor_mode": estimate.anchor_mode,
        "p": int(estimate.p),
        "pointwise": True,
        "undefined_draws": int(np.isnan(draws).sum()),
    }
    if keep_draws:
        meta["draws"] = draws
    return Band(lo, hi, float(level), meta)


def attach_band(series: ZetaSeries, band: Band):
    """Copy of ``series`` carrying ``band``."""
    if band.lo.shape != series.zeta.shape:
        raise ValueError("band length does not match the zeta series")
    meta = {k: v for k, v in band.meta.items() if k != "draws"}
    return replace(series, band_lo=band.lo, band_hi=band.hi, band_meta=meta)
