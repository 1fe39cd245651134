"""
Degree of market efficiency with Monte Carlo and bootstrap bands
================================================================

zeta_t is the spectral distance of the long-run multiplier from the
identity. Periods where it exceeds the upper band of its i.i.d. null are
flagged as inefficient.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))
from synthetic_panel import MARKETS, simulate_prices  # noqa: E402

from tvme import PricePanel, attach_band, bootstrap_band, efficiency_degree, fit_tvvar, mc_band, to_log_returns
from tvme.plot import emit_plot

dates, levels = simulate_prices(seed=1)
returns = to_log_returns(PricePanel(dates, MARKETS, levels)).select(["US", "CA"])
est = fit_tvvar(returns, p=1, lam=1.0)
series = efficiency_degree(est)

# %%
# Monte Carlo null: Gaussian panels with the sample moments, 5000 replications.
y = returns.returns
mc = mc_band(est.T_eff, est.k, est.p, replications=5000, null_moments=(y.mean(0), np.cov(y.T)), seed=42)
# Bootstrap null: resampled residual rows around the sample mean.
bs = bootstrap_band(est, replications=5000, seed=43)
print(f"largest relative gap between the two upper bands: {np.max(np.abs(bs.hi / mc.hi - 1)):.3f}")

# %%
banded = attach_band(series, mc)
flags = banded.inefficient
print(f"inefficient months: {flags.sum()} of {flags.size}")
third = flags.size // 3
print(f"  first third {flags[:third].mean():.2f}, middle third {flags[third:2 * third].mean():.2f}, "
      f"last third {flags[2 * third:].mean():.2f}")

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("zeta_north_america.svg")
emit_plot(banded, out, title="US / CA")
print(f"plot written to {out}")
