"""Write a synthetic seven-market monthly price panel to CSV.

The returns follow a VAR(1) whose cross-market loadings switch on in the
middle third of the sample, so the efficiency measure has something to find.
Dates run from 1969-12 to 2013-03 (520 price rows, 519 returns).

    python demos/synthetic_panel.py prices.csv [--seed 1]
"""

import argparse

import numpy as np

MARKETS = ["US", "CA", "GB", "JP", "DE", "FR", "IT"]


def simulate_prices(seed=1, n_rows=520, start="1969-12"):
    rng = np.random.default_rng(seed)
    k = len(MARKETS)
    T = n_rows - 1
    base = np.diag(rng.uniform(0.0, 0.1, k))
    burst = 0.3 * np.eye(k)
    burst[1:, 0] = 0.4  # US returns lead the others
    cov = 0.0016 * (0.6 * np.eye(k) + 0.4)
    chol = np.linalg.cholesky(cov)
    r = np.zeros((T, k))
    for t in range(1, T):
        A = burst if T // 3 <= t < 2 * T // 3 else base
        r[t] = 0.005 + A @ (r[t - 1] - 0.005) + chol @ rng.standard_normal(k)
    levels = 100.0 * np.exp(np.vstack([np.zeros(k), np.cumsum(r, axis=0)]))
    dates = np.datetime64(start, "M") + np.arange(n_rows)
    return dates, levels


def write_csv(path, dates, levels):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date," + ",".join(MARKETS) + "\n")
        for d, row in zip(dates, levels):
            fh.write(str(d) + "," + ",".join(f"{v:.6f}" for v in row) + "\n")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("path")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    write_csv(args.path, *simulate_prices(args.seed))
    print(f"wrote {args.path}")


if __name__ == "__main__":
    main()
