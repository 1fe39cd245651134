"""``tvme`` command line: describe, unitroot, var, tvvar, efficiency.

Exit status is 0 on success, 2 on usage errors and 1 on data or numerical
errors (the message names the failing stage). Every run records its resolved
configuration, seed included, in a sidecar JSON next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import secrets
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import CsvLayout, describe, load_price_panel, load_returns_panel, to_log_returns
from .efficiency import attach_band, bootstrap_band, efficiency_degree, mc_band
from .exceptions import TvmeError
from .plot import emit_plot
from .tvvar import fit_tvvar
from .unitroot import adf_gls_test
from .var import DEFAULT_PMAX, fit_var, hansen_lc, select_var_lag_bic

logger = logging.getLogger("tvme")

COMMANDS = ("describe", "unitroot", "var", "tvvar", "efficiency")


@dataclass
class RunConfig:
    command: str
    input: str
    markets: list
    options: dict = field(default_factory=dict)
    seed: int | None = None
    resolved: dict = field(default_factory=dict)
    version: str = __version__

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable) + "\n"


class _Stage:
    """Tracks the pipeline stage for error messages."""

    def __init__(self):
        self.name = "setup"

    def __call__(self, name):
        self.name = name
        logger.debug("stage: %s", name)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.datetime64):
        return str(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _num(v):
    """CSV number: 6 significant digits, empty for missing."""
    if v is None:
        return ""
    v = float(v)
    if not np.isfinite(v):
        return ""
    return format(v, ".6g")


def _nan_to_none(a):
    a = np.asarray(a, dtype=float)
    return [None if not np.isfinite(x) else float(x) for x in a.ravel()]


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(text, path):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _int_or(choices):
    def parse(text):
        if text in choices:
            return text
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer or one of {choices}") from None
        if v < 0:
            raise argparse.ArgumentTypeError("must be non-negative")
        return v
    return parse


def _positive_float_or_auto(text):
    if text == "auto":
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a positive number or 'auto'") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _markets(text):
    out = [m.strip() for m in text.split(",") if m.strip()]
    if not out:
        raise argparse.ArgumentTypeError("market subset must be non-empty")
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="tvme", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tvme {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("input")
    g.add_argument("--input", required=True, help="CSV with a date column and one column per market")
    g.add_argument("--input-kind", choices=("prices", "returns"), default="prices",
                   help="whether the CSV holds index levels (log returns are taken) or returns")
    g.add_argument("--markets", type=_markets, default=None, help="comma-separated market subset")
    g.add_argument("--date-column", default="date")
    g.add_argument("--date-format", default=None, help="strptime format for the date column")
    g.add_argument("--frequency", default="M", help="M, Q, A or <n>D (default M)")
    g.add_argument("--drop-incomplete-rows", action="store_true")
    common.add_argument("--run-config", default=None, help="path for the resolved-configuration JSON")
    common.add_argument("-v", "--verbose", action="count", default=0)

    model = argparse.ArgumentParser(add_help=False)
    g = model.add_argument_group("model")
    g.add_argument("--p", type=_int_or(("auto",)), default="auto", help="VAR lag order or 'auto' (BIC)")
    g.add_argument("--pmax", type=int, default=DEFAULT_PMAX)

    tv = argparse.ArgumentParser(add_help=False)
    g = tv.add_argument_group("tv-var")
    g.add_argument("--lambda", dest="lam", type=_positive_float_or_auto, default=1.0,
                   help="state-row weight, or 'auto' for the likelihood grid")
    g.add_argument("--anchor", choices=("ols", "diffuse"), default="ols")
    g.add_argument("--refine", choices=("none", "fgls"), default="none")

    p = sub.add_parser("describe", parents=[common], help="descriptive statistics of returns")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", default=None, help="output file (default stdout)")

    p = sub.add_parser("unitroot", parents=[common], help="ADF-GLS test per market")
    p.add_argument("--model", choices=("trend", "constant"), default="trend")
    p.add_argument("--kmax", type=_int_or(("auto", "schwert")), default="auto")
    p.add_argument("--cbar", type=float, default=None)
    p.add_argument("--critical-value", type=float, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", default=None)

    p = sub.add_parser("var", parents=[common, model], help="time-invariant VAR, Newey-West, Hansen L_C")
    p.add_argument("--bandwidth", type=_int_or(("auto",)), default="auto")
    p.add_argument("--lc-reps", type=int, default=20000, help="draws for the simulated L_C critical value (0: none)")
    p.add_argument("--lc-level", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--output", default=None)

    p = sub.add_parser("tvvar", parents=[common, model, tv], help="time-varying VAR coefficient paths")
    p.add_argument("--tv-intercept", action="store_true", help="let the intercept vary over time too")
    p.add_argument("--output-dir", default=".")

    p = sub.add_parser("efficiency", parents=[common, model, tv], help="degree of market efficiency with bands")
    p.add_argument("--band", choices=("mc", "bootstrap", "none"), default="mc")
    p.add_argument("--reps", type=int, default=5000)
    p.add_argument("--level", type=float, default=0.99)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--null-cov", choices=("sample", "identity"), default="sample",
                   help="moments of the Monte Carlo null panels")
    p.add_argument("--threads", type=int, default=None, help="overrides TVME_THREADS")
    p.add_argument("--output-dir", default=".")
    p.add_argument("--plot", default=None, help="write an SVG plot to this path")
    p.add_argument("--plot-cap", type=float, default=None, help="clip plotted values (display only)")
    return parser


def _load(args):
    layout = CsvLayout(
        date_column=args.date_column,
        markets=args.markets,
        date_format=args.date_format,
        frequency=args.frequency,
        drop_incomplete_rows=args.drop_incomplete_rows,
    )
    if args.input_kind == "prices":
        return to_log_returns(load_price_panel(args.input, layout))
    return load_returns_panel(args.input, layout)


def _seed(args):
    if getattr(args, "seed", None) is None:
        args.seed = secrets.randbits(32)
        logger.warning("no --seed given; using generated seed %d", args.seed)
    return args.seed


def _resolve_p(args, returns, cfg):
    if args.p == "auto":
        p = select_var_lag_bic(returns, args.pmax)
        cfg.resolved["p_selection"] = {"method": "bic", "pmax": args.pmax}
    else:
        p = int(args.p)
    cfg.resolved["p"] = p
    return p


def cmd_describe(args, returns, cfg, stage):
    stage("describe")
    stats = describe(returns)
    if args.format == "json":
        text = json.dumps(stats.to_dict(), indent=2) + "\n"
    else:
        text = _csv_text(
            ["market", "mean", "sd", "min", "max", "n"],
            [[m, _num(a), _num(b), _num(c), _num(d), n] for m, a, b, c, d, n in stats.rows()],
        )
    _write(text, args.output)
    return [args.output]


def cmd_unitroot(args, returns, cfg, stage):
    results = {}
    for j, m in enumerate(returns.markets):
        stage(f"unitroot[{m}]")
        results[m] = adf_gls_test(returns.returns[:, j], args.model, args.kmax, args.cbar, args.critical_value)
    cfg.resolved["kmax"] = {m: r.kmax for m, r in results.items()}
    if args.format == "json":
        payload = {
            m: {
                "stat": r.statistic, "lag": r.lag, "phi": r.phi_hat.tolist(),
                "critical_value_1pct": r.critical_value_1pct, "reject_1pct": r.reject_at_1pct,
                "model": r.detrend_model, "kmax": r.kmax, "nobs": r.nobs,
            }
            for m, r in results.items()
        }
        text = json.dumps(payload, indent=2) + "\n"
    else:
        rows = []
        for m, r in results.items():
            phi = list(r.phi_hat) + [None] * (2 - r.phi_hat.size)
            rows.append([m, _num(r.statistic), r.lag, _num(phi[0]), _num(phi[1]), str(r.reject_at_1pct).lower()])
        text = _csv_text(["market", "stat", "lag", "phi0", "phi1", "reject_1pct"], rows)
    _write(text, args.output)
    return [args.output]


def cmd_var(args, returns, cfg, stage):
    stage("lag selection")
    p = _resolve_p(args, returns, cfg)
    stage("var fit")
    est = fit_var(returns, p, args.bandwidth)
    cfg.resolved["nw_bandwidth"] = est.nw_bandwidth
    stage("hansen L_C")
    if args.lc_reps > 0:
        seed = _seed(args)
        cfg.seed = seed
        lc = hansen_lc(est, level=args.lc_level, simulate=True, reps=args.lc_reps, seed=seed)
    else:
        lc = hansen_lc(est)
    markets = list(returns.markets)
    terms = ["constant"] + [f"{mk}(t-{l + 1})" for l in range(p) for mk in markets]
    coef, se = est.coef, est.nw_se
    stage("output")
    if args.format == "json":
        payload = {
            "markets": markets,
            "p": p,
            "nobs": est.nobs,
            "terms": terms,
            "nu": est.nu.tolist(),
            "A": est.A.tolist(),
            "coef": coef.tolist(),
            "nw_se": se.tolist(),
            "nw_bandwidth": est.nw_bandwidth,
            "adj_r2": est.adj_r2.tolist(),
            "L_C": lc.lc,
            "L_C_per_equation": lc.per_equation.tolist(),
            "L_C_n_params": lc.n_params,
            "L_C_critical_value": lc.critical_value,
            "L_C_level": lc.level,
            "L_C_reject": lc.reject_hint,
        }
        text = json.dumps(payload, indent=2) + "\n"
    else:
        rows = []
        for i, eq in enumerate(markets):
            for j, term in enumerate(terms):
                rows.append([eq, term, _num(coef[i, j]), _num(se[i, j])])
            rows.append([eq, "adj_r2", _num(est.adj_r2[i]), ""])
            rows.append([eq, "L_C", _num(lc.per_equation[i]), ""])
        rows.append(["system", "L_C", _num(lc.lc), ""])
        if lc.critical_value is not None:
            rows.append(["system", f"L_C_critical_{lc.level:g}", _num(lc.critical_value), ""])
        text = _csv_text(["equation", "term", "estimate", "nw_se"], rows)
    _write(text, args.output)
    return [args.output]


def _fit_tv(args, returns, cfg, stage, tv_intercept=False):
    stage("lag selection")
    p = _resolve_p(args, returns, cfg)
    stage("tv-var fit")
    est = fit_tvvar(returns, p, args.lam, args.anchor, None if args.refine == "none" else args.refine,
                    tv_intercept=tv_intercept)
    cfg.resolved["lambda"] = est.lam
    return est


def _tv_metadata(est):
    meta = {k: v for k, v in est.meta.items()}
    return {
        "markets": list(est.markets),
        "p": est.p,
        "T_eff": est.T_eff,
        "first_date": str(est.dates[0]) if est.dates is not None else None,
        "last_date": str(est.dates[-1]) if est.dates is not None else None,
        "lambda": est.lam,
        "anchor_mode": est.anchor_mode,
        "nu": np.asarray(est.nu).tolist(),
        "sigma_u": est.sigma_u,
        "sigma_v": est.sigma_v,
        "edf": est.edf,
        "loglike": est.loglike,
        "meta": meta,
    }


def cmd_tvvar(args, returns, cfg, stage):
    est = _fit_tv(args, returns, cfg, stage, args.tv_intercept)
    stage("output")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    markets = est.markets
    rows = []
    for t in range(est.T_eff):
        d = str(est.dates[t])
        if args.tv_intercept:
            for i, r in enumerate(markets):
                rows.append([d, 0, r, "constant", _num(est.nu[t, i])])
        for l in range(est.p):
            for i, r in enumerate(markets):
                for j, c in enumerate(markets):
                    rows.append([d, l + 1, r, c, _num(est.A_path[t, l, i, j])])
    _write(_csv_text(["date", "block", "row", "col", "value"], rows), out / "coefficients.csv")
    _write(json.dumps(_tv_metadata(est), indent=2, default=_jsonable) + "\n", out / "tvvar.json")
    return [out / "coefficients.csv", out / "tvvar.json"]


def cmd_efficiency(args, returns, cfg, stage):
    seed = _seed(args)
    cfg.seed = seed
    est = _fit_tv(args, returns, cfg, stage)
    stage("efficiency degree")
    series = efficiency_degree(est)
    if args.band != "none":
        stage(f"{args.band} band")
        if args.band == "mc":
            y = returns.returns
            moments = None if args.null_cov == "identity" else (y.mean(axis=0), np.atleast_2d(np.cov(y.T)))
            band = mc_band(est.T_eff, est.k, est.p, args.reps, args.level, moments, seed,
                           est.lam, est.anchor_mode, args.threads)
        else:
            band = bootstrap_band(est, args.reps, args.level, seed, args.threads)
        series = attach_band(series, band)
    stage("output")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = len(series)
    lo = series.band_lo if series.band_lo is not None else np.full(n, np.nan)
    hi = series.band_hi if series.band_hi is not None else np.full(n, np.nan)
    flags = series.inefficient
    rows = [
        [str(series.dates[t]), _num(series.zeta[t]), _num(lo[t]), _num(hi[t]), str(bool(flags[t])).lower()]
        for t in range(n)
    ]
    _write(_csv_text(["date", "zeta", "band_lo", "band_hi", "inefficient"], rows), out / "zeta.csv")
    payload = {
        "dates": [str(d) for d in series.dates],
        "zeta": _nan_to_none(series.zeta),
        "band_lo": _nan_to_none(lo),
        "band_hi": _nan_to_none(hi),
        "inefficient": [bool(f) for f in flags],
        "undefined": [bool(u) for u in series.undefined],
        "band_meta": series.band_meta,
        "tvvar": _tv_metadata(est),
    }
    _write(json.dumps(payload, indent=2, default=_jsonable) + "\n", out / "zeta.json")
    written = [out / "zeta.csv", out / "zeta.json"]
    if args.plot:
        stage("plot")
        if series.band_hi is None:
            raise ValueError("--plot needs a band (use --band mc or bootstrap)")
        title = " / ".join(returns.markets)
        written.append(emit_plot(series, args.plot, title=title, cap=args.plot_cap))
    return written


HANDLERS = {
    "describe": cmd_describe,
    "unitroot": cmd_unitroot,
    "var": cmd_var,
    "tvvar": cmd_tvvar,
    "efficiency": cmd_efficiency,
}


def _sidecar_path(args):
    if args.run_config:
        return Path(args.run_config)
    if getattr(args, "output_dir", None):
        return Path(args.output_dir) / "run.json"
    out = getattr(args, "output", None)
    if out and out != "-":
        return Path(str(out) + ".run.json")
    return None


def run(argv=None):
    """Parse ``argv`` and execute one subcommand; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
    )
    stage = _Stage()
    options = {k: v for k, v in vars(args).items() if k not in ("command", "input", "markets", "verbose", "run_config")}
    try:
        stage("load input")
        returns = _load(args)
        cfg = RunConfig(args.command, str(args.input), list(returns.markets), options)
        HANDLERS[args.command](args, returns, cfg, stage)
        cfg.options = {k: v for k, v in vars(args).items()
                       if k not in ("command", "input", "markets", "verbose", "run_config")}
        stage("run config")
        sidecar = _sidecar_path(args)
        if sidecar is None:
            sys.stderr.write(cfg.to_json())
        else:
            _write(cfg.to_json(), sidecar)
    except (TvmeError, ValueError, KeyError, OSError, ArithmeticError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"tvme {args.command}: error in stage '{stage.name}': {msg}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())
