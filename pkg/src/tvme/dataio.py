"""Price-panel ingestion, log returns and descriptive statistics.

The CSV layout is one ``date`` column followed by one column per market.
Dates may be ``YYYY-MM`` or ISO ``YYYY-MM-DD`` (or any ``strptime`` format
given explicitly). Every row is one observation; no resampling is done.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import (
    CsvParseError,
    DataDomainError,
    FrequencyError,
    InsufficientDataError,
)

logger = logging.getLogger(__name__)

__all__ = [
    "CsvLayout",
    "PricePanel",
    "ReturnsPanel",
    "DescriptiveStats",
    "load_price_panel",
    "load_returns_panel",
    "to_log_returns",
    "describe",
    "check_frequency",
]

_MONTH_STEPS = {"M": 1, "Q": 3, "A": 12, "Y": 12}
_DAY_RE = re.compile(r"^(\d*)D$")


@dataclass(frozen=True)
class CsvLayout:
    """Column mapping and parsing options for :func:`load_price_panel`."""

    date_column: str = "date"
    markets: Sequence[str] | None = None
    date_format: str | None = None
    frequency: str = "M"
    drop_incomplete_rows: bool = False


def _freeze(arr):
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PricePanel:
    dates: np.ndarray
    markets: tuple
    prices: np.ndarray
    frequency: str = "M"

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2 or prices.shape[1] != len(self.markets):
            raise ValueError("prices must be T_raw x k with one column per market")
        if len(self.dates) != prices.shape[0]:
            raise ValueError("dates and prices disagree on the number of rows")
        if not np.all(np.isfinite(prices)):
            raise DataDomainError("prices contain missing or non-finite values")
        if np.any(prices <= 0):
            r, c = np.argwhere(prices <= 0)[0]
            raise DataDomainError(
                f"non-positive price {prices[r, c]!r} at row {r}, market {self.markets[c]!r}"
            )
        check_frequency(self.dates, self.frequency)
        object.__setattr__(self, "markets", tuple(self.markets))
        object.__setattr__(self, "prices", _freeze(prices))
        object.__setattr__(self, "dates", _freeze(self.dates))

    @property
    def n_obs(self):
        return self.prices.shape[0]

    def select(self, markets):
        idx = _market_indices(self.markets, markets)
        return PricePanel(self.dates, [self.markets[i] for i in idx], self.prices[:, idx], self.frequency)


@dataclass(frozen=True)
class ReturnsPanel:
    """Per-period log returns ``y_t``; row ``t`` is dated by the later price."""

    dates: np.ndarray
    markets: tuple
    returns: np.ndarray
    frequency: str = "M"

    def __post_init__(self):
        returns = np.asarray(self.returns, dtype=float)
        if returns.ndim == 1:
            returns = returns[:, None]
        if returns.ndim != 2 or returns.shape[1] != len(self.markets):
            raise ValueError("returns must be T x k with one column per market")
        if returns.shape[0] < 1 or returns.shape[1] < 1:
            raise InsufficientDataError("a returns panel needs T >= 1 and k >= 1")
        if len(self.dates) != returns.shape[0]:
            raise ValueError("dates and returns disagree on the number of rows")
        if not np.all(np.isfinite(returns)):
            raise DataDomainError("returns contain missing or non-finite values")
        object.__setattr__(self, "markets", tuple(self.markets))
        object.__setattr__(self, "returns", _freeze(returns))
        object.__setattr__(self, "dates", _freeze(self.dates))

    @property
    def n_obs(self):
        return self.returns.shape[0]

    @property
    def k(self):
        return self.returns.shape[1]

    def select(self, markets):
        idx = _market_indices(self.markets, markets)
        return ReturnsPanel(self.dates, [self.markets[i] for i in idx], self.returns[:, idx], self.frequency)

    @classmethod
    def from_array(cls, returns, markets=None, start="2000-01", frequency="M"):
        """Wrap a bare array, inventing monthly dates and ``y1..yk`` labels."""
        returns = np.asarray(returns, dtype=float)
        if returns.ndim == 1:
            returns = returns[:, None]
        if markets is None:
            markets = [f"y{j + 1}" for j in range(returns.shape[1])]
        dates = np.datetime64(start, "M") + np.arange(returns.shape[0])
        return cls(dates, markets, returns, frequency)


@dataclass(frozen=True)
class DescriptiveStats:
    markets: tuple
    mean: np.ndarray
    sd: np.ndarray
    min: np.ndarray
    max: np.ndarray
    n: int

    def rows(self):
        """Yield ``(market, mean, sd, min, max, n)`` tuples."""
        for j, m in enumerate(self.markets):
            yield m, float(self.mean[j]), float(self.sd[j]), float(self.min[j]), float(self.max[j]), self.n

    def to_dict(self):
        return {
            m: {"mean": mu, "sd": sd, "min": lo, "max": hi, "n": n}
            for m, mu, sd, lo, hi, n in self.rows()
        }


def _market_indices(available, wanted):
    if wanted is None:
        return list(range(len(available)))
    wanted = list(wanted)
    if not wanted:
        raise ValueError("market subset must be non-empty")
    missing = [m for m in wanted if m not in available]
    if missing:
        raise KeyError(f"markets not in panel: {', '.join(missing)}; available: {', '.join(available)}")
    return [list(available).index(m) for m in wanted]


def _parse_date(text, date_format, line):
    text = text.strip()
    try:
        if date_format:
            return np.datetime64(datetime.strptime(text, date_format).date(), "D")
        if re.fullmatch(r"\d{4}-\d{2}", text):
            return np.datetime64(text, "M")
        return np.datetime64(datetime.fromisoformat(text).date(), "D")
    except ValueError as exc:
        raise CsvParseError(f"cannot parse date {text!r} ({exc})", line) from None


def check_frequency(dates, frequency="M"):
    """Raise :class:`FrequencyError` unless ``dates`` are strictly increasing at ``frequency``.

    ``frequency`` is ``M``, ``Q``, ``A``/``Y`` (calendar months; the day of
    month is ignored) or ``<n>D`` for a fixed step of ``n`` days (``W`` is
    shorthand for ``7D``).
    """
    dates = np.asarray(dates)
    if dates.size < 2:
        return
    freq = frequency.upper()
    if freq == "W":
        freq = "7D"
    if freq in _MONTH_STEPS:
        steps = np.diff(dates.astype("datetime64[M]").astype(np.int64))
        want = _MONTH_STEPS[freq]
    else:
        m = _DAY_RE.match(freq)
        if not m:
            raise ValueError(f"unknown frequency {frequency!r}")
        want = int(m.group(1) or 1)
        steps = np.diff(dates.astype("datetime64[D]").astype(np.int64))
    bad = np.flatnonzero(steps != want)
    if bad.size:
        i = bad[0]
        kind = "duplicate" if steps[i] == 0 else ("out-of-order" if steps[i] < 0 else "gap")
        raise FrequencyError(
            f"{kind} between {dates[i]} and {dates[i + 1]} (expected step of {want} at frequency {frequency})"
        )


def _read_table(path, layout):
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("empty file", 1) from None
        header = [h.strip() for h in header]
        if layout.date_column not in header:
            raise CsvParseError(f"no {layout.date_column!r} column in header", 1)
        date_idx = header.index(layout.date_column)
        all_markets = [h for i, h in enumerate(header) if i != date_idx]
        if not all_markets:
            raise CsvParseError("header names no market columns", 1)
        idx = _market_indices(all_markets, layout.markets)
        markets = [all_markets[i] for i in idx]
        cols = [i for i in range(len(header)) if i != date_idx]
        cols = [cols[i] for i in idx]

        dates, values, lines = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvParseError(f"expected {len(header)} fields, found {len(row)}", line)
            dates.append(_parse_date(row[date_idx], layout.date_format, line))
            vals = []
            for c in cols:
                cell = row[c].strip()
                if cell == "" or cell.upper() in ("NA", "NAN"):
                    vals.append(math.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CsvParseError(f"non-numeric value {cell!r} in column {header[c]!r}", line) from None
            values.append(vals)
            lines.append(line)
    if not values:
        raise InsufficientDataError(f"{path}: no data rows")
    # mixing YYYY-MM and full dates is harmless; unify to day resolution
    units = {np.datetime_data(d.dtype)[0] for d in dates}
    dates = np.array(dates, dtype="datetime64[M]" if units == {"M"} else "datetime64[D]")
    return dates, markets, np.array(values, dtype=float), np.array(lines)


def _ingest(path, layout, *, positive):
    dates, markets, values, lines = _read_table(path, layout)
    incomplete = ~np.all(np.isfinite(values), axis=1)
    if incomplete.any():
        if not layout.drop_incomplete_rows:
            raise DataDomainError(
                f"missing value on line {lines[incomplete][0]} "
                f"({int(incomplete.sum())} incomplete rows; use drop_incomplete_rows to drop them)"
            )
        logger.info("dropped %d incomplete rows from %s", int(incomplete.sum()), path)
        dates, values, lines = dates[~incomplete], values[~incomplete], lines[~incomplete]
    order = np.argsort(dates, kind="stable")
    dates, values, lines = dates[order], values[order], lines[order]
    if positive and np.any(values <= 0):
        r, c = np.argwhere(values <= 0)[0]
        raise DataDomainError(
            f"non-positive price {values[r, c]!r} on line {lines[r]}, market {markets[c]!r}"
        )
    check_frequency(dates, layout.frequency)
    return dates, markets, values


def load_price_panel(path, layout=None, **kwargs):
    """Read a price-index CSV into a :class:`PricePanel`.

    Parameters
    ----------
    path : str or Path
        CSV file with a date column and one column per market.
    layout : CsvLayout, optional
        Column mapping; keyword arguments override its fields.

    Raises
    ------
    CsvParseError
        Malformed rows, unparseable dates or numbers (message carries the line).
    DataDomainError
        Non-positive prices, or missing cells when row dropping is off.
    FrequencyError
        Duplicated dates or gaps at the declared frequency.
    """
    layout = _layout(layout, kwargs)
    dates, markets, values = _ingest(path, layout, positive=True)
    return PricePanel(dates, markets, values, layout.frequency)


def load_returns_panel(path, layout=None, **kwargs):
    """Read a CSV that already holds per-period returns (same layout as prices)."""
    layout = _layout(layout, kwargs)
    dates, markets, values = _ingest(path, layout, positive=False)
    return ReturnsPanel(dates, markets, values, layout.frequency)


def _layout(layout, overrides):
    layout = layout or CsvLayout()
    if overrides:
        layout = CsvLayout(**{**layout.__dict__, **overrides})
    return layout


def to_log_returns(panel: PricePanel) -> ReturnsPanel:
    """First difference of log prices, dated by the later observation."""
    if panel.n_obs < 2:
        raise InsufficientDataError("need at least two price observations for one return")
    logp = np.log(panel.prices)
    return ReturnsPanel(panel.dates[1:], panel.markets, np.diff(logp, axis=0), panel.frequency)


def describe(returns: ReturnsPanel) -> DescriptiveStats:
    """Mean, sample standard deviation (divisor ``T - 1``), min and max per market."""
    y = returns.returns if isinstance(returns, ReturnsPanel) else np.atleast_2d(np.asarray(returns, float).T).T
    markets = returns.markets if isinstance(returns, ReturnsPanel) else tuple(f"y{j + 1}" for j in range(y.shape[1]))
    if y.shape[0] < 2:
        raise InsufficientDataError("standard deviation needs T >= 2")
    return DescriptiveStats(
        markets=tuple(markets),
        mean=y.mean(axis=0),
        sd=y.std(axis=0, ddof=1),
        min=y.min(axis=0),
        max=y.max(axis=0),
        n=int(y.shape[0]),
    )
