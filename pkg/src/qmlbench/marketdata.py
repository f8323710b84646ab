"""Daily price data: CSV loading, validation, calendar alignment, returns."""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

CSV_FIELDS = ("date", "open", "high", "low", "close", "adj_close", "volume")
PRICE_FIELDS = ("close", "adj_close")


class DataError(ValueError):
    """Unusable input data (missing file, empty series, broken calendar)."""


@dataclass(frozen=True)
class PriceBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    adj_close: float
    volume: float

    def __post_init__(self):
        prices = (self.open, self.high, self.low, self.close, self.adj_close)
        if not all(math.isfinite(p) and p > 0 for p in prices):
            raise ValueError(f"{self.date}: prices must be finite and positive")
        if self.high < max(self.open, self.close) or self.low > min(self.open, self.close):
            raise ValueError(f"{self.date}: high/low inconsistent with open/close")
        if not math.isfinite(self.volume) or self.volume < 0:
            raise ValueError(f"{self.date}: volume must be non-negative")


@dataclass(frozen=True)
class PriceSeries:
    """Date-ordered daily bars for one ticker; dates strictly increasing."""

    ticker: str
    bars: tuple[PriceBar, ...]
    dropped_rows: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bars", tuple(self.bars))
        dates = [b.date for b in self.bars]
        if len(set(dates)) != len(dates):
            raise DataError(f"{self.ticker}: duplicate dates in price series")
        if any(b > a for a, b in zip(dates[1:], dates)):
            raise DataError(f"{self.ticker}: dates not strictly increasing")

    def __len__(self) -> int:
        return len(self.bars)

    @property
    def dates(self) -> tuple[dt.date, ...]:
        return tuple(b.date for b in self.bars)

    def prices(self, field: str = "adj_close") -> np.ndarray:
        if field not in PRICE_FIELDS:
            raise ValueError(f"price field must be one of {PRICE_FIELDS}")
        return np.array([getattr(b, field) for b in self.bars], dtype=float)


@dataclass(frozen=True)
class ReturnSeries:
    """Daily returns dated at t (one fewer entry than the price series)."""

    dates: tuple[dt.date, ...]
    values: np.ndarray
    kind: str  # "log" | "simple"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.dates) != len(self.values):
            raise ValueError("dates and values length mismatch")
        if self.kind not in ("log", "simple"):
            raise ValueError(f"unknown return kind {self.kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("returns must be finite")

    def __len__(self) -> int:
        return len(self.values)


def _parse_row(row: dict) -> PriceBar | None:
    """One CSV row to a bar; None when any field is missing or non-numeric."""
    try:
        date = dt.date.fromisoformat(row["date"].strip())
        values = [float(row[f]) for f in CSV_FIELDS[1:]]
    except (KeyError, ValueError, AttributeError):
        return None
    if any(not math.isfinite(v) for v in values):
        return None
    try:
        return PriceBar(date, *values)
    except ValueError:
        return None  # violates bar invariants -> treated as a dirty row


def load_price_csv(path, price_field: str = "adj_close", ticker: str | None = None) -> PriceSeries:
    """Load a 7-column daily price CSV, dropping and counting dirty rows.

    Header must contain date,open,high,low,close,adj_close,volume (extra
    columns are ignored). Rows with missing or non-numeric fields are
    removed; duplicate dates or an empty result are errors.
    """
    if price_field not in PRICE_FIELDS:
        raise ValueError(f"price field must be one of {PRICE_FIELDS}")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [f for f in CSV_FIELDS if f not in header]
            if missing:
                raise DataError(f"{path}: header lacks columns {missing}")
            bars, dropped = [], 0
            for row in reader:
                bar = _parse_row(row)
                if bar is None:
                    dropped += 1
                else:
                    bars.append(bar)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not bars:
        raise DataError(f"{path}: no valid rows after cleaning")
    bars.sort(key=lambda b: b.date)
    name = ticker if ticker is not None else str(path)
    return PriceSeries(ticker=name, bars=tuple(bars), dropped_rows=dropped)


def align_calendars(series: list[PriceSeries]) -> list[PriceSeries]:
    """Restrict every series to the intersection of all date sets.

    Idempotent and order-insensitive; any day missing from one ticker is
    removed from all of them.
    """
    if not series:
        raise ValueError("need at least one price series")
    common = set(series[0].dates)
    for s in series[1:]:
        common &= set(s.dates)
    if not common:
        raise DataError("calendar intersection is empty")
    out = []
    for s in series:
        bars = tuple(b for b in s.bars if b.date in common)
        out.append(PriceSeries(ticker=s.ticker, bars=bars, dropped_rows=s.dropped_rows))
    return out


def compute_returns(series: PriceSeries, kind: str = "log", price_field: str = "adj_close") -> ReturnSeries:
    """r_t = ln(P_t/P_{t-1}) or P_t/P_{t-1} - 1, dated at t."""
    if len(series) < 2:
        raise DataError(f"{series.ticker}: need at least 2 bars for returns")
    p = series.prices(price_field)
    if np.any(p <= 0):
        raise DataError(f"{series.ticker}: non-positive price")
    if kind == "log":
        values = np.log(p[1:] / p[:-1])
    elif kind == "simple":
        values = p[1:] / p[:-1] - 1.0
    else:
        raise ValueError(f"unknown return kind {kind!r}")
    return ReturnSeries(dates=series.dates[1:], values=values, kind=kind)
