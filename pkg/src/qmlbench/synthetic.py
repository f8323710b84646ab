"""Seeded synthetic daily price data with a planted, learnable signal.

Returns carry GARCH(1,1) volatility clustering plus two autoregressive
drift terms: mean reversion against the 14-day stochastic %K position and
a small AR(1) component. Momentum indicators computed from these prices
(RSI, %K, MACD) are therefore genuinely predictive of next-day direction,
and realized variance is forecastable, which is what the desk-scale
benchmark runs and the acceptance suite rely on.
"""
from __future__ import annotations

import csv
import datetime as dt

import numpy as np

from .marketdata import PriceBar, PriceSeries


def _next_weekday(day: dt.date) -> dt.date:
    day = day + dt.timedelta(days=1)
    while day.weekday() >= 5:
        day += dt.timedelta(days=1)
    return day


def make_synthetic_prices(
    ticker: str,
    n_days: int = 1500,
    seed: int = 0,
    start: dt.date = dt.date(2015, 1, 2),
    start_price: float = 100.0,
    reversion: float = 0.9,
    ar1: float = 0.12,
    garch_omega: float = 1e-5,
    garch_alpha: float = 0.08,
    garch_beta: float = 0.82,
) -> PriceSeries:
    """Generate one ticker of OHLCV bars on a weekday calendar."""
    rng = np.random.default_rng(seed)
    sigma2 = garch_omega / (1.0 - garch_alpha - garch_beta)
    prices = [start_price]
    returns = [0.0]
    day = start
    bars = []
    for _ in range(n_days):
        window = prices[-14:]
        lo, hi = min(window), max(window)
        k_norm = (2.0 * (prices[-1] - lo) / (hi - lo) - 1.0) if hi > lo else 0.0
        vol = np.sqrt(sigma2)
        shock = vol * rng.standard_normal()
        r = -reversion * vol * k_norm + ar1 * returns[-1] + shock
        sigma2 = garch_omega + garch_alpha * shock**2 + garch_beta * sigma2
        close = prices[-1] * np.exp(r)
        open_ = prices[-1]
        hi_px = max(open_, close) * (1.0 + 0.3 * vol * abs(rng.standard_normal()))
        lo_px = min(open_, close) * (1.0 - 0.3 * vol * abs(rng.standard_normal()))
        volume = float(np.round(1e6 * np.exp(0.2 * rng.standard_normal())))
        bars.append(PriceBar(day, open_, hi_px, lo_px, close, close, volume))
        prices.append(close)
        returns.append(r)
        day = _next_weekday(day)
    return PriceSeries(ticker=ticker, bars=tuple(bars))


def make_universe(tickers, n_days: int = 1500, seed: int = 0, **kwargs) -> dict:
    """One independent synthetic series per ticker, seeds derived from `seed`."""
    out = {}
    for k, ticker in enumerate(tickers):
        out[ticker] = make_synthetic_prices(ticker, n_days=n_days, seed=seed * 1000 + k, **kwargs)
    return out


def write_price_csv(series: PriceSeries, path) -> None:
    """Write bars in the loader's seven-column schema."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date", "open", "high", "low", "close", "adj_close", "volume"))
        for b in series.bars:
            writer.writerow(
                (b.date.isoformat(), repr(float(b.open)), repr(float(b.high)), repr(float(b.low)),
                 repr(float(b.close)), repr(float(b.adj_close)), repr(float(b.volume)))
            )
