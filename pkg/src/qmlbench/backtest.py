"""Probabilities to positions, equity simulation with costs, threshold calibration."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .metrics import PERIODS_PER_YEAR, trading_metrics

DEFAULT_FEE_RATE = 0.0005  # charged per unit of position change


@dataclass(frozen=True)
class ThresholdPair:
    tau_long: float
    tau_short: float

    def __post_init__(self):
        if not 0.5 <= self.tau_long <= 0.9:
            raise ValueError("tau_long must lie in [0.5, 0.9]")
        if not 0.1 <= self.tau_short <= 0.5:
            raise ValueError("tau_short must lie in [0.1, 0.5]")


@dataclass(frozen=True)
class EquityCurve:
    """Simulated portfolio path; equity[0] = 1.0 and has one more entry
    than positions/costs."""

    equity: np.ndarray
    positions: np.ndarray
    costs: np.ndarray
    dates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "equity", np.asarray(self.equity, dtype=float))
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "costs", np.asarray(self.costs, dtype=float))
        if len(self.equity) != len(self.positions) + 1:
            raise ValueError("equity must have one more entry than positions")
        if np.any(self.equity <= 0):
            raise ValueError("equity must stay positive")

    @property
    def final_equity(self) -> float:
        return float(self.equity[-1])

    @property
    def n_trades(self) -> int:
        prev = np.concatenate([[0.0], self.positions[:-1]])
        return int(np.sum(self.positions != prev))


def threshold_signals(probs, thresholds: ThresholdPair) -> np.ndarray:
    """+1 above tau_long, -1 below tau_short, 0 otherwise (strict inequalities)."""
    probs = np.asarray(probs, dtype=float)
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    out = np.zeros(len(probs))
    out[probs > thresholds.tau_long] = 1.0
    out[probs < thresholds.tau_short] = -1.0
    return out


def simulate(positions, returns, fee_rate: float = DEFAULT_FEE_RATE, dates=()) -> EquityCurve:
    """Equity recursion equity_{t+1} = equity_t * (1 + s_t r_t - cost_t).

    The fee is a flat fraction of equity per unit of position change
    (|delta s|, so a long-to-short flip costs two units); the position
    before the first day is flat.
    """
    positions = np.asarray(positions, dtype=float)
    returns = np.asarray(returns, dtype=float)
    if positions.shape != returns.shape:
        raise ValueError("positions and returns length mismatch")
    prev = np.concatenate([[0.0], positions[:-1]])
    costs = fee_rate * np.abs(positions - prev)
    growth = 1.0 + positions * returns - costs
    if np.any(growth <= 0):
        raise ValueError("equity would hit zero; returns/fees out of range")
    equity = np.concatenate([[1.0], np.cumprod(growth)])
    return EquityCurve(equity=equity, positions=positions, costs=costs, dates=tuple(dates))


def buy_and_hold(returns, fee_rate: float = DEFAULT_FEE_RATE, dates=()) -> EquityCurve:
    """Long throughout with a single entry cost on the first day."""
    returns = np.asarray(returns, dtype=float)
    if len(returns) == 0:
        raise ValueError("need at least one return")
    return simulate(np.ones(len(returns)), returns, fee_rate=fee_rate, dates=dates)


@dataclass(frozen=True)
class CalibrationResult:
    thresholds: ThresholdPair
    sharpe: float | None
    n_trades: int
    no_trade: bool  # every grid pair abstained; fallback pair returned


def calibrate_thresholds(
    probs,
    returns,
    grid_step: float = 0.05,
    fee_rate: float = DEFAULT_FEE_RATE,
    periods_per_year: int = PERIODS_PER_YEAR,
) -> CalibrationResult:
    """Exhaustive grid over threshold pairs, maximizing slice Sharpe.

    Ties break toward fewer trades, then the smaller tau_long. Pairs whose
    signals never trade have undefined Sharpe and are excluded; when every
    pair is excluded the flagged fallback (0.5, 0.5) is returned.
    """
    probs = np.asarray(probs, dtype=float)
    returns = np.asarray(returns, dtype=float)
    if probs.shape != returns.shape:
        raise ValueError("probs and returns length mismatch")
    if len(probs) < 20:
        warnings.warn("threshold calibration slice has fewer than 20 observations")
    longs = np.round(np.arange(0.50, 0.90 + 1e-9, grid_step), 10)
    shorts = np.round(np.arange(0.10, 0.50 + 1e-9, grid_step), 10)
    best = None
    for tau_long in longs:
        for tau_short in shorts:
            pair = ThresholdPair(float(tau_long), float(tau_short))
            curve = simulate(threshold_signals(probs, pair), returns, fee_rate=fee_rate)
            report = trading_metrics(curve.equity, periods_per_year=periods_per_year)
            if report.sharpe is None:
                continue
            key = (-report.sharpe, curve.n_trades, tau_long, tau_short)
            if best is None or key < best[0]:
                best = (key, pair, report.sharpe, curve.n_trades)
    if best is None:
        return CalibrationResult(ThresholdPair(0.5, 0.5), None, 0, no_trade=True)
    _, pair, sharpe, n_trades = best
    return CalibrationResult(pair, sharpe, n_trades, no_trade=False)
