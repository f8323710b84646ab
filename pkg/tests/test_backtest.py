import numpy as np
import pytest

from qmlbench.backtest import (
    CalibrationResult,
    ThresholdPair,
    buy_and_hold,
    calibrate_thresholds,
    simulate,
    threshold_signals,
)


def test_threshold_pair_ranges():
    ThresholdPair(0.9, 0.1)
    with pytest.raises(ValueError):
        ThresholdPair(0.95, 0.1)
    with pytest.raises(ValueError):
        ThresholdPair(0.6, 0.55)


def test_signals_anchors():
    pair = ThresholdPair(0.9, 0.4)
    assert threshold_signals([0.95], pair).tolist() == [1.0]
    assert threshold_signals([0.5], ThresholdPair(0.6, 0.4)).tolist() == [0.0]
    # boundary values do not trade (strict inequalities)
    assert threshold_signals([0.9], pair).tolist() == [0.0]
    assert threshold_signals([0.4], pair).tolist() == [0.0]
    assert threshold_signals([0.1], pair).tolist() == [-1.0]


def test_simulate_entry_anchor():
    curve = simulate([1.0], [0.01], fee_rate=0.0005)
    assert curve.equity[-1] == pytest.approx(1.0095)


def test_simulate_flat_positions_constant_equity():
    curve = simulate(np.zeros(10), np.random.default_rng(0).normal(0, 0.01, 10))
    assert np.allclose(curve.equity, 1.0)
    assert curve.n_trades == 0


def test_zero_fee_all_long_is_buy_and_hold():
    rng = np.random.default_rng(1)
    r = rng.normal(0.0005, 0.01, 250)
    curve = simulate(np.ones(250), r, fee_rate=0.0)
    assert np.array_equal(curve.equity[1:], np.cumprod(1 + r))
    bh = buy_and_hold(r, fee_rate=0.0)
    assert np.array_equal(curve.equity, bh.equity)


def test_buy_and_hold_anchor():
    bh = buy_and_hold([0.01, -0.01], fee_rate=0.0)
    assert bh.equity[-1] == pytest.approx(0.9999)
    with pytest.raises(ValueError):
        buy_and_hold([])


def test_buy_and_hold_matches_all_long_with_fee():
    r = np.random.default_rng(2).normal(0, 0.01, 100)
    assert np.array_equal(
        buy_and_hold(r, fee_rate=0.0005).equity,
        simulate(np.ones(100), r, fee_rate=0.0005).equity,
    )


def test_flip_costs_two_units():
    curve = simulate([1.0, -1.0], [0.0, 0.0], fee_rate=0.001)
    assert curve.costs.tolist() == [0.001, 0.002]


def test_fee_monotonicity_property():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(20, 80))
        positions = rng.choice([-1.0, 0.0, 1.0], size=n)
        if np.all(np.concatenate([[0.0], positions[:-1]]) == positions):
            positions[0] = 1.0  # force at least one change event
        returns = rng.normal(0, 0.01, n)
        base = simulate(positions, returns, fee_rate=0.0005).final_equity
        doubled = simulate(positions, returns, fee_rate=0.001).final_equity
        assert doubled <= base


def test_equity_positivity():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(10, 60))
        positions = rng.choice([-1.0, 0.0, 1.0], size=n)
        returns = rng.uniform(-0.5, 0.5, n)
        curve = simulate(positions, returns, fee_rate=0.01)
        assert np.all(curve.equity > 0)


def test_length_mismatch():
    with pytest.raises(ValueError):
        simulate([1.0, 0.0], [0.01])


def test_calibration_grid_has_81_pairs():
    longs = np.round(np.arange(0.50, 0.90 + 1e-9, 0.05), 10)
    shorts = np.round(np.arange(0.10, 0.50 + 1e-9, 0.05), 10)
    assert len(longs) == 9 and len(shorts) == 9


def test_calibration_picks_grid_argmax():
    rng = np.random.default_rng(5)
    n = 120
    returns = rng.normal(0, 0.01, n)
    probs = np.clip(0.5 + 25 * returns + rng.normal(0, 0.05, n), 0.0, 1.0)
    result = calibrate_thresholds(probs, returns)
    assert not result.no_trade
    # exhaustive independent check: no pair beats the selected Sharpe
    from qmlbench.backtest import ThresholdPair as TP
    from qmlbench.metrics import trading_metrics

    best = -np.inf
    for tl in np.round(np.arange(0.50, 0.90 + 1e-9, 0.05), 10):
        for ts in np.round(np.arange(0.10, 0.50 + 1e-9, 0.05), 10):
            curve = simulate(threshold_signals(probs, TP(tl, ts)), returns)
            rep = trading_metrics(curve.equity)
            if rep.sharpe is not None:
                best = max(best, rep.sharpe)
    assert result.sharpe == pytest.approx(best)


def test_calibration_no_trade_fallback():
    probs = np.full(60, 0.5)
    returns = np.random.default_rng(6).normal(0, 0.01, 60)
    result = calibrate_thresholds(probs, returns)
    assert result.no_trade
    assert (result.thresholds.tau_long, result.thresholds.tau_short) == (0.5, 0.5)


def test_calibration_short_slice_warns():
    probs = np.full(10, 0.7)
    returns = np.full(10, 0.001)
    with pytest.warns(UserWarning):
        result = calibrate_thresholds(probs, returns)
    assert isinstance(result, CalibrationResult)
