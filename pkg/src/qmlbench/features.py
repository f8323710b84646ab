"""Feature engineering: indicators, feature regimes, scaling, labels, splits.

Every supervised row is keyed by its label date. Builders lag inputs so
that strictly-lagged columns use only data dated before the label date;
the one documented exception is the mid7 regime, whose five non-U.S.
index returns enter same-day because those markets close before the U.S.
cash close (the two U.S. proxies are lagged by one day). The audit at the
bottom of this module enforces exactly that rule.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .marketdata import PriceSeries, compute_returns

MID7_SAME_DAY = ("N225", "HSI", "AORD", "GDAXI", "FTSE")
MID7_LAGGED = ("DJI", "NYA")

REGIMES = ("low3", "mid7", "high64", "trading10x4", "vol")


class LookaheadError(AssertionError):
    """A feature row uses information dated on/after its label date."""


# ---------------------------------------------------------------------------
# technical indicators (plain arrays, warm-up removed)


def rsi(prices: np.ndarray, period: int = 14) -> np.ndarray:
    """Relative strength index on [0, 100], simple rolling gain/loss means.

    First value corresponds to price index `period`; a flat window (no
    gains, no losses) maps to 50.
    """
    prices = np.asarray(prices, dtype=float)
    if len(prices) <= period:
        raise ValueError(f"need more than {period} prices for rsi")
    delta = np.diff(prices)
    gains = sliding_window_view(np.maximum(delta, 0.0), period).mean(axis=-1)
    losses = sliding_window_view(np.maximum(-delta, 0.0), period).mean(axis=-1)
    total = gains + losses
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 100.0 * gains / total
    return np.clip(np.where(total == 0.0, 50.0, out), 0.0, 100.0)


def stochastic_k(prices: np.ndarray, period: int = 14) -> np.ndarray:
    """%K: close position inside the trailing high-low range, on [0, 100].

    First value corresponds to price index period-1; flat windows map to 50.
    """
    prices = np.asarray(prices, dtype=float)
    if len(prices) < period:
        raise ValueError(f"need at least {period} prices for %K")
    win = sliding_window_view(prices, period)
    lo = win.min(axis=-1)
    hi = win.max(axis=-1)
    span = hi - lo
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 100.0 * (prices[period - 1:] - lo) / span
    return np.clip(np.where(span == 0.0, 50.0, out), 0.0, 100.0)


def sma(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing simple moving average; first value at index window-1."""
    values = np.asarray(values, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(values) < window:
        raise ValueError(f"need at least {window} values for sma")
    return sliding_window_view(values, window).mean(axis=-1)


def ema(values: np.ndarray, span: int) -> np.ndarray:
    """Exponential moving average, smoothing 2/(span+1), seeded at the first value."""
    values = np.asarray(values, dtype=float)
    if span < 1:
        raise ValueError("span must be >= 1")
    if len(values) == 0:
        raise ValueError("need at least one value for ema")
    kappa = 2.0 / (span + 1.0)
    out = np.empty_like(values)
    out[0] = values[0]
    for t in range(1, len(values)):
        out[t] = kappa * values[t] + (1.0 - kappa) * out[t - 1]
    return out


def macd(prices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """MACD line (EMA12 - EMA26) and its 9-day EMA signal, full length."""
    prices = np.asarray(prices, dtype=float)
    if len(prices) < 26:
        raise ValueError("need at least 26 prices for macd")
    line = ema(prices, 12) - ema(prices, 26)
    return line, ema(line, 9)


def realized_variance(returns: np.ndarray, window: int = 5) -> np.ndarray:
    """Trailing mean of squared returns; first value at return index window-1."""
    returns = np.asarray(returns, dtype=float)
    if len(returns) < window:
        raise ValueError(f"need at least {window} returns for realized variance")
    return sliding_window_view(returns**2, window).mean(axis=-1)


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class FeatureMatrix:
    """Feature rows keyed by date; no NaN rows survive construction."""

    dates: tuple[dt.date, ...]
    X: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "names", tuple(self.names))
        if self.X.ndim != 2 or self.X.shape != (len(self.dates), len(self.names)):
            raise ValueError("feature matrix shape inconsistent with dates/names")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("feature matrix contains non-finite values")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class LabeledDataset:
    """Features plus targets; `feature_dates` is the latest strictly-lagged
    data date per row, used by the look-ahead audit."""

    features: FeatureMatrix
    y: np.ndarray
    target_kind: str  # "direction" | "realized_variance"
    feature_dates: tuple[dt.date, ...]
    same_day_columns: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if len(self.y) != self.features.n_rows:
            raise ValueError("label count differs from feature rows")
        if self.target_kind == "direction":
            if not np.all(np.isin(self.y, (0.0, 1.0))):
                raise ValueError("direction labels must be 0/1")
        elif self.target_kind != "realized_variance":
            raise ValueError(f"unknown target kind {self.target_kind!r}")
        if len(self.feature_dates) != self.features.n_rows:
            raise ValueError("feature_dates length mismatch")

    @property
    def label_dates(self) -> tuple[dt.date, ...]:
        return self.features.dates

    def __len__(self) -> int:
        return self.features.n_rows


@dataclass(frozen=True)
class WindowTensor:
    """Rolling windows (N, T, F) with binary labels dated after window end."""

    samples: np.ndarray
    labels: np.ndarray
    window: int
    names: tuple[str, ...]
    window_end_dates: tuple[dt.date, ...]
    label_dates: tuple[dt.date, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=float))
        n, t, f = self.samples.shape
        if t != self.window or f != len(self.names):
            raise ValueError("window tensor shape inconsistent")
        if not (n == len(self.labels) == len(self.window_end_dates) == len(self.label_dates)):
            raise ValueError("window tensor lengths inconsistent")
        if not np.all(np.isin(self.labels, (0.0, 1.0))):
            raise ValueError("labels must be 0/1")

    @property
    def n_features(self) -> int:
        return self.samples.shape[2]

    def __len__(self) -> int:
        return self.samples.shape[0]


# ---------------------------------------------------------------------------
# scaling


@dataclass(frozen=True)
class ScalerParams:
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mins", np.asarray(self.mins, dtype=float))
        object.__setattr__(self, "maxs", np.asarray(self.maxs, dtype=float))
        if np.any(self.maxs < self.mins):
            raise ValueError("max < min in scaler parameters")


def minmax_fit(X_train: np.ndarray) -> ScalerParams:
    """Per-column min/max from training rows only."""
    X_train = np.asarray(X_train, dtype=float)
    if X_train.size == 0:
        raise ValueError("cannot fit scaler on an empty training set")
    return ScalerParams(mins=X_train.min(axis=0), maxs=X_train.max(axis=0))


def minmax_apply(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    """(X - min)/(max - min); constant columns map to 0; no clipping."""
    X = np.asarray(X, dtype=float)
    span = params.maxs - params.mins
    safe = np.where(span == 0.0, 1.0, span)
    out = (X - params.mins) / safe
    return np.where(span == 0.0, 0.0, out)


# ---------------------------------------------------------------------------
# labels


def label_direction(prices: np.ndarray) -> np.ndarray:
    """y_t = 1 if P_t > P_{t-1} else 0 (ties count as down)."""
    prices = np.asarray(prices, dtype=float)
    if len(prices) < 2:
        raise ValueError("need at least 2 prices to label direction")
    return (prices[1:] > prices[:-1]).astype(float)


# ---------------------------------------------------------------------------
# lag matrix


def lag_matrix(
    series_map: dict,
    target: str,
    self_lags: int = 8,
    cross_lags: int = 7,
) -> FeatureMatrix:
    """Lagged-return block: target lags 1..self_lags plus every other series
    at lags 1..cross_lags. Rows are keyed by the anchor date t; all entries
    are strictly before t."""
    if target not in series_map:
        raise ValueError(f"target {target!r} missing from series map")
    ref_dates = series_map[target].dates
    for name, rs in series_map.items():
        if rs.dates != ref_dates:
            raise ValueError(f"return series {name!r} not calendar-aligned with target")
    max_lag = max(self_lags, cross_lags if len(series_map) > 1 else 0)
    if max_lag < 1:
        raise ValueError("need at least one lag")
    n = len(ref_dates)
    if n <= max_lag:
        raise ValueError("not enough observations for the requested lags")
    cols, names = [], []
    tgt = series_map[target].values
    for k in range(1, self_lags + 1):
        cols.append(tgt[max_lag - k: n - k])
        names.append(f"{target}_lag{k}")
    for name, rs in series_map.items():
        if name == target:
            continue
        for k in range(1, cross_lags + 1):
            cols.append(rs.values[max_lag - k: n - k])
            names.append(f"{name}_lag{k}")
    X = np.column_stack(cols)
    return FeatureMatrix(dates=ref_dates[max_lag:], X=X, names=tuple(names))


# ---------------------------------------------------------------------------
# feature regimes


def _nan_pad(values: np.ndarray, start: int, n: int) -> np.ndarray:
    out = np.full(n, np.nan)
    out[start: start + len(values)] = values
    return out


def _check_aligned(prices: dict, tickers) -> None:
    ref = None
    for t in tickers:
        if t not in prices:
            raise ValueError(f"ticker {t!r} missing from price map")
        if ref is None:
            ref = prices[t].dates
        elif prices[t].dates != ref:
            raise ValueError(f"ticker {t!r} not calendar-aligned")


def _low3(prices: dict, target: str, price_field: str) -> LabeledDataset:
    series = prices[target]
    p = series.prices(price_field)
    dates = series.dates
    m = len(p)
    ind = np.column_stack(
        [
            _nan_pad(rsi(p, 14), 14, m),
            _nan_pad(stochastic_k(p, 14), 13, m),
            _nan_pad(sma(stochastic_k(p, 14), 3), 15, m),
        ]
    )
    y_full = label_direction(p)  # y_full[i] labels price index i+1
    rows, labels, row_dates, feat_dates = [], [], [], []
    for t in range(1, m):
        feats = ind[t - 1]
        if np.any(np.isnan(feats)):
            continue  # warm-up
        rows.append(feats)
        labels.append(y_full[t - 1])
        row_dates.append(dates[t])
        feat_dates.append(dates[t - 1])
    fm = FeatureMatrix(dates=row_dates, X=np.array(rows), names=("rsi14", "pct_k14", "sma3_k14"))
    return LabeledDataset(fm, np.array(labels), "direction", tuple(feat_dates))


def _mid7(prices: dict, target: str, price_field: str, same_day, lagged) -> LabeledDataset:
    tickers = (target, *same_day, *lagged)
    _check_aligned(prices, tickers)
    rets = {t: compute_returns(prices[t], "log", price_field) for t in tickers}
    dates = rets[target].dates
    n = len(dates)
    if n < 2:
        raise ValueError("not enough history for the mid7 regime")
    cols, names = [], []
    for t in same_day:
        cols.append(rets[t].values[1:])
        names.append(t)
    for t in lagged:
        cols.append(rets[t].values[:-1])
        names.append(f"{t}_lag1")
    X = np.column_stack(cols)
    y = (rets[target].values[1:] > 0).astype(float)
    fm = FeatureMatrix(dates=dates[1:], X=X, names=tuple(names))
    return LabeledDataset(
        fm,
        y,
        "direction",
        feature_dates=dates[:-1],
        same_day_columns=tuple(same_day),
    )


def _high64(prices: dict, target: str, price_field: str, cross, self_lags, cross_lags) -> LabeledDataset:
    tickers = (target, *cross)
    _check_aligned(prices, tickers)
    rets = {t: compute_returns(prices[t], "log", price_field) for t in tickers}
    fm = lag_matrix(rets, target, self_lags=self_lags, cross_lags=cross_lags)
    ret_dates = rets[target].dates
    date_pos = {d: i for i, d in enumerate(ret_dates)}
    y = np.array([float(rets[target].values[date_pos[d]] > 0) for d in fm.dates])
    feat_dates = tuple(ret_dates[date_pos[d] - 1] for d in fm.dates)
    return LabeledDataset(fm, y, "direction", feat_dates)


def _trading_windows(prices: dict, target: str, price_field: str, window: int) -> WindowTensor:
    series = prices[target]
    p = series.prices(price_field)
    dates = series.dates
    m = len(p)
    line, signal = macd(p)
    day = np.column_stack(
        [
            _nan_pad(np.log(p[1:] / p[:-1]), 1, m),
            line,
            signal,
            _nan_pad(rsi(p, 14), 14, m),
        ]
    )
    y_full = label_direction(p)
    first_valid = 14  # rsi warm-up dominates
    samples, labels, end_dates, label_dates = [], [], [], []
    for t in range(first_valid + window - 1, m - 1):
        block = day[t - window + 1: t + 1]
        if np.any(np.isnan(block)):
            continue
        samples.append(block)
        labels.append(y_full[t])  # labels price move into t+1
        end_dates.append(dates[t])
        label_dates.append(dates[t + 1])
    if not samples:
        raise ValueError("not enough history for trading windows")
    return WindowTensor(
        samples=np.array(samples),
        labels=np.array(labels),
        window=window,
        names=("log_return", "macd_line", "macd_signal", "rsi14"),
        window_end_dates=tuple(end_dates),
        label_dates=tuple(label_dates),
    )


def _vol_dataset(prices: dict, target: str, price_field: str, p_lags: int, q_lags: int, rv_window: int) -> LabeledDataset:
    rets = compute_returns(prices[target], "log", price_field)
    r = rets.values
    dates = rets.dates
    n = len(r)
    rv = _nan_pad(realized_variance(r, rv_window), rv_window - 1, n)
    first_t = max(p_lags - 1, q_lags + rv_window - 2)
    rows, labels, row_dates, feat_dates = [], [], [], []
    for t in range(first_t, n - 1):
        feats = np.concatenate([r[t - p_lags + 1: t + 1][::-1], rv[t - q_lags + 1: t + 1][::-1]])
        if np.any(np.isnan(feats)) or np.isnan(rv[t + 1]):
            continue
        rows.append(feats)
        labels.append(rv[t + 1])
        row_dates.append(dates[t + 1])
        feat_dates.append(dates[t])
    names = tuple(f"ret_lag{k}" for k in range(1, p_lags + 1)) + tuple(
        f"rv_lag{k}" for k in range(1, q_lags + 1)
    )
    fm = FeatureMatrix(dates=row_dates, X=np.array(rows), names=names)
    return LabeledDataset(fm, np.array(labels), "realized_variance", tuple(feat_dates))


def build_feature_set(
    regime: str,
    prices: dict,
    target: str,
    *,
    price_field: str = "adj_close",
    same_day_tickers=MID7_SAME_DAY,
    lagged_tickers=MID7_LAGGED,
    cross_tickers=None,
    self_lags: int = 8,
    cross_lags: int = 7,
    window: int = 10,
    vol_p: int = 5,
    vol_q: int = 5,
    rv_window: int = 5,
):
    """Assemble one of the named feature regimes.

    low3        -> RSI-14, %K14, SMA3(%K14) of the target (direction labels)
    mid7        -> same-day returns of five early-close indices plus two
                   one-day-lagged U.S. proxies (direction labels)
    high64      -> target return lags 1..8 plus cross-index lags 1..7
    trading10x4 -> rolling windows of [log return, MACD, MACD signal, RSI-14]
    vol         -> return and realized-variance lags, next-day RV target
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if target not in prices:
        raise ValueError(f"target {target!r} missing from price map")
    if regime == "low3":
        return _low3(prices, target, price_field)
    if regime == "mid7":
        return _mid7(prices, target, price_field, tuple(same_day_tickers), tuple(lagged_tickers))
    if regime == "high64":
        cross = tuple(cross_tickers) if cross_tickers is not None else tuple(
            t for t in prices if t != target
        )
        return _high64(prices, target, price_field, cross, self_lags, cross_lags)
    if regime == "trading10x4":
        return _trading_windows(prices, target, price_field, window)
    return _vol_dataset(prices, target, price_field, vol_p, vol_q, rv_window)


# ---------------------------------------------------------------------------
# split plans


@dataclass(frozen=True)
class SplitPlan:
    """Chronological (train, test) index ranges, half-open."""

    folds: tuple[tuple[tuple[int, int], tuple[int, int]], ...]
    scheme: str  # "expanding_walkforward" | "regime_phases"

    def __post_init__(self):
        for (tr0, tr1), (te0, te1) in self.folds:
            if not (0 <= tr0 < tr1 <= te0 < te1):
                raise ValueError("fold ranges must be chronological and non-empty")


def make_walkforward_splits(
    n_rows: int,
    n_folds: int = 5,
    dates=None,
    final_train_end: dt.date | None = None,
    final_test_end: dt.date | None = None,
) -> SplitPlan:
    """Expanding train windows with fixed-length test windows.

    Without dates the rows are cut into n_folds+1 equal chunks and fold k
    trains on the first k chunks. With dates plus the two boundaries, the
    final fold's train ends at final_train_end and its test runs through
    final_test_end; earlier folds shift the boundary back one test-window
    at a time.
    """
    if n_folds < 1:
        raise ValueError("need at least one fold")
    if dates is not None and final_train_end is not None and final_test_end is not None:
        dates = tuple(dates)
        if len(dates) != n_rows:
            raise ValueError("dates length differs from n_rows")
        if final_test_end <= final_train_end:
            raise ValueError("test range must follow the train range")
        if final_train_end < dates[0] or final_test_end > dates[-1]:
            raise ValueError("fold boundaries outside the data range")
        train_stop = sum(1 for d in dates if d <= final_train_end)
        test_stop = sum(1 for d in dates if d <= final_test_end)
        v = test_stop - train_stop
        if v < 1:
            raise ValueError("empty test window")
        folds = []
        for k in range(n_folds):
            stop = train_stop - (n_folds - 1 - k) * v
            if stop < 1:
                raise ValueError("fold boundaries outside the data range")
            folds.append(((0, stop), (stop, stop + v)))
        return SplitPlan(tuple(folds), "expanding_walkforward")
    v = n_rows // (n_folds + 1)
    if v < 1:
        raise ValueError("not enough rows for the requested folds")
    folds = []
    for k in range(n_folds):
        stop = (k + 1) * v
        test_stop = n_rows if k == n_folds - 1 else stop + v
        folds.append(((0, stop), (stop, test_stop)))
    return SplitPlan(tuple(folds), "expanding_walkforward")


@dataclass(frozen=True)
class PhaseSplit:
    """Contiguous train / early-stop / model-select / calibration ranges."""

    train: tuple[int, int]
    early_stop: tuple[int, int]
    model_select: tuple[int, int]
    calibration: tuple[int, int]


def make_regime_phase_splits(n_rows: int) -> PhaseSplit:
    """70/10/10/10 contiguous slices; floor rounding, remainder to train."""
    if n_rows < 10:
        raise ValueError("need at least 10 rows for a 70/10/10/10 split")
    tail = n_rows // 10
    train = n_rows - 3 * tail
    return PhaseSplit(
        train=(0, train),
        early_stop=(train, train + tail),
        model_select=(train + tail, train + 2 * tail),
        calibration=(train + 2 * tail, train + 3 * tail),
    )


# ---------------------------------------------------------------------------
# look-ahead audit and CSV export


def audit_lookahead(dataset) -> int:
    """Assert no row uses data dated on/after its label date.

    Strictly-lagged columns must be dated before the label; the mid7
    same-day columns may share the label date but never exceed it. Returns
    the number of rows checked.
    """
    if isinstance(dataset, WindowTensor):
        pairs = zip(dataset.window_end_dates, dataset.label_dates)
    else:
        pairs = zip(dataset.feature_dates, dataset.label_dates)
    n = 0
    for feat_date, label_date in pairs:
        if feat_date >= label_date:
            raise LookaheadError(f"feature data dated {feat_date} >= label date {label_date}")
        n += 1
    return n


def subset_dataset(dataset: LabeledDataset, indices) -> LabeledDataset:
    """Row subset (chronological order preserved by the caller's indices)."""
    indices = np.asarray(indices, dtype=int)
    fm = FeatureMatrix(
        dates=tuple(dataset.features.dates[i] for i in indices),
        X=dataset.features.X[indices],
        names=dataset.features.names,
    )
    return LabeledDataset(
        fm,
        dataset.y[indices],
        dataset.target_kind,
        tuple(dataset.feature_dates[i] for i in indices),
        dataset.same_day_columns,
    )


def write_dataset_csv(dataset: LabeledDataset, path) -> None:
    """Dump a labeled dataset for external inspection."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date",) + dataset.features.names + ("target",))
        for i, d in enumerate(dataset.label_dates):
            writer.writerow([d.isoformat(), *dataset.features.X[i], dataset.y[i]])
