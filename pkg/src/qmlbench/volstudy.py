"""Expanding-window one-step-ahead realized-variance forecasting.

Every model family walks the same plan: an initial in-sample window, a
hyperparameter search scored by validation QLIKE on the window's tail, a
refit on the full window, then daily one-step forecasts until the next
retrain boundary. The in-sample window expands until `max_window` and
slides afterwards. Forecast rows never see same-day or future data: the
features are lagged by construction and scalers, searches, and fits only
touch rows before the boundary.

Because the angle-map qubit count fixes the feature dimension (half
return lags, half realized-variance lags, rounded toward returns), one
dataset is built per candidate dimension and all are aligned on a common
label-date axis so that every family is scored on identical rows.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from . import svr as svr_mod
from .features import LabeledDataset, build_feature_set, minmax_apply, minmax_fit, subset_dataset
from .garch import garch_filter, garch_fit, garch_forecast
from .marketdata import ReturnSeries, compute_returns
from .metrics import dm_test, qlike, qlike_series, regression_metrics
from .qkernel import FeatureMapSpec, kernel_cross, kernel_matrix

FAMILIES = ("persistence", "garch", "svr_lin", "svr_poly", "svr_rbf", "qsvr_angle", "qsvr_amplitude")

FORECAST_FLOOR = 1e-12  # variance forecasts are clipped to stay positive


@dataclass(frozen=True)
class ExpandingPlan:
    initial_train: int = 720
    retrain_every: int = 120
    max_window: int | None = None  # window expands until here, then slides

    def __post_init__(self):
        if self.initial_train < 10 or self.retrain_every < 1:
            raise ValueError("plan sizes out of range")
        if self.max_window is not None and self.initial_train > self.max_window:
            raise ValueError("initial_train must not exceed max_window")

    def boundaries(self, n_rows: int) -> list[int]:
        if n_rows <= self.initial_train + 1:
            raise ValueError("not enough rows for the expanding plan")
        return list(range(self.initial_train, n_rows, self.retrain_every))

    def window_start(self, boundary: int) -> int:
        if self.max_window is None:
            return 0
        return max(0, boundary - self.max_window)


@dataclass
class ForecastSeries:
    model: str
    dates: tuple
    rv_true: np.ndarray
    rv_pred: np.ndarray
    retrain_rows: tuple[int, ...]


def qubit_feature_split(n_qubits: int) -> tuple[int, int]:
    """Return/realized-variance lag counts for an n-qubit angle map."""
    return (n_qubits + 1) // 2, n_qubits // 2


@dataclass
class VolData:
    """Per-dimension vol datasets on one shared label-date axis."""

    datasets: dict[int, LabeledDataset]
    returns: ReturnSeries
    classical_dim: int

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.datasets.values())))

    @property
    def label_dates(self) -> tuple:
        return next(iter(self.datasets.values())).label_dates

    @property
    def feature_dates(self) -> tuple:
        return next(iter(self.datasets.values())).feature_dates


def build_vol_data(
    prices: dict,
    target: str,
    qubit_choices=(6, 8, 10, 12),
    classical_dim: int = 10,
    amp_dim: int | None = None,
    rv_window: int = 5,
    price_field: str = "adj_close",
) -> VolData:
    dims = sorted(set(qubit_choices) | {classical_dim} | ({amp_dim} if amp_dim else set()))
    raw = {}
    for dim in dims:
        p, q = qubit_feature_split(dim)
        raw[dim] = build_feature_set(
            "vol", prices, target, price_field=price_field, vol_p=p, vol_q=q, rv_window=rv_window
        )
    common = set(raw[dims[0]].label_dates)
    for dim in dims[1:]:
        common &= set(raw[dim].label_dates)
    datasets = {}
    for dim, ds in raw.items():
        idx = [i for i, d in enumerate(ds.label_dates) if d in common]
        datasets[dim] = subset_dataset(ds, idx)
    returns = compute_returns(prices[target], "log", price_field)
    return VolData(datasets=datasets, returns=returns, classical_dim=classical_dim)


def _boundary_seed(seed: int, boundary: int) -> int:
    return int(np.random.SeedSequence((seed, boundary)).generate_state(1)[0])


def _floor(pred: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(pred, dtype=float), FORECAST_FLOOR)


def _forecast_persistence(data: VolData, plan: ExpandingPlan) -> np.ndarray:
    ds = data.datasets[data.classical_dim]
    col = ds.features.names.index("rv_lag1")
    return _floor(ds.features.X[:, col])


def _forecast_garch(data: VolData, plan: ExpandingPlan) -> np.ndarray:
    r = data.returns.values
    ret_pos = {d: i for i, d in enumerate(data.returns.dates)}
    feat_idx = np.array([ret_pos[d] for d in data.feature_dates])
    n = data.n_rows
    preds = np.full(n, np.nan)
    for b in plan.boundaries(n):
        seg_end = min(b + plan.retrain_every, n)
        start = plan.window_start(b)
        fit_end = feat_idx[b - 1] + 1  # returns dated <= last in-sample feature date
        fit_start = feat_idx[start]
        r_fit = r[fit_start:fit_end]
        params = garch_fit(r_fit)
        sigma2_0 = float(np.var(r_fit))
        # filter with the frozen fit-window seed; row j only needs returns <= its feature date
        path = garch_filter(params, r[fit_start: feat_idx[seg_end - 1] + 1], sigma2_0)
        for j in range(b, seg_end):
            k = feat_idx[j] - fit_start
            preds[j] = garch_forecast(params, r[feat_idx[j]], path[k])
    return _floor(preds)


def _qsvr_trial_kernels(fmap: FeatureMapSpec, X_tr, X_va, cache):
    key = (fmap.variant, fmap.n_qubits, fmap.layers, fmap.seed)
    if key not in cache:
        k_tr = kernel_matrix(FeatureMapSpec(fmap.variant, fmap.n_qubits, fmap.layers, 1, fmap.seed), X_tr)
        k_va = kernel_cross(FeatureMapSpec(fmap.variant, fmap.n_qubits, fmap.layers, 1, fmap.seed), X_tr, X_va)
        cache[key] = (k_tr.entries, k_va)
    k_tr, k_va = cache[key]
    return k_tr**fmap.beta, k_va**fmap.beta


def _y_scale(y_train: np.ndarray) -> tuple[float, float]:
    """Min-max bounds for the target; the epsilon-tube search range is
    specified on the unit scale, so targets are scaled like the features
    and forecasts mapped back."""
    lo, hi = float(y_train.min()), float(y_train.max())
    if hi <= lo:
        raise ValueError("degenerate target window: constant realized variance")
    return lo, hi


def _forecast_svr(data: VolData, plan: ExpandingPlan, family: str, budget: int, seed: int,
                  qubit_choices, amp_dim) -> np.ndarray:
    quantum = family.startswith("qsvr")
    if family == "qsvr_amplitude":
        if amp_dim is None:
            raise ValueError("qsvr_amplitude needs amp_dim")
        ds = data.datasets[amp_dim]
        space = svr_mod.SearchSpace(
            "qsvr_amplitude",
            qubit_choices=tuple(n for n in qubit_choices if 2**n >= amp_dim),
        )
    elif family == "qsvr_angle":
        space = svr_mod.SearchSpace("qsvr_angle", qubit_choices=tuple(qubit_choices))
        ds = None  # per-trial dimension
    else:
        ds = data.datasets[data.classical_dim]
        space = svr_mod.SearchSpace({"svr_lin": "svr_lin", "svr_poly": "svr_poly", "svr_rbf": "svr_rbf"}[family])
    n = data.n_rows
    y = data.datasets[data.classical_dim].y
    preds = np.full(n, np.nan)
    for b in plan.boundaries(n):
        seg_end = min(b + plan.retrain_every, n)
        start = plan.window_start(b)
        val_len = min(plan.retrain_every, max(20, (b - start) // 4))
        tr_lo, tr_hi, va_hi = start, b - val_len, b
        cache: dict = {}

        def x_of(dim):
            return data.datasets[dim].features.X

        def objective(params):
            y_lo, y_hi = _y_scale(y[tr_lo:tr_hi])
            ys = (y[tr_lo:tr_hi] - y_lo) / (y_hi - y_lo)
            if quantum:
                spec, fmap = params
                dim = amp_dim if family == "qsvr_amplitude" else fmap.n_qubits
                X = x_of(dim)
                scaler = minmax_fit(X[tr_lo:tr_hi])
                X_tr = minmax_apply(scaler, X[tr_lo:tr_hi])
                X_va = minmax_apply(scaler, X[tr_hi:va_hi])
                k_tr, k_va = _qsvr_trial_kernels(fmap, X_tr, X_va, cache)
                model = svr_mod.svr_fit(spec, k_tr, ys)
                pred = svr_mod.svr_predict(model, k_va)
            else:
                spec = params
                X = x_of(data.classical_dim)
                scaler = minmax_fit(X[tr_lo:tr_hi])
                model = svr_mod.svr_fit(spec, minmax_apply(scaler, X[tr_lo:tr_hi]), ys)
                pred = svr_mod.svr_predict(model, minmax_apply(scaler, X[tr_hi:va_hi]))
            return qlike(y[tr_hi:va_hi], _floor(y_lo + (y_hi - y_lo) * pred))

        result = svr_mod.hyper_search(space, objective, budget, _boundary_seed(seed, b))
        # refit on the whole in-sample window with the winning configuration
        y_lo, y_hi = _y_scale(y[start:b])
        ys = (y[start:b] - y_lo) / (y_hi - y_lo)
        if quantum:
            spec, fmap = result.best_params
            dim = amp_dim if family == "qsvr_amplitude" else fmap.n_qubits
            X = x_of(dim)
            scaler = minmax_fit(X[start:b])
            X_in = minmax_apply(scaler, X[start:b])
            X_out = minmax_apply(scaler, X[b:seg_end])
            k_in = kernel_matrix(fmap, X_in)
            model = svr_mod.svr_fit(spec, k_in, ys)
            raw = svr_mod.svr_predict(model, kernel_cross(fmap, X_in, X_out))
        else:
            spec = result.best_params
            X = x_of(data.classical_dim)
            scaler = minmax_fit(X[start:b])
            model = svr_mod.svr_fit(spec, minmax_apply(scaler, X[start:b]), ys)
            raw = svr_mod.svr_predict(model, minmax_apply(scaler, X[b:seg_end]))
        preds[b:seg_end] = y_lo + (y_hi - y_lo) * raw
    return _floor(preds)


def run_expanding_forecast(
    data: VolData,
    plan: ExpandingPlan,
    family: str,
    search_budget: int = 50,
    seed: int = 0,
    qubit_choices=(6, 8, 10, 12),
    amp_dim: int | None = None,
) -> ForecastSeries:
    """Daily one-step forecasts from the first boundary to the end of data."""
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}")
    n = data.n_rows
    boundaries = plan.boundaries(n)
    if family == "persistence":
        preds = _forecast_persistence(data, plan)
    elif family == "garch":
        preds = _forecast_garch(data, plan)
    else:
        preds = _forecast_svr(data, plan, family, search_budget, seed, qubit_choices, amp_dim)
    lo = boundaries[0]
    y = data.datasets[data.classical_dim].y
    return ForecastSeries(
        model=family,
        dates=data.label_dates[lo:],
        rv_true=y[lo:].copy(),
        rv_pred=np.asarray(preds[lo:], dtype=float),
        retrain_rows=tuple(boundaries),
    )


def summarize_forecasts(results: dict[str, ForecastSeries], reference: str = "qsvr_angle"):
    """Per-family metric rows; DM compares each family's per-day QLIKE
    series against the reference family (blank for the reference itself)."""
    ref = results.get(reference)
    rows = []
    for name, fs in results.items():
        mse, mae, r2, dir_acc = regression_metrics(fs.rv_true, fs.rv_pred)
        row = {
            "model": name,
            "qlike": qlike(fs.rv_true, fs.rv_pred),
            "mse": mse,
            "mae": mae,
            "r2": r2,
            "dir_acc": dir_acc,
            "dm_stat": None,
            "dm_p": None,
        }
        if ref is not None and name != reference:
            if not np.array_equal(fs.dates, ref.dates):
                warnings.warn(f"{name}: forecast dates differ from reference; DM skipped")
            else:
                stat, p = dm_test(
                    qlike_series(fs.rv_true, fs.rv_pred),
                    qlike_series(ref.rv_true, ref.rv_pred),
                    loss="qlike_series",
                )
                row["dm_stat"], row["dm_p"] = stat, p
        rows.append(row)
    return rows


def write_forecast_csv(results: dict[str, ForecastSeries], path) -> None:
    """date, rv_true, one prediction column per model."""
    names = sorted(results)
    first = results[names[0]]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "rv_true"] + [f"rv_pred_{n}" for n in names])
        for i, d in enumerate(first.dates):
            writer.writerow(
                [d.isoformat(), repr(float(first.rv_true[i]))]
                + [repr(float(results[n].rv_pred[i])) for n in names]
            )
