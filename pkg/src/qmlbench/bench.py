"""Study orchestration: config files, the three benchmark studies, reports, CLI.

Subcommands: `classify` (ANN vs QNN directional classification), `trade`
(LSTM vs QLSTM threshold trading), `volatility` (SVR/QSVR/GARCH realized
variance), `selftest` (fast property suites). Reports are written as CSV
(4-decimal floats) and JSON (full precision), both embedding the config
hash and seed so any report can be regenerated bit-identically.

Exit codes: 0 success, 2 config error, 3 data error.
"""
from __future__ import annotations

import argparse
import configparser
import datetime as dt
import hashlib
import json
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backtest, neural, qsim, volstudy
from .features import (
    audit_lookahead,
    build_feature_set,
    make_regime_phase_splits,
    make_walkforward_splits,
    minmax_apply,
    minmax_fit,
)
from .marketdata import DataError, align_calendars, compute_returns, load_price_csv
from .metrics import auc_score, classification_metrics, qlike, trading_metrics
from .qkernel import FeatureMapSpec, kernel_matrix
from .synthetic import make_universe


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    study: str
    seed: int
    out_dir: str
    jobs: int
    raw: dict = field(default_factory=dict)  # flattened section.key -> value

    def get(self, key: str, default=None) -> str:
        val = self.raw.get(key)
        return default if val in (None, "") else val

    def get_int(self, key: str, default=None) -> int:
        val = self.get(key)
        if val is None:
            if default is None:
                raise ConfigError(f"missing integer key {key}")
            return default
        try:
            return int(val)
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer, got {val!r}") from exc

    def get_float(self, key: str, default: float) -> float:
        val = self.get(key)
        if val is None:
            return default
        try:
            return float(val)
        except ValueError as exc:
            raise ConfigError(f"{key} must be a number, got {val!r}") from exc

    def get_bool(self, key: str, default: bool) -> bool:
        val = self.get(key)
        if val is None:
            return default
        if val.lower() in ("1", "true", "yes", "on"):
            return True
        if val.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key} must be boolean, got {val!r}")

    def get_list(self, key: str, default=()) -> tuple[str, ...]:
        val = self.get(key)
        if val is None:
            return tuple(default)
        return tuple(s.strip() for s in val.split(",") if s.strip())

    def get_int_list(self, key: str, default=()) -> tuple[int, ...]:
        try:
            return tuple(int(s) for s in self.get_list(key, [str(d) for d in default]))
        except ValueError as exc:
            raise ConfigError(f"{key} must be a comma-separated integer list") from exc

    def config_hash(self) -> str:
        canon = "\n".join(f"{k}={self.raw[k]}" for k in sorted(self.raw))
        canon += f"\nseed={self.seed}\nstudy={self.study}"
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def parse_config(path, study: str, out_dir=None, seed=None, jobs=None) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    raw = {}
    for section in parser.sections():
        for key, val in parser.items(section):
            raw[f"{section}.{key}"] = val
    cfg_study = raw.get("run.study")
    if cfg_study and cfg_study != study:
        raise ConfigError(f"config declares study={cfg_study!r} but {study!r} was requested")
    cfg = RunConfig(
        study=study,
        seed=seed if seed is not None else int(raw.get("run.seed", "0")),
        out_dir=str(out_dir if out_dir is not None else raw.get("run.out_dir", "runs")),
        jobs=jobs if jobs is not None else int(raw.get("run.jobs", "1")),
        raw=raw,
    )
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    return cfg


def _derive_seed(seed: int, *tags) -> int:
    mixed = seed
    for tag in tags:
        mixed = zlib.crc32(f"{mixed}:{tag}".encode())
    return int(mixed % (2**31))


# ---------------------------------------------------------------------------
# data loading


def load_universe(cfg: RunConfig, tickers) -> dict:
    """Synthetic universe or per-ticker CSVs, calendar-aligned."""
    tickers = tuple(tickers)
    if not tickers:
        raise ConfigError("no tickers configured")
    if cfg.get_bool("data.synthetic", False):
        n_days = cfg.get_int("data.synthetic_days", 1500)
        return make_universe(tickers, n_days=n_days, seed=cfg.seed)
    prices_dir = cfg.get("data.prices_dir")
    if prices_dir is None:
        raise ConfigError("data.prices_dir required when data.synthetic is false")
    field_name = cfg.get("data.price_field", "adj_close")
    series = []
    for t in tickers:
        path = Path(prices_dir) / f"{t}.csv"
        if not path.exists():
            raise DataError(f"price file missing: {path}")
        series.append(load_price_csv(path, price_field=field_name, ticker=t))
    aligned = align_calendars(series)
    return {s.ticker: s for s in aligned}


# ---------------------------------------------------------------------------
# reports


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.4f}"
    if isinstance(value, dt.date):
        return value.isoformat()
    return str(value)


def emit_report(rows, columns, base_path, meta) -> tuple[Path, Path]:
    """Write <base>.csv (floats at 4 decimals) and <base>.json (full precision).

    Output is deterministic: fixed column order, rows in the given order,
    sorted JSON keys. Both files embed the run metadata.
    """
    if not rows:
        raise ValueError("no result rows to report")
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = base.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(row.get(c)) for c in columns) + "\n")
    json_path = base.with_suffix(".json")
    payload = {"meta": meta, "columns": list(columns), "rows": rows}
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=str)
    return csv_path, json_path


def _meta(cfg: RunConfig) -> dict:
    return {"study": cfg.study, "seed": cfg.seed, "config_hash": cfg.config_hash()}


# ---------------------------------------------------------------------------
# classify study


CLASSIFY_COLUMNS = ("Ticker", "Model", "Arch.", "Layers", "Hyb.", "MQR",
                    "Accuracy", "AUC", "Precision", "Recall")


def _train_eval_fold(model, X, y, fold, train_cfg):
    """Train inside the fold's train range (last tenth as early-stop slice),
    return AUC on the fold's test range."""
    (tr0, tr1), (te0, te1) = fold
    scaler = minmax_fit(X[tr0:tr1])
    Xs = minmax_apply(scaler, X)
    es0 = tr1 - max(1, (tr1 - tr0) // 10)
    neural.train(model, Xs, y, np.arange(tr0, es0), np.arange(es0, tr1), train_cfg)
    auc = auc_score(model.predict_proba(Xs[te0:te1]), y[te0:te1])
    return 0.5 if auc is None else auc, scaler


def _train_config(cfg: RunConfig, seed: int) -> neural.TrainConfig:
    return neural.TrainConfig(
        learning_rate=cfg.get_float("train.learning_rate", 0.5),
        max_epochs=cfg.get_int("train.max_epochs", 200),
        patience=cfg.get_int("train.patience", 30),
        momentum=cfg.get_float("train.momentum", 0.0),
        seed=seed,
    )


def _ann_candidates(cfg: RunConfig, d: int):
    specs = []
    for cand in (cfg.get("classify.ann_hidden", "11") or "11").split(";"):
        widths = tuple(int(w) for w in cand.split(",") if w.strip())
        specs.append(neural.AnnSpec((d, *widths, 1)))
    return specs


def _qnn_candidates(cfg: RunConfig, d: int):
    encoding = cfg.get("classify.qnn_encoding", "angle")
    depths = cfg.get_int_list("classify.qnn_depths", (1, 2, 3, 4, 5, 6))
    archs = cfg.get_list("classify.qnn_archs", neural.QNN_ARCHS)
    if encoding == "angle":
        return neural.qnn_grid("angle", depths=depths, archs=archs, n_qubits=d)
    qubits = cfg.get_int_list("classify.qnn_qubits", (2, 3, 4, 5, 6))
    return neural.qnn_grid("amplitude", depths=depths, archs=archs, qubit_choices=qubits)


def _classify_ticker(args):
    cfg, target, prices = args
    regime = cfg.get("features.regime", "low3")
    ds = build_feature_set(
        regime,
        prices,
        target,
        price_field=cfg.get("data.price_field", "adj_close"),
        same_day_tickers=cfg.get_list("features.same_day_tickers", ("N225", "HSI", "AORD", "GDAXI", "FTSE")),
        lagged_tickers=cfg.get_list("features.lagged_tickers", ("DJI", "NYA")),
        cross_tickers=cfg.get_list("features.cross_tickers") or None,
    )
    audit_lookahead(ds)
    X, y = ds.features.X, ds.y
    d = X.shape[1]
    plan = make_walkforward_splits(len(ds), cfg.get_int("classify.n_folds", 5))
    rows = []
    for family in ("ann", "qnn"):
        candidates = _ann_candidates(cfg, d) if family == "ann" else _qnn_candidates(cfg, d)

        def build(spec, fold_tag):
            seed = _derive_seed(cfg.seed, target, family, str(spec), fold_tag)
            if family == "ann":
                return neural.AnnClassifier(spec, seed=seed)
            return neural.QnnClassifier(spec, d, seed=seed)

        def evaluate(spec):
            aucs = []
            for k, fold in enumerate(plan.folds):
                model = build(spec, k)
                train_cfg = _train_config(cfg, _derive_seed(cfg.seed, target, family, k))
                auc, _ = _train_eval_fold(model, X, y, fold, train_cfg)
                aucs.append(auc)
            return float(np.mean(aucs))

        def n_params_of(spec):
            return spec.n_params if family == "ann" else spec.n_params(d)

        best, _ = neural.architecture_search(candidates, evaluate, n_params_of)
        final_fold = plan.folds[-1]
        model = build(best, "final")
        train_cfg = _train_config(cfg, _derive_seed(cfg.seed, target, family, "final"))
        _, scaler = _train_eval_fold(model, X, y, final_fold, train_cfg)
        (te0, te1) = final_fold[1]
        Xs = minmax_apply(scaler, X)
        report = classification_metrics(model.predict_proba(Xs[te0:te1]), y[te0:te1])
        if family == "ann":
            rows.append({
                "Ticker": target, "Model": "ANN", "Arch.": None, "Layers": None,
                "Hyb.": None, "MQR": None, "Accuracy": report.accuracy,
                "AUC": report.auc, "Precision": report.precision, "Recall": report.recall,
            })
        else:
            rows.append({
                "Ticker": target, "Model": "QNN", "Arch.": best.arch, "Layers": best.depth,
                "Hyb.": best.hybrid, "MQR": best.mqr, "Accuracy": report.accuracy,
                "AUC": report.auc, "Precision": report.precision, "Recall": report.recall,
            })
    return rows


def run_classify(cfg: RunConfig):
    regime = cfg.get("features.regime", "low3")
    targets = cfg.get_list("data.tickers")
    if not targets:
        raise ConfigError("data.tickers is empty")
    needed = set(targets)
    if regime == "mid7":
        needed |= set(cfg.get_list("features.same_day_tickers", ("N225", "HSI", "AORD", "GDAXI", "FTSE")))
        needed |= set(cfg.get_list("features.lagged_tickers", ("DJI", "NYA")))
    if regime == "high64":
        needed |= set(cfg.get_list("features.cross_tickers"))
    prices = load_universe(cfg, sorted(needed))
    tasks = [(cfg, t, prices) for t in targets]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            per_ticker = list(pool.map(_classify_ticker, tasks))
    else:
        per_ticker = [_classify_ticker(t) for t in tasks]
    rows = [row for chunk in per_ticker for row in chunk]
    return rows, CLASSIFY_COLUMNS


# ---------------------------------------------------------------------------
# trade study


TRADE_COLUMNS = ("Fold", "Model", "hidden_dim", "depth", "params",
                 "Test AUC", "ARC", "ASD", "Sharpe", "Sortino", "MaxDD")


def _parse_regimes(cfg: RunConfig, label_dates):
    spec = cfg.get("trade.regimes")
    if spec:
        out = []
        for part in spec.split(";"):
            try:
                name, start, end = part.strip().split(":")
                out.append((name, dt.date.fromisoformat(start), dt.date.fromisoformat(end)))
            except ValueError as exc:
                raise ConfigError(f"bad regime spec {part!r} (want name:start:end)") from exc
        return out
    n_regimes = cfg.get_int("trade.n_regimes", 1)
    chunk = len(label_dates) // n_regimes
    if chunk < 10:
        raise ConfigError("too few samples for the requested regime count")
    out = []
    for k in range(n_regimes):
        lo = k * chunk
        hi = len(label_dates) if k == n_regimes - 1 else (k + 1) * chunk
        out.append((f"F{k + 1}", label_dates[lo], label_dates[hi - 1]))
    return out


def run_trade(cfg: RunConfig):
    targets = cfg.get_list("data.tickers")
    if not targets:
        raise ConfigError("data.tickers is empty")
    target = cfg.get("trade.target", targets[0])
    prices = load_universe(cfg, [target])
    wt = build_feature_set("trading10x4", prices, target,
                           price_field=cfg.get("data.price_field", "adj_close"))
    audit_lookahead(wt)
    simple = compute_returns(prices[target], "simple", cfg.get("data.price_field", "adj_close"))
    ret_of = dict(zip(simple.dates, simple.values))
    label_returns = np.array([ret_of[d] for d in wt.label_dates])
    fee = cfg.get_float("trade.fee_rate", backtest.DEFAULT_FEE_RATE)
    hidden_dims = cfg.get_int_list("trade.hidden_dims", (4,))
    depths = cfg.get_int_list("trade.depths", (2,))
    families = cfg.get_list("trade.families", ("lstm", "qlstm"))

    rows, curves = [], {}
    for name, start, end in _parse_regimes(cfg, wt.label_dates):
        idx = [i for i, d in enumerate(wt.label_dates) if start <= d <= end]
        if len(idx) < 10:
            raise DataError(f"regime {name} has too few samples")
        samples = wt.samples[idx]
        labels = wt.labels[idx]
        rets = label_returns[idx]
        phase = make_regime_phase_splits(len(idx))
        f = wt.n_features
        scaler = minmax_fit(samples[phase.train[0]: phase.train[1]].reshape(-1, f))
        scaled = minmax_apply(scaler, samples.reshape(-1, f)).reshape(samples.shape)
        tr = np.arange(*phase.train)
        es = np.arange(*phase.early_stop)
        ms = np.arange(*phase.model_select)
        cal = np.arange(*phase.calibration)
        for family in families:
            grid = [(h, L) for h in hidden_dims for L in depths]
            best = None
            for h, L in grid:
                seed = _derive_seed(cfg.seed, name, family, h, L)
                if family == "lstm":
                    model = neural.LstmClassifier(neural.LstmSpec(h, L, f), seed=seed)
                elif family == "qlstm":
                    model = neural.QlstmClassifier(neural.QlstmSpec(h, L, f), seed=seed)
                else:
                    raise ConfigError(f"unknown trade family {family!r}")
                neural.train(model, scaled, labels, tr, es, _train_config(cfg, seed))
                auc = auc_score(model.predict_proba(scaled[ms]), labels[ms])
                auc = 0.5 if auc is None else auc
                key = (-auc, model.n_params, f"{h}:{L}")
                if best is None or key < best[0]:
                    best = (key, model, h, L)
            _, model, h, L = best
            cal_probs = model.predict_proba(scaled[cal])
            result = backtest.calibrate_thresholds(cal_probs, rets[cal], fee_rate=fee)
            signals = backtest.threshold_signals(cal_probs, result.thresholds)
            curve = backtest.simulate(signals, rets[cal], fee_rate=fee,
                                      dates=[wt.label_dates[idx[i]] for i in cal])
            tm = trading_metrics(curve.equity)
            test_auc = auc_score(cal_probs, labels[cal])
            rows.append({
                "Fold": name, "Model": family.upper(), "hidden_dim": h, "depth": L,
                "params": model.n_params, "Test AUC": test_auc, "ARC": tm.arc,
                "ASD": tm.asd, "Sharpe": tm.sharpe, "Sortino": tm.sortino,
                "MaxDD": tm.max_drawdown,
            })
            curves[f"{name}_{family}"] = curve
        bh = backtest.buy_and_hold(rets[cal], fee_rate=fee,
                                   dates=[wt.label_dates[idx[i]] for i in cal])
        tm = trading_metrics(bh.equity)
        rows.append({
            "Fold": name, "Model": "BUYHOLD", "hidden_dim": None, "depth": None,
            "params": None, "Test AUC": None, "ARC": tm.arc, "ASD": tm.asd,
            "Sharpe": tm.sharpe, "Sortino": tm.sortino, "MaxDD": tm.max_drawdown,
        })
        curves[f"{name}_buyhold"] = bh
    return rows, TRADE_COLUMNS, curves


def write_equity_csv(curve: backtest.EquityCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("date,position,equity,cost\n")
        dates = curve.dates if curve.dates else range(len(curve.positions))
        for k, d in enumerate(dates):
            fh.write(
                f"{d},{curve.positions[k]:.0f},{float(curve.equity[k + 1])!r},{float(curve.costs[k])!r}\n"
            )


# ---------------------------------------------------------------------------
# volatility study


VOL_COLUMNS = ("Ticker", "Model", "QLIKE", "MSE", "MAE", "R2", "DirAcc", "DM_stat", "DM_p")


def _volatility_ticker(args):
    cfg, target, prices = args
    families = cfg.get_list(
        "volatility.families",
        ("svr_lin", "svr_poly", "svr_rbf", "garch", "qsvr_angle", "persistence"),
    )
    qubit_choices = cfg.get_int_list("volatility.qsvr_qubits", (6, 8, 10, 12))
    amp_dim = cfg.get_int("volatility.amp_dim", 32) if "qsvr_amplitude" in families else None
    data = volstudy.build_vol_data(
        prices,
        target,
        qubit_choices=qubit_choices,
        classical_dim=cfg.get_int("volatility.classical_dim", 10),
        amp_dim=amp_dim,
        price_field=cfg.get("data.price_field", "adj_close"),
    )
    for ds in data.datasets.values():
        audit_lookahead(ds)
    max_window = cfg.get("volatility.max_window")
    plan = volstudy.ExpandingPlan(
        initial_train=cfg.get_int("volatility.initial_train", 720),
        retrain_every=cfg.get_int("volatility.retrain_every", 120),
        max_window=int(max_window) if max_window else None,
    )
    results = {}
    for family in families:
        results[family] = volstudy.run_expanding_forecast(
            data,
            plan,
            family,
            search_budget=cfg.get_int("volatility.search_budget", 50),
            seed=_derive_seed(cfg.seed, target, family),
            qubit_choices=qubit_choices,
            amp_dim=amp_dim,
        )
    reference = "qsvr_angle" if "qsvr_angle" in families else families[0]
    rows = []
    for row in volstudy.summarize_forecasts(results, reference=reference):
        rows.append({
            "Ticker": target, "Model": row["model"], "QLIKE": row["qlike"],
            "MSE": row["mse"], "MAE": row["mae"], "R2": row["r2"],
            "DirAcc": row["dir_acc"], "DM_stat": row["dm_stat"], "DM_p": row["dm_p"],
        })
    return rows, results


def run_volatility(cfg: RunConfig):
    targets = cfg.get_list("data.tickers")
    if not targets:
        raise ConfigError("data.tickers is empty")
    prices = load_universe(cfg, targets)
    tasks = [(cfg, t, {t: prices[t]}) for t in targets]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(_volatility_ticker, tasks))
    else:
        outcomes = [_volatility_ticker(t) for t in tasks]
    rows = [row for chunk, _ in outcomes for row in chunk]
    forecasts = {t: res for t, (_, res) in zip(targets, outcomes)}
    return rows, VOL_COLUMNS, forecasts


# ---------------------------------------------------------------------------
# selftest


def run_selftest(seed: int = 0) -> list[tuple[str, bool]]:
    """Fast property checks mirroring the heavier pytest suites."""
    checks = []
    rng = np.random.default_rng(seed)
    ok = True
    for k in range(10):
        spec = qsim.random_circuit(int(rng.integers(2, 7)), 6, seed=seed + k)
        state = qsim.run_circuit(spec)
        ok &= abs(np.linalg.norm(state) - 1.0) < 1e-9
        back = qsim.run_circuit_inverse(spec, state)
        ok &= np.abs(back - qsim.zero_state(spec.n)).max() < 1e-9
    checks.append(("statevector norm + inverse identity", bool(ok)))

    ok = True
    for k in range(20):
        spec = qsim.random_circuit(3, 5, seed=100 + k)
        if spec.n_params == 0:
            continue
        m = int(rng.integers(spec.n_params))
        g = qsim.parameter_shift_grad(spec, None, (0,), m)
        h = 1e-5
        up, dn = spec.params.copy(), spec.params.copy()
        up[m] += h
        dn[m] -= h
        fd = (
            qsim.expectation_z_product(qsim.run_circuit(spec, None, up), (0,))
            - qsim.expectation_z_product(qsim.run_circuit(spec, None, dn), (0,))
        ) / (2 * h)
        ok &= abs(g - fd) < 1e-6
    checks.append(("parameter-shift vs finite difference", bool(ok)))

    X = rng.uniform(0, 1, (20, 3))
    K = kernel_matrix(FeatureMapSpec("angle", 3, 2, seed=seed), X)
    checks.append(
        ("kernel diagonal/symmetry/PSD",
         bool(np.allclose(np.diag(K.entries), 1.0, atol=1e-9)
              and np.array_equal(K.entries, K.entries.T)
              and K.min_eigenvalue() >= -1e-8))
    )

    r = rng.normal(0, 0.01, 200)
    all_long = backtest.simulate(np.ones(200), r, fee_rate=0.0)
    bh = backtest.buy_and_hold(r, fee_rate=0.0)
    checks.append(("zero-fee all-long equals buy-and-hold",
                   bool(np.array_equal(all_long.equity, bh.equity))))
    checks.append(("qlike anchor", qlike([1.0], [1.0]) == 1.0))
    return checks


# ---------------------------------------------------------------------------
# CLI


def _print_plan(cfg: RunConfig) -> None:
    print(f"study: {cfg.study}")
    print(f"seed: {cfg.seed}  jobs: {cfg.jobs}  out_dir: {cfg.out_dir}")
    print(f"config_hash: {cfg.config_hash()}")
    print(f"tickers: {', '.join(cfg.get_list('data.tickers'))}")
    if cfg.study == "classify":
        print(f"regime: {cfg.get('features.regime', 'low3')}  folds: {cfg.get_int('classify.n_folds', 5)}")
    elif cfg.study == "trade":
        print(f"families: {', '.join(cfg.get_list('trade.families', ('lstm', 'qlstm')))}")
    elif cfg.study == "volatility":
        print(f"families: {', '.join(cfg.get_list('volatility.families', ()))}")
        print(f"plan: initial={cfg.get_int('volatility.initial_train', 720)} "
              f"retrain={cfg.get_int('volatility.retrain_every', 120)}")


def _run_study(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(cfg)
    if cfg.study == "classify":
        rows, columns = run_classify(cfg)
        paths = emit_report(rows, columns, out / "classify_report", meta)
    elif cfg.study == "trade":
        rows, columns, curves = run_trade(cfg)
        paths = emit_report(rows, columns, out / "trade_report", meta)
        for name, curve in curves.items():
            write_equity_csv(curve, out / f"equity_{name}.csv")
    else:
        rows, columns, forecasts = run_volatility(cfg)
        paths = emit_report(rows, columns, out / "volatility_report", meta)
        for ticker, results in forecasts.items():
            volstudy.write_forecast_csv(results, out / f"forecasts_{ticker}.csv")
    for p in paths:
        print(f"wrote {p}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qmlbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("classify", "trade", "volatility"):
        p = sub.add_parser(name, help=f"run the {name} study")
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--dry-run", action="store_true", help="validate config and print the plan")
    p = sub.add_parser("selftest", help="run the fast property suites")
    p.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if args.command == "selftest":
        checks = run_selftest(args.seed)
        failed = False
        for name, passed in checks:
            print(f"[{'PASS' if passed else 'FAIL'}] {name}")
            failed |= not passed
        return 1 if failed else 0

    try:
        cfg = parse_config(args.config, args.command, out_dir=args.out,
                           seed=args.seed, jobs=args.jobs)
        if args.dry_run:
            _print_plan(cfg)
            return 0
        return _run_study(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
