import json
from pathlib import Path

import numpy as np
import pytest

from qmlbench import bench
from qmlbench.bench import ConfigError, RunConfig, emit_report, main, parse_config, run_selftest
from qmlbench.synthetic import make_synthetic_prices, write_price_csv


def _write_config(tmp_path, body, name="run.ini"):
    path = tmp_path / name
    path.write_text(body)
    return path


BASE = """
[run]
study = classify
seed = 3
out_dir = {out}

[data]
synthetic = true
synthetic_days = 400
tickers = SYNA

[train]
max_epochs = 15
patience = 10

[classify]
n_folds = 2
ann_hidden = 5
qnn_depths = 1
qnn_archs = MQ
"""


def test_parse_config_and_hash(tmp_path):
    path = _write_config(tmp_path, BASE.format(out=tmp_path / "out"))
    cfg = parse_config(path, "classify")
    assert cfg.seed == 3
    assert cfg.get_int("classify.n_folds", 5) == 2
    assert cfg.get_bool("data.synthetic", False) is True
    assert cfg.get_list("data.tickers") == ("SYNA",)
    h1 = cfg.config_hash()
    assert h1 == parse_config(path, "classify").config_hash()
    other = parse_config(path, "classify", seed=99)
    assert other.config_hash() != h1


def test_parse_config_study_mismatch(tmp_path):
    path = _write_config(tmp_path, BASE.format(out=tmp_path))
    with pytest.raises(ConfigError):
        parse_config(path, "trade")


def test_parse_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "nope.ini", "classify")


def test_config_type_errors():
    cfg = RunConfig("classify", 0, "out", 1, raw={"a.b": "xyz"})
    with pytest.raises(ConfigError):
        cfg.get_int("a.b")
    with pytest.raises(ConfigError):
        cfg.get_bool("a.b", True)
    with pytest.raises(ConfigError):
        cfg.get_float("a.b", 1.0)


def test_emit_report_deterministic(tmp_path):
    rows = [{"A": 1.23456789, "B": None, "C": "x"}, {"A": 2.0, "B": True, "C": "y"}]
    meta = {"seed": 1, "config_hash": "abc"}
    p1 = emit_report(rows, ("A", "B", "C"), tmp_path / "r1", meta)
    p2 = emit_report(rows, ("A", "B", "C"), tmp_path / "r2", meta)
    assert p1[0].read_bytes() == p2[0].read_bytes()
    assert p1[1].read_bytes() == p2[1].read_bytes()
    csv_lines = p1[0].read_text().splitlines()
    assert csv_lines[0] == "A,B,C"
    assert csv_lines[1] == "1.2346,,x"  # four decimals, None blank
    payload = json.loads(p1[1].read_text())
    assert payload["rows"][0]["A"] == 1.23456789  # full precision in JSON
    assert payload["meta"]["config_hash"] == "abc"


def test_emit_report_empty_rows(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], ("A",), tmp_path / "r", {})


def test_dry_run_exit_zero(tmp_path, capsys):
    path = _write_config(tmp_path, BASE.format(out=tmp_path / "out"))
    code = main(["classify", "--config", str(path), "--dry-run"])
    assert code == 0
    out = capsys.readouterr().out
    assert "study: classify" in out and "config_hash" in out


def test_cli_config_error_exit_two(tmp_path):
    assert main(["classify", "--config", str(tmp_path / "missing.ini")]) == 2


def test_cli_data_error_exit_three(tmp_path):
    body = BASE.format(out=tmp_path / "out").replace(
        "synthetic = true", f"synthetic = false\nprices_dir = {tmp_path}/nodata"
    )
    path = _write_config(tmp_path, body)
    assert main(["classify", "--config", str(path)]) == 3


def test_selftest_all_pass():
    checks = run_selftest(seed=0)
    assert checks and all(ok for _, ok in checks)
    assert main(["selftest"]) == 0


def test_load_universe_from_csv(tmp_path):
    data_dir = tmp_path / "prices"
    data_dir.mkdir()
    for k, t in enumerate(("AAA", "BBB")):
        write_price_csv(make_synthetic_prices(t, n_days=60, seed=k), data_dir / f"{t}.csv")
    cfg = RunConfig("classify", 0, "out", 1, raw={
        "data.synthetic": "false",
        "data.prices_dir": str(data_dir),
    })
    uni = bench.load_universe(cfg, ("AAA", "BBB"))
    assert set(uni) == {"AAA", "BBB"}
    assert uni["AAA"].dates == uni["BBB"].dates  # aligned


def test_classify_study_runs_and_reports(tmp_path):
    path = _write_config(tmp_path, BASE.format(out=tmp_path / "out"))
    code = main(["classify", "--config", str(path)])
    assert code == 0
    report = Path(tmp_path / "out" / "classify_report.csv")
    lines = report.read_text().splitlines()
    assert lines[0] == "Ticker,Model,Arch.,Layers,Hyb.,MQR,Accuracy,AUC,Precision,Recall"
    assert len(lines) == 3  # ANN + QNN rows
    payload = json.loads((tmp_path / "out" / "classify_report.json").read_text())
    assert payload["meta"]["seed"] == 3


def test_report_regeneration_bit_identical(tmp_path):
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    path = _write_config(tmp_path, BASE.format(out=out1))
    assert main(["classify", "--config", str(path)]) == 0
    assert main(["classify", "--config", str(path), "--out", str(out2)]) == 0
    assert (out1 / "classify_report.csv").read_bytes() == (out2 / "classify_report.csv").read_bytes()


def test_trade_study_runs(tmp_path):
    body = """
[run]
study = trade
seed = 2
out_dir = {out}

[data]
synthetic = true
synthetic_days = 420
tickers = SYNA

[train]
max_epochs = 8
patience = 10

[trade]
families = lstm
hidden_dims = 3
depths = 2
n_regimes = 1
"""
    path = _write_config(tmp_path, body.format(out=tmp_path / "out"))
    assert main(["trade", "--config", str(path)]) == 0
    report = (tmp_path / "out" / "trade_report.csv").read_text().splitlines()
    assert report[0].startswith("Fold,Model,hidden_dim,depth,params,Test AUC,ARC,ASD,Sharpe,Sortino")
    assert any("BUYHOLD" in line for line in report)
    equity_files = list((tmp_path / "out").glob("equity_*.csv"))
    assert equity_files
    first = equity_files[0].read_text().splitlines()
    assert first[0] == "date,position,equity,cost"


def test_volatility_study_runs(tmp_path):
    body = """
[run]
study = volatility
seed = 2
out_dir = {out}

[data]
synthetic = true
synthetic_days = 560
tickers = SYNA

[volatility]
families = persistence,garch
initial_train = 400
retrain_every = 80
"""
    path = _write_config(tmp_path, body.format(out=tmp_path / "out"))
    assert main(["volatility", "--config", str(path)]) == 0
    report = (tmp_path / "out" / "volatility_report.csv").read_text().splitlines()
    assert report[0] == "Ticker,Model,QLIKE,MSE,MAE,R2,DirAcc,DM_stat,DM_p"
    assert (tmp_path / "out" / "forecasts_SYNA.csv").exists()
