import numpy as np
import pytest

from qmlbench.features import subset_dataset
from qmlbench.marketdata import PriceSeries
from qmlbench.synthetic import make_synthetic_prices
from qmlbench.volstudy import (
    ExpandingPlan,
    VolData,
    build_vol_data,
    qubit_feature_split,
    run_expanding_forecast,
    summarize_forecasts,
    write_forecast_csv,
)


def test_plan_boundaries_arithmetic():
    plan = ExpandingPlan(initial_train=720, retrain_every=120)
    assert plan.boundaries(960) == [720, 840]  # 240 forecast rows
    assert plan.boundaries(961) == [720, 840, 960]
    with pytest.raises(ValueError):
        plan.boundaries(721)


def test_plan_window_slides_at_cap():
    plan = ExpandingPlan(initial_train=200, retrain_every=50, max_window=300)
    assert plan.window_start(200) == 0
    assert plan.window_start(400) == 100
    with pytest.raises(ValueError):
        ExpandingPlan(initial_train=500, retrain_every=50, max_window=300)


def test_qubit_feature_split():
    assert qubit_feature_split(10) == (5, 5)
    assert qubit_feature_split(12) == (6, 6)
    assert qubit_feature_split(7) == (4, 3)  # rounded toward return lags


@pytest.fixture(scope="module")
def vol_data():
    prices = {"SYN": make_synthetic_prices("SYN", n_days=520, seed=7)}
    return build_vol_data(prices, "SYN", qubit_choices=(6, 8), classical_dim=10)


def test_vol_data_alignment(vol_data):
    dims = sorted(vol_data.datasets)
    assert dims == [6, 8, 10]
    dates = {dim: vol_data.datasets[dim].label_dates for dim in dims}
    assert dates[6] == dates[8] == dates[10]
    for dim in dims:
        assert len(vol_data.datasets[dim].features.names) == dim


PLAN = ExpandingPlan(initial_train=360, retrain_every=60)


def test_persistence_is_trivial_forecaster(vol_data):
    fs = run_expanding_forecast(vol_data, PLAN, "persistence")
    # the persistence forecast for t+1 is the realized variance at t,
    # which equals the previous row's target on a contiguous axis
    y = vol_data.datasets[10].y
    lo = PLAN.boundaries(vol_data.n_rows)[0]
    assert np.allclose(fs.rv_pred[1:], fs.rv_true[:-1])
    assert np.allclose(fs.rv_pred, y[lo - 1: -1])


def test_garch_forecasts_frozen_between_retrains(vol_data):
    fs = run_expanding_forecast(vol_data, PLAN, "garch")
    assert np.all(fs.rv_pred > 0)
    assert fs.retrain_rows == tuple(PLAN.boundaries(vol_data.n_rows))
    assert len(fs.rv_pred) == vol_data.n_rows - PLAN.boundaries(vol_data.n_rows)[0]


def test_svr_family_runs_and_is_deterministic(vol_data):
    a = run_expanding_forecast(vol_data, PLAN, "svr_rbf", search_budget=2, seed=3)
    b = run_expanding_forecast(vol_data, PLAN, "svr_rbf", search_budget=2, seed=3)
    assert np.array_equal(a.rv_pred, b.rv_pred)  # bitwise reproducibility
    c = run_expanding_forecast(vol_data, PLAN, "svr_rbf", search_budget=2, seed=4)
    assert not np.array_equal(a.rv_pred, c.rv_pred)


def test_qsvr_angle_runs(vol_data):
    fs = run_expanding_forecast(vol_data, PLAN, "qsvr_angle", search_budget=2, seed=1,
                                qubit_choices=(6, 8))
    assert np.all(fs.rv_pred > 0)
    assert len(fs.dates) == len(fs.rv_pred)


def test_forecasts_do_not_use_future_data(vol_data):
    """Slicing audit: truncating the data after the first retrain segment
    must leave that segment's forecasts bit-identical."""
    plan = PLAN
    full = run_expanding_forecast(vol_data, plan, "garch")
    cut = plan.boundaries(vol_data.n_rows)[1]  # keep rows < second boundary
    truncated = VolData(
        datasets={d: subset_dataset(ds, range(cut)) for d, ds in vol_data.datasets.items()},
        returns=vol_data.returns,  # superset is fine; fits index by feature date
        classical_dim=vol_data.classical_dim,
    )
    # trim the return series to exactly the truncated feature horizon
    last_feat = truncated.feature_dates[-1]
    keep = [i for i, d in enumerate(vol_data.returns.dates) if d <= last_feat]
    from qmlbench.marketdata import ReturnSeries

    truncated.returns = ReturnSeries(
        dates=tuple(vol_data.returns.dates[i] for i in keep),
        values=vol_data.returns.values[keep],
        kind=vol_data.returns.kind,
    )
    part = run_expanding_forecast(truncated, plan, "garch")
    n = len(part.rv_pred)
    assert np.array_equal(part.rv_pred, full.rv_pred[:n])

    full_svr = run_expanding_forecast(vol_data, plan, "svr_lin", search_budget=2, seed=5)
    part_svr = run_expanding_forecast(truncated, plan, "svr_lin", search_budget=2, seed=5)
    assert np.array_equal(part_svr.rv_pred, full_svr.rv_pred[: len(part_svr.rv_pred)])


def test_summary_rows_and_dm_reference(vol_data):
    results = {
        "persistence": run_expanding_forecast(vol_data, PLAN, "persistence"),
        "garch": run_expanding_forecast(vol_data, PLAN, "garch"),
    }
    rows = summarize_forecasts(results, reference="garch")
    by_model = {r["model"]: r for r in rows}
    assert by_model["garch"]["dm_p"] is None
    assert by_model["persistence"]["dm_p"] is not None
    assert np.isfinite(by_model["persistence"]["qlike"])


def test_forecast_csv(tmp_path, vol_data):
    results = {"persistence": run_expanding_forecast(vol_data, PLAN, "persistence")}
    path = tmp_path / "fc.csv"
    write_forecast_csv(results, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "date,rv_true,rv_pred_persistence"
    assert len(lines) == len(results["persistence"].dates) + 1


def test_unknown_family(vol_data):
    with pytest.raises(ValueError):
        run_expanding_forecast(vol_data, PLAN, "magic")
