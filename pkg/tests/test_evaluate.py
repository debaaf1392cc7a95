import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wavecast.dataset import PriceTable, align_tables, load_price_csv
from wavecast.denoise import denoise_extended
from wavecast.evaluate import (
    ComparisonConfig,
    EvalReport,
    cell_seed,
    mae,
    r_squared,
    recursive_forecast,
    rmse,
    run_comparison,
    training_table,
)
from wavecast.exceptions import DataError, ShapeError, UndefinedMetricError
from wavecast.synthetic import business_days
from wavecast.wavelet import default_filter_bank

FIXTURES = Path(__file__).parent / "fixtures"

finite = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.fixture(scope="module")
def syn_table():
    return align_tables([load_price_csv(FIXTURES / "SYN.csv")])


def test_metric_hand_values():
    pred, actual = [1.0, 2.0, 4.0], [1.0, 3.0, 2.0]
    assert rmse(pred, actual) == pytest.approx(np.sqrt(5 / 3))
    assert mae(pred, actual) == pytest.approx(1.0)
    # ss_res = 5, ss_tot = 2
    assert r_squared(pred, actual) == pytest.approx(1 - 5 / 2)


def test_metric_errors():
    with pytest.raises(ShapeError):
        rmse([1.0], [1.0, 2.0])
    with pytest.raises(UndefinedMetricError):
        r_squared([1.0, 2.0], [3.0, 3.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 30).flatmap(lambda n: st.tuples(arrays(np.float64, n, elements=finite),
                                                      arrays(np.float64, n, elements=finite))))
def test_metric_properties(pair):
    pred, actual = pair
    assert 0 <= mae(pred, actual) <= rmse(pred, actual) + 1e-9
    assert rmse(actual, actual) == 0
    if np.ptp(actual) > 1e-3:
        assert r_squared(actual, actual) == 1.0
        assert r_squared(pred, actual) <= 1.0


def test_recursive_forecast_feeds_back():
    # next value = mean of the window
    out, window = recursive_forecast(lambda w: w.mean(), [1.0, 2.0, 3.0], 3, return_window=True)
    np.testing.assert_allclose(out, [2.0, 7 / 3, 22 / 9])
    np.testing.assert_allclose(window[:, 0], [2.0, 7 / 3, 22 / 9])


def test_recursive_forecast_freezes_other_columns():
    seed = np.array([[1.0, 10.0], [2.0, 20.0]])
    seen = []

    def predictor(w):
        seen.append(w.copy())
        return w[-2] + 1  # last target value plus one

    out = recursive_forecast(predictor, seed, 3, target_index=0)
    np.testing.assert_allclose(out, [3.0, 4.0, 5.0])
    # the exogenous column stays at its last observed value, 20
    np.testing.assert_allclose(seen[-1], [3.0, 20.0, 4.0, 20.0])


def test_recursive_forecast_checks_shapes():
    class Model:
        n_features_in_ = 4

        def predict(self, X):
            return X.sum(axis=1)

    with pytest.raises(ShapeError):
        recursive_forecast(Model(), np.ones(3), 2)
    with pytest.raises(ShapeError):
        recursive_forecast(lambda w: 0.0, np.ones((3, 2)), 1, target_index=2)
    with pytest.raises(ValueError):
        recursive_forecast(lambda w: 0.0, np.ones(3), -1)
    assert recursive_forecast(lambda w: 0.0, np.ones(3), 0).size == 0


def test_recursive_forecast_rejects_blowup():
    with pytest.raises(DataError, match="non-finite"):
        recursive_forecast(lambda w: w[-1] ** 8, [10.0, 1e100], 3)


def test_cell_seed_depends_on_key_only():
    assert cell_seed(42, "svr/linear/original") == cell_seed(42, "svr/linear/original")
    assert cell_seed(42, "svr/linear/original") != cell_seed(42, "svr/linear/wavelet")
    assert cell_seed(42, "a") != cell_seed(43, "a")


def test_training_table_uses_training_rows_only(syn_table):
    raw = training_table(syn_table, 200, "original")
    np.testing.assert_array_equal(raw.closes, syn_table.closes[:200])
    den = training_table(syn_table, 200, "wavelet")
    expected = denoise_extended(default_filter_bank(), syn_table.closes[:200, 0])
    np.testing.assert_array_equal(den.closes[:, 0], expected)
    # perturbing the held-out rows cannot reach the denoised training prices
    altered = syn_table.closes.copy()
    altered[200:] += 50
    again = training_table(syn_table.with_closes(altered), 200, "wavelet")
    np.testing.assert_array_equal(again.closes, den.closes)


def test_config_parsing(tmp_path):
    cfg = ComparisonConfig.from_json(FIXTURES / "compare.json")
    assert cfg.modes == ("original", "wavelet")
    assert cfg.kernels == ("linear", "quadratic", "medium_gaussian")
    assert Path(cfg.tickers[0]).resolve() == (FIXTURES / "SYN.csv").resolve()
    assert ComparisonConfig(modes="raw").modes == ("original",)
    assert ComparisonConfig(kernels="all").kernels[-1] == "coarse_gaussian"
    for bad in ({"lag": 0}, {"levels": 0}, {"horizons": []}, {"models": "gru"}, {"kernels": "rbf"}):
        with pytest.raises(ValueError):
            ComparisonConfig(**bad)
    with pytest.raises(ValueError, match="unknown config keys"):
        ComparisonConfig.from_dict({"lagg": 3})
    # to_dict is JSON-serialisable and reloads to the same config
    d = json.loads(json.dumps(cfg.to_dict()))
    d["tickers"] = cfg.tickers
    assert ComparisonConfig.from_dict(d) == cfg


def test_small_grid(syn_table):
    cfg = ComparisonConfig(kernels=("linear",), models=("svr", "lstm"), horizons=(1, 5),
                           epochs=3, hidden_size=2)
    report = run_comparison(cfg, syn_table)
    assert len(report.cells) == 2 * 2 * 2
    lin = report.cell("svr", "linear", 1, "original")
    assert lin["n"] == 51 and lin["converged"]
    assert report.cell("svr", "linear", 5, "wavelet")["n"] == 47
    assert report.cell("lstm", "h2", 1, "wavelet")["rmse"] > 0
    assert report.metadata["split"] == {"train_samples": 200, "test_samples": 51, "train_fraction": 0.8}
    assert report.metadata["rows"] == 256
    csv_text = report.to_csv()
    assert csv_text.splitlines()[0] == ",".join(EvalReport.CSV_FIELDS)
    assert len(csv_text.splitlines()) == 9
    plots = report.plot_data()
    assert "svr_linear_original_h1" in plots
    assert plots["svr_linear_original_h1"].splitlines()[0] == "date,actual,predicted"
    again = run_comparison(cfg, syn_table)
    assert again.to_json() == report.to_json()


def test_horizon_one_is_one_step_prediction(syn_table):
    from wavecast.svr import EpsilonSVR
    from wavecast.dataset import chrono_split, make_supervised

    report = run_comparison(ComparisonConfig(kernels=("linear",), modes="raw", horizons=(1,)), syn_table)
    data = make_supervised(syn_table, 5, 1, "SYN")
    train, test = chrono_split(data, 0.8)
    est = EpsilonSVR().fit(train.X, train.y)
    assert report.cell("svr", "linear", 1, "original")["rmse"] == pytest.approx(rmse(est.predict(test.X), test.y))


def test_failed_cells_are_recorded():
    rows = 64
    t = PriceTable(business_days(rows), ("A",), np.linspace(1, 2, rows))
    report = run_comparison(ComparisonConfig(kernels=("linear",), modes="raw", horizons=(1, 40)), t)
    assert "rmse" in report.cell("svr", "linear", 1, "original")
    assert "no test origin" in report.cell("svr", "linear", 40, "original")["error"]
