"""Forecast metrics, recursive multi-step forecasting and the raw-vs-denoised
comparison grid."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import warnings
import zlib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import (
    PriceTable,
    align_tables,
    chrono_split,
    load_price_csv,
    make_supervised,
    select_pow4_window,
)
from .denoise import denoise_extended
from .exceptions import ConvergenceWarning, DataError, ShapeError, UndefinedMetricError, WavecastError
from .lstm import LSTMRegressor
from .svr import KERNEL_PRESETS, EpsilonSVR
from .wavelet import get_filter_bank

__all__ = [
    "DEFAULT_HORIZONS",
    "MODES",
    "rmse",
    "mae",
    "r_squared",
    "recursive_forecast",
    "ComparisonConfig",
    "EvalReport",
    "run_comparison",
]

DEFAULT_HORIZONS = (1, 5, 13, 21)
MODES = ("original", "wavelet")


def _paired(pred, actual):
    pred = np.asarray(pred, dtype=float).ravel()
    actual = np.asarray(actual, dtype=float).ravel()
    if pred.shape != actual.shape:
        raise ShapeError(f"prediction length {pred.size} != actual length {actual.size}")
    if pred.size == 0:
        raise ShapeError("metrics need at least one value")
    return pred, actual


def rmse(pred, actual) -> float:
    pred, actual = _paired(pred, actual)
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


def mae(pred, actual) -> float:
    pred, actual = _paired(pred, actual)
    return float(np.mean(np.abs(pred - actual)))


def r_squared(pred, actual) -> float:
    """``1 - SS_res / SS_tot``; negative for fits worse than the mean."""
    pred, actual = _paired(pred, actual)
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0:
        raise UndefinedMetricError("R-squared is undefined for constant actual values")
    return 1.0 - float(np.sum((pred - actual) ** 2)) / ss_tot


def _as_batch_predictor(predictor) -> Callable[[np.ndarray], np.ndarray]:
    if hasattr(predictor, "predict"):
        return lambda X: np.asarray(predictor.predict(X), dtype=float).ravel()
    return lambda X: np.array([float(predictor(row)) for row in X])


def _recursive_batch(predict, windows, horizon, target_index):
    """Recursively forecast from every window in ``windows`` (N, lag, k) at once."""
    windows = windows.copy()
    preds = np.empty((windows.shape[0], horizon))
    for step in range(horizon):
        with np.errstate(over="ignore", invalid="ignore"):
            yhat = predict(windows.reshape(windows.shape[0], -1))
        if not np.all(np.isfinite(yhat)):
            raise DataError(f"recursive forecast produced a non-finite value at step {step + 1}")
        preds[:, step] = yhat
        new_row = windows[:, -1, :].copy()
        new_row[:, target_index] = yhat
        windows = np.concatenate([windows[:, 1:, :], new_row[:, None, :]], axis=1)
    return preds, windows


def recursive_forecast(predictor, seed_window, horizon: int, target_index: int = 0,
                       return_window: bool = False):
    """Forecast ``horizon`` steps by feeding each prediction back into the window.

    Parameters
    ----------
    predictor : callable or estimator
        Either a function of one flattened window (day-major) returning the
        next target value, or an object with ``predict(X)``.
    seed_window : array_like of shape (lag, n_tickers) or (lag,)
        The most recent observed rows. Non-target columns stay at their last
        observed value throughout the recursion.
    horizon : int
    target_index : int, default=0
        Column of the target ticker.
    return_window : bool, default=False
        Also return the rolled window after the last step.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    window = np.asarray(seed_window, dtype=float)
    if window.ndim == 1:
        window = window[:, None]
    if window.ndim != 2:
        raise ShapeError(f"seed window must be (lag, n_tickers), got shape {window.shape}")
    expected = getattr(predictor, "n_features_in_", None)
    if expected is not None and expected != window.size:
        raise ShapeError(f"predictor expects {expected} features but the window has {window.size}")
    if not 0 <= target_index < window.shape[1]:
        raise ShapeError(f"target_index {target_index} outside {window.shape[1]} columns")
    preds, rolled = _recursive_batch(_as_batch_predictor(predictor), window[None], horizon, target_index)
    if return_window:
        return preds[0], rolled[0]
    return preds[0]


def _parse_modes(value):
    if value is None:
        return MODES
    if isinstance(value, str):
        value = {"both": MODES, "raw": ("original",)}.get(value, (value,))
    modes = tuple("original" if m == "raw" else m for m in value)
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r}; expected raw, original, wavelet or both")
    return modes


@dataclass
class ComparisonConfig:
    """Everything that determines a comparison run.

    ``tickers`` are price CSV paths; the file stem is the ticker symbol.
    """

    tickers: List[str] = field(default_factory=list)
    target: Optional[str] = None
    lag: int = 5
    horizons: Tuple[int, ...] = DEFAULT_HORIZONS
    modes: Tuple[str, ...] = MODES
    models: Tuple[str, ...] = ("svr",)
    kernels: Tuple[str, ...] = KERNEL_PRESETS
    seed: int = 42
    train_fraction: float = 0.8
    levels: int = 1
    bank: str = "default"
    C: float = 1.0
    epsilon: Optional[float] = None
    tol: float = 1e-3
    max_iter: int = 100_000
    hidden_size: int = 8
    epochs: int = 100
    learning_rate: float = 0.01
    batch_size: int = 32

    def __post_init__(self):
        self.horizons = tuple(int(h) for h in self.horizons)
        self.modes = _parse_modes(self.modes)
        self.models = (self.models,) if isinstance(self.models, str) else tuple(self.models)
        if isinstance(self.kernels, str):
            self.kernels = KERNEL_PRESETS if self.kernels == "all" else (self.kernels,)
        self.kernels = tuple(self.kernels)
        if self.lag < 1:
            raise ValueError(f"lag must be >= 1, got {self.lag}")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if not self.horizons or min(self.horizons) < 1:
            raise ValueError(f"horizons must be non-empty and positive, got {self.horizons}")
        for m in self.models:
            if m not in ("svr", "lstm"):
                raise ValueError(f"unknown model {m!r}; expected svr or lstm")
        for k in self.kernels:
            if k not in KERNEL_PRESETS:
                raise ValueError(f"unknown kernel preset {k!r}")

    @classmethod
    def from_dict(cls, d, base_dir=None) -> "ComparisonConfig":
        d = dict(d)
        if "mode" in d:
            d["modes"] = d.pop("mode")
        if "model" in d:
            d["models"] = d.pop("model")
        if "kernel" in d:
            d["kernels"] = d.pop("kernel")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if base_dir is not None:
            d["tickers"] = [str(Path(base_dir, t)) for t in d.get("tickers", [])]
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ComparisonConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), base_dir=Path(path).parent)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["tickers"] = [Path(t).name for t in self.tickers]
        for key in ("horizons", "modes", "models", "kernels"):
            d[key] = list(d[key])
        return d


@dataclass
class EvalReport:
    """Comparison grid plus run metadata.

    Each cell has ``model``, ``config``, ``horizon``, ``mode`` and either the
    three metrics with the point count ``n`` or an ``error`` message.
    """

    cells: List[dict]
    metadata: dict
    series: Dict[str, dict] = field(default_factory=dict, repr=False)

    CSV_FIELDS = ("model", "config", "horizon", "mode", "rmse", "mae", "r_squared", "n", "error")

    def cell(self, model, config, horizon, mode) -> dict:
        for c in self.cells:
            if (c["model"], c["config"], c["horizon"], c["mode"]) == (model, config, horizon, mode):
                return c
        raise KeyError((model, config, horizon, mode))

    def to_json(self) -> str:
        return json.dumps({"metadata": self.metadata, "cells": self.cells},
                          sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for c in self.cells:
            writer.writerow({k: ("" if c.get(k) is None else c.get(k)) for k in self.CSV_FIELDS})
        return buf.getvalue()

    def plot_data(self) -> Dict[str, str]:
        """Per-cell ``date,actual,predicted`` CSV text keyed by a file-safe cell name."""
        out = {}
        for key, s in self.series.items():
            lines = ["date,actual,predicted"]
            lines += [f"{d},{a!r},{p!r}" for d, a, p in zip(s["dates"], s["actual"], s["predicted"])]
            out[key] = "\n".join(lines) + "\n"
        return out


def _fingerprint(table: PriceTable) -> str:
    h = hashlib.sha256()
    h.update(",".join(table.tickers).encode())
    h.update(table.dates.astype("int64").tobytes())
    h.update(np.ascontiguousarray(table.closes).tobytes())
    return h.hexdigest()


def cell_seed(master_seed: int, key: str) -> int:
    """Per-cell seed derived from the master seed and the cell key only."""
    seq = np.random.SeedSequence([int(master_seed), zlib.crc32(key.encode())])
    return int(seq.generate_state(1)[0])


def load_table(paths: Sequence) -> PriceTable:
    return align_tables([load_price_csv(p) for p in paths])


def _make_estimator(model, variant, config, seed):
    if model == "svr":
        return EpsilonSVR(kernel=variant, C=config.C, epsilon=config.epsilon,
                          tol=config.tol, max_iter=config.max_iter)
    return LSTMRegressor(n_timesteps=config.lag, hidden_size=config.hidden_size,
                         learning_rate=config.learning_rate, epochs=config.epochs,
                         batch_size=config.batch_size, seed=seed)


def _variants(config):
    for model in config.models:
        if model == "svr":
            for kernel in config.kernels:
                yield model, kernel
        else:
            yield model, f"h{config.hidden_size}"


def training_table(table: PriceTable, n_rows: int, mode: str, levels: int = 1, bank="default"):
    """The first ``n_rows`` rows, denoised column-wise in ``wavelet`` mode."""
    head = table.head(n_rows)
    if mode == "original":
        return head
    fb = get_filter_bank(bank)
    cols = [denoise_extended(fb, head.closes[:, j], levels) for j in range(head.closes.shape[1])]
    return head.with_closes(np.column_stack(cols))


def run_comparison(config: ComparisonConfig, table: Optional[PriceTable] = None) -> EvalReport:
    """Train every (mode, model, variant) and score it at every horizon.

    Protocol: the inputs are aligned and cut to their most recent ``4**k``
    rows. One-step lag windows are split chronologically. In ``wavelet``
    mode only the training rows are denoised. Test forecasts start from
    windows of raw observed prices; for horizon ``H`` the ``H``-th recursive
    prediction from every test origin whose target row exists is compared
    with the raw actual price.
    """
    if table is None:
        table = load_table(config.tickers)
    table = select_pow4_window(table)
    target = config.target or table.tickers[0]
    data = make_supervised(table, config.lag, 1, target)
    train, test = chrono_split(data, config.train_fraction)
    n_train_rows = len(train) + config.lag
    target_index = data.target_index
    last_row = table.n_rows - 1

    cells = []
    series = {}
    for mode in config.modes:
        try:
            train_tab = training_table(table, n_train_rows, mode, config.levels, config.bank)
            fit_data = make_supervised(train_tab, config.lag, 1, target)
        except WavecastError as exc:
            fit_data, mode_error = None, f"{type(exc).__name__}: {exc}"
        for model, variant in _variants(config):
            base = {"model": model, "config": variant, "mode": mode}
            key = f"{model}/{variant}/{mode}"
            try:
                if fit_data is None:
                    raise RuntimeError(mode_error)
                est = _make_estimator(model, variant, config, cell_seed(config.seed, key))
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ConvergenceWarning)
                    est.fit(fit_data.X, fit_data.y)
                converged = bool(getattr(est, "converged_", True))
                predict = _as_batch_predictor(est)
            except Exception as exc:  # recorded per cell, never aborts the grid
                for h in config.horizons:
                    cells.append({**base, "horizon": h, "error": f"{type(exc).__name__}: {exc}"})
                continue
            for h in config.horizons:
                cell = {**base, "horizon": h}
                origins = test.origin[test.origin + h <= last_row]
                try:
                    if origins.size == 0:
                        raise ValueError(f"no test origin has a target {h} rows ahead")
                    windows = np.stack([table.closes[o - config.lag + 1:o + 1] for o in origins])
                    preds, _ = _recursive_batch(predict, windows, h, target_index)
                    predicted = preds[:, -1]
                    actual = table.closes[origins + h, target_index]
                    cell.update(rmse=rmse(predicted, actual), mae=mae(predicted, actual),
                                r_squared=r_squared(predicted, actual), n=int(origins.size))
                    if model == "svr":
                        cell["converged"] = converged
                    series[f"{model}_{variant}_{mode}_h{h}"] = {
                        "dates": [str(d) for d in table.dates[origins + h]],
                        "actual": actual.tolist(),
                        "predicted": predicted.tolist(),
                    }
                except Exception as exc:
                    cell["error"] = f"{type(exc).__name__}: {exc}"
                cells.append(cell)

    metadata = {
        "config": config.to_dict(),
        "target": target,
        "rows": int(table.n_rows),
        "first_date": str(table.dates[0]),
        "last_date": str(table.dates[-1]),
        "split": {"train_samples": len(train), "test_samples": len(test),
                  "train_fraction": config.train_fraction},
        "data_fingerprint": _fingerprint(table),
        "seed": config.seed,
    }
    return EvalReport(cells, metadata, series)
