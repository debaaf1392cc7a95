"""Command-line interface.

Exit codes: 0 on success, 1 on a data or validation error (one-line
diagnostic on stderr), 2 on a usage error. Output files are written only
after every result has been computed, each through a temporary file and
rename, so a failed run leaves no partial output behind.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_many, read_signal, render_signal
from .dataset import make_supervised, select_pow4_window
from .denoise import denoise_signal
from .evaluate import (
    ComparisonConfig,
    load_table,
    recursive_forecast,
    run_comparison,
    training_table,
)
from .exceptions import ConvergenceWarning, WavecastError
from .lstm import LSTMRegressor, LstmParams
from .svr import KERNEL_PRESETS, EpsilonSVR, SvrModel
from .wavelet import (
    get_filter_bank,
    multilevel_inverse,
    multilevel_transform,
    read_coefficients_csv,
    validate_filter_bank,
    write_coefficients_csv,
)

BANK_CHOICES = ("default", "default-rounded", "paper-verbatim")
MAX_SEED = 2 ** 64 - 1


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _seed(text):
    value = _nonneg_int(text)
    if value > MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits, got {value}")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _nonneg_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _fraction(text):
    value = _positive_float(text)
    if value >= 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {value}")
    return value


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _add_data_args(p, config=True):
    p.add_argument("--inputs", nargs="+", metavar="CSV", help="price files (date,close); stem = ticker")
    if config:
        p.add_argument("--config", help="JSON config; explicit flags override its values")
    p.add_argument("--target", help="target ticker (default: first input)")
    p.add_argument("--lag", type=_positive_int, help="days per input window")
    p.add_argument("--mode", choices=("raw", "wavelet"), help="train on raw or denoised prices")
    p.add_argument("--levels", type=_positive_int, help="wavelet decomposition depth")
    p.add_argument("--bank", choices=BANK_CHOICES)


def _add_svr_args(p):
    p.add_argument("--kernel", help=f"one of {', '.join(KERNEL_PRESETS)}")
    p.add_argument("--C", type=_positive_float, dest="C")
    p.add_argument("--epsilon", type=_nonneg_float)
    p.add_argument("--tol", type=_positive_float)
    p.add_argument("--max-iter", type=_positive_int, dest="max_iter")


def _add_lstm_args(p):
    p.add_argument("--hidden-size", type=_positive_int, dest="hidden_size")
    p.add_argument("--epochs", type=_nonneg_int)
    p.add_argument("--learning-rate", type=_positive_float, dest="learning_rate")
    p.add_argument("--batch-size", type=_positive_int, dest="batch_size")
    p.add_argument("--seed", type=_seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavecast", description="4-band wavelet denoising with SVR and LSTM forecasters.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("validate-bank", help="check the filter-bank conditions")
    p.add_argument("--bank", choices=BANK_CHOICES, default="default")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.add_argument("--out", help="also write the JSON report here")

    p = sub.add_parser("transform", help="multilevel wavelet transform of a signal")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--levels", type=_positive_int, default=1)
    p.add_argument("--bank", choices=BANK_CHOICES, default="default")
    p.add_argument("--inverse", action="store_true",
                   help="read a coefficient file and write the reconstructed signal")

    p = sub.add_parser("denoise", help="universal-threshold wavelet denoising")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--levels", type=_positive_int, default=1)
    p.add_argument("--bank", choices=BANK_CHOICES, default="default")
    p.add_argument("--plan", help="threshold sidecar JSON (default: OUT with .json suffix)")

    p = sub.add_parser("train-svr", help="fit an epsilon-SVR on lag windows")
    _add_data_args(p)
    _add_svr_args(p)
    p.add_argument("--out", required=True, help="model JSON")

    p = sub.add_parser("train-lstm", help="fit an LSTM on lag windows")
    _add_data_args(p)
    _add_lstm_args(p)
    p.add_argument("--out", required=True, help="parameter JSON")
    p.add_argument("--loss-out", help="per-epoch loss CSV")

    p = sub.add_parser("forecast", help="recursive forecast from a trained model")
    p.add_argument("--model", required=True, help="JSON written by train-svr or train-lstm")
    p.add_argument("--inputs", nargs="+", required=True, metavar="CSV")
    p.add_argument("--horizon", type=_nonneg_int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="raw-vs-denoised comparison grid")
    _add_data_args(p)
    _add_svr_args(p)
    _add_lstm_args(p)
    p.add_argument("--model", choices=("svr", "lstm", "both"))
    p.add_argument("--horizons", type=_positive_int, nargs="+")
    p.add_argument("--train-fraction", type=_fraction, dest="train_fraction")
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--csv", help="report CSV, one row per grid cell")
    p.add_argument("--emit-plot-data", metavar="DIR", dest="plot_dir",
                   help="write predicted-vs-actual CSV per cell into DIR")
    return parser


def _resolve_config(args) -> ComparisonConfig:
    if getattr(args, "config", None):
        try:
            config = ComparisonConfig.from_json(args.config)
        except OSError as exc:
            raise WavecastError(f"cannot read {args.config}: {exc.strerror}") from exc
        except ValueError as exc:
            raise WavecastError(f"{args.config}: {exc}") from exc
        values = config.__dict__.copy()
    else:
        values = {}
    overrides = {
        "tickers": args.inputs,
        "target": args.target,
        "lag": args.lag,
        "levels": args.levels,
        "bank": args.bank,
    }
    if args.mode is not None:
        overrides["modes"] = args.mode
    for name in ("C", "epsilon", "tol", "max_iter", "hidden_size", "epochs", "learning_rate",
                 "batch_size", "seed", "horizons", "train_fraction"):
        overrides[name] = getattr(args, name, None)
    kernel = getattr(args, "kernel", None)
    if kernel is not None:
        overrides["kernels"] = kernel
    model = getattr(args, "model", None)
    if isinstance(model, str) and args.command == "compare":
        overrides["models"] = ("svr", "lstm") if model == "both" else model
    values.update({k: v for k, v in overrides.items() if v is not None})
    config = ComparisonConfig(**values)
    if not config.tickers:
        raise WavecastError("no input files: pass --inputs or --config")
    return config


def _training_data(config: ComparisonConfig, mode: str):
    table = select_pow4_window(load_table(config.tickers))
    target = config.target or table.tickers[0]
    train_tab = training_table(table, table.n_rows, mode, config.levels, config.bank)
    data = make_supervised(train_tab, config.lag, 1, target)
    window = {
        "lag": config.lag,
        "target": target,
        "tickers": list(table.tickers),
        "mode": "raw" if mode == "original" else mode,
        "levels": config.levels,
        "bank": config.bank,
    }
    return data, window


def cmd_validate_bank(args):
    report = validate_filter_bank(get_filter_bank(args.bank))
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(f"filter bank: {args.bank}")
        for c in report.conditions:
            print(f"  {'PASS' if c.passed else 'FAIL'}  {c.name:<28} residual={c.residual:.3e}")
        print(f"{'all conditions pass' if report.passed else f'{len(report.failures)} condition(s) fail'}"
              f" (tolerance {report.tolerance:g}, max residual {report.max_residual:.3e})")
    if args.out:
        atomic_write_many({Path(args.out): _json_text(report.to_dict())})
    if not report.passed:
        names = ", ".join(c.name for c in report.failures)
        print(f"wavecast: error: bank {args.bank!r} fails: {names}", file=sys.stderr)
        return 1
    return 0


def cmd_transform(args):
    fb = get_filter_bank(args.bank)
    if args.inverse:
        coeffs = read_coefficients_csv(args.input)
        text = render_signal(multilevel_inverse(fb, coeffs))
    else:
        values, _ = read_signal(args.input)
        coeffs = multilevel_transform(fb, values, args.levels)
        buf = io.StringIO()
        write_coefficients_csv(buf, coeffs)
        text = buf.getvalue()
    atomic_write_many({Path(args.out): text})
    return 0


def cmd_denoise(args):
    fb = get_filter_bank(args.bank)
    values, dates = read_signal(args.input)
    denoised, plans = denoise_signal(fb, values, args.levels)
    out = Path(args.out)
    plan_path = Path(args.plan) if args.plan else out.with_suffix(".json")
    sidecar = {
        "input": Path(args.input).name,
        "n": int(values.shape[0]),
        "levels": args.levels,
        "bank": args.bank,
        "plans": [p.to_dict() for p in plans],
        "zeroed_total": sum(p.zeroed for p in plans),
    }
    atomic_write_many({out: render_signal(denoised, dates), plan_path: _json_text(sidecar)})
    return 0


def cmd_train_svr(args):
    config = _resolve_config(args)
    mode = config.modes[0] if len(config.modes) == 1 else "original"
    if len(config.kernels) != 1:
        config.kernels = ("linear",)
    data, window = _training_data(config, mode)
    est = EpsilonSVR(kernel=config.kernels[0], C=config.C, epsilon=config.epsilon,
                     tol=config.tol, max_iter=config.max_iter)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        est.fit(data.X, data.y)
    if not est.converged_:
        print("wavecast: warning: SMO did not converge; model saved with convergence_flag=false",
              file=sys.stderr)
    doc = est.model_.to_dict()
    doc["preset"] = config.kernels[0]
    doc["window"] = window
    atomic_write_many({Path(args.out): _json_text(doc)})
    return 0


def cmd_train_lstm(args):
    config = _resolve_config(args)
    mode = config.modes[0] if len(config.modes) == 1 else "original"
    data, window = _training_data(config, mode)
    est = LSTMRegressor(n_timesteps=config.lag, hidden_size=config.hidden_size,
                        learning_rate=config.learning_rate, epochs=config.epochs,
                        batch_size=config.batch_size, seed=config.seed)
    est.fit(data.X, data.y)
    doc = {"model": "lstm"}
    doc.update(est.params_.to_dict())
    doc["seed"] = config.seed
    doc["config"] = {
        "hidden_size": config.hidden_size,
        "learning_rate": config.learning_rate,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "clip_norm": est.clip_norm,
    }
    doc["scaler"] = {
        "x_mean": est.x_mean_.tolist(),
        "x_scale": est.x_scale_.tolist(),
        "y_mean": est.y_mean_,
        "y_scale": est.y_scale_,
    }
    doc["window"] = window
    outputs = {Path(args.out): _json_text(doc)}
    if args.loss_out:
        lines = ["epoch,loss"] + [f"{e + 1},{loss!r}" for e, loss in enumerate(est.loss_history_)]
        outputs[Path(args.loss_out)] = "\n".join(lines) + "\n"
    atomic_write_many(outputs)
    return 0


class _LstmPredictor:
    """Rebuilds the fitted-LSTM prediction path from its JSON document."""

    def __init__(self, doc):
        from .lstm import predict_sequences

        self._predict_sequences = predict_sequences
        self.params = LstmParams.from_dict(doc)
        s = doc["scaler"]
        self.x_mean = np.asarray(s["x_mean"])
        self.x_scale = np.asarray(s["x_scale"])
        self.y_mean, self.y_scale = float(s["y_mean"]), float(s["y_scale"])
        self.lag = int(doc["window"]["lag"])
        self.n_features_in_ = self.lag * self.params.input_size

    def predict(self, X):
        xs = np.asarray(X, dtype=float).reshape(len(X), self.lag, -1)
        out = self._predict_sequences(self.params, (xs - self.x_mean) / self.x_scale)
        return out * self.y_scale + self.y_mean


def _load_predictor(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise WavecastError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise WavecastError(f"{path}: invalid JSON: {exc}") from exc
    try:
        window = doc["window"]
        if doc.get("model") == "svr":
            return SvrModel.from_dict(doc), window
        if doc.get("model") == "lstm":
            return _LstmPredictor(doc), window
    except (KeyError, TypeError, ValueError) as exc:
        raise WavecastError(f"{path}: malformed model file ({exc})") from exc
    raise WavecastError(f"{path}: unknown model type {doc.get('model')!r}")


def cmd_forecast(args):
    predictor, window = _load_predictor(args.model)
    table = load_table(args.inputs)
    if list(table.tickers) != list(window["tickers"]):
        raise WavecastError(f"inputs {list(table.tickers)} do not match the model's "
                            f"tickers {window['tickers']}")
    lag = int(window["lag"])
    expected = lag * len(table.tickers)
    n_model = getattr(predictor, "n_features", None) or getattr(predictor, "n_features_in_", None)
    if n_model != expected:
        raise WavecastError(f"model expects {n_model} features but a {lag}-day window "
                            f"of {len(table.tickers)} tickers has {expected}")
    if table.n_rows < lag:
        raise WavecastError(f"need at least {lag} aligned rows, got {table.n_rows}")
    preds = recursive_forecast(predictor, table.closes[-lag:], args.horizon,
                               table.ticker_index(window["target"]))
    lines = ["step,prediction"] + [f"{k + 1},{float(v)!r}" for k, v in enumerate(preds)]
    atomic_write_many({Path(args.out): "\n".join(lines) + "\n"})
    return 0


def cmd_compare(args):
    config = _resolve_config(args)
    report = run_comparison(config)
    outputs = {Path(args.out): report.to_json()}
    if args.csv:
        outputs[Path(args.csv)] = report.to_csv()
    if args.plot_dir:
        plot_dir = Path(args.plot_dir)
        plot_dir.mkdir(parents=True, exist_ok=True)
        for name, text in report.plot_data().items():
            outputs[plot_dir / f"{name}.csv"] = text
    atomic_write_many(outputs)
    failed = [c for c in report.cells if "error" in c]
    if failed:
        print(f"wavecast: warning: {len(failed)} of {len(report.cells)} cells failed; "
              "see their error fields", file=sys.stderr)
    return 0


COMMANDS = {
    "validate-bank": cmd_validate_bank,
    "transform": cmd_transform,
    "denoise": cmd_denoise,
    "train-svr": cmd_train_svr,
    "train-lstm": cmd_train_lstm,
    "forecast": cmd_forecast,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (WavecastError, ValueError, OSError) as exc:
        message = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"wavecast: error: {message}", file=sys.stderr)
        return 1


dispatch = main


if __name__ == "__main__":
    sys.exit(main())
