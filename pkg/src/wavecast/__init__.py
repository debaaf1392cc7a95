"""4-band wavelet denoising with SVR and LSTM forecasters."""

__version__ = "0.1.0"

from .denoise import WaveletDenoiser, denoise_signal, estimate_sigma, hard_threshold, universal_threshold
from .evaluate import ComparisonConfig, EvalReport, mae, r_squared, recursive_forecast, rmse, run_comparison
from .lstm import LSTMRegressor
from .svr import EpsilonSVR
from .wavelet import (
    FilterBank,
    default_filter_bank,
    forward_transform,
    inverse_transform,
    multilevel_transform,
    paper_verbatim_filter_bank,
    validate_filter_bank,
)

__all__ = [
    "ComparisonConfig",
    "EpsilonSVR",
    "EvalReport",
    "FilterBank",
    "LSTMRegressor",
    "WaveletDenoiser",
    "default_filter_bank",
    "denoise_signal",
    "estimate_sigma",
    "forward_transform",
    "hard_threshold",
    "inverse_transform",
    "mae",
    "multilevel_transform",
    "paper_verbatim_filter_bank",
    "r_squared",
    "recursive_forecast",
    "rmse",
    "run_comparison",
    "universal_threshold",
    "validate_filter_bank",
]
