"""Deterministic synthetic series used by the tests, fixtures and examples."""
from __future__ import annotations

import numpy as np

from .dataset import PriceSeries

__all__ = ["sine_sequence", "trend_sine_noise", "business_days", "synthetic_price_series"]


def sine_sequence(n: int = 200, period: float = 25.0) -> np.ndarray:
    """Noiseless ``sin(2 pi t / period)`` for ``t = 0 .. n-1``."""
    return np.sin(2 * np.pi * np.arange(n) / period)


def trend_sine_noise(n: int = 256, seed: int = 42, noise: float = 0.5, level: float = 100.0,
                     slope: float = 0.05, amplitude: float = 5.0, period: float = 64.0) -> np.ndarray:
    """``level + slope*t + amplitude*sin(2 pi t / period)`` plus Gaussian noise."""
    t = np.arange(n)
    rng = np.random.default_rng(seed)
    clean = level + slope * t + amplitude * np.sin(2 * np.pi * t / period)
    return clean + rng.normal(0.0, noise, size=n)


def business_days(n: int, start: str = "2020-01-01") -> np.ndarray:
    start_day = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(start_day, np.arange(n))


def synthetic_price_series(ticker: str = "SYN", n: int = 256, seed: int = 42, **kwargs) -> PriceSeries:
    return PriceSeries(ticker, business_days(n), trend_sine_noise(n, seed, **kwargs))
