"""Universal-threshold wavelet denoising with hard thresholding."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .exceptions import DataError
from .wavelet import (
    FilterBank,
    MultilevelCoefficients,
    get_filter_bank,
    multilevel_inverse,
    multilevel_transform,
)

__all__ = [
    "BandThreshold",
    "ThresholdPlan",
    "estimate_sigma",
    "universal_threshold",
    "hard_threshold",
    "denoise_signal",
    "denoise_extended",
    "WaveletDenoiser",
]

MAD_SCALE = 0.6745


def estimate_sigma(band) -> float:
    """Robust noise scale of a detail band: ``median(|band|) / 0.6745``."""
    band = np.asarray(band, dtype=float).ravel()
    if band.size == 0:
        raise DataError("cannot estimate noise scale of an empty band")
    return float(np.median(np.abs(band)) / MAD_SCALE)


def universal_threshold(sigma: float, n_elems: int) -> float:
    """``sigma * sqrt(2 ln n_elems)``."""
    if n_elems < 1:
        raise DataError(f"threshold needs at least one element, got n_elems={n_elems}")
    return float(sigma * math.sqrt(2.0 * math.log(n_elems)))


def hard_threshold(band, lam: float) -> np.ndarray:
    """Zero entries with ``|d| < lam``; entries with ``|d| >= lam`` are kept."""
    band = np.asarray(band, dtype=float)
    return np.where(np.abs(band) >= lam, band, 0.0)


@dataclass(frozen=True)
class BandThreshold:
    sigma: float
    lam: float
    n: int
    zeroed: int

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "lambda": self.lam, "n": self.n, "zeroed": self.zeroed}


@dataclass(frozen=True)
class ThresholdPlan:
    """Thresholds applied to the three detail bands of one level."""

    level: int
    bands: Tuple[BandThreshold, BandThreshold, BandThreshold]

    @property
    def zeroed(self) -> int:
        return sum(b.zeroed for b in self.bands)

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "bands": {f"d{i + 1}": b.to_dict() for i, b in enumerate(self.bands)},
        }


def denoise_coefficients(coeffs: MultilevelCoefficients, threshold_scale: float = 1.0):
    """Hard-threshold every detail band of ``coeffs`` with its own universal threshold.

    The approximation band is passed through untouched.

    Returns
    -------
    thresholded : MultilevelCoefficients
    plans : list of ThresholdPlan, one per level (level 1 first)
    """
    new_details = []
    plans = []
    for level, bands in enumerate(coeffs.details, start=1):
        kept = []
        records = []
        for band in bands:
            sigma = estimate_sigma(band)
            lam = universal_threshold(sigma, band.shape[0]) * threshold_scale
            out = hard_threshold(band, lam)
            zeroed = int(np.count_nonzero((out == 0) & (band != 0)))
            kept.append(out)
            records.append(BandThreshold(sigma, lam, int(band.shape[0]), zeroed))
        new_details.append(tuple(kept))
        plans.append(ThresholdPlan(level, tuple(records)))
    return MultilevelCoefficients(coeffs.approx, tuple(new_details)), plans


def denoise_signal(
    fb: FilterBank, s, levels: int = 1, threshold_scale: float = 1.0
) -> Tuple[np.ndarray, List[ThresholdPlan]]:
    """Denoise ``s`` by thresholding its detail coefficients to depth ``levels``.

    Parameters
    ----------
    fb : FilterBank
    s : array_like of shape (4**k,)
    levels : int, default=1
    threshold_scale : float, default=1.0
        Multiplier on every universal threshold.

    Returns
    -------
    denoised : ndarray with the same length as ``s``
    plans : list of ThresholdPlan, level 1 first
    """
    coeffs = multilevel_transform(fb, s, levels)
    thresholded, plans = denoise_coefficients(coeffs, threshold_scale)
    return multilevel_inverse(fb, thresholded), plans


class WaveletDenoiser(TransformerMixin, BaseEstimator):
    """Column-wise wavelet denoiser.

    Each column of ``X`` is treated as one signal whose length (the number of
    rows) must be a power of 4 of at least 16. The transform is stateless;
    ``fit`` only records the input width.

    Parameters
    ----------
    levels : int, default=1
        Decomposition depth.
    bank : str or FilterBank, default="default"
        Filter bank, resolved with :func:`wavecast.wavelet.get_filter_bank`.
    threshold_scale : float, default=1.0
        Multiplier on every universal threshold.
    """

    def __init__(self, levels=1, bank="default", threshold_scale=1.0):
        self.levels = levels
        self.bank = bank
        self.threshold_scale = threshold_scale

    def fit(self, X, y=None):
        validate_data(self, X, ensure_min_samples=16)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = validate_data(self, X, reset=False, ensure_min_samples=16)
        fb = get_filter_bank(self.bank)
        columns = [
            denoise_signal(fb, X[:, j], self.levels, self.threshold_scale)[0]
            for j in range(X.shape[1])
        ]
        return np.column_stack(columns)


def denoise_extended(fb: FilterBank, s, levels: int = 1, threshold_scale: float = 1.0) -> np.ndarray:
    """Denoise a signal of any length of at least 2.

    ``s`` is extended by symmetric reflection at its end to the next power
    of 4 (at least ``16 * 4**(levels-1)``), denoised, and cut back to its
    original length. The reflection point is the last sample, so the most
    recent values never borrow information from beyond the signal.
    """
    s = np.asarray(s, dtype=float).ravel()
    if s.size < 2:
        raise DataError(f"need at least 2 samples to denoise, got {s.size}")
    size = 16 * 4 ** (int(levels) - 1)
    while size < s.size:
        size *= 4
    extended = np.pad(s, (0, size - s.size), mode="symmetric")
    return denoise_signal(fb, extended, levels, threshold_scale)[0][: s.size]
