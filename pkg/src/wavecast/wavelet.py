"""Orthonormal 4-band wavelet transform with circular (wraparound) boundaries.

A signal of length ``n = 4**k`` is mapped onto ``n`` coefficients by an
orthonormal ``n x n`` matrix whose rows are the four length-8 filters placed
at every shift by 4, wrapping around the end of the signal. The first
``n/4`` coefficients form the approximation band ``a``; the remaining three
quarters are the detail bands ``d1``, ``d2``, ``d3``.

Indices are 0-based throughout the code.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .exceptions import InvalidDepthError, InvalidSizeError, StructuralError

__all__ = [
    "FilterBank",
    "ConditionResult",
    "ValidationReport",
    "WaveletCoefficients",
    "MultilevelCoefficients",
    "default_filter_bank",
    "paper_verbatim_filter_bank",
    "get_filter_bank",
    "validate_filter_bank",
    "build_transform_matrix",
    "forward_transform",
    "inverse_transform",
    "multilevel_transform",
    "multilevel_inverse",
    "project_components",
    "is_power_of_four",
    "write_coefficients_csv",
    "read_coefficients_csv",
]

FILTER_LENGTH = 8
NUM_BANDS = 4
MIN_SIGNAL_LENGTH = 16
MIN_BAND_LENGTH = 4

# Published coefficients are rounded to 8 decimals. Every filter in the bank
# is built from these two magnitudes.
_U_PRINTED = 0.06737176
_V_PRINTED = 0.09419511


def _refine_magnitudes(u, v):
    """Project ``(u, v)`` onto the circle where the bank is exactly orthonormal.

    Unit norm and shift-4 orthogonality of the symmetric filters below both
    reduce to ``u**2 + v**2 + u/2 - v/2 = 0``, a circle centred at
    ``(-1/4, 1/4)`` with radius ``1/sqrt(8)``. The 8-decimal values sit about
    3e-9 off it; the radial projection agrees with them after rounding.
    """
    centre = np.array([-0.25, 0.25])
    point = np.array([u, v]) - centre
    u_exact, v_exact = centre + point * (np.sqrt(0.125) / np.linalg.norm(point))
    return float(u_exact), float(v_exact)


def _build_filters(u, v, gamma_sixth_sign=1.0):
    alpha = [-u, v, 0.5 - v, 0.5 + u, 0.5 + u, 0.5 - v, v, -u]
    beta = [-v, u, 0.5 + u, 0.5 - v, -(0.5 - v), -(0.5 + u), -u, v]
    gamma = [-v, -u, 0.5 + u, -(0.5 - v), -(0.5 - v),
             gamma_sixth_sign * (0.5 + u), -u, -v]
    delta = [-u, -v, 0.5 - v, -(0.5 + u), 0.5 + u, -(0.5 - v), v, u]
    return alpha, beta, gamma, delta


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FilterBank:
    """Four length-8 analysis filters: low-pass ``alpha``, high-pass ``beta``,
    ``gamma`` and ``delta``."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        for attr in ("alpha", "beta", "gamma", "delta"):
            object.__setattr__(self, attr, _frozen(getattr(self, attr)))

    @property
    def filters(self) -> np.ndarray:
        """The filters stacked as a ``(4, 8)`` array in band order."""
        return np.vstack([self.alpha, self.beta, self.gamma, self.delta])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
            "delta": self.delta.tolist(),
        }


def default_filter_bank(refine: bool = True) -> FilterBank:
    """Return the 4-band, 2-regular orthonormal filter bank.

    The published gamma filter has a sign error in its sixth tap; this bank
    uses ``+0.56737176`` there, which restores the zero-sum and orthogonality
    conditions.

    Parameters
    ----------
    refine : bool, default=True
        If True, use the exactly orthonormal coefficients that round to the
        published 8-decimal values. If False, use the 8-decimal values
        themselves, whose norms deviate from 1 by about 4e-9.
    """
    if refine:
        u, v = _refine_magnitudes(_U_PRINTED, _V_PRINTED)
        name = "default"
    else:
        u, v = _U_PRINTED, _V_PRINTED
        name = "default-rounded"
    return FilterBank(*_build_filters(u, v), name=name)


def paper_verbatim_filter_bank() -> FilterBank:
    """Return the coefficients exactly as published, including the gamma typo.

    This bank is *not* orthonormal; it exists so the defect can be shown with
    :func:`validate_filter_bank`.
    """
    return FilterBank(*_build_filters(_U_PRINTED, _V_PRINTED, gamma_sixth_sign=-1.0),
                      name="paper-verbatim")


_BANKS = {
    "default": default_filter_bank,
    "default-rounded": lambda: default_filter_bank(refine=False),
    "paper-verbatim": paper_verbatim_filter_bank,
}


def get_filter_bank(name_or_bank="default") -> FilterBank:
    """Resolve a bank name (``default``, ``default-rounded``, ``paper-verbatim``)
    or pass a :class:`FilterBank` through unchanged."""
    if isinstance(name_or_bank, FilterBank):
        return name_or_bank
    if name_or_bank is None:
        return default_filter_bank()
    try:
        return _BANKS[name_or_bank]()
    except KeyError:
        raise ValueError(
            f"unknown filter bank {name_or_bank!r}; expected one of {sorted(_BANKS)}"
        ) from None


@dataclass(frozen=True)
class ConditionResult:
    name: str
    residual: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of every filter-bank condition checked by
    :func:`validate_filter_bank`."""

    conditions: Tuple[ConditionResult, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def max_residual(self) -> float:
        return max(c.residual for c in self.conditions)

    @property
    def failures(self) -> List[ConditionResult]:
        return [c for c in self.conditions if not c.passed]

    def __getitem__(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "max_residual": self.max_residual,
            "conditions": [
                {"name": c.name, "residual": c.residual, "passed": c.passed}
                for c in self.conditions
            ],
        }


_NAMES = ("alpha", "beta", "gamma", "delta")


def validate_filter_bank(fb: FilterBank, tol: float = 1e-9) -> ValidationReport:
    """Check the conditions that make ``fb`` generate an orthonormal transform.

    Checked conditions, each with its absolute residual:

    * ``sum(alpha)`` equals 2 and each high-pass filter sums to 0;
    * each filter has unit Euclidean norm;
    * the six pairwise dot products vanish;
    * every filter is orthogonal to every filter shifted by 4 taps
      (``f[4:] . g[:4] = 0`` for all 16 ordered pairs).

    Raises
    ------
    StructuralError
        If any filter does not have length 8.
    """
    filters = []
    for name in _NAMES:
        f = np.asarray(getattr(fb, name), dtype=float)
        if f.ndim != 1 or f.shape[0] != FILTER_LENGTH:
            raise StructuralError(
                f"filter {name} must have length {FILTER_LENGTH}, got shape {f.shape}"
            )
        filters.append(f)

    results = []

    def add(name, residual):
        residual = float(abs(residual))
        results.append(ConditionResult(name, residual, bool(residual <= tol)))

    add("sum(alpha)=2", filters[0].sum() - 2.0)
    for name, f in zip(_NAMES[1:], filters[1:]):
        add(f"sum({name})=0", f.sum())
    for name, f in zip(_NAMES, filters):
        add(f"norm({name})=1", np.linalg.norm(f) - 1.0)
    for i in range(NUM_BANDS):
        for j in range(i + 1, NUM_BANDS):
            add(f"{_NAMES[i]}.{_NAMES[j]}=0", filters[i] @ filters[j])
    half = FILTER_LENGTH // 2
    for i in range(NUM_BANDS):
        for j in range(NUM_BANDS):
            add(f"{_NAMES[i]}[4:].{_NAMES[j]}[:4]=0", filters[i][half:] @ filters[j][:half])
    return ValidationReport(tuple(results), tol)


def is_power_of_four(n) -> bool:
    n = int(n)
    if n < 1:
        return False
    while n % 4 == 0:
        n //= 4
    return n == 1


def _check_size(n):
    if int(n) != n or not is_power_of_four(n) or n < MIN_SIGNAL_LENGTH:
        raise InvalidSizeError(f"size must be 4**k with k >= 2, got {n}")
    return int(n)


def _as_signal(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.ndim != 1:
        raise InvalidSizeError(f"signal must be one-dimensional, got shape {s.shape}")
    _check_size(s.shape[0])
    return s


def _tap_indices(n):
    """Column indices touched by each row of one band: shape ``(n/4, 8)``."""
    starts = NUM_BANDS * np.arange(n // NUM_BANDS)
    return (starts[:, None] + np.arange(FILTER_LENGTH)[None, :]) % n


def build_transform_matrix(fb: FilterBank, n: int) -> np.ndarray:
    """Return the ``n x n`` transform matrix.

    Row ``j`` of band ``b`` holds filter ``b`` starting at column ``4*j``,
    wrapping past the last column.
    """
    n = _check_size(n)
    quarter = n // NUM_BANDS
    idx = _tap_indices(n)
    T = np.zeros((n, n))
    rows = np.arange(quarter)[:, None]
    for b, f in enumerate(fb.filters):
        np.add.at(T, (b * quarter + rows, idx), f[None, :])
    return T


@dataclass(frozen=True)
class WaveletCoefficients:
    """Single-level coefficients: approximation band and three detail bands."""

    approx: np.ndarray
    details: Tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "approx", _frozen(self.approx))
        details = tuple(_frozen(d) for d in self.details)
        if len(details) != NUM_BANDS - 1:
            raise StructuralError(f"expected 3 detail bands, got {len(details)}")
        object.__setattr__(self, "details", details)

    @property
    def n(self) -> int:
        return self.approx.shape[0] + sum(d.shape[0] for d in self.details)

    def to_array(self) -> np.ndarray:
        """Flatten as ``[a, d1, d2, d3]``."""
        return np.concatenate([self.approx, *self.details])

    @classmethod
    def from_array(cls, flat) -> "WaveletCoefficients":
        flat = np.asarray(flat, dtype=float)
        if flat.ndim != 1 or flat.shape[0] % NUM_BANDS:
            raise StructuralError(f"cannot split {flat.shape} into 4 equal bands")
        a, d1, d2, d3 = np.split(flat, NUM_BANDS)
        return cls(a, (d1, d2, d3))


def forward_transform(fb: FilterBank, s) -> WaveletCoefficients:
    """One level of the transform, computed as stride-4 circular correlation.

    Equivalent to ``build_transform_matrix(fb, len(s)) @ s``.
    """
    s = _as_signal(s)
    windows = s[_tap_indices(s.shape[0])]
    a, d1, d2, d3 = (windows @ f for f in fb.filters)
    return WaveletCoefficients(a, (d1, d2, d3))


def inverse_transform(fb: FilterBank, c: WaveletCoefficients) -> np.ndarray:
    """Invert :func:`forward_transform` by applying the transposed matrix."""
    bands = [np.asarray(c.approx, dtype=float)] + [np.asarray(d, dtype=float) for d in c.details]
    lengths = {b.shape for b in bands}
    if len(lengths) != 1 or bands[0].ndim != 1:
        raise StructuralError(f"band lengths differ: {[b.shape for b in bands]}")
    n = NUM_BANDS * bands[0].shape[0]
    try:
        _check_size(n)
    except InvalidSizeError as exc:
        raise StructuralError(f"band length {n // 4} does not give n = 4**k >= 16") from exc
    idx = _tap_indices(n)
    contrib = sum(band[:, None] * f[None, :] for band, f in zip(bands, fb.filters))
    return np.bincount(idx.ravel(), weights=contrib.ravel(), minlength=n)


@dataclass(frozen=True)
class MultilevelCoefficients:
    """Coefficients of a multilevel decomposition.

    ``details[l]`` holds the three detail bands of level ``l + 1``; only the
    deepest approximation ``approx`` is kept.
    """

    approx: np.ndarray
    details: Tuple[Tuple[np.ndarray, np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        object.__setattr__(self, "approx", _frozen(self.approx))
        object.__setattr__(
            self, "details", tuple(tuple(_frozen(d) for d in lvl) for lvl in self.details)
        )

    @property
    def levels(self) -> int:
        return len(self.details)

    @property
    def n(self) -> int:
        return self.approx.shape[0] + sum(d.shape[0] for lvl in self.details for d in lvl)

    def band_lengths(self) -> List[int]:
        """Band lengths in flattened order."""
        return [len(b) for b in self._ordered_bands()]

    def _ordered_bands(self):
        bands = [self.approx]
        for lvl in reversed(self.details):
            bands.extend(lvl)
        return bands

    def to_array(self) -> np.ndarray:
        """Flatten deepest level first: ``[a^L, d1^L, d2^L, d3^L, ..., d1^1, d2^1, d3^1]``."""
        return np.concatenate(self._ordered_bands())

    @classmethod
    def from_array(cls, flat, levels: int) -> "MultilevelCoefficients":
        flat = np.asarray(flat, dtype=float)
        n = flat.shape[0]
        _check_depth(n, levels)
        deepest = n // NUM_BANDS ** levels
        approx = flat[:deepest]
        pos = deepest
        details = []
        for lvl in range(levels, 0, -1):
            size = n // NUM_BANDS ** lvl
            details.append(tuple(flat[pos + b * size: pos + (b + 1) * size] for b in range(3)))
            pos += 3 * size
        return cls(approx, tuple(reversed(details)))


def _check_depth(n, levels):
    _check_size(n)
    if int(levels) != levels or levels < 1:
        raise InvalidDepthError(f"levels must be a positive integer, got {levels}")
    if n // NUM_BANDS ** int(levels) < MIN_BAND_LENGTH:
        raise InvalidDepthError(
            f"{levels} levels on {n} samples leaves bands shorter than {MIN_BAND_LENGTH}"
        )


def multilevel_transform(fb: FilterBank, s, levels: int) -> MultilevelCoefficients:
    """Apply :func:`forward_transform` ``levels`` times, each time to the
    previous approximation band only."""
    s = _as_signal(s)
    _check_depth(s.shape[0], levels)
    approx = s
    details = []
    for _ in range(int(levels)):
        c = forward_transform(fb, approx)
        details.append(c.details)
        approx = c.approx
    return MultilevelCoefficients(approx, tuple(details))


def multilevel_inverse(fb: FilterBank, c: MultilevelCoefficients) -> np.ndarray:
    approx = np.asarray(c.approx, dtype=float)
    for lvl in reversed(c.details):
        approx = inverse_transform(fb, WaveletCoefficients(approx, lvl))
    return approx


def project_components(fb: FilterBank, s) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Orthogonal projections of ``s`` onto the approximation and detail subspaces.

    Returns ``(A1, D1, D2, D3)``, each of length ``len(s)``, with
    ``A1 + D1 + D2 + D3 == s``.
    """
    c = forward_transform(fb, s)
    zero = np.zeros_like(c.approx)
    bands = [c.approx, *c.details]
    out = []
    for keep in range(NUM_BANDS):
        masked = [b if i == keep else zero for i, b in enumerate(bands)]
        out.append(inverse_transform(fb, WaveletCoefficients(masked[0], tuple(masked[1:]))))
    return tuple(out)


def write_coefficients_csv(path_or_file, coeffs: MultilevelCoefficients) -> None:
    """Serialize as a ``# n=..., levels=...`` header followed by one value per line."""
    lines = [f"# n={coeffs.n}, levels={coeffs.levels}"]
    lines += [repr(float(v)) for v in coeffs.to_array()]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)


def read_coefficients_csv(path) -> MultilevelCoefficients:
    with open(path) as fh:
        header = fh.readline().strip()
        values = [float(line) for line in fh if line.strip()]
    try:
        fields = dict(part.strip().split("=") for part in header.lstrip("#").split(","))
        n, levels = int(fields["n"]), int(fields["levels"])
    except (ValueError, KeyError) as exc:
        raise StructuralError(f"malformed coefficient header {header!r}") from exc
    if len(values) != n:
        raise StructuralError(f"header says n={n} but file holds {len(values)} values")
    return MultilevelCoefficients.from_array(values, levels)
