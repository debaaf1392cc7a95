"""Atomic file output and plain signal files."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from .dataset import load_price_csv
from .exceptions import DataError


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def atomic_write_many(outputs: Dict[Path, str]) -> None:
    """Write several files; all content must be rendered before calling this."""
    for path, text in outputs.items():
        atomic_write(path, text)


def read_signal(path) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Read a signal as ``(values, dates)``.

    ``date,close`` files go through :func:`wavecast.dataset.load_price_csv`;
    anything else is read as one number per line, skipping ``#`` comments and
    an optional non-numeric header line.
    """
    path = Path(path)
    try:
        with open(path) as fh:
            first = fh.readline().strip().lower()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    if first.replace(" ", "") == "date,close":
        series = load_price_csv(path)
        return series.closes, series.dates
    values = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values.append(float(line))
            except ValueError:
                if line_no == 1:
                    continue
                raise DataError(f"{path}: line {line_no}: not a number: {line!r}") from None
    if not values:
        raise DataError(f"{path}: no values")
    arr = np.array(values)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: signal contains non-finite values")
    return arr, None


def render_signal(values, dates=None) -> str:
    if dates is not None:
        lines = ["date,close"]
        lines += [f"{np.datetime_as_string(d, unit='D')},{float(v)!r}" for d, v in zip(dates, values)]
    else:
        lines = ["value"] + [repr(float(v)) for v in values]
    return "\n".join(lines) + "\n"
