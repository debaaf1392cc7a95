"""Price CSV ingestion, date alignment and supervised lag windows."""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .exceptions import DataError

__all__ = [
    "PriceSeries",
    "PriceTable",
    "SupervisedSet",
    "load_price_csv",
    "write_price_csv",
    "align_tables",
    "select_pow4_window",
    "make_supervised",
    "chrono_split",
]


@dataclass(frozen=True)
class PriceSeries:
    ticker: str
    dates: np.ndarray  # datetime64[D]
    closes: np.ndarray

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class PriceTable:
    """Closing prices on common trading dates; ``closes[row, column]``."""

    dates: np.ndarray
    tickers: Tuple[str, ...]
    closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=float)
        if closes.ndim == 1:
            closes = closes[:, None]
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "dates", np.asarray(self.dates, dtype="datetime64[D]"))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        if closes.shape != (len(self.dates), len(self.tickers)):
            raise DataError(
                f"closes shape {closes.shape} does not match "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if len(self.dates) > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise DataError("table dates must be strictly increasing")

    @property
    def n_rows(self) -> int:
        return self.closes.shape[0]

    def column(self, ticker: str) -> np.ndarray:
        return self.closes[:, self.ticker_index(ticker)]

    def ticker_index(self, ticker: str) -> int:
        try:
            return self.tickers.index(ticker)
        except ValueError:
            raise DataError(f"unknown ticker {ticker!r}; table has {list(self.tickers)}") from None

    def with_closes(self, closes) -> "PriceTable":
        return PriceTable(self.dates, self.tickers, closes)

    def tail(self, rows: int) -> "PriceTable":
        return PriceTable(self.dates[-rows:], self.tickers, self.closes[-rows:])

    def head(self, rows: int) -> "PriceTable":
        return PriceTable(self.dates[:rows], self.tickers, self.closes[:rows])


def load_price_csv(path, ticker=None) -> PriceSeries:
    """Read a ``date,close`` file with ISO-8601 dates in strictly increasing order.

    The ticker defaults to the file name stem. Data rows are numbered from 1
    in error messages.
    """
    path = Path(path)
    ticker = ticker or path.stem
    dates: List[dt.date] = []
    closes: List[float] = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "close"]:
            raise DataError(f"{path}: expected header 'date,close', got {header}")
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}: row {row_no}: expected 2 columns, got {len(row)}")
            try:
                day = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise DataError(f"{path}: row {row_no}: unparsable date {row[0]!r}") from None
            try:
                close = float(row[1])
            except ValueError:
                raise DataError(f"{path}: row {row_no}: unparsable close {row[1]!r}") from None
            if not math.isfinite(close) or close <= 0:
                raise DataError(f"{path}: row {row_no}: close must be finite and positive, got {row[1]!r}")
            if dates and day <= dates[-1]:
                kind = "duplicate" if day == dates[-1] else "out-of-order"
                raise DataError(f"{path}: row {row_no}: {kind} date {day.isoformat()}")
            dates.append(day)
            closes.append(close)
    if not dates:
        raise DataError(f"{path}: no data rows")
    return PriceSeries(ticker, np.array(dates, dtype="datetime64[D]"), np.array(closes))


def write_price_csv(fh, dates, closes) -> None:
    fh.write("date,close\n")
    for day, close in zip(dates, closes):
        fh.write(f"{np.datetime_as_string(day, unit='D')},{float(close)!r}\n")


def align_tables(series: Sequence) -> PriceTable:
    """Inner-join series on their dates, keeping input column order.

    Accepts :class:`PriceSeries` and :class:`PriceTable` objects.
    """
    if not series:
        raise DataError("need at least one series to align")
    tickers: List[str] = []
    columns = []
    for item in series:
        if isinstance(item, PriceTable):
            for j, t in enumerate(item.tickers):
                tickers.append(t)
                columns.append((item.dates, item.closes[:, j]))
        else:
            tickers.append(item.ticker)
            columns.append((np.asarray(item.dates, dtype="datetime64[D]"), np.asarray(item.closes, float)))
    if len(set(tickers)) != len(tickers):
        raise DataError(f"duplicate tickers: {tickers}")
    common = columns[0][0]
    for dates, _ in columns[1:]:
        common = np.intersect1d(common, dates)
    if common.size == 0:
        raise DataError("series share no common dates")
    closes = np.column_stack([vals[np.searchsorted(dates, common)] for dates, vals in columns])
    return PriceTable(common, tuple(tickers), closes)


def select_pow4_window(table: PriceTable) -> PriceTable:
    """Keep the most recent ``4**k`` rows for the largest such ``k``."""
    if table.n_rows < 16:
        raise DataError(f"need at least 16 rows for a power-of-4 window, got {table.n_rows}")
    size = 16
    while size * 4 <= table.n_rows:
        size *= 4
    return table.tail(size)


@dataclass(frozen=True)
class SupervisedSet:
    """Lag windows and their targets.

    Row ``t`` of ``X`` is the flattened closes of table rows ``t .. t+lag-1``
    (day-major, tickers within a day); ``y[t]`` is the target's close at row
    ``t + lag - 1 + horizon``. ``origin`` holds each sample's last feature row.
    """

    X: np.ndarray
    y: np.ndarray
    lag: int
    horizon: int
    target: str
    target_index: int
    n_tickers: int
    origin: np.ndarray

    def __len__(self):
        return self.X.shape[0]

    @property
    def target_rows(self) -> np.ndarray:
        return self.origin + self.horizon

    def subset(self, idx) -> "SupervisedSet":
        return SupervisedSet(self.X[idx], self.y[idx], self.lag, self.horizon, self.target,
                             self.target_index, self.n_tickers, self.origin[idx])


def make_supervised(table: PriceTable, lag: int, horizon: int, target: str) -> SupervisedSet:
    if lag < 1 or horizon < 1:
        raise DataError(f"lag and horizon must be >= 1, got lag={lag}, horizon={horizon}")
    target_index = table.ticker_index(target)
    rows = table.n_rows
    n = rows - lag - horizon + 1
    if n < 1:
        raise DataError(f"{rows} rows are too few for lag={lag} and horizon={horizon}")
    starts = np.arange(n)
    X = np.stack([table.closes[s:s + lag].ravel() for s in starts])
    origin = starts + lag - 1
    y = table.closes[origin + horizon, target_index]
    return SupervisedSet(X, y, lag, horizon, target, target_index, len(table.tickers), origin)


def chrono_split(data: SupervisedSet, train_fraction: float) -> Tuple[SupervisedSet, SupervisedSet]:
    """First ``floor(train_fraction * n)`` samples for training, the rest for testing."""
    if not 0 < train_fraction < 1:
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(data)
    n_train = int(math.floor(train_fraction * n))
    if n_train == 0 or n_train == n:
        raise DataError(f"split of {n} samples at {train_fraction} leaves one side empty")
    return data.subset(slice(0, n_train)), data.subset(slice(n_train, n))
