"""OHLC candle ingestion, validation and calendar alignment.

Prices are held as float64 numpy arrays and dates as ``datetime64[D]``.
Every container is frozen; the underlying arrays are marked read-only so
they can be shared between threads without copying.
"""

from __future__ import annotations

import abc
import csv
import datetime as dt
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptySeries, EmptyWindow, InvariantViolation, MalformedRow, NoCommonDates

FIELDS = ("open", "high", "low", "close")
PRICE_FORMAT = "%.6f"


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def to_day(value) -> np.datetime64:
    """Coerce a date-like value (str, date, datetime64) to ``datetime64[D]``."""
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[D]")
    if isinstance(value, dt.datetime):
        value = value.date()
    if isinstance(value, dt.date):
        return np.datetime64(value.isoformat(), "D")
    return np.datetime64(dt.date.fromisoformat(str(value).strip()).isoformat(), "D")


def check_bar(o, h, l, c):
    """Return a description of the first violated candle constraint, or None."""
    if not all(np.isfinite(v) for v in (o, h, l, c)):
        return "non-finite price"
    if not l > 0:
        return "low <= 0"
    if h < l:
        return "high < low"
    if not l <= o <= h:
        return "open outside [low, high]"
    if not l <= c <= h:
        return "close outside [low, high]"
    return None


@dataclass(frozen=True)
class OhlcBar:
    timestamp: dt.date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        problem = check_bar(self.open, self.high, self.low, self.close)
        if problem:
            raise InvariantViolation(0, problem)


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Daily candles of one ticker, strictly increasing in date."""

    ticker: str
    dates: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        if n == 0:
            raise EmptySeries(f"{self.ticker}: no bars")
        object.__setattr__(self, "dates", _frozen(self.dates, "datetime64[D]"))
        for name in FIELDS:
            arr = _frozen(getattr(self, name), np.float64)
            if arr.shape != (n,):
                raise ValueError(f"{self.ticker}: {name} has shape {arr.shape}, expected ({n},)")
            object.__setattr__(self, name, arr)
        if n > 1:
            steps = np.diff(self.dates).astype(np.int64)
            bad = np.flatnonzero(steps <= 0)
            if bad.size:
                i = int(bad[0]) + 1
                what = "duplicate timestamp" if steps[i - 1] == 0 else "timestamps not increasing"
                raise InvariantViolation(i + 1, f"{what} {self.dates[i]}")
        for i in range(n):
            problem = check_bar(self.open[i], self.high[i], self.low[i], self.close[i])
            if problem:
                raise InvariantViolation(i + 1, problem)

    @classmethod
    def from_bars(cls, ticker: str, bars: Iterable[OhlcBar]) -> "PriceSeries":
        bars = list(bars)
        return cls(
            ticker,
            [to_day(b.timestamp) for b in bars],
            [b.open for b in bars],
            [b.high for b in bars],
            [b.low for b in bars],
            [b.close for b in bars],
        )

    def __len__(self):
        return len(self.dates)

    def __eq__(self, other):
        if not isinstance(other, PriceSeries):
            return NotImplemented
        return self.ticker == other.ticker and all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("dates",) + FIELDS
        )

    @property
    def bars(self) -> list[OhlcBar]:
        return [
            OhlcBar(d.item(), float(o), float(h), float(l), float(c))
            for d, o, h, l, c in zip(self.dates, self.open, self.high, self.low, self.close)
        ]

    def take(self, index) -> "PriceSeries":
        return PriceSeries(
            self.ticker, self.dates[index], self.open[index], self.high[index],
            self.low[index], self.close[index],
        )

    def between(self, start=None, end=None) -> "PriceSeries":
        mask = np.ones(len(self), dtype=bool)
        if start is not None:
            mask &= self.dates >= to_day(start)
        if end is not None:
            mask &= self.dates <= to_day(end)
        if not mask.any():
            raise EmptyWindow(f"{self.ticker}: no bars in [{start}, {end}]")
        return self.take(mask)

    def scaled(self, factor: float) -> "PriceSeries":
        return PriceSeries(
            self.ticker, self.dates, self.open * factor, self.high * factor,
            self.low * factor, self.close * factor,
        )


def load_csv(path, ticker: str) -> PriceSeries:
    """Read one ticker's candles from ``date,open,high,low,close`` CSV.

    Header names are matched case-insensitively and any other column (for
    instance volume) is ignored. Rows may appear in any order; the result is
    sorted ascending. Row numbers in errors count data rows from 1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptySeries(f"{path}: empty file") from None
        names = [h.strip().lower() for h in header]
        missing = [f for f in ("date",) + FIELDS if f not in names]
        if missing:
            raise MalformedRow(0, f"header lacks column(s) {', '.join(missing)}")
        cols = [names.index(f) for f in ("date",) + FIELDS]

        rows = []
        for lineno, raw in enumerate(reader, start=1):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            try:
                cells = [raw[j] for j in cols]
            except IndexError:
                raise MalformedRow(lineno, f"expected at least {max(cols) + 1} fields") from None
            try:
                day = to_day(cells[0])
            except ValueError:
                raise MalformedRow(lineno, f"unparseable date {cells[0]!r}") from None
            try:
                o, h, l, c = (float(x) for x in cells[1:])
            except ValueError:
                raise MalformedRow(lineno, f"unparseable price in {cells[1:]}") from None
            problem = check_bar(o, h, l, c)
            if problem:
                raise InvariantViolation(lineno, problem)
            rows.append((day, o, h, l, c, lineno))

    if not rows:
        raise EmptySeries(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if prev[0] == cur[0]:
            raise InvariantViolation(cur[5], f"duplicate timestamp {cur[0]}")
    d, o, h, l, c, _ = zip(*rows)
    return PriceSeries(ticker, d, o, h, l, c)


def write_csv(series: PriceSeries, path) -> None:
    """Write ``series`` in the format :func:`load_csv` reads (6 decimals)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date",) + FIELDS)
        for i in range(len(series)):
            w.writerow([str(series.dates[i])] + [PRICE_FORMAT % getattr(series, f)[i] for f in FIELDS])


@dataclass(frozen=True, eq=False)
class Panel:
    """Several tickers on one shared calendar; price matrices are (dates, tickers)."""

    tickers: tuple
    dates: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", _frozen(self.dates, "datetime64[D]"))
        shape = (len(self.dates), len(self.tickers))
        for name in FIELDS:
            arr = _frozen(getattr(self, name), np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} matrix has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        if not isinstance(other, Panel):
            return NotImplemented
        return self.tickers == other.tickers and all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("dates",) + FIELDS
        )

    def __len__(self):
        return len(self.dates)

    def series(self, ticker: str) -> PriceSeries:
        j = self.tickers.index(ticker)
        return PriceSeries(
            ticker, self.dates, self.open[:, j], self.high[:, j], self.low[:, j], self.close[:, j]
        )

    def series_list(self) -> list[PriceSeries]:
        return [self.series(t) for t in self.tickers]

    def subset(self, tickers: Sequence[str]) -> "Panel":
        idx = [self.tickers.index(t) for t in tickers]
        return Panel(
            tuple(tickers), self.dates, self.open[:, idx], self.high[:, idx],
            self.low[:, idx], self.close[:, idx],
        )


def align(series_list: Sequence[PriceSeries]) -> Panel:
    """Restrict all series to their common dates, keeping ticker order."""
    if len(series_list) < 2:
        raise ValueError("align needs at least two series")
    common = reduce(np.intersect1d, [s.dates for s in series_list])
    if common.size == 0:
        raise NoCommonDates("series share no dates: " + ", ".join(s.ticker for s in series_list))
    cols = {f: [] for f in FIELDS}
    for s in series_list:
        idx = np.searchsorted(s.dates, common)
        for f in FIELDS:
            cols[f].append(getattr(s, f)[idx])
    return Panel(
        tuple(s.ticker for s in series_list), common,
        *(np.column_stack(cols[f]) for f in FIELDS),
    )


def slice_window(panel: Panel, start, end) -> Panel:
    """Keep only the rows dated within ``[start, end]`` (inclusive)."""
    start, end = to_day(start), to_day(end)
    if start > end:
        raise ValueError(f"window start {start} after end {end}")
    mask = (panel.dates >= start) & (panel.dates <= end)
    if not mask.any():
        raise EmptyWindow(f"no dates in [{start}, {end}]")
    return Panel(
        panel.tickers, panel.dates[mask], panel.open[mask], panel.high[mask],
        panel.low[mask], panel.close[mask],
    )


class PriceProvider(abc.ABC):
    """Source of candles. File loading is the only shipped backend."""

    @abc.abstractmethod
    def fetch(self, ticker: str, start=None, end=None) -> PriceSeries:
        ...


class CsvProvider(PriceProvider):
    def __init__(self, directory, pattern: str = "{ticker}.csv"):
        self.directory = Path(directory)
        self.pattern = pattern

    def path_for(self, ticker: str) -> Path:
        return self.directory / self.pattern.format(ticker=ticker)

    def fetch(self, ticker, start=None, end=None):
        path = self.path_for(ticker)
        if not path.exists():
            raise FileNotFoundError(f"no data file for ticker {ticker}: {path}")
        series = load_csv(path, ticker)
        if start is None and end is None:
            return series
        return series.between(start, end)
