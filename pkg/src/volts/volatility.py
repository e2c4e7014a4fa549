"""Range-based historical volatility estimators.

All estimators return per-period (daily) standard deviations; nothing here
annualizes. The single-window functions take equal-length price arrays for
one window, :func:`rolling` applies them over a whole :class:`PriceSeries`.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import SeriesTooShort, WindowTooShort
from .marketdata import PriceSeries

DEFAULT_WINDOW = 21
LN2 = math.log(2.0)
GK_CLOSE_COEF = 2.0 * LN2 - 1.0


class EstimatorKind(str, enum.Enum):
    PARKINSON = "parkinson"
    GARMAN_KLASS = "garman_klass"
    ROGERS_SATCHELL = "rogers_satchell"
    YANG_ZHANG = "yang_zhang"


MEAN = "mean"


def _arrays(*arrays, min_len=1):
    out = [np.asarray(a, dtype=np.float64) for a in arrays]
    n = len(out[0])
    if any(len(a) != n for a in out):
        raise ValueError("price arrays differ in length")
    if n < min_len:
        raise WindowTooShort(f"window has {n} bars, need at least {min_len}")
    return out


def _sqrt_clamped(variance):
    return math.sqrt(variance) if variance > 0.0 else 0.0


def parkinson(high, low) -> float:
    high, low = _arrays(high, low)
    hl = np.log(high / low)
    return math.sqrt(np.sum(hl * hl) / (4.0 * len(hl) * LN2))


def garman_klass(open_, high, low, close) -> float:
    open_, high, low, close = _arrays(open_, high, low, close)
    hl = np.log(high / low)
    co = np.log(close / open_)
    return _sqrt_clamped(np.sum(0.5 * hl * hl - GK_CLOSE_COEF * co * co) / len(hl))


def _rs_terms(open_, high, low, close):
    return np.log(high / close) * np.log(high / open_) + np.log(low / close) * np.log(low / open_)


def rogers_satchell(open_, high, low, close) -> float:
    open_, high, low, close = _arrays(open_, high, low, close)
    return _sqrt_clamped(np.mean(_rs_terms(open_, high, low, close)))


def yz_weight(n: int) -> float:
    """Weight k on the open-to-close variance for an n-period window (n >= 2)."""
    if n < 2:
        raise WindowTooShort("Yang-Zhang needs a window of at least 2 periods")
    return 0.34 / (1.34 + (n + 1) / (n - 1))


class YangZhangParts(NamedTuple):
    overnight: float
    open_close: float
    rogers_satchell: float
    k: float

    @property
    def variance(self) -> float:
        return self.overnight + self.k * self.open_close + (1.0 - self.k) * self.rogers_satchell


def yang_zhang_components(open_, high, low, close) -> YangZhangParts:
    """Variance components over the last N of the N+1 supplied bars.

    Bar 0 only contributes its close, as the reference for the first
    overnight return.
    """
    open_, high, low, close = _arrays(open_, high, low, close, min_len=3)
    n = len(open_) - 1
    overnight = np.log(open_[1:] / close[:-1])
    open_close = np.log(close[1:] / open_[1:])
    rs = _rs_terms(open_[1:], high[1:], low[1:], close[1:])
    return YangZhangParts(
        float(np.var(overnight, ddof=1)),
        float(np.var(open_close, ddof=1)),
        float(np.mean(rs)),
        yz_weight(n),
    )


def yang_zhang(open_, high, low, close) -> float:
    return _sqrt_clamped(yang_zhang_components(open_, high, low, close).variance)


@dataclass(frozen=True, eq=False)
class VolSeries:
    ticker: str
    estimator: str
    window: int
    dates: np.ndarray
    values: np.ndarray
    clamped: int = 0

    def __len__(self):
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def between(self, start=None, end=None) -> "VolSeries":
        mask = np.ones(len(self), dtype=bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            mask &= self.dates <= np.datetime64(end, "D")
        return VolSeries(self.ticker, self.estimator, self.window,
                         self.dates[mask], self.values[mask], self.clamped)


def _finish(series, kind, window, values, offset):
    neg = values < 0.0
    values = np.where(neg, 0.0, values)
    return VolSeries(
        series.ticker, str(getattr(kind, "value", kind)), window,
        series.dates[offset:].copy(), np.sqrt(values), int(neg.sum()),
    )


def rolling(series: PriceSeries, kind, window: int = DEFAULT_WINDOW) -> VolSeries:
    """Estimator ``kind`` over every trailing ``window``-bar window.

    Each value is stamped with the last date of its window. Yang-Zhang also
    consumes the close before the window, so it yields one point fewer.
    """
    kind = EstimatorKind(kind)
    if window < 1:
        raise WindowTooShort("window must be at least 1")
    o, h, l, c = series.open, series.high, series.low, series.close
    n = len(series)

    if kind is EstimatorKind.YANG_ZHANG:
        k = yz_weight(window)
        if n < window + 1:
            raise SeriesTooShort(f"{series.ticker}: {n} bars, Yang-Zhang window {window} needs {window + 1}")
        overnight = sliding_window_view(np.log(o[1:] / c[:-1]), window).var(axis=1, ddof=1)
        open_close = sliding_window_view(np.log(c[1:] / o[1:]), window).var(axis=1, ddof=1)
        rs = sliding_window_view(_rs_terms(o[1:], h[1:], l[1:], c[1:]), window).mean(axis=1)
        return _finish(series, kind, window, overnight + k * open_close + (1.0 - k) * rs, window)

    if n < window:
        raise SeriesTooShort(f"{series.ticker}: {n} bars, window {window}")
    if kind is EstimatorKind.PARKINSON:
        hl = np.log(h / l)
        var = sliding_window_view(hl * hl, window).sum(axis=1) / (4.0 * window * LN2)
    elif kind is EstimatorKind.GARMAN_KLASS:
        hl = np.log(h / l)
        co = np.log(c / o)
        var = sliding_window_view(0.5 * hl * hl - GK_CLOSE_COEF * co * co, window).sum(axis=1) / window
    else:
        var = sliding_window_view(_rs_terms(o, h, l, c), window).mean(axis=1)
    return _finish(series, kind, window, var, window - 1)


def all_estimators(series: PriceSeries, window: int = DEFAULT_WINDOW) -> dict[str, VolSeries]:
    return {k.value: rolling(series, k, window) for k in EstimatorKind}


def mean_hv(series: PriceSeries, window: int = DEFAULT_WINDOW, parts=None) -> VolSeries:
    """Pointwise average of the four estimators on their shared dates."""
    if len(series) < window + 1:
        raise SeriesTooShort(f"{series.ticker}: {len(series)} bars, mean HV window {window} needs {window + 1}")
    parts = parts or all_estimators(series, window)
    dates = parts[EstimatorKind.YANG_ZHANG.value].dates
    stacked = np.vstack([p.values[len(p) - len(dates):] for p in parts.values()])
    return VolSeries(
        series.ticker, MEAN, window, dates, stacked.mean(axis=0),
        sum(p.clamped for p in parts.values()),
    )


def annualize(values, periods_per_year: int = 252):
    return np.asarray(values) * math.sqrt(periods_per_year)


VOL_HEADER = ("date", "ticker", "estimator", "value")


def write_vol_csv(vs: VolSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VOL_HEADER)
        for d, v in zip(vs.dates, vs.values):
            w.writerow((str(d), vs.ticker, vs.estimator, repr(float(v))))


def read_vol_csv(path, window: int = 0) -> VolSeries:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SeriesTooShort(f"{path}: no rows")
    return VolSeries(
        rows[0]["ticker"], rows[0]["estimator"], window,
        np.array([r["date"] for r in rows], dtype="datetime64[D]"),
        np.array([float(r["value"]) for r in rows]),
    )
