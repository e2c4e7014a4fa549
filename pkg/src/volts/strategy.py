"""Long-only signal generators: trend following, mean reversion, buy and hold.

Trend-following signals are computed on a predictor's closes but meant to
be executed on the predictor's Granger target.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import SeriesTooShort
from .marketdata import PriceSeries, to_day


class Action(str, enum.Enum):
    BUY = "Buy"
    SELL = "Sell"
    HOLD = "Hold"


class Mode(str, enum.Enum):
    TREND_FOLLOW = "trend_follow"
    MEAN_REVERSION = "mean_reversion"
    BUY_HOLD = "buy_hold"


@dataclass(frozen=True)
class Signal:
    date: np.datetime64
    action: Action
    edge: Optional[str] = None


@dataclass(frozen=True)
class StrategyConfig:
    ma_window: int = 5
    mr_k: float = 2.0
    mode: Mode = Mode.TREND_FOLLOW
    signal_delay: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.ma_window < 1:
            raise ValueError("ma_window must be >= 1")
        if not self.mr_k > 0:
            raise ValueError("mr_k must be > 0")
        if self.signal_delay < 0:
            raise ValueError("signal_delay must be >= 0")


def moving_average(close, w: int) -> np.ndarray:
    """Trailing simple mean of ``w`` closes, one value per full window."""
    close = np.asarray(close, dtype=np.float64)
    if w < 1:
        raise ValueError("window must be >= 1")
    if len(close) < w:
        raise SeriesTooShort(f"{len(close)} closes for moving average window {w}")
    return np.lib.stride_tricks.sliding_window_view(close, w).mean(axis=1)


def _emit(dates, wants_long, edge):
    """Turn a per-date desired position into an alternating Buy/Sell/Hold stream."""
    out = []
    held = False
    for d, want in zip(dates, wants_long):
        if want is None or want == held:
            out.append(Signal(d, Action.HOLD, edge))
        else:
            held = want
            out.append(Signal(d, Action.BUY if want else Action.SELL, edge))
    return out


def tf_signals(predictor: PriceSeries, cfg: StrategyConfig = StrategyConfig(), edge=None) -> list[Signal]:
    """Long while the predictor closes at or above its moving average."""
    w = cfg.ma_window
    ma = moving_average(predictor.close, w)
    above = predictor.close[w - 1:] >= ma
    return _emit(predictor.dates[w - 1:], [bool(a) for a in above], edge)


def mr_signals(series: PriceSeries, cfg: StrategyConfig = StrategyConfig(), edge=None) -> list[Signal]:
    """Enter below mean - k*sd, exit above mean + k*sd.

    Mean and (population) sd come from the ``ma_window`` closes before the
    current bar. A zero sd never triggers anything.
    """
    w = cfg.ma_window
    close = series.close
    if len(close) < 2 or len(close) <= w:
        raise SeriesTooShort(f"{len(close)} closes for mean-reversion window {w}")
    windows = np.lib.stride_tricks.sliding_window_view(close[:-1], w)
    mu = windows.mean(axis=1)
    sd = windows.std(axis=1)
    cur = close[w:]
    out = []
    held = False
    for d, c, m, s in zip(series.dates[w:], cur, mu, sd):
        action = Action.HOLD
        if s > 0:
            if not held and c < m - cfg.mr_k * s:
                action, held = Action.BUY, True
            elif held and c > m + cfg.mr_k * s:
                action, held = Action.SELL, False
        out.append(Signal(d, action, edge))
    return out


def bh_signals(series: PriceSeries, edge=None) -> list[Signal]:
    if len(series) < 2:
        raise SeriesTooShort("buy and hold needs at least 2 bars")
    actions = [Action.BUY] + [Action.HOLD] * (len(series) - 2) + [Action.SELL]
    return [Signal(d, a, edge) for d, a in zip(series.dates, actions)]


def delay_signals(signals: list[Signal], calendar, bars: int) -> list[Signal]:
    """Shift every Buy/Sell ``bars`` dates later on ``calendar``.

    Actions pushed past the calendar end are dropped; since only a tail is
    lost the stream stays alternating.
    """
    if bars == 0:
        return list(signals)
    calendar = np.asarray(calendar, dtype="datetime64[D]")
    index = {d: i for i, d in enumerate(calendar)}
    edge = signals[0].edge if signals else None
    moved = {}
    for s in signals:
        if s.action is Action.HOLD:
            continue
        j = index[to_day(s.date)] + bars
        if j < len(calendar):
            moved[j] = s.action
    start = index[to_day(signals[0].date)] if signals else 0
    return [Signal(calendar[i], moved.get(i, Action.HOLD), edge) for i in range(start, len(calendar))]


def generate(cfg: StrategyConfig, predictor: PriceSeries, target: PriceSeries, edge=None) -> list[Signal]:
    if cfg.mode is Mode.TREND_FOLLOW:
        sig = tf_signals(predictor, cfg, edge)
    elif cfg.mode is Mode.MEAN_REVERSION:
        sig = mr_signals(target, cfg, edge)
    else:
        sig = bh_signals(target, edge)
    return delay_signals(sig, target.dates, cfg.signal_delay)


def write_signals_csv(signals, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "edge", "action"))
        for s in signals:
            w.writerow((str(s.date), s.edge or "", s.action.value))
