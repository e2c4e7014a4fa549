"""Synthetic candle panels with planted volatility regimes and causal links.

Used by the tests and demos; nothing in the pipeline itself is random.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .marketdata import PriceSeries, write_csv


def business_days(start: str, n: int) -> np.ndarray:
    days = np.arange(np.datetime64(start, "D"), np.datetime64(start, "D") + 2 * n + 14)
    return days[np.is_busday(days)][:n]


def candles_from_returns(ticker, dates, returns, range_vol, rng, start_price=100.0) -> PriceSeries:
    """Build valid OHLC bars whose close-to-close log returns equal ``returns``.

    ``range_vol`` (scalar or per-bar) sets the size of overnight gaps and
    intraday wicks, and so the level the range-based estimators pick up.
    """
    n = len(returns)
    range_vol = np.broadcast_to(np.asarray(range_vol, dtype=np.float64), (n,))
    close = start_price * np.exp(np.cumsum(returns))
    prev_close = np.r_[start_price, close[:-1]]
    gap = rng.normal(0.0, 0.3 * range_vol)
    open_ = prev_close * np.exp(gap)
    top = np.maximum(open_, close) * np.exp(np.abs(rng.normal(0.0, 0.6 * range_vol)))
    bottom = np.minimum(open_, close) * np.exp(-np.abs(rng.normal(0.0, 0.6 * range_vol)))
    return PriceSeries(ticker, dates, open_, top, bottom, close)


@dataclass
class PlantedPanel:
    series: dict
    regimes: dict                 # ticker -> "low" | "mid" | "high"
    edges: list                   # planted (source, target) pairs
    rally_edge: tuple             # edge whose target follows the source's trend
    lag: int
    crash: tuple                  # (first, last) date of the injected stress period
    meta: dict = field(default_factory=dict)

    def write(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for ticker, s in self.series.items():
            write_csv(s, directory / f"{ticker}.csv")
        return directory


def planted_panel(
    n_days: int = 1150,
    start: str = "2019-01-02",
    seed: int = 1,
    base_vol: float = 0.008,
    lag: int = 5,
    follow_beta: float = 0.9,
    chain_beta: float = 0.8,
    crash_at: int = 300,
    crash_len: int = 15,
) -> PlantedPanel:
    """Nine tickers in three volatility regimes (1 : 3 : 9) with a planted chain.

    Mid-regime tickers ``MA``, ``MB``, ``MC`` carry the causal structure:

    * ``MB`` sums ``MA``'s previous ``lag`` returns, so it rallies after
      ``MA`` trends up (the edge a trend follower can profit from);
    * ``MC`` loads on ``MB``'s own innovation exactly ``lag`` bars back, so
      ``MB -> MC`` is only visible at lags >= ``lag`` and ``MA`` carries no
      information about ``MC``.

    All tickers share a stress period (the analogue of a market crash)
    starting at bar ``crash_at``.
    """
    rng = np.random.default_rng(seed)
    dates = business_days(start, n_days)
    levels = {"low": base_vol, "mid": 3 * base_vol, "high": 9 * base_vol}
    names = {"low": ("LA", "LB", "LC"), "mid": ("MA", "MB", "MC"), "high": ("HA", "HB", "HC")}

    stress = np.ones(n_days)
    stress[crash_at: crash_at + crash_len] = 6.0

    sigma = levels["mid"]
    w = 1.0 / np.sqrt(lag)
    drive = rng.normal(0.0, sigma, n_days)
    own_b = rng.normal(0.0, sigma * np.sqrt(max(1.0 - follow_beta**2, 0.05)), n_days)
    past_sum = np.convolve(drive, np.ones(lag), mode="full")[:n_days]
    follow = np.r_[0.0, past_sum[:-1]] * w
    r_b = follow_beta * follow + own_b
    own_c = rng.normal(0.0, sigma * np.sqrt(max(1.0 - chain_beta**2, 0.05)), n_days)
    r_c = own_c + chain_beta * np.r_[np.zeros(lag), own_b[:-lag]]

    returns = {"MA": drive, "MB": r_b, "MC": r_c}
    for regime in ("low", "high"):
        for t in names[regime]:
            returns[t] = rng.normal(0.0, levels[regime], n_days)

    series = {}
    regimes = {}
    for regime, tickers in names.items():
        for t in tickers:
            r = returns[t] * stress
            r[crash_at: crash_at + crash_len] -= 2.0 * levels[regime]
            series[t] = candles_from_returns(t, dates, r, levels[regime] * stress, rng)
            regimes[t] = regime

    order = sorted(series)
    return PlantedPanel(
        {t: series[t] for t in order}, regimes, [("MA", "MB"), ("MB", "MC")], ("MA", "MB"), lag,
        (str(dates[crash_at]), str(dates[crash_at + crash_len - 1])),
        {"seed": seed, "base_vol": base_vol, "dates": (str(dates[0]), str(dates[-1]))},
    )
