"""Run configuration: a YAML file mapped onto nested dataclasses."""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigError

DEFAULT_UNIVERSE = ("MSFT", "GOOGL", "MU", "NVDA", "AMZN", "META", "QCOM", "IBM", "INTC")


@dataclass
class Window:
    start: Optional[dt.date] = None
    end: Optional[dt.date] = None


@dataclass
class Windows:
    analysis: Window = field(default_factory=Window)
    clustering: Window = field(default_factory=Window)
    backtest: Window = field(default_factory=Window)


@dataclass
class VolatilityConfig:
    window: int = 21


@dataclass
class AnomalyConfig:
    k: int = 5
    source: str = "mean_hv"  # mean_hv | close


@dataclass
class ClusteringConfig:
    k: int = 3
    max_iter: int = 100
    band: Optional[int] = None
    seeding: str = "maximin"  # maximin | previous


@dataclass
class GrangerConfig:
    lag_min: int = 2
    lag_max: int = 30
    threshold: float = 0.025
    alpha_text: float = 0.05
    source: str = "log_returns"  # log_returns | close | mean_hv


@dataclass
class StrategySection:
    mode: str = "trend_follow"
    ma_window: int = 5
    mr_k: float = 2.0
    signal_delay: int = 0


@dataclass
class BacktestConfig:
    budget: float = 1000.0
    commission: float = 9.0
    integer_shares: bool = False
    execution: str = "close"  # close | next_open
    close_at_end: bool = True
    ratio_returns: str = "bar"  # bar | trade
    annualize: bool = False


@dataclass
class RunConfig:
    data_dir: Path = Path("data")
    tickers: list = field(default_factory=lambda: list(DEFAULT_UNIVERSE))
    output_dir: Path = Path("out")
    file_pattern: str = "{ticker}.csv"
    workers: int = 1
    windows: Windows = field(default_factory=Windows)
    volatility: VolatilityConfig = field(default_factory=VolatilityConfig)
    anomaly: AnomalyConfig = field(default_factory=AnomalyConfig)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    granger: GrangerConfig = field(default_factory=GrangerConfig)
    strategy: StrategySection = field(default_factory=StrategySection)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)

    @property
    def lags(self) -> range:
        return range(self.granger.lag_min, self.granger.lag_max + 1)

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, (Path, dt.date)):
                return str(v)
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            if isinstance(v, list):
                return [conv(x) for x in v]
            return v
        return conv(dataclasses.asdict(self))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _date(value, where, problems):
    if value is None or isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError:
        problems.append(f"{where}: not an ISO date: {value!r}")
        return None


def _build(cls, data, where, problems):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        problems.append(f"{where}: expected a mapping")
        return cls()
    kwargs = {}
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in known:
            problems.append(f"{where}: unknown key '{key}'")
            continue
        f = known[key]
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, f"{where}.{key}", problems)
        elif cls is Window:
            kwargs[key] = _date(value, f"{where}.{key}", problems)
        elif isinstance(default, Path):
            kwargs[key] = Path(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def from_dict(data: dict, base_dir=None) -> RunConfig:
    problems: list = []
    cfg = _build(RunConfig, data or {}, "config", problems)
    if problems:
        raise ConfigError(problems)
    if base_dir is not None:
        base_dir = Path(base_dir)
        if not cfg.data_dir.is_absolute():
            cfg.data_dir = base_dir / cfg.data_dir
        if not cfg.output_dir.is_absolute():
            cfg.output_dir = base_dir / cfg.output_dir
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_dict(data, base_dir=path.parent)


def check(cfg: RunConfig) -> list[str]:
    """Every invariant violation in ``cfg`` (data files are not touched)."""
    problems = []
    if not cfg.tickers:
        problems.append("ticker list is empty")
    if len(set(cfg.tickers)) != len(cfg.tickers):
        problems.append("ticker list has duplicates")
    for name in ("analysis", "clustering", "backtest"):
        w = getattr(cfg.windows, name)
        if w.start and w.end and w.start > w.end:
            problems.append(f"{name} window starts after it ends ({w.start} > {w.end})")
    if cfg.volatility.window < 2:
        problems.append("volatility window must be >= 2")
    if cfg.anomaly.k < 1:
        problems.append("anomaly k must be >= 1")
    if cfg.anomaly.source not in ("mean_hv", "close"):
        problems.append(f"anomaly source must be mean_hv or close, got {cfg.anomaly.source!r}")
    if cfg.clustering.k < 1:
        problems.append("cluster K must be ≥ 1")
    if cfg.clustering.max_iter < 1:
        problems.append("cluster max_iter must be >= 1")
    if cfg.clustering.band is not None and cfg.clustering.band < 0:
        problems.append("DTW band radius must be >= 0")
    if cfg.clustering.seeding not in ("maximin", "previous"):
        problems.append(f"cluster seeding must be maximin or previous, got {cfg.clustering.seeding!r}")
    if cfg.tickers and cfg.clustering.k > len(cfg.tickers):
        problems.append(f"cluster K={cfg.clustering.k} exceeds ticker count {len(cfg.tickers)}")
    g = cfg.granger
    if not 1 <= g.lag_min <= g.lag_max:
        problems.append(f"granger lag range [{g.lag_min}, {g.lag_max}] is not well-ordered and >= 1")
    if not 0 < g.threshold < 1:
        problems.append("granger threshold must lie in (0, 1)")
    if not 0 < g.alpha_text < 1:
        problems.append("granger alpha_text must lie in (0, 1)")
    if g.source not in ("log_returns", "close", "mean_hv"):
        problems.append(f"granger source must be log_returns, close or mean_hv, got {g.source!r}")
    s = cfg.strategy
    if s.mode not in ("trend_follow", "mean_reversion", "buy_hold"):
        problems.append(f"unknown strategy mode {s.mode!r}")
    if s.ma_window < 1:
        problems.append("strategy ma_window must be >= 1")
    if not s.mr_k > 0:
        problems.append("strategy mr_k must be > 0")
    if s.signal_delay < 0:
        problems.append("strategy signal_delay must be >= 0")
    b = cfg.backtest
    if not b.budget > 0:
        problems.append("budget must be > 0")
    if b.commission < 0:
        problems.append("commission must be >= 0")
    if b.budget <= b.commission:
        problems.append("budget must exceed one commission")
    if b.execution not in ("close", "next_open"):
        problems.append(f"backtest execution must be close or next_open, got {b.execution!r}")
    if b.ratio_returns not in ("bar", "trade"):
        problems.append(f"backtest ratio_returns must be bar or trade, got {b.ratio_returns!r}")
    if cfg.workers < 1:
        problems.append("workers must be >= 1")
    return problems
