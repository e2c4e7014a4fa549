"""Compounded, long-only trade simulation and risk-adjusted metrics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BudgetExhausted, NoDownside, SeriesTooShort, SignalOutOfCalendar, ZeroDrawdown, ZeroVariance,
)
from .marketdata import PriceSeries, to_day
from .strategy import Action

DEFAULT_BUDGET = 1000.0
DEFAULT_COMMISSION = 9.0
PERIODS_PER_YEAR = 252
REPORT_FIELDS = (
    "stock_pair", "num_trades", "win_rate_pct", "total_return", "sharpe", "sortino", "calmar", "mdd_pct",
)
NA = "n/a"


@dataclass(frozen=True)
class Trade:
    entry_date: np.datetime64
    entry_price: float
    exit_date: np.datetime64
    exit_price: float
    quantity: float
    pnl: float
    commission: float
    entry_cash: float
    forced_exit: bool = False

    @property
    def ret(self) -> float:
        return self.pnl / self.entry_cash

    def to_dict(self) -> dict:
        return {
            "entry_date": str(self.entry_date), "entry_price": self.entry_price,
            "exit_date": str(self.exit_date), "exit_price": self.exit_price,
            "quantity": self.quantity, "pnl": self.pnl, "commission": self.commission,
            "entry_cash": self.entry_cash, "forced_exit": self.forced_exit,
        }


@dataclass(frozen=True, eq=False)
class BacktestResult:
    edge: str
    dates: np.ndarray
    equity: np.ndarray
    cash: np.ndarray
    position: np.ndarray
    close: np.ndarray
    exposed: np.ndarray
    trades: tuple
    budget: float
    commission: float
    metrics: dict = field(default_factory=dict)


# --- metrics -----------------------------------------------------------------

def equity_returns(curve) -> np.ndarray:
    v = np.asarray(curve, dtype=np.float64)
    return v[1:] / v[:-1] - 1.0


def total_return(curve) -> float:
    v = np.asarray(curve, dtype=np.float64)
    if len(v) < 2:
        raise SeriesTooShort("total return needs at least 2 points")
    return float((v[-1] - v[0]) / v[0])


def max_drawdown(curve) -> float:
    """Largest peak-to-trough decline as a fraction of the running peak."""
    v = np.asarray(curve, dtype=np.float64)
    if len(v) == 0:
        raise SeriesTooShort("empty curve")
    peak = np.maximum.accumulate(v)
    return float(np.max((peak - v) / peak))


def sharpe(returns) -> float:
    r = np.asarray(returns, dtype=np.float64)
    if len(r) < 2:
        raise SeriesTooShort("sharpe needs at least 2 returns")
    sd = float(np.std(r))
    if sd == 0.0 or sd < 1e-15 * float(np.max(np.abs(r))):
        raise ZeroVariance("returns have zero variance")
    return float(np.mean(r)) / sd


def downside_deviation(returns) -> float:
    """Root mean square of the strictly negative returns."""
    r = np.asarray(returns, dtype=np.float64)
    neg = r[r < 0]
    if neg.size == 0:
        raise NoDownside("no negative returns")
    return math.sqrt(float(np.mean(neg * neg)))


def sortino(returns) -> float:
    r = np.asarray(returns, dtype=np.float64)
    return float(np.mean(r)) / downside_deviation(r)


def calmar(returns, curve) -> float:
    mdd = max_drawdown(curve)
    if mdd == 0.0:
        raise ZeroDrawdown("curve never draws down")
    return float(np.mean(returns)) / mdd


def standardized_returns(returns) -> np.ndarray:
    r = np.asarray(returns, dtype=np.float64)
    sd = float(np.std(r))
    if sd == 0.0:
        raise ZeroVariance("returns have zero variance")
    return (r - np.mean(r)) / sd


def _maybe(fn, *args):
    try:
        return fn(*args)
    except (ZeroVariance, NoDownside, ZeroDrawdown, SeriesTooShort):
        return None


def compute_metrics(res: BacktestResult, ratio_returns: str = "bar", annualize: bool = False) -> dict:
    """Metric suite for one simulated run.

    Ratios use per-bar equity returns by default, or per-trade returns with
    ``ratio_returns="trade"``. Undefined ratios come back as None.
    """
    if ratio_returns == "trade":
        rets = np.array([t.ret for t in res.trades])
    elif ratio_returns == "bar":
        rets = equity_returns(res.equity)
    else:
        raise ValueError(f"unknown ratio_returns mode {ratio_returns!r}")
    scale = math.sqrt(PERIODS_PER_YEAR) if annualize else 1.0
    sr = _maybe(sharpe, rets)
    so = _maybe(sortino, rets)
    cr = _maybe(calmar, rets, res.equity) if len(rets) else None
    winners = sum(1 for t in res.trades if t.pnl > 0)
    n = len(res.trades)
    return {
        "num_trades": n,
        "winners": winners,
        "win_rate_pct": 100.0 * winners / n if n else 0.0,
        "final_equity": float(res.equity[-1]),
        "total_return": float(res.equity[-1]),
        "total_return_pct": 100.0 * total_return(res.equity) if len(res.equity) > 1 else 0.0,
        "sharpe": None if sr is None else sr * scale,
        "sortino": None if so is None else so * scale,
        "calmar": cr,
        "mdd_pct": 100.0 * max_drawdown(res.equity),
        "exposure_pct": 100.0 * float(np.mean(res.exposed)),
    }


# --- simulation --------------------------------------------------------------

def simulate(
    target: PriceSeries,
    signals: Sequence,
    budget: float = DEFAULT_BUDGET,
    commission: float = DEFAULT_COMMISSION,
    edge: Optional[str] = None,
    integer_shares: bool = False,
    execution: str = "close",
    close_at_end: bool = True,
    ratio_returns: str = "bar",
    annualize: bool = False,
) -> BacktestResult:
    """Trade ``target`` on ``signals`` reinvesting the whole cash balance.

    A Buy spends all cash net of one commission on (fractional) shares; a
    Sell liquidates and pays another commission. Orders fill at the signal
    bar's close, or at the next bar's open with ``execution="next_open"``.
    A position still open on the last bar is closed there when
    ``close_at_end`` is set, and a Buy on that bar is ignored. A bar counts as exposed if a position is held at
    any point during it.
    """
    if not budget > commission:
        raise BudgetExhausted(f"budget {budget} does not cover commission {commission}")
    if execution not in ("close", "next_open"):
        raise ValueError(f"unknown execution mode {execution!r}")
    n = len(target)
    index = {d: i for i, d in enumerate(target.dates)}
    orders = {}
    expect = Action.BUY
    for s in signals:
        action = Action(s.action)
        day = to_day(s.date)
        if day not in index:
            raise SignalOutOfCalendar(f"signal on {day} not in {target.ticker} calendar")
        if action is Action.HOLD:
            continue
        if action is not expect:
            raise ValueError(f"signals must alternate Buy/Sell; got {action.value} on {day}")
        expect = Action.SELL if action is Action.BUY else Action.BUY
        i = index[day] + (1 if execution == "next_open" else 0)
        if i < n:
            orders[i] = action
    fill = target.open if execution == "next_open" else target.close

    cash = float(budget)
    qty = 0.0
    entry = None
    trades = []
    equity = np.empty(n)
    cash_arr = np.empty(n)
    pos_arr = np.empty(n)
    exposed = np.zeros(n, dtype=bool)
    for i in range(n):
        was_long = qty > 0
        action = orders.get(i)
        if close_at_end and i == n - 1 and qty > 0 and action is not Action.SELL:
            action = Action.SELL
            forced, price = True, float(target.close[i])
        elif close_at_end and i == n - 1 and action is Action.BUY:
            # entering on the last bar would be closed at once for two commissions
            action, forced, price = None, False, float(fill[i])
        else:
            forced, price = False, float(fill[i])
        if action is Action.BUY and qty == 0:
            if cash <= commission:
                raise BudgetExhausted(f"cash {cash:.2f} cannot cover commission {commission} on {target.dates[i]}")
            q = (cash - commission) / price
            if integer_shares:
                q = math.floor(q)
                if q == 0:
                    raise BudgetExhausted(f"cash {cash:.2f} buys no whole share on {target.dates[i]}")
            entry = (target.dates[i], price, cash)
            cash -= q * price + commission
            qty = q
        elif action is Action.SELL and qty > 0:
            cash += qty * price - commission
            pnl = qty * (price - entry[1]) - 2.0 * commission
            trades.append(Trade(entry[0], entry[1], target.dates[i], price, qty, pnl,
                                2.0 * commission, entry[2], forced))
            qty = 0.0
        exposed[i] = was_long or qty > 0
        equity[i] = cash + qty * target.close[i]
        cash_arr[i] = cash
        pos_arr[i] = qty

    res = BacktestResult(
        edge or target.ticker, target.dates, equity, cash_arr, pos_arr, target.close.copy(),
        exposed, tuple(trades), float(budget), float(commission),
    )
    res.metrics.update(compute_metrics(res, ratio_returns, annualize))
    return res


def buy_and_hold_return(series: PriceSeries) -> float:
    return float(series.close[-1] / series.close[0] - 1.0)


# --- report ------------------------------------------------------------------

def _fmt(value, spec):
    return NA if value is None else format(value, spec)


def _row(name, m):
    return {
        "stock_pair": name,
        "num_trades": m["num_trades"],
        "win_rate_pct": m["win_rate_pct"],
        "total_return": m["total_return"],
        "sharpe": m["sharpe"],
        "sortino": m["sortino"],
        "calmar": m["calmar"],
        "mdd_pct": m["mdd_pct"],
    }


def portfolio(results: Sequence[BacktestResult], ratio_returns="bar", annualize=False) -> BacktestResult:
    """Sum of the per-edge runs, treated as one account."""
    first = results[0]
    equity = np.sum([r.equity for r in results], axis=0)
    res = BacktestResult(
        "PORTFOLIO", first.dates, equity, np.sum([r.cash for r in results], axis=0),
        np.full(len(equity), np.nan), np.full(len(equity), np.nan),
        np.any([r.exposed for r in results], axis=0),
        tuple(t for r in results for t in r.trades),
        sum(r.budget for r in results), first.commission,
    )
    res.metrics.update(compute_metrics(res, ratio_returns, annualize))
    return res


def report(results: Sequence[BacktestResult], ratio_returns="bar", annualize=False, extra=None) -> dict:
    """Per-edge rows in the results-table schema plus a portfolio row."""
    if not results:
        raise ValueError("report needs at least one result")
    results = sorted(results, key=lambda r: r.edge)
    if len({len(r.dates) for r in results}) != 1:
        raise ValueError("results must share one calendar")
    agg = portfolio(results, ratio_returns, annualize)
    rows = [_row(r.edge, r.metrics) for r in results]
    details = {
        r.edge: {
            "exposure_pct": r.metrics["exposure_pct"],
            "total_return_pct": r.metrics["total_return_pct"],
            "winners": r.metrics["winners"],
            "budget": r.budget,
            "trades": [t.to_dict() for t in r.trades],
            **((extra or {}).get(r.edge, {})),
        }
        for r in results
    }
    return {
        "rows": rows,
        "portfolio": _row(agg.edge, agg.metrics),
        "portfolio_details": {
            "budget": agg.budget,
            "exposure_pct": agg.metrics["exposure_pct"],
            "total_return_pct": agg.metrics["total_return_pct"],
        },
        "details": details,
        "settings": {"ratio_returns": ratio_returns, "annualized": annualize},
    }


def report_csv(doc: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for row in doc["rows"] + [doc["portfolio"]]:
        w.writerow([
            row["stock_pair"], row["num_trades"], _fmt(row["win_rate_pct"], ".2f"),
            _fmt(row["total_return"], ".2f"), _fmt(row["sharpe"], ".4f"),
            _fmt(row["sortino"], ".4f"), _fmt(row["calmar"], ".3f"), _fmt(row["mdd_pct"], ".2f"),
        ])
    return buf.getvalue()


def report_json(doc: dict) -> str:
    def na(obj):
        if isinstance(obj, dict):
            return {k: na(v) for k, v in obj.items()}
        if isinstance(obj, list):
            return [na(v) for v in obj]
        return NA if obj is None else obj
    return json.dumps(na(doc), indent=2, sort_keys=True) + "\n"


def write_report(doc: dict, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jpath, cpath = out_dir / "report.json", out_dir / "report.csv"
    jpath.write_text(report_json(doc), encoding="utf-8")
    cpath.write_text(report_csv(doc), encoding="utf-8")
    return jpath, cpath


def write_equity_csv(res: BacktestResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "equity"))
        for d, v in zip(res.dates, res.equity):
            w.writerow((str(d), repr(float(v))))
