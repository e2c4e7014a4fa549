"""Pipeline stages with on-disk artifacts and a run manifest.

Every stage reads its inputs from the output directory, writes its own
artifacts there and records input/output hashes in ``manifest.json``.
Running ``pipeline`` is exactly running the stages in order.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import anomaly, backtest, causality, clustering, volatility
from .config import RunConfig, check
from .dtw import DtwConfig
from .errors import ConfigError, EmptyWindow, StageError, VoltsError
from .marketdata import CsvProvider, Panel, PriceSeries, align, slice_window, to_day
from .strategy import StrategyConfig, generate, write_signals_csv

log = logging.getLogger(__name__)

STAGES = ("ingest", "volatility", "anomaly", "cluster", "granger", "backtest", "report")
PANEL_FILE = "panel.csv"
MANIFEST_FILE = "manifest.json"


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


class Manifest:
    def __init__(self, out_dir: Path, cfg: RunConfig):
        self.path = out_dir / MANIFEST_FILE
        self.out_dir = out_dir
        self.data = _load(self.path) if self.path.exists() else {}
        self.data.setdefault("stages", {})
        self.data["config"] = cfg.to_dict()
        self.data["config_hash"] = cfg.digest()

    def record(self, stage, inputs, outputs, **facts):
        rel = lambda p: str(Path(p).relative_to(self.out_dir)) if Path(p).is_relative_to(self.out_dir) else str(p)
        self.data["stages"][stage] = {
            "inputs": {rel(p): sha256(p) for p in sorted(map(str, inputs))},
            "outputs": {rel(p): sha256(p) for p in sorted(map(str, outputs))},
            "completed_at": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        }
        self.data.update(facts)
        self.save()

    def save(self):
        _dump(self.data, self.path)

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)


# --- artifact io -------------------------------------------------------------

def write_panel(panel: Panel, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("date,ticker,open,high,low,close\n")
        for j, t in enumerate(panel.tickers):
            for i, d in enumerate(panel.dates):
                o, h, l, c = (float(getattr(panel, f)[i, j]) for f in ("open", "high", "low", "close"))
                fh.write(f"{d},{t},{o!r},{h!r},{l!r},{c!r}\n")


def read_panel(path) -> Panel:
    rows = Path(path).read_text(encoding="utf-8").splitlines()[1:]
    by_ticker = {}
    for line in rows:
        d, t, o, h, l, c = line.split(",")
        by_ticker.setdefault(t, []).append((d, float(o), float(h), float(l), float(c)))
    series = []
    for t, recs in by_ticker.items():
        d, o, h, l, c = zip(*recs)
        series.append(PriceSeries(t, np.array(d, dtype="datetime64[D]"), o, h, l, c))
    if len(series) == 1:
        s = series[0]
        return Panel((s.ticker,), s.dates, s.open[:, None], s.high[:, None], s.low[:, None], s.close[:, None])
    return align(series)


def _vol_path(out_dir, ticker, est):
    return Path(out_dir) / "volatility" / f"{ticker}_{est}.csv"


def _window(panel_dates, w):
    start = to_day(w.start) if w.start else panel_dates[0]
    end = to_day(w.end) if w.end else panel_dates[-1]
    return start, end


def _map(cfg, fn, items):
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# --- stages ------------------------------------------------------------------

def cmd_ingest(cfg: RunConfig, out_dir: Path, manifest: Manifest):
    provider = CsvProvider(cfg.data_dir, cfg.file_pattern)
    paths = [provider.path_for(t) for t in cfg.tickers]
    missing = [t for t, p in zip(cfg.tickers, paths) if not p.exists()]
    if missing:
        raise FileNotFoundError(f"missing data file for ticker(s): {', '.join(missing)}")

    def load(t):
        try:
            return provider.fetch(t)
        except VoltsError as exc:
            raise VoltsError(f"{t}: {exc}") from exc

    series = _map(cfg, load, cfg.tickers)
    if len(series) == 1:
        s = series[0]
        panel = Panel((s.ticker,), s.dates, s.open[:, None], s.high[:, None], s.low[:, None], s.close[:, None])
    else:
        panel = align(series)
    start, end = _window(panel.dates, cfg.windows.analysis)
    panel = slice_window(panel, start, end)
    out = out_dir / PANEL_FILE
    write_panel(panel, out)
    manifest.record("ingest", paths, [out], data_range=[str(panel.dates[0]), str(panel.dates[-1])])
    return panel


def cmd_volatility(cfg: RunConfig, out_dir: Path, manifest: Manifest):
    panel = read_panel(out_dir / PANEL_FILE)
    (out_dir / "volatility").mkdir(exist_ok=True)
    n = cfg.volatility.window

    def run(ticker):
        s = panel.series(ticker)
        try:
            parts = volatility.all_estimators(s, n)
            parts[volatility.MEAN] = volatility.mean_hv(s, n, parts)
        except VoltsError as exc:
            raise VoltsError(f"{ticker}: {exc}") from exc
        paths = []
        for est, vs in parts.items():
            p = _vol_path(out_dir, ticker, est)
            volatility.write_vol_csv(vs, p)
            paths.append(p)
        return paths, sum(v.clamped for k, v in parts.items() if k != volatility.MEAN)

    results = _map(cfg, run, panel.tickers)
    outputs = [p for paths, _ in results for p in paths]
    clamped = {t: c for t, (_, c) in zip(panel.tickers, results)}
    manifest.record("volatility", [out_dir / PANEL_FILE], outputs, clamped_radicands=clamped)
    return outputs


def _mean_hv(out_dir, ticker, window):
    return volatility.read_vol_csv(_vol_path(out_dir, ticker, volatility.MEAN), window)


def cmd_anomaly(cfg: RunConfig, out_dir: Path, manifest: Manifest):
    panel = read_panel(out_dir / PANEL_FILE)
    (out_dir / "anomaly").mkdir(exist_ok=True)
    reports, inputs, outputs = [], [], []
    for t in panel.tickers:
        if cfg.anomaly.source == "mean_hv":
            p = _vol_path(out_dir, t, volatility.MEAN)
            vs = volatility.read_vol_csv(p)
            dates, values = vs.dates, vs.values
            inputs.append(p)
        else:
            dates, values = panel.dates, panel.series(t).close
        rep = anomaly.detect(anomaly.knn_scores(values, cfg.anomaly.k), dates)
        out = out_dir / "anomaly" / f"{t}.csv"
        anomaly.write_report_csv(rep, out)
        reports.append(rep)
        outputs.append(out)
    calendar = reports[0].dates
    flags = anomaly.union_flags(reports, calendar)
    start, end = anomaly.clean_window(flags, calendar)
    window = {
        "start": str(start), "end": str(end),
        "flagged_dates": [str(d) for d in calendar[flags]],
        "per_ticker": {t: [str(d) for d in r.flagged_dates] for t, r in zip(panel.tickers, reports)},
        "degenerate": [t for t, r in zip(panel.tickers, reports) if r.status != "ok"],
    }
    wpath = out_dir / "anomaly" / "window.json"
    _dump(window, wpath)
    manifest.record("anomaly", [out_dir / PANEL_FILE] + inputs, outputs + [wpath],
                    clean_window=[window["start"], window["end"]])
    return window


def _analysis_range(out_dir, cfg, panel_dates, which):
    clean = _load(out_dir / "anomaly" / "window.json")
    start, end = _window(panel_dates, getattr(cfg.windows, which))
    start = max(start, to_day(clean["start"]))
    end = min(end, to_day(clean["end"]))
    if start > end:
        raise EmptyWindow(f"{which} window lies outside the clean window {clean['start']}..{clean['end']}")
    return start, end


def cmd_cluster(cfg: RunConfig, out_dir: Path, manifest: Manifest):
    panel = read_panel(out_dir / PANEL_FILE)
    start, end = _analysis_range(out_dir, cfg, panel.dates, "clustering")
    series = [_mean_hv(out_dir, t, cfg.volatility.window).between(start, end) for t in panel.tickers]
    if any(len(s) == 0 for s in series):
        raise EmptyWindow(f"no volatility values in clustering window {start}..{end}")
    res = clustering.kmeans_dtw(
        series, cfg.clustering.k, cfg.clustering.max_iter, DtwConfig(cfg.clustering.band),
        names=panel.tickers, workers=cfg.workers, seeding=cfg.clustering.seeding,
    )
    doc = res.to_dict()
    doc["window"] = [str(start), str(end)]
    if res.k == 3:
        doc["mid_cluster"] = clustering.pick_mid_cluster(res, series)
    else:
        doc["mid_cluster"] = list(panel.tickers)
        log.warning("K=%d: no mid cluster, passing every ticker to the causality stage", res.k)
    out = out_dir / "clusters.json"
    _dump(doc, out)
    manifest.record(
        "cluster", [out_dir / PANEL_FILE, out_dir / "anomaly" / "window.json"]
        + [_vol_path(out_dir, t, volatility.MEAN) for t in panel.tickers], [out],
        mid_cluster=doc["mid_cluster"], label_tie=res.label_tie,
    )
    return doc


def source_series(panel: Panel, tickers, source: str, out_dir=None, window=None, start=None, end=None):
    """Per-ticker series the Granger tests consume."""
    sub = slice_window(panel.subset(tickers), start, end)
    if source == "log_returns":
        return {t: np.diff(np.log(sub.series(t).close)) for t in tickers}
    if source == "close":
        return {t: sub.series(t).close.copy() for t in tickers}
    if source == "mean_hv":
        return {t: _mean_hv(out_dir, t, window).between(start, end).values for t in tickers}
    raise ValueError(f"unknown granger source {source!r}")


def cmd_granger(cfg: RunConfig, out_dir: Path, manifest: Manifest):
    panel = read_panel(out_dir / PANEL_FILE)
    clusters = _load(out_dir / "clusters.json")
    tickers = clusters["mid_cluster"]
    start, end = (to_day(d) for d in clusters["window"])
    data = source_series(panel, tickers, cfg.granger.source, out_dir, cfg.volatility.window, start, end)
    graph = causality.lag_sweep(data, cfg.lags, cfg.granger.threshold, cfg.workers)
    jpath, dpath = out_dir / "causal_graph.json", out_dir / "causal_graph.dot"
    jpath.write_text(graph.to_json() + "\n", encoding="utf-8")
    dpath.write_text(graph.to_dot(), encoding="utf-8")
    manifest.record("granger", [out_dir / PANEL_FILE, out_dir / "clusters.json"], [jpath, dpath],
                    chosen_lag=graph.lag, pruned_edges=[e.name for e in graph.removed])
    return graph


def _result_to_dict(r: backtest.BacktestResult) -> dict:
    return {
        "edge": r.edge, "dates": [str(d) for d in r.dates], "equity": r.equity.tolist(),
        "cash": r.cash.tolist(), "position": r.position.tolist(), "close": r.close.tolist(),
        "exposed": r.exposed.astype(int).tolist(), "budget": r.budget, "commission": r.commission,
        "trades": [t.to_dict() for t in r.trades], "metrics": r.metrics,
    }


def _result_from_dict(d: dict) -> backtest.BacktestResult:
    trades = tuple(
        backtest.Trade(np.datetime64(t["entry_date"]), t["entry_price"], np.datetime64(t["exit_date"]),
                       t["exit_price"], t["quantity"], t["pnl"], t["commission"],
                       t["entry_cash"], t["forced_exit"])
        for t in d["trades"]
    )
    return backtest.BacktestResult(
        d["edge"], np.array(d["dates"], dtype="datetime64[D]"), np.array(d["equity"]),
        np.array(d["cash"]), np.array(d["position"]), np.array(d["close"]),
        np.array(d["exposed"], dtype=bool), trades, d["budget"], d["commission"], dict(d["metrics"]),
    )


def cmd_backtest(cfg: RunConfig, out_dir: Path, manifest: Manifest):
    panel = read_panel(out_dir / PANEL_FILE)
    graph = causality.CausalGraph.from_dict(_load(out_dir / "causal_graph.json"))
    start, end = _window(panel.dates, cfg.windows.backtest)
    bt = slice_window(panel, start, end)
    scfg = StrategyConfig(cfg.strategy.ma_window, cfg.strategy.mr_k, cfg.strategy.mode, cfg.strategy.signal_delay)
    b = cfg.backtest
    (out_dir / "signals").mkdir(exist_ok=True)
    (out_dir / "equity").mkdir(exist_ok=True)
    results, outputs, extra = [], [], {}
    for e in sorted(graph.edges):
        pred, tgt = bt.series(e.source), bt.series(e.target)
        sig = generate(scfg, pred, tgt, e.name)
        res = backtest.simulate(
            tgt, sig, b.budget, b.commission, e.name, b.integer_shares, b.execution,
            b.close_at_end, b.ratio_returns, b.annualize,
        )
        spath = out_dir / "signals" / f"{e.source}_{e.target}.csv"
        epath = out_dir / "equity" / f"{e.source}_{e.target}.csv"
        write_signals_csv(sig, spath)
        backtest.write_equity_csv(res, epath)
        outputs += [spath, epath]
        results.append(_result_to_dict(res))
        extra[e.name] = {"buy_and_hold_pct": 100.0 * backtest.buy_and_hold_return(tgt),
                         "lag": e.lag, "p_value": e.p_value}
    out = out_dir / "backtest.json"
    _dump({"window": [str(bt.dates[0]), str(bt.dates[-1])], "results": results, "extra": extra}, out)
    manifest.record("backtest", [out_dir / PANEL_FILE, out_dir / "causal_graph.json"], outputs + [out])
    return results


def cmd_report(cfg: RunConfig, out_dir: Path, manifest: Manifest):
    doc = _load(out_dir / "backtest.json")
    results = [_result_from_dict(d) for d in doc["results"]]
    rep = backtest.report(results, cfg.backtest.ratio_returns, cfg.backtest.annualize, doc["extra"])
    rep["window"] = doc["window"]
    rep["settings"].update(granger_threshold=cfg.granger.threshold, granger_alpha_text=cfg.granger.alpha_text)
    jpath, cpath = backtest.write_report(rep, out_dir)
    manifest.record("report", [out_dir / "backtest.json"], [jpath, cpath])
    return rep


STAGE_FUNCS = {
    "ingest": cmd_ingest,
    "volatility": cmd_volatility,
    "anomaly": cmd_anomaly,
    "cluster": cmd_cluster,
    "granger": cmd_granger,
    "backtest": cmd_backtest,
    "report": cmd_report,
}


def cmd_validate(cfg: RunConfig) -> list[str]:
    """Config invariants plus data availability and window coverage."""
    problems = check(cfg)
    provider = CsvProvider(cfg.data_dir, cfg.file_pattern)
    first, last = [], []
    for t in cfg.tickers:
        path = provider.path_for(t)
        if not path.exists():
            problems.append(f"missing data file for ticker {t}: {path}")
            continue
        try:
            s = provider.fetch(t)
        except VoltsError as exc:
            problems.append(f"{t}: {exc}")
            continue
        first.append(s.dates[0])
        last.append(s.dates[-1])
    if first:
        lo, hi = max(first), min(last)
        if lo > hi:
            problems.append("ticker files share no common date range")
        for name in ("analysis", "clustering", "backtest"):
            w = getattr(cfg.windows, name)
            if w.end and to_day(w.end) < lo:
                problems.append(f"{name} window ends {w.end}, before the data starts ({lo})")
            if w.start and to_day(w.start) > hi:
                problems.append(f"{name} window starts {w.start}, after the data ends ({hi})")
    return problems


def run_stage(name: str, cfg: RunConfig, out_dir=None):
    out_dir = Path(out_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out_dir, cfg)
    try:
        result = STAGE_FUNCS[name](cfg, out_dir, manifest)
    except (VoltsError, OSError, ValueError, KeyError) as exc:
        manifest.data["failed_stage"] = name
        manifest.data["error"] = str(exc)
        manifest.save()
        raise StageError(name, exc) from exc
    manifest.data.pop("failed_stage", None)
    manifest.data.pop("error", None)
    manifest.save()
    return result


def run_pipeline(cfg: RunConfig, out_dir=None, stage_from: str = "ingest"):
    """Validate, then run every stage from ``stage_from`` onward."""
    problems = check(cfg)
    if problems:
        raise ConfigError(problems)
    if stage_from not in STAGES:
        raise ConfigError(f"unknown stage {stage_from!r}")
    result = None
    for name in STAGES[STAGES.index(stage_from):]:
        log.info("stage %s", name)
        result = run_stage(name, cfg, out_dir)
    return result
