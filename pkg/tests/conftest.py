import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from volts.marketdata import PriceSeries
from volts.synthetic import business_days, planted_panel

settings.register_profile("volts", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("volts")


def random_candles(rng, n, ticker="T", start="2021-01-04", vol=0.02, price=100.0):
    """Valid random OHLC bars: gap, body and two wicks drawn independently."""
    dates = business_days(start, n)
    close = price * np.exp(np.cumsum(rng.normal(0.0, vol, n)))
    prev = np.r_[price, close[:-1]]
    open_ = prev * np.exp(rng.normal(0.0, vol / 3, n))
    high = np.maximum(open_, close) * np.exp(np.abs(rng.normal(0.0, vol, n)))
    low = np.minimum(open_, close) * np.exp(-np.abs(rng.normal(0.0, vol, n)))
    return PriceSeries(ticker, dates, open_, high, low, close)


def flat_candles(n, price=50.0, ticker="FLAT"):
    dates = business_days("2021-01-04", n)
    p = np.full(n, price)
    return PriceSeries(ticker, dates, p, p, p, p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


PLANTED_YAML = """\
data_dir: data
output_dir: out
tickers: [{tickers}]
windows:
  clustering: {{start: 2021-06-01, end: 2023-05-01}}
  backtest: {{start: 2022-06-01}}
"""


def write_planted_run(directory, seed=1, extra=""):
    """Planted panel CSVs plus a run config beside them; returns the config path."""
    panel = planted_panel(seed=seed)
    panel.write(directory / "data")
    path = directory / "run.yaml"
    path.write_text(PLANTED_YAML.format(tickers=", ".join(panel.series)) + extra, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def planted_run(tmp_path_factory):
    return write_planted_run(tmp_path_factory.mktemp("planted"))


# --- acceptance summary ------------------------------------------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, {"title": title, "ok": True})
    if rep.failed or (rep.when == "call" and rep.skipped):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if e['ok'] else 'FAIL'}  {e['title']}")
