import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_candles
from volts.errors import SeriesTooShort
from volts.marketdata import PriceSeries
from volts.strategy import (
    Action, Mode, StrategyConfig, bh_signals, delay_signals, generate, moving_average, mr_signals,
    tf_signals, write_signals_csv,
)
from volts.synthetic import business_days


def closes(values, ticker="P"):
    c = np.asarray(values, dtype=float)
    d = business_days("2022-01-03", len(c))
    return PriceSeries(ticker, d, c, c, c, c)


def actions(signals):
    return [s.action for s in signals if s.action is not Action.HOLD]


def alternating(acts):
    return all(a is (Action.BUY if i % 2 == 0 else Action.SELL) for i, a in enumerate(acts))


def test_moving_average():
    assert moving_average([1, 2, 3, 4], 2).tolist() == [1.5, 2.5, 3.5]
    assert moving_average([7.0] * 6, 3).tolist() == [7.0] * 4
    assert moving_average([3, 1, 2], 1).tolist() == [3, 1, 2]
    with pytest.raises(SeriesTooShort):
        moving_average([1, 2], 3)


def test_tf_rising_predictor_buys_once_then_holds():
    sig = tf_signals(closes(np.arange(1, 21)), StrategyConfig(ma_window=5))
    assert sig[0].action is Action.BUY
    assert all(s.action is Action.HOLD for s in sig[1:])
    assert sig[0].date == closes(np.arange(1, 21)).dates[4]


def test_tf_flat_predictor_is_long():
    sig = tf_signals(closes([5.0] * 10), StrategyConfig(ma_window=3))
    assert actions(sig) == [Action.BUY]


def test_tf_single_crossing_gives_one_round_trip():
    up = list(range(10, 20))
    down = list(range(19, 5, -1))
    assert actions(tf_signals(closes(up + down), StrategyConfig(ma_window=3))) == [Action.BUY, Action.SELL]


def test_mr_constant_series_never_trades():
    assert actions(mr_signals(closes([3.0] * 30))) == []


def test_mr_dip_and_recovery_one_round_trip():
    c = [10.0, 10.2, 9.8, 10.1, 9.9, 10.0, 7.0, 7.2, 7.1, 7.3, 7.0, 7.2, 12.0]
    acts = actions(mr_signals(closes(c), StrategyConfig(ma_window=5, mr_k=1.5)))
    assert acts == [Action.BUY, Action.SELL]


def test_mr_huge_k_never_trades(rng):
    assert actions(mr_signals(random_candles(rng, 200), StrategyConfig(mr_k=1e9))) == []


def test_bh_signals():
    two = bh_signals(closes([100.0, 110.0]))
    assert [s.action for s in two] == [Action.BUY, Action.SELL]
    many = bh_signals(closes(np.linspace(1, 2, 30)))
    assert actions(many) == [Action.BUY, Action.SELL]
    with pytest.raises(SeriesTooShort):
        bh_signals(closes([1.0]))


def test_delay_signals_shifts_on_calendar(rng):
    s = random_candles(rng, 60)
    sig = tf_signals(s)
    moved = delay_signals(sig, s.dates, 5)
    src = [(s_.date, s_.action) for s_ in sig if s_.action is not Action.HOLD]
    idx = {d: i for i, d in enumerate(s.dates)}
    got = {idx[m.date]: m.action for m in moved if m.action is not Action.HOLD}
    for d, a in src:
        if idx[d] + 5 < len(s):
            assert got[idx[d] + 5] is a
    assert alternating(actions(moved))


def test_generate_modes(rng):
    a, b = random_candles(rng, 80, "A"), random_candles(rng, 80, "B")
    tf = generate(StrategyConfig(), a, b, "A->B")
    assert tf == tf_signals(a, StrategyConfig(), "A->B")
    mr = generate(StrategyConfig(mode=Mode.MEAN_REVERSION), a, b)
    assert mr == mr_signals(b)
    bh = generate(StrategyConfig(mode="buy_hold"), a, b)
    assert actions(bh) == [Action.BUY, Action.SELL]


def test_config_validation():
    with pytest.raises(ValueError):
        StrategyConfig(ma_window=0)
    with pytest.raises(ValueError):
        StrategyConfig(mr_k=0)


def test_signals_csv(tmp_path, rng):
    write_signals_csv(tf_signals(random_candles(rng, 30), edge="A->B"), tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "date,edge,action" and lines[1].split(",")[1] == "A->B"


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.floats(1e-3, 1e3))
def test_tf_alternating_and_scale_invariant(seed, w, lam):
    s = random_candles(np.random.default_rng(seed), 80)
    cfg = StrategyConfig(ma_window=w)
    sig = tf_signals(s, cfg)
    assert alternating(actions(sig))
    # powers of two scale exactly, so the >= comparisons cannot flip on rounding
    lam = 2.0 ** round(np.log2(lam))
    assert [x.action for x in tf_signals(s.scaled(lam), cfg)] == [x.action for x in sig]
    assert set(x.date for x in sig) <= set(s.dates)


@given(st.integers(0, 2**32 - 1), st.integers(2, 15), st.floats(0.1, 3.0))
def test_mr_alternating(seed, w, k):
    s = random_candles(np.random.default_rng(seed), 120, vol=0.04)
    assert alternating(actions(mr_signals(s, StrategyConfig(ma_window=w, mr_k=k))))
