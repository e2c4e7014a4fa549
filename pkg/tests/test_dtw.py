import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from volts.dtw import DtwConfig, distance_matrix, dtw
from volts.errors import EmptySeries, InfeasibleBand

series = st.lists(st.floats(-100, 100), min_size=1, max_size=12)


def test_examples():
    assert dtw([0, 0, 0], [1, 1, 1]) == 3.0
    assert dtw([1, 2, 3], [1, 2, 2, 3]) == 0.0
    assert dtw([5.0], [1.0, 2.0]) == 7.0


@given(series)
def test_self_distance_zero(a):
    assert dtw(a, a) == 0.0


@given(series, series)
def test_symmetric_exactly(a, b):
    assert dtw(a, b) == dtw(b, a)


@given(st.integers(1, 10).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-100, 100), min_size=n, max_size=n),
    st.lists(st.floats(-100, 100), min_size=n, max_size=n))))
def test_bounded_by_lockstep_cost(pair):
    a, b = pair
    d = dtw(a, b)
    assert 0.0 <= d <= sum(abs(x - y) for x, y in zip(a, b)) + 1e-9


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=5), st.lists(st.floats(-10, 10), min_size=1, max_size=5))
def test_matches_path_enumeration(a, b):
    assert dtw(a, b) == pytest.approx(oracles.dtw_brute(a, b), rel=1e-12, abs=1e-12)


def test_band():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=30), rng.normal(size=30)
    full = dtw(a, b)
    assert dtw(a, b, DtwConfig(band=29)) == full
    assert dtw(a, b, DtwConfig(band=0)) == pytest.approx(np.abs(a - b).sum())
    assert dtw(a, b, DtwConfig(band=3)) >= full
    with pytest.raises(InfeasibleBand):
        dtw(a, b[:20], DtwConfig(band=5))
    with pytest.raises(ValueError):
        DtwConfig(band=-1)


def test_empty():
    with pytest.raises(EmptySeries):
        dtw([], [1.0])


def test_distance_matrix_parallel_equals_serial():
    rng = np.random.default_rng(5)
    s = [rng.normal(size=rng.integers(5, 40)) for _ in range(7)]
    m1 = distance_matrix(s)
    m4 = distance_matrix(s, workers=4)
    assert np.array_equal(m1, m4)
    assert np.array_equal(m1, m1.T) and np.all(np.diag(m1) == 0)
