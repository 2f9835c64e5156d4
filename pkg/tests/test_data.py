import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from goldcast.data import (
    DataError,
    MacroRecord,
    NamedSeries,
    OhlcBar,
    Scaler,
    align_features,
    destandardize,
    forward_fill,
    load_aux_csv,
    load_macro_csv,
    load_ohlc_csv,
    macro_to_series,
    make_splits,
    resample_monthly,
    standardize,
    write_ohlc_csv,
)
from conftest import make_bars, write_text

HEADER = "date,open,high,low,close,volume\n"


def test_load_single_row(tmp_path):
    p = write_text(tmp_path / "g.csv", HEADER + "2020-01-02,1518.1,1528.7,1513.0,1527.1,186000\n")
    (bar,) = load_ohlc_csv(p)
    assert bar == OhlcBar(dt.date(2020, 1, 2), 1518.1, 1528.7, 1513.0, 1527.1, 186000.0)


def test_high_below_low_names_line(tmp_path):
    rows = [f"2020-01-{d:02d},10,11,9,10,1\n" for d in range(1, 6)]
    rows.append("2020-01-06,10,8,9,10,1\n")  # line 7 counting the header
    p = write_text(tmp_path / "g.csv", HEADER + "".join(rows))
    with pytest.raises(DataError, match=r"g\.csv:7: high 8\.0 < low 9\.0"):
        load_ohlc_csv(p)


def test_duplicate_timestamp(tmp_path):
    p = write_text(tmp_path / "g.csv", HEADER + "2020-01-02,10,11,9,10,1\n2020-01-02,10,11,9,10,1\n")
    with pytest.raises(DataError, match="duplicate timestamp"):
        load_ohlc_csv(p)


def test_descending_and_malformed_rows(tmp_path):
    p = write_text(tmp_path / "a.csv", HEADER + "2020-01-03,10,11,9,10,1\n2020-01-02,10,11,9,10,1\n")
    with pytest.raises(DataError, match="not ascending"):
        load_ohlc_csv(p)
    p = write_text(tmp_path / "b.csv", HEADER + "2020-01-03,10,eleven,9,10,1\n")
    with pytest.raises(DataError, match=r"b\.csv:2"):
        load_ohlc_csv(p)
    p = write_text(tmp_path / "c.csv", "date,o,h,l,c,v\n")
    with pytest.raises(DataError, match="header"):
        load_ohlc_csv(p)
    with pytest.raises(DataError, match="not found"):
        load_ohlc_csv(tmp_path / "missing.csv")


def test_bar_invariants():
    with pytest.raises(DataError):
        OhlcBar(dt.date(2020, 1, 1), 10, 11, 9, 12, 1)  # close above high
    with pytest.raises(DataError):
        OhlcBar(dt.date(2020, 1, 1), 10, 11, 9, 10, -1)


def test_monthly_csv_round_trip(tmp_path):
    bars = resample_monthly(make_bars(np.linspace(100, 130, 70)))
    write_ohlc_csv(bars, tmp_path / "m.csv", monthly=True)
    assert load_ohlc_csv(tmp_path / "m.csv", "monthly") == bars


def test_resample_monthly_aggregates():
    bars = make_bars([10, 12, 11, 15, 14], start=dt.date(2020, 1, 29))  # Jan 29..31, Feb 3..4
    jan, feb = resample_monthly(bars)
    assert jan.timestamp == dt.date(2020, 1, 1) and feb.timestamp == dt.date(2020, 2, 1)
    assert jan.open == bars[0].open and jan.close == bars[2].close
    assert jan.high == max(b.high for b in bars[:3]) and feb.low == min(b.low for b in bars[3:])
    assert feb.volume == 2000.0


def test_macro_and_aux_loaders(tmp_path):
    p = write_text(tmp_path / "macro.csv", "period,gdp,cpi,ppi,unemployment,inflation\n"
                                            "2020-01,1,2,3,4,5\n2020-02,1.5,2.5,3.5,4.5,5.5\n")
    recs = load_macro_csv(p)
    assert recs[1] == MacroRecord(dt.date(2020, 2, 1), 1.5, 2.5, 3.5, 4.5, 5.5)
    p = write_text(tmp_path / "oil.csv", "date,value\n2020-01-01,50\n2020-01-02,51\n")
    s = load_aux_csv(p)
    assert s.name == "oil" and s.values == (50.0, 51.0)


def test_align_three_bars_gives_two_rows():
    bars = make_bars([10, 11, 12])
    aux = NamedSeries("oil", tuple(b.timestamp for b in bars), (1.0, 2.0, 3.0))
    fs = align_features(bars, [aux])
    assert fs.n_rows == 2
    assert fs.columns == ["high", "low", "close", "volume", "oil"]
    np.testing.assert_array_equal(fs.targets[0], [bars[1].high, bars[1].low, bars[1].close])
    assert fs.target_dates == [bars[1].timestamp, bars[2].timestamp]


def test_macro_join_matches_hand_built_table():
    # 10 trading days straddling a month end; a month's figure is published on the 1st of the next month
    bars = make_bars(np.arange(10) + 100.0, start=dt.date(2020, 1, 27))
    recs = [MacroRecord(dt.date(2019, 12, 1), 1, 0, 0, 0, 0), MacroRecord(dt.date(2020, 1, 1), 2, 0, 0, 0, 0)]
    gdp = macro_to_series(recs)[0]
    assert gdp.dates == (dt.date(2020, 1, 1), dt.date(2020, 2, 1))
    fs = align_features(bars, [gdp])
    expected = [1.0 if d < dt.date(2020, 2, 1) else 2.0 for d in fs.dates]
    assert [b.timestamp.isoformat() for b in bars][:5] == ["2020-01-27", "2020-01-28", "2020-01-29",
                                                          "2020-01-30", "2020-01-31"]
    assert expected == [1.0] * 5 + [2.0] * 5
    np.testing.assert_array_equal(fs.features[:, 4], expected)


def test_aux_starting_late_is_rejected():
    bars = make_bars([10, 11, 12])
    late = NamedSeries("oil", (bars[1].timestamp,), (1.0,))
    with pytest.raises(DataError, match="starts after the first bar"):
        align_features(bars, [late])


def test_forward_fill_never_looks_ahead():
    s = NamedSeries("x", (dt.date(2020, 1, 1), dt.date(2020, 1, 5)), (1.0, 2.0))
    got = forward_fill(s, [dt.date(2020, 1, d) for d in (1, 4, 5, 9)])
    np.testing.assert_array_equal(got, [1.0, 1.0, 2.0, 2.0])


def test_standardize_examples():
    s = standardize([1, 2, 3])
    np.testing.assert_allclose(s.values, [-1.2247448714, 0, 1.2247448714], atol=1e-9)
    assert s.mean == 2 and s.std == pytest.approx(0.8164965809, abs=1e-9)
    with pytest.raises(DataError, match="degenerate"):
        standardize([5, 5, 5])
    x = np.array([3.1, 4.7, 9.0])
    np.testing.assert_allclose(destandardize(standardize(x)), x, rtol=1e-9)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(2, 60), elements=st.floats(-1e6, 1e6)))
def test_standardize_round_trip_property(x):
    if np.std(x) <= 1e-6 * max(1.0, np.max(np.abs(x))):
        return
    s = standardize(x)
    assert abs(np.mean(s.values)) < 1e-9 and abs(np.std(s.values) - 1) < 1e-9
    np.testing.assert_allclose(s.destandardize(), x, rtol=1e-9, atol=1e-9 * np.max(np.abs(x)))


def test_scaler_per_column():
    m = np.array([[1.0, 10.0], [3.0, 30.0]])
    sc = Scaler.fit(m, ["a", "b"])
    np.testing.assert_array_equal(sc.mean, [2, 20])
    np.testing.assert_array_equal(sc.inverse(sc.transform(m)), m)
    np.testing.assert_array_equal(sc.transform(m[:, 1], 1), [-1, 1])


def test_make_splits_examples():
    s = make_splits(100, 4, 0.10)
    assert list(s.test_indices) == list(range(90, 100))
    assert [len(f) for f in s.train_folds] == [23, 23, 22, 22]
    s = make_splits(8, 4, 0.10)
    assert len(s.test_indices) == 1 and [len(f) for f in s.train_folds] == [2, 2, 2, 1]
    with pytest.raises(DataError, match="nonempty"):
        make_splits(4, 4, 0.5 - 1e-12)
    with pytest.raises(DataError):
        make_splits(100, 1)


@given(st.integers(5, 500), st.integers(2, 6), st.floats(0.01, 0.45))
def test_splits_partition_property(n, k, frac):
    try:
        s = make_splits(n, k, frac)
    except DataError:
        assert n - max(1, int(np.floor(n * frac + 0.5))) < k
        return
    parts = [*s.train_folds, s.test_indices]
    allidx = np.concatenate(parts)
    np.testing.assert_array_equal(allidx, np.arange(n))  # disjoint, covering, chronological
    sizes = [len(f) for f in s.train_folds]
    assert max(sizes) - min(sizes) <= 1 and min(sizes) >= 1
    assert s.test_indices[0] > s.train_folds[-1][-1]


def test_min_test_widens_block():
    s = make_splits(50, 4, 0.10, min_test=9)
    assert len(s.test_indices) == 9 and s.n_samples == 50
