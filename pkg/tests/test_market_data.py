import pytest
from hypothesis import given
from hypothesis import strategies as st

from cryptotrend.exceptions import CandleParseError, DataError
from cryptotrend.market_data import (
    HORIZONS,
    Candle,
    CandleSeries,
    Horizon,
    TrendClass,
    forward_return,
    label_return,
    parse_candles,
)

D = 86_400
T0 = 1_753_056_000  # 2025-07-21 00:00 UTC
HEADER = "timestamp,open,high,low,close,volume\n"


def _series(closes):
    bars = [Candle(T0 + i * D, c, c, c, c, 1.0) for i, c in enumerate(closes)]
    return CandleSeries("BTC", tuple(bars))


def test_parse_two_rows():
    raw = HEADER + f"{T0},100,101,99,100.5,10\n{T0 + D},100.5,102,100,101,12\n"
    s = parse_candles(raw.encode())
    assert len(s) == 2
    assert s.bars[1].close == 101.0


def test_parse_rejects_high_below_low_with_line_number():
    raw = HEADER + f"{T0},100,101,99,100,10\n{T0 + D},100,98,99,100,10\n"
    with pytest.raises(CandleParseError, match="line 3") as exc:
        parse_candles(raw)
    assert exc.value.line == 3


def test_parse_sorts_out_of_order_rows():
    rows = [f"{T0 + i * D},100,100,100,100,1\n" for i in (2, 0, 1)]
    s = parse_candles(HEADER + "".join(rows))
    assert [b.timestamp for b in s.bars] == [T0, T0 + D, T0 + 2 * D]


@pytest.mark.parametrize(
    "body, match",
    [
        (f"{T0},100,101,99,abc,1\n", "line 2"),
        (f"{T0},100,101,99\n", "expected 6 fields"),
        (f"{T0},100,101,99,100,1\n{T0},100,101,99,100,1\n", "duplicate timestamp"),
        (f"{T0 + 5},100,101,99,100,1\n", "not aligned"),
        (f"{T0},-1,101,99,100,1\n", "positive"),
    ],
)
def test_parse_errors(body, match):
    with pytest.raises(CandleParseError, match=match):
        parse_candles(HEADER + body)


def test_bad_header():
    with pytest.raises(CandleParseError, match="line 1"):
        parse_candles("ts,o,h,l,c,v\n")


def test_gap_is_an_error():
    raw = HEADER + f"{T0},100,100,100,100,1\n{T0 + 2 * D},100,100,100,100,1\n"
    with pytest.raises(DataError, match="gap"):
        parse_candles(raw)


def test_forward_return_examples():
    assert forward_return(_series([100, 100]), 0, HORIZONS[1]) == 0.0
    assert forward_return(_series([100, 100.5]), 0, HORIZONS[1]) == pytest.approx(0.5)
    s = _series([200] + [199.0] * 6 + [198.8])
    # hand arithmetic: 100 * (198.8 - 200) / 200 = -0.6
    assert forward_return(s, 0, HORIZONS[7]) == pytest.approx(-0.6, abs=1e-12)


def test_forward_return_past_end():
    with pytest.raises(DataError, match="past end"):
        forward_return(_series([100] * 5), 0, HORIZONS[7])


def test_horizon_table():
    assert [(h.days, h.up_threshold_pct, h.down_threshold_pct) for h in HORIZONS.values()] == [
        (1, 0.30, -0.30), (7, 0.60, -0.60), (15, 0.40, -0.40),
    ]
    with pytest.raises(ValueError):
        Horizon.from_days(3)


@pytest.mark.parametrize(
    "ret, days, expected",
    [
        (0.5, 1, TrendClass.UP),
        (0.0, 1, TrendClass.SIDEWAYS),
        (0.0, 7, TrendClass.SIDEWAYS),
        (0.0, 15, TrendClass.SIDEWAYS),
        (-0.45, 7, TrendClass.SIDEWAYS),
        (0.30, 1, TrendClass.SIDEWAYS),
    ],
)
def test_label_examples(ret, days, expected):
    assert label_return(ret, HORIZONS[days]) is expected


finite = st.floats(min_value=-50, max_value=50, allow_nan=False)


@given(finite, st.sampled_from(list(HORIZONS.values())))
def test_label_symmetry(x, h):
    assert (label_return(x, h) is TrendClass.UP) == (label_return(-x, h) is TrendClass.DOWN)


@given(finite, finite, st.sampled_from(list(HORIZONS.values())))
def test_label_monotone(a, b, h):
    order = {TrendClass.DOWN: 0, TrendClass.SIDEWAYS: 1, TrendClass.UP: 2}
    lo, hi = sorted((a, b))
    assert order[label_return(lo, h)] <= order[label_return(hi, h)]
