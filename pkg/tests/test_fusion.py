import datetime as dt

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from cryptotrend.fusion import (
    DEFAULT_ALPHA,
    Prediction,
    RegimeKind,
    alpha_for,
    classify,
    detect_regime,
    fuse,
    nearest_rank,
    resolve_conflict,
)
from cryptotrend.market_data import HORIZONS, TrendClass

UP, DOWN, SIDE = TrendClass.UP, TrendClass.DOWN, TrendClass.SIDEWAYS
HIST = [i / 100 for i in range(1, 101)]  # 0.01 .. 1.00


def test_nearest_rank():
    assert nearest_rank([5, 1, 3, 2, 4], 25) == 2
    assert nearest_rank([5, 1, 3, 2, 4], 75) == 4
    assert nearest_rank([7], 25) == 7
    with pytest.raises(ValueError):
        nearest_rank([], 50)


def test_regime_examples():
    # lookback keeps the last 90 values: 0.11 .. 1.00
    r = detect_regime(0.5, HIST)
    assert r.kind is RegimeKind.NORMAL
    assert (r.low_threshold, r.high_threshold) == (0.33, 0.78)
    assert detect_regime(0.9, HIST).kind is RegimeKind.HIGH
    assert detect_regime(0.05, HIST).kind is RegimeKind.LOW
    # thresholds themselves are Normal
    assert detect_regime(0.78, HIST).kind is RegimeKind.NORMAL
    assert detect_regime(0.33, HIST).kind is RegimeKind.NORMAL


def test_regime_constant_history_is_normal():
    assert detect_regime(0.02, [0.02] * 40).kind is RegimeKind.NORMAL


def test_regime_requires_history():
    with pytest.raises(ValueError):
        detect_regime(0.1, [])


def test_alpha_table():
    assert DEFAULT_ALPHA == {RegimeKind.HIGH: 0.90, RegimeKind.NORMAL: 0.80, RegimeKind.LOW: 0.65}
    assert alpha_for(detect_regime(0.9, HIST)).alpha == 0.90
    assert alpha_for(detect_regime(0.5, HIST)).alpha == 0.80
    assert alpha_for(detect_regime(0.05, HIST)).alpha == 0.65
    custom = {"HighVolatility": 1.0, "Normal": 0.5, "LowVolatility": 0.0}
    assert alpha_for(detect_regime(0.05, HIST), custom).alpha == 0.0


def test_fuse_examples():
    assert fuse(1.0, -1.0, 0.9) == pytest.approx(0.8)
    assert fuse(0.0, 1.0, 0.65) == pytest.approx(0.35)
    assert fuse(0.5, 0.5, 0.8) == pytest.approx(0.5)
    assert fuse(-1.0, 1.0, 0.5) == 0.0


@pytest.mark.parametrize("args", [(1.5, 0, 0.8), (0, -1.01, 0.8), (0, 0, 1.2), (float("nan"), 0, 0.5)])
def test_fuse_domain(args):
    with pytest.raises(ValueError):
        fuse(*args)


@pytest.mark.parametrize(
    "p, expected",
    [(0.31, UP), (0.30, SIDE), (0.0, SIDE), (-0.30, SIDE), (-0.31, DOWN), (1.0, UP), (-1.0, DOWN)],
)
def test_classify_examples(p, expected):
    assert classify(p) is expected


def test_resolve_conflict():
    cls, note = resolve_conflict(UP, DOWN, UP)
    assert cls is UP and "conflict" in note
    assert resolve_conflict(DOWN, DOWN, DOWN) == (DOWN, None)


signed = st.floats(-1.0, 1.0)
alphas = st.sampled_from(sorted(DEFAULT_ALPHA.values()))


@given(signed, signed, st.floats(0.0, 1.0))
def test_fuse_is_convex_combination(n, t, a):
    p = fuse(n, t, a)
    assert min(n, t) - 1e-15 <= p <= max(n, t) + 1e-15


@given(signed, signed, alphas)
def test_news_priority(n, t, a):
    # news moves the fused score at least as much as the technical signal
    assert a >= 1 - a
    d = 0.01
    assume(-1 <= n + d <= 1 and -1 <= t + d <= 1)
    assert fuse(n + d, t, a) - fuse(n, t, a) >= fuse(n, t + d, a) - fuse(n, t, a) - 1e-15


@given(signed, signed, signed, alphas)
def test_monotone_in_news(n1, n2, t, a):
    lo, hi = sorted((n1, n2))
    assert fuse(lo, t, a) <= fuse(hi, t, a)


@given(st.floats(0.0, 1.0), st.lists(st.floats(0.0, 1.0), min_size=1, max_size=120), st.floats(0.01, 100.0))
def test_regime_scale_free(vol, hist, c):
    a = detect_regime(vol, hist).kind
    b = detect_regime(vol * c, [h * c for h in hist]).kind
    # multiplication by c preserves order except where rounding ties values
    ordered = sorted(hist[-90:])
    assume(all(x != vol for x in ordered))
    assume(len({x * c for x in ordered + [vol]}) == len(set(ordered + [vol])))
    assert a is b


@given(signed)
def test_classify_antisymmetric(p):
    assert classify(-p) is classify(p).mirror()


def test_prediction_record_roundtrip():
    p = Prediction(
        date=dt.date(2025, 7, 21), horizon=HORIZONS[7], s_news=0.2, s_technical=-0.4, alpha=0.8,
        p_final=0.08, predicted=SIDE, origin="MultiDimensional", empty_news=False,
        regime=RegimeKind.NORMAL, volatility=0.02, article_count=3, notes=("x",),
    )
    assert Prediction.from_record(p.to_record()) == p
    assert p.key() == (dt.date(2025, 7, 21), 7)
