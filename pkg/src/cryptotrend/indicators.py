"""Technical indicators (EMA, MACD, RSI, KDJ, Bollinger) and the aggregate technical signal.

All indicator functions take a sequence of floats and return numpy arrays of
the same length. Bars before an indicator's warm-up are NaN.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .market_data import CandleSeries


@dataclass(frozen=True)
class IndicatorParams:
    ema_period: int = 20
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9
    rsi_period: int = 14
    kdj_period: int = 9
    bb_period: int = 20
    bb_width: float = 2.0
    vol_window: int = 14

    def __post_init__(self):
        periods = {
            k: v for k, v in asdict(self).items() if k not in ("bb_width",)
        }
        for name, value in periods.items():
            if not isinstance(value, (int, np.integer)) or value < 2:
                raise ValueError(f"{name} must be an integer >= 2, got {value!r}")
        if self.macd_fast >= self.macd_slow:
            raise ValueError("macd_fast must be smaller than macd_slow")
        if not (math.isfinite(self.bb_width) and self.bb_width > 0):
            raise ValueError("bb_width must be positive")

    @property
    def warmup(self) -> int:
        """Index of the first bar at which every indicator (and the signal) is defined."""
        return max(
            self.ema_period - 1,
            self.macd_slow - 1,
            self.rsi_period,
            self.kdj_period + 1,  # K needs `period` bars, D three K values
            self.bb_period - 1,
        )


def _as_prices(values, min_len=1, what="series"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional")
    if arr.size < min_len:
        if arr.size == 0:
            raise ValueError(f"{what} is empty")
        raise ValueError(f"{what} needs at least {min_len} values, got {arr.size}")
    return arr


def _check_period(period, name="period"):
    if int(period) != period or period < 2:
        raise ValueError(f"{name} must be an integer >= 2, got {period!r}")
    return int(period)


def ema(closes, period: int) -> np.ndarray:
    """Exponential moving average seeded with the first close (multiplier 2/(period+1))."""
    period = _check_period(period)
    x = _as_prices(closes)
    k = 2.0 / (period + 1)
    out = np.empty_like(x)
    out[0] = x[0]
    for i in range(1, x.size):
        out[i] = out[i - 1] + k * (x[i] - out[i - 1])
    return out


def macd(closes, params: IndicatorParams = IndicatorParams()):
    """Return ``(macd_line, signal_line, histogram)``."""
    x = _as_prices(closes, params.macd_slow)
    line = ema(x, params.macd_fast) - ema(x, params.macd_slow)
    signal = ema(line, params.macd_signal)
    return line, signal, line - signal


def rsi(closes, period: int = 14) -> np.ndarray:
    """Wilder RSI. First defined at index ``period``.

    A window with no gains and no losses is reported as 50.
    """
    period = _check_period(period)
    x = _as_prices(closes, period + 1)
    delta = np.diff(x)
    gains = np.where(delta > 0, delta, 0.0)
    losses = np.where(delta < 0, -delta, 0.0)

    out = np.full(x.size, np.nan)
    avg_gain = gains[:period].mean()
    avg_loss = losses[:period].mean()
    out[period] = _rsi_value(avg_gain, avg_loss)
    for i in range(period, delta.size):
        avg_gain = (avg_gain * (period - 1) + gains[i]) / period
        avg_loss = (avg_loss * (period - 1) + losses[i]) / period
        out[i + 1] = _rsi_value(avg_gain, avg_loss)
    return out


def _rsi_value(avg_gain, avg_loss):
    if avg_loss == 0.0:
        return 50.0 if avg_gain == 0.0 else 100.0
    return 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)


def kdj(highs, lows, closes, period: int = 9):
    """Stochastic K, D (3-bar mean of K) and J = 3K - 2D.

    K is the raw stochastic over the trailing ``period`` highs/lows, defined
    from index ``period - 1``; a window with high == low gives K = 50.
    """
    period = _check_period(period)
    h = _as_prices(highs, period, "highs")
    lo = _as_prices(lows, period, "lows")
    c = _as_prices(closes, period, "closes")
    if not (h.size == lo.size == c.size):
        raise ValueError("highs, lows and closes must have equal length")

    k = np.full(c.size, np.nan)
    for i in range(period - 1, c.size):
        hh = h[i - period + 1 : i + 1].max()
        ll = lo[i - period + 1 : i + 1].min()
        k[i] = 50.0 if hh == ll else 100.0 * (c[i] - ll) / (hh - ll)
    d = np.full(c.size, np.nan)
    for i in range(period + 1, c.size):
        d[i] = (k[i - 2] + k[i - 1] + k[i]) / 3.0
    return k, d, 3.0 * k - 2.0 * d


def kdj_series(series: CandleSeries, period: int = 9):
    return kdj(series.highs, series.lows, series.closes, period)


def bollinger(closes, period: int = 20, width: float = 2.0):
    """Rolling mean ± ``width`` population standard deviations: ``(mid, upper, lower)``."""
    period = _check_period(period)
    if not (math.isfinite(width) and width >= 0):
        raise ValueError("width must be non-negative")
    x = _as_prices(closes, period)
    mid = np.full(x.size, np.nan)
    sd = np.full(x.size, np.nan)
    for i in range(period - 1, x.size):
        window = x[i - period + 1 : i + 1]
        if window.min() == window.max():
            # exact for flat windows; the generic path can leave a 1-ulp residue
            mid[i], sd[i] = window[0], 0.0
        else:
            mid[i] = window.mean()
            sd[i] = window.std()
    return mid, mid + width * sd, mid - width * sd


def realized_volatility(closes, window: int = 14) -> float:
    """Population std of the last ``window`` one-bar log returns (not annualized)."""
    if int(window) != window or window < 1:
        raise ValueError("window must be a positive integer")
    x = _as_prices(closes, int(window) + 1)
    rets = np.diff(np.log(x[-(int(window) + 1):]))
    return float(rets.std())


def rolling_volatility(closes, window: int = 14) -> np.ndarray:
    """``realized_volatility`` evaluated at every bar; NaN before index ``window``."""
    x = _as_prices(closes)
    out = np.full(x.size, np.nan)
    for i in range(int(window), x.size):
        out[i] = realized_volatility(x[: i + 1], window)
    return out


def _sign(v):
    if v > 0:
        return 1
    if v < 0:
        return -1
    return 0


def indicator_votes(close, ema_value, macd_hist, rsi_value, k, d, bb_upper, bb_lower):
    """The five ternary votes (EMA, MACD, RSI, KDJ, BB), each in {-1, 0, +1}."""
    values = (ema_value, macd_hist, rsi_value, k, d, bb_upper, bb_lower)
    if any(v is None or not math.isfinite(v) for v in values):
        raise ValueError("indicator undefined at this bar")
    rsi_vote = 1 if rsi_value < 30 else (-1 if rsi_value > 70 else 0)
    bb_vote = 1 if close < bb_lower else (-1 if close > bb_upper else 0)
    return (
        _sign(close - ema_value),
        _sign(macd_hist),
        rsi_vote,
        _sign(k - d),
        bb_vote,
    )


def technical_signal(votes) -> float:
    votes = tuple(votes)
    if len(votes) != 5 or any(v not in (-1, 0, 1) for v in votes):
        raise ValueError("expected five votes in {-1, 0, +1}")
    # Integer sum keeps the result an exact multiple of 0.2 up to one rounding.
    return sum(votes) / 5.0


@dataclass(frozen=True)
class TechnicalSnapshot:
    index: int
    close: float
    ema: float
    macd_line: float
    macd_signal_line: float
    macd_histogram: float
    rsi: float
    kdj_k: float
    kdj_d: float
    kdj_j: float
    bb_mid: float
    bb_upper: float
    bb_lower: float
    volatility: float
    votes: tuple
    s_technical: float


INDICATOR_COLUMNS = (
    "ema", "macd_line", "macd_signal_line", "macd_histogram", "rsi",
    "kdj_k", "kdj_d", "kdj_j", "bb_mid", "bb_upper", "bb_lower",
    "volatility", "s_technical",
)


def indicator_arrays(highs, lows, closes, params: IndicatorParams = IndicatorParams()) -> dict:
    """Every indicator column (see ``INDICATOR_COLUMNS``) as a full-length array.

    ``s_technical`` is NaN before ``params.warmup``; the other columns follow
    their own warm-up rules.
    """
    closes = _as_prices(closes, params.warmup + 1, "closes")
    cols = {"ema": ema(closes, params.ema_period)}
    cols["macd_line"], cols["macd_signal_line"], cols["macd_histogram"] = macd(closes, params)
    cols["rsi"] = rsi(closes, params.rsi_period)
    cols["kdj_k"], cols["kdj_d"], cols["kdj_j"] = kdj(highs, lows, closes, params.kdj_period)
    cols["bb_mid"], cols["bb_upper"], cols["bb_lower"] = bollinger(
        closes, params.bb_period, params.bb_width
    )
    cols["volatility"] = (
        rolling_volatility(closes, params.vol_window)
        if closes.size > params.vol_window
        else np.full(closes.size, np.nan)
    )
    signal = np.full(closes.size, np.nan)
    votes = [None] * closes.size
    for t in range(params.warmup, closes.size):
        votes[t] = indicator_votes(
            closes[t], cols["ema"][t], cols["macd_histogram"][t], cols["rsi"][t],
            cols["kdj_k"][t], cols["kdj_d"][t], cols["bb_upper"][t], cols["bb_lower"][t],
        )
        signal[t] = technical_signal(votes[t])
    cols["s_technical"] = signal
    cols["votes"] = votes
    return cols


def compute_snapshots(
    series: CandleSeries, params: IndicatorParams = IndicatorParams()
) -> list[TechnicalSnapshot | None]:
    """Per-bar snapshots; ``None`` for bars before ``params.warmup``."""
    closes = series.closes
    if closes.size <= params.warmup:
        raise ValueError(
            f"series of {closes.size} bars is shorter than the indicator warm-up ({params.warmup + 1})"
        )
    cols = indicator_arrays(series.highs, series.lows, closes, params)
    out: list[TechnicalSnapshot | None] = [None] * closes.size
    for t in range(params.warmup, closes.size):
        out[t] = TechnicalSnapshot(
            index=t,
            close=float(closes[t]),
            votes=cols["votes"][t],
            **{name: float(cols[name][t]) for name in INDICATOR_COLUMNS},
        )
    return out
