"""OHLCV candle ingestion, forward returns and three-class trend labels."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .exceptions import CandleParseError, DataError

DAY_SECONDS = 86_400
CSV_HEADER = ("timestamp", "open", "high", "low", "close", "volume")


class TrendClass(str, enum.Enum):
    UP = "Up"
    DOWN = "Down"
    SIDEWAYS = "Sideways"

    def mirror(self) -> "TrendClass":
        if self is TrendClass.UP:
            return TrendClass.DOWN
        if self is TrendClass.DOWN:
            return TrendClass.UP
        return self


# Row/column order used by confusion matrices and reports.
CLASS_ORDER = (TrendClass.UP, TrendClass.DOWN, TrendClass.SIDEWAYS)


@dataclass(frozen=True)
class Horizon:
    days: int
    up_threshold_pct: float
    down_threshold_pct: float

    @classmethod
    def from_days(cls, days: int) -> "Horizon":
        try:
            return HORIZONS[int(days)]
        except (KeyError, ValueError, TypeError):
            raise ValueError(
                f"unsupported horizon {days!r}; admitted horizons are {sorted(HORIZONS)}"
            ) from None

    @property
    def label(self) -> str:
        return f"{self.days}d"


HORIZONS = {
    1: Horizon(1, 0.30, -0.30),
    7: Horizon(7, 0.60, -0.60),
    15: Horizon(15, 0.40, -0.40),
}


@dataclass(frozen=True)
class Candle:
    timestamp: int
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        prices = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(p) and p > 0 for p in prices):
            raise ValueError("prices must be finite and strictly positive")
        if not (math.isfinite(self.volume) and self.volume >= 0):
            raise ValueError("volume must be finite and non-negative")
        if self.low > min(self.open, self.close):
            raise ValueError("low above min(open, close)")
        if self.high < max(self.open, self.close):
            raise ValueError("high below max(open, close)")
        if self.high < self.low:
            raise ValueError("high < low")

    @property
    def date(self) -> dt.date:
        return utc_date(self.timestamp)


def utc_date(timestamp: float) -> dt.date:
    return dt.datetime.fromtimestamp(timestamp, tz=dt.timezone.utc).date()


def day_start(day: dt.date) -> int:
    return int(dt.datetime(day.year, day.month, day.day, tzinfo=dt.timezone.utc).timestamp())


@dataclass(frozen=True)
class CandleSeries:
    asset: str
    bars: tuple[Candle, ...]
    interval: int = DAY_SECONDS
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.interval != DAY_SECONDS:
            raise DataError("only daily bars are supported")
        object.__setattr__(self, "bars", tuple(self.bars))
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.timestamp <= prev.timestamp:
                raise DataError(
                    f"timestamps not strictly increasing at {cur.timestamp}"
                )
            if cur.timestamp - prev.timestamp != self.interval:
                raise DataError(
                    f"gap in series between {utc_date(prev.timestamp)} and {utc_date(cur.timestamp)}"
                )
        object.__setattr__(
            self, "_index", {bar.date: i for i, bar in enumerate(self.bars)}
        )

    def __len__(self):
        return len(self.bars)

    def _column(self, name):
        return np.array([getattr(b, name) for b in self.bars], dtype=float)

    @property
    def opens(self) -> np.ndarray:
        return self._column("open")

    @property
    def highs(self) -> np.ndarray:
        return self._column("high")

    @property
    def lows(self) -> np.ndarray:
        return self._column("low")

    @property
    def closes(self) -> np.ndarray:
        return self._column("close")

    @property
    def volumes(self) -> np.ndarray:
        return self._column("volume")

    @property
    def dates(self) -> list[dt.date]:
        return [b.date for b in self.bars]

    def index_of(self, day: dt.date) -> int:
        try:
            return self._index[day]
        except KeyError:
            raise DataError(f"no bar for {day.isoformat()}") from None


def parse_candles(raw: bytes | str | IO, asset: str = "BTC") -> CandleSeries:
    """Parse an OHLCV CSV stream into a validated, time-sorted series.

    ``raw`` may be bytes, text, or a binary/text file object. Errors name the
    offending line (1-based, header is line 1).
    """
    if hasattr(raw, "read"):
        raw = raw.read()
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CandleParseError(f"not valid UTF-8: {exc}") from None

    reader = csv.reader(io.StringIO(raw))
    try:
        header = next(reader)
    except StopIteration:
        raise CandleParseError("empty input", line=1) from None
    if tuple(h.strip().lstrip("﻿") for h in header) != CSV_HEADER:
        raise CandleParseError(
            f"expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}", line=1
        )

    bars = []
    seen: dict[int, int] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise CandleParseError(
                f"expected {len(CSV_HEADER)} fields, got {len(row)}", line=line
            )
        try:
            ts = int(row[0].strip())
            values = [float(c.strip()) for c in row[1:]]
        except ValueError as exc:
            raise CandleParseError(f"malformed value: {exc}", line=line) from None
        if ts % DAY_SECONDS:
            raise CandleParseError(
                f"timestamp {ts} is not aligned to a UTC day boundary", line=line
            )
        if ts in seen:
            raise CandleParseError(
                f"duplicate timestamp {ts} (first seen on line {seen[ts]})", line=line
            )
        seen[ts] = line
        try:
            bars.append(Candle(ts, *values))
        except ValueError as exc:
            raise CandleParseError(str(exc), line=line) from None

    bars.sort(key=lambda b: b.timestamp)
    return CandleSeries(asset=asset, bars=tuple(bars))


def write_candles(series: CandleSeries | Sequence[Candle]) -> str:
    bars = series.bars if isinstance(series, CandleSeries) else series
    out = io.StringIO()
    out.write(",".join(CSV_HEADER) + "\n")
    for b in bars:
        out.write(f"{b.timestamp},{b.open!r},{b.high!r},{b.low!r},{b.close!r},{b.volume!r}\n")
    return out.getvalue()


def forward_return(series: CandleSeries, t: int, h: Horizon) -> float:
    """Percent return from the close of bar ``t`` to the close ``h.days`` bars later."""
    end = t + h.days
    if t < 0 or end >= len(series):
        raise DataError(
            f"horizon {h.label} from index {t} extends past end of series (length {len(series)})"
        )
    c0 = series.bars[t].close
    return 100.0 * (series.bars[end].close - c0) / c0


def label_return(ret_pct: float, h: Horizon) -> TrendClass:
    # Band edges are Sideways.
    if ret_pct > h.up_threshold_pct:
        return TrendClass.UP
    if ret_pct < h.down_threshold_pct:
        return TrendClass.DOWN
    return TrendClass.SIDEWAYS


def ground_truth(
    series: CandleSeries, days: Iterable[dt.date], horizons: Iterable[Horizon]
) -> dict[tuple[dt.date, int], TrendClass]:
    """Labels keyed by (date, horizon days) for every requested pair."""
    horizons = list(horizons)
    labels = {}
    for day in days:
        t = series.index_of(day)
        for h in horizons:
            labels[(day, h.days)] = label_return(forward_return(series, t, h), h)
    return labels
