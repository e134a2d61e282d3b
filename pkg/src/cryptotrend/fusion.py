"""Volatility-conditional fusion of news sentiment and the technical signal."""

from __future__ import annotations

import datetime as dt
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

from .market_data import Horizon, TrendClass


class RegimeKind(str, enum.Enum):
    HIGH = "HighVolatility"
    NORMAL = "Normal"
    LOW = "LowVolatility"


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    vol_value: float
    low_threshold: float
    high_threshold: float


def nearest_rank(values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value."""
    if not values:
        raise ValueError("empty sample")
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


def detect_regime(
    vol: float,
    history: Sequence[float],
    lookback: int = 90,
    low_pct: float = 25.0,
    high_pct: float = 75.0,
) -> Regime:
    """Classify ``vol`` against the trailing ``lookback`` entries of ``history``."""
    history = [float(v) for v in history if not math.isnan(v)]
    if not history:
        raise ValueError("volatility history is empty")
    window = history[-lookback:]
    lo = nearest_rank(window, low_pct)
    hi = nearest_rank(window, high_pct)
    if vol > hi:
        kind = RegimeKind.HIGH
    elif vol < lo:
        kind = RegimeKind.LOW
    else:
        kind = RegimeKind.NORMAL
    return Regime(kind, float(vol), lo, hi)


DEFAULT_ALPHA = {
    RegimeKind.HIGH: 0.90,
    RegimeKind.NORMAL: 0.80,
    RegimeKind.LOW: 0.65,
}


@dataclass(frozen=True)
class FusionWeights:
    alpha: float
    regime: Regime

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def alpha_for(regime: Regime, table: dict | None = None) -> FusionWeights:
    table = DEFAULT_ALPHA if table is None else {RegimeKind(k): v for k, v in table.items()}
    return FusionWeights(float(table[regime.kind]), regime)


def _check_signed(v, name):
    if not (math.isfinite(v) and -1.0 <= v <= 1.0):
        raise ValueError(f"{name}={v!r} outside [-1, 1]")


def fuse(s_news: float, s_technical: float, alpha: float) -> float:
    """alpha * s_news + (1 - alpha) * s_technical."""
    _check_signed(s_news, "s_news")
    _check_signed(s_technical, "s_technical")
    if not (math.isfinite(alpha) and 0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha={alpha!r} outside [0, 1]")
    return alpha * s_news + (1.0 - alpha) * s_technical


def classify(p_final: float, band: float = 0.3) -> TrendClass:
    # Band edges are Sideways.
    if p_final > band:
        return TrendClass.UP
    if p_final < -band:
        return TrendClass.DOWN
    return TrendClass.SIDEWAYS


def resolve_conflict(
    news_class: TrendClass, technical_class: TrendClass, p_final_class: TrendClass
) -> tuple[TrendClass, str | None]:
    """The fused class always governs; disagreement between channels is noted for audit."""
    if news_class == technical_class:
        return p_final_class, None
    note = (
        f"conflict: news={news_class.value} technical={technical_class.value}; "
        f"news-weighted fusion governed -> {p_final_class.value}"
    )
    return p_final_class, note


@dataclass(frozen=True)
class Prediction:
    date: dt.date
    horizon: Horizon
    s_news: float
    s_technical: float
    alpha: float
    p_final: float
    predicted: TrendClass
    origin: str | None
    empty_news: bool
    regime: RegimeKind
    volatility: float
    article_count: int = 0
    fallback_count: int = 0
    system: str = "Ours"
    notes: tuple = field(default=())

    def key(self):
        return (self.date, self.horizon.days)

    def to_record(self) -> dict:
        return {
            "system": self.system,
            "date": self.date.isoformat(),
            "horizon": self.horizon.days,
            "s_news": self.s_news,
            "s_technical": self.s_technical,
            "alpha": self.alpha,
            "p_final": self.p_final,
            "predicted": self.predicted.value,
            "provenance": {
                "origin": self.origin,
                "empty_news": self.empty_news,
                "regime": self.regime.value,
                "volatility": self.volatility,
                "article_count": self.article_count,
                "fallback_count": self.fallback_count,
            },
            "notes": list(self.notes),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Prediction":
        prov = rec["provenance"]
        return cls(
            date=dt.date.fromisoformat(rec["date"]),
            horizon=Horizon.from_days(rec["horizon"]),
            s_news=float(rec["s_news"]),
            s_technical=float(rec["s_technical"]),
            alpha=float(rec["alpha"]),
            p_final=float(rec["p_final"]),
            predicted=TrendClass(rec["predicted"]),
            origin=prov.get("origin"),
            empty_news=bool(prov["empty_news"]),
            regime=RegimeKind(prov["regime"]),
            volatility=float(prov["volatility"]),
            article_count=int(prov.get("article_count", 0)),
            fallback_count=int(prov.get("fallback_count", 0)),
            system=rec.get("system", "Ours"),
            notes=tuple(rec.get("notes", ())),
        )
