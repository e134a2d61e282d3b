"""Deterministic synthetic candles and news corpora for tests and demos."""

from __future__ import annotations

import datetime as dt

import numpy as np

from .market_data import DAY_SECONDS, Candle, CandleSeries, day_start
from .news import NewsArticle

_POLAR_WORDS = ("surge", "soar", "breakout", "growth", "rise", "recovery",
                "decline", "correction", "crash", "plunge")
_NEUTRAL_WORDS = ("sideways", "consolidation")
_SUBJECTS = ("Bitcoin", "BTC", "Crypto markets", "Spot bitcoin ETFs", "Miners", "Exchanges")
_TEMPLATES_WITH_WORD = (
    "{subject} {word} expected after regulator comments",
    "Analysts flag {word} in {subject} as funding rates shift",
    "{subject} sees {word} amid heavy derivatives volume",
)
_TEMPLATES_PLAIN = (
    "{subject} hold weekly briefing on custody standards",
    "{subject} publish quarterly transparency report",
    "Conference panel discusses {subject} and payment rails",
)


def make_candles(
    n_bars: int,
    start: dt.date = dt.date(2025, 5, 1),
    seed: int = 0,
    daily_vol: float = 0.02,
    start_price: float = 60_000.0,
    flat: bool = False,
    asset: str = "BTC",
) -> CandleSeries:
    """Random-walk daily bars. ``flat=True`` keeps every close within ±0.1% of the start."""
    rng = np.random.default_rng(seed)
    if flat:
        closes = start_price * (1.0 + 0.001 * rng.uniform(-1.0, 1.0, n_bars))
    else:
        closes = start_price * np.exp(np.cumsum(rng.normal(0.0, daily_vol, n_bars)))
    opens = np.concatenate(([closes[0]], closes[:-1]))
    wick = np.abs(rng.normal(0.0, daily_vol / 4 if not flat else 0.0002, n_bars))
    highs = np.maximum(opens, closes) * (1.0 + wick)
    lows = np.minimum(opens, closes) * (1.0 - wick)
    volumes = rng.uniform(1_000.0, 5_000.0, n_bars)
    t0 = day_start(start)
    bars = [
        Candle(t0 + i * DAY_SECONDS, float(o), float(h), float(lo), float(c), float(v))
        for i, (o, h, lo, c, v) in enumerate(zip(opens, highs, lows, closes, volumes))
    ]
    return CandleSeries(asset, tuple(bars))


def make_corpus(
    days,
    per_day: int = 4,
    seed: int = 0,
    keyword_rate: float = 0.6,
    neutral_keywords: bool = False,
) -> list[NewsArticle]:
    """``per_day`` articles on each day, at random times within the UTC day.

    A fraction ``keyword_rate`` of headlines carries one lexicon word; neutral
    lexicon words are only used when ``neutral_keywords`` is set.
    """
    rng = np.random.default_rng(seed)
    words = _POLAR_WORDS + (_NEUTRAL_WORDS if neutral_keywords else ())
    articles = []
    for day in days:
        base = day_start(day)
        offsets = np.sort(rng.integers(0, DAY_SECONDS, per_day))
        for j, off in enumerate(offsets):
            subject = _SUBJECTS[rng.integers(len(_SUBJECTS))]
            if rng.random() < keyword_rate:
                tpl = _TEMPLATES_WITH_WORD[rng.integers(len(_TEMPLATES_WITH_WORD))]
                headline = tpl.format(subject=subject, word=words[rng.integers(len(words))])
            else:
                tpl = _TEMPLATES_PLAIN[rng.integers(len(_TEMPLATES_PLAIN))]
                headline = tpl.format(subject=subject)
            articles.append(
                NewsArticle(
                    id=f"{day.isoformat()}-{j:03d}",
                    published_at=int(base + off),
                    headline=headline,
                    body=f"Desk note {j} for {day.isoformat()}. {headline}.",
                    source="synthetic",
                )
            )
    return articles
