"""Seven-dimension news scoring, the keyword baseline and daily sentiment aggregation."""

from __future__ import annotations

import datetime as dt
import enum
import io
import json
import math
import re
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .exceptions import DataError
from .market_data import DAY_SECONDS, day_start

DIMENSIONS = (
    "market_impact",
    "price_impact",
    "volume_impact",
    "regulatory_impact",
    "technical_correlation",
    "risk_assessment",
    "timing_analysis",
)
WEIGHTS = (0.25, 0.20, 0.15, 0.15, 0.10, 0.10, 0.05)

# Human-readable names and evaluation criteria, used to build scoring prompts.
DIMENSION_CRITERIA = {
    "market_impact": (
        "Market Impact",
        "Overall market influence, sector-wide implications, systemic risk factors",
    ),
    "price_impact": (
        "Price Impact",
        "Direct price movement expectations, immediate vs medium-term impact",
    ),
    "volume_impact": (
        "Volume Impact",
        "Trading volume changes, liquidity conditions, market participation",
    ),
    "regulatory_impact": (
        "Regulatory Impact",
        "Policy implications, compliance requirements, regulatory changes",
    ),
    "technical_correlation": (
        "Technical Correlation",
        "Interaction with technical indicators, chart pattern influence",
    ),
    "risk_assessment": (
        "Risk Assessment",
        "Volatility expectations, downside protection, uncertainty measures",
    ),
    "timing_analysis": (
        "Timing Analysis",
        "Temporal aspects, immediate vs delayed effects, duration of influence",
    ),
}


class Origin(str, enum.Enum):
    MULTI_DIMENSIONAL = "MultiDimensional"
    KEYWORD_BASELINE = "KeywordBaseline"


@dataclass(frozen=True)
class NewsArticle:
    id: str
    published_at: int
    headline: str
    body: str = ""
    source: str = ""

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("article id must be a non-empty string")
        if not (isinstance(self.published_at, (int, float)) and self.published_at > 0):
            raise ValueError(f"article {self.id}: published_at must be > 0")
        if not isinstance(self.headline, str) or not self.headline.strip():
            raise ValueError(f"article {self.id}: headline is empty")

    @property
    def text(self) -> str:
        return f"{self.headline}\n{self.body}"

    @property
    def date(self) -> dt.date:
        return dt.datetime.fromtimestamp(self.published_at, tz=dt.timezone.utc).date()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "published_at": self.published_at,
            "headline": self.headline,
            "body": self.body,
            "source": self.source,
        }


@dataclass(frozen=True)
class DimensionScores:
    market_impact: float
    price_impact: float
    volume_impact: float
    regulatory_impact: float
    technical_correlation: float
    risk_assessment: float
    timing_analysis: float

    def __post_init__(self):
        for name in DIMENSIONS:
            _check_unit(getattr(self, name), name)

    @classmethod
    def from_mapping(cls, values) -> "DimensionScores":
        return cls(**{name: float(values[name]) for name in DIMENSIONS})

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in DIMENSIONS)

    @property
    def composite(self) -> float:
        return composite_score(self.as_tuple())


@dataclass(frozen=True)
class SentimentScore:
    value: float
    origin: Origin

    def __post_init__(self):
        if not (math.isfinite(self.value) and -1.0 <= self.value <= 1.0):
            raise ValueError(f"sentiment {self.value!r} outside [-1, 1]")
        object.__setattr__(self, "origin", Origin(self.origin))


def _check_unit(v, name="value"):
    if not (isinstance(v, (int, float)) and math.isfinite(v) and 0.0 <= v <= 1.0):
        raise ValueError(f"{name}={v!r} outside [0, 1]")


def composite_score(dims: Sequence[float]) -> float:
    """Weighted sum of the seven dimension scores with the fixed weights."""
    dims = tuple(dims)
    if len(dims) != len(WEIGHTS):
        raise ValueError(f"expected {len(WEIGHTS)} dimension scores, got {len(dims)}")
    for name, v in zip(DIMENSIONS, dims):
        _check_unit(v, name)
    total = math.fsum(w * s for w, s in zip(WEIGHTS, dims))
    # fsum of the rounded products can drift one ulp past the ends of [0, 1]
    return min(1.0, max(0.0, total))


def to_sentiment(composite: float) -> SentimentScore:
    """Map a [0, 1] composite onto a signed [-1, 1] sentiment (2c - 1)."""
    _check_unit(composite, "composite")
    return SentimentScore(2.0 * composite - 1.0, Origin.MULTI_DIMENSIONAL)


def score_article(article: NewsArticle, backend, policy=None) -> DimensionScores:
    """Obtain the seven dimension scores for ``article`` from a scoring backend.

    Failures after the policy's retries propagate as ``BackendExhausted`` so the
    caller can decide on a fallback.
    """
    from .gateway import BackendPolicy, ScoringRequest, call_with_policy, render_prompt

    request = ScoringRequest(article.id, render_prompt(article))
    response = call_with_policy(request, policy or BackendPolicy(), backend)
    return DimensionScores.from_mapping(response.parsed)


# --- keyword baseline -------------------------------------------------------


@dataclass(frozen=True)
class LexiconCategory:
    label: str
    keywords: tuple[str, ...]
    score: float


LEXICON = (
    LexiconCategory("Strong Bullish", ("surge", "soar", "breakout"), 1.0),
    LexiconCategory("Bullish", ("growth", "rise", "recovery"), 0.6),
    LexiconCategory("Neutral", ("sideways", "consolidation"), 0.0),
    LexiconCategory("Bearish", ("decline", "correction"), -0.6),
    LexiconCategory("Strong Bearish", ("crash", "plunge"), -1.0),
)


def _phrase(keyword):
    return r"\s+".join(map(re.escape, keyword.split()))


# One named group per category; \b anchors give whole-word (or whole-phrase) matching.
_KEYWORD_RE = re.compile(
    r"\b(?:"
    + "|".join(
        f"(?P<c{i}>" + "|".join(_phrase(kw) for kw in sorted(cat.keywords, key=len, reverse=True)) + ")"
        for i, cat in enumerate(LEXICON)
    )
    + r")\b",
    re.IGNORECASE,
)


def keyword_matches(text: str) -> list[tuple[str, LexiconCategory]]:
    """Every lexicon occurrence in ``text`` as ``(matched text, category)``, in order."""
    return [
        (m.group(0), LEXICON[int(m.lastgroup[1:])]) for m in _KEYWORD_RE.finditer(text)
    ]


def keyword_score(text: str) -> SentimentScore:
    """Mean category score over all keyword occurrences; 0.0 when nothing matches."""
    matches = keyword_matches(text)
    if not matches:
        return SentimentScore(0.0, Origin.KEYWORD_BASELINE)
    value = math.fsum(cat.score for _, cat in matches) / len(matches)
    return SentimentScore(max(-1.0, min(1.0, value)), Origin.KEYWORD_BASELINE)


def lexicon_records() -> list[dict]:
    return [
        {"category": c.label, "keywords": list(c.keywords), "score": c.score}
        for c in LEXICON
    ]


# --- daily aggregation ------------------------------------------------------


@dataclass(frozen=True)
class DailySentiment:
    day: dt.date
    value: float
    article_count: int
    origin: Origin | None

    @property
    def empty(self) -> bool:
        return self.article_count == 0


def aggregate_daily(
    scores: Iterable[tuple[float, SentimentScore]], day: dt.date
) -> DailySentiment:
    """Mean sentiment of the articles published on ``day`` (UTC)."""
    lo = day_start(day)
    hi = lo + DAY_SECONDS
    scores = list(scores)
    origins = {s.origin for _, s in scores}
    if len(origins) > 1:
        raise ValueError("cannot aggregate sentiment scores of mixed origin")
    values = [s.value for ts, s in scores if lo <= ts < hi]
    if not values:
        return DailySentiment(day, 0.0, 0, next(iter(origins), None))
    mean = math.fsum(values) / len(values)
    return DailySentiment(day, max(-1.0, min(1.0, mean)), len(values), origins.pop())


# --- corpus I/O -------------------------------------------------------------

_CORPUS_FIELDS = ("id", "published_at", "headline", "body", "source")


def load_corpus(raw: bytes | str | IO) -> list[NewsArticle]:
    """Parse a line-delimited JSON corpus; articles are returned sorted by (time, id)."""
    if hasattr(raw, "read"):
        raw = raw.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    articles = []
    seen = set()
    for lineno, line in enumerate(io.StringIO(raw), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"corpus line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise DataError(f"corpus line {lineno}: expected an object")
        missing = [f for f in _CORPUS_FIELDS if f not in rec]
        if missing:
            raise DataError(f"corpus line {lineno}: missing field(s) {', '.join(missing)}")
        try:
            art = NewsArticle(
                id=str(rec["id"]),
                published_at=int(rec["published_at"]),
                headline=str(rec["headline"]),
                body=str(rec["body"]),
                source=str(rec["source"]),
            )
        except (TypeError, ValueError) as exc:
            raise DataError(f"corpus line {lineno}: {exc}") from None
        if art.id in seen:
            raise DataError(f"corpus line {lineno}: duplicate article id {art.id!r}")
        seen.add(art.id)
        articles.append(art)
    articles.sort(key=lambda a: (a.published_at, a.id))
    return articles


def dump_corpus(articles: Iterable[NewsArticle]) -> str:
    return "".join(
        json.dumps(a.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for a in articles
    )
