"""In-process multi-agent pipeline.

Three agent roles exchange typed messages over a :class:`MessageBus`:

* the asset-tracking agent turns a candle batch into technical snapshots,
* news-analysis agents (``workers`` instances) score article batches,
* the market-prediction agent is the hub: it partitions work, collects
  results, re-assigns batches of crashed workers, and fuses the two channels
  into predictions. It runs on the caller's thread.

Each agent handles its inbox sequentially; everything crossing agent
boundaries travels in a message. Output order and values do not depend on
thread scheduling.
"""

from __future__ import annotations

import datetime as dt
import enum
import json
import logging
import math
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .exceptions import BackendExhausted, BusError, PipelineError
from .fusion import (
    DEFAULT_ALPHA,
    Prediction,
    Regime,
    RegimeKind,
    alpha_for,
    classify,
    detect_regime,
    fuse,
    resolve_conflict,
)
from .gateway import BackendPolicy, BoundedBackend
from .indicators import IndicatorParams, TechnicalSnapshot, compute_snapshots
from .market_data import CandleSeries, Horizon
from .news import (
    NewsArticle,
    Origin,
    SentimentScore,
    aggregate_daily,
    keyword_score,
    score_article,
    to_sentiment,
)

log = logging.getLogger(__name__)


class Role(str, enum.Enum):
    ASSET_TRACKING = "AssetTracking"
    NEWS_ANALYSIS = "NewsAnalysis"
    MARKET_PREDICTION = "MarketPrediction"


@dataclass(frozen=True, order=True)
class AgentId:
    role: Role
    instance: int = 0

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.instance < 0:
            raise ValueError("instance must be non-negative")

    def __str__(self):
        return f"{self.role.value}#{self.instance}"


# --- payloads ---------------------------------------------------------------


@dataclass(frozen=True)
class CandleBatch:
    series: CandleSeries
    params: IndicatorParams


@dataclass(frozen=True)
class TechnicalSnapshotBatch:
    snapshots: tuple


@dataclass(frozen=True)
class ArticleBatch:
    batch_id: int
    articles: tuple


@dataclass(frozen=True)
class ScoredArticle:
    article_id: str
    published_at: int
    sentiment: SentimentScore | None  # None when permanently failed
    keyword: SentimentScore
    composite: float | None = None
    fallback: bool = False
    warnings: tuple = ()


@dataclass(frozen=True)
class ScoredArticleBatch:
    batch_id: int
    results: tuple


@dataclass(frozen=True)
class Failure:
    batch_id: int | None
    reason: str


PAYLOAD_TYPES = (CandleBatch, TechnicalSnapshotBatch, ArticleBatch, ScoredArticleBatch, Failure)


@dataclass(frozen=True)
class Message:
    seq: int
    sender: AgentId
    to: AgentId
    payload: object

    def __post_init__(self):
        if not isinstance(self.payload, PAYLOAD_TYPES):
            raise TypeError(f"unsupported payload type {type(self.payload).__name__}")


@dataclass(frozen=True)
class Ack:
    to: AgentId
    seq: int


_STOP = object()


class MessageBus:
    """Thread-safe router from :class:`AgentId` to per-agent FIFO inboxes."""

    def __init__(self):
        self._lock = threading.Lock()
        self._inboxes: dict[AgentId, queue.Queue] = {}
        self._last_seq: dict[tuple[AgentId, AgentId], int] = {}
        self._closed = False
        self.messages_sent = 0

    def register(self, agent_id: AgentId) -> queue.Queue:
        with self._lock:
            if self._closed:
                raise BusError("bus is shut down")
            if agent_id in self._inboxes:
                raise BusError(f"agent {agent_id} already registered")
            inbox = queue.Queue()
            self._inboxes[agent_id] = inbox
            return inbox

    def unregister(self, agent_id: AgentId):
        with self._lock:
            self._inboxes.pop(agent_id, None)

    def dispatch(self, msg: Message) -> Ack:
        with self._lock:
            if self._closed:
                raise BusError("bus is shut down")
            inbox = self._inboxes.get(msg.to)
            if inbox is None:
                raise BusError(f"unknown recipient {msg.to}")
            pair = (msg.sender, msg.to)
            if msg.seq <= self._last_seq.get(pair, -1):
                raise BusError(f"out-of-order seq {msg.seq} from {msg.sender} to {msg.to}")
            self._last_seq[pair] = msg.seq
            self.messages_sent += 1
            inbox.put(msg)
        return Ack(msg.to, msg.seq)

    def shutdown(self):
        with self._lock:
            self._closed = True
            inboxes = list(self._inboxes.values())
        for inbox in inboxes:
            inbox.put(_STOP)


def dispatch(msg: Message, bus: MessageBus) -> Ack:
    return bus.dispatch(msg)


class Agent:
    def __init__(self, agent_id: AgentId, bus: MessageBus):
        self.id = agent_id
        self.bus = bus
        self.inbox = bus.register(agent_id)
        self._seq: dict[AgentId, int] = {}

    def send(self, to: AgentId, payload) -> Ack:
        seq = self._seq.get(to, 0)
        self._seq[to] = seq + 1
        return self.bus.dispatch(Message(seq, self.id, to, payload))


class ThreadedAgent(Agent):
    """Runs ``handle`` for each inbox message on a dedicated thread.

    An exception escaping ``handle`` is reported to ``supervisor`` as a
    :class:`Failure` and the agent stops.
    """

    def __init__(self, agent_id, bus, supervisor: AgentId):
        super().__init__(agent_id, bus)
        self.supervisor = supervisor
        self.thread = threading.Thread(target=self._run, name=str(agent_id), daemon=True)

    def start(self):
        self.thread.start()
        return self

    def _run(self):
        while True:
            msg = self.inbox.get()
            if msg is _STOP:
                return
            try:
                self.handle(msg)
            except Exception as exc:  # supervised: any crash becomes a Failure message
                log.warning("agent %s crashed: %s", self.id, exc)
                self.bus.unregister(self.id)
                batch_id = getattr(msg.payload, "batch_id", None)
                try:
                    self.send(self.supervisor, Failure(batch_id, f"{type(exc).__name__}: {exc}"))
                except BusError:
                    pass
                return

    def handle(self, msg: Message):
        raise NotImplementedError


class AssetTrackingAgent(ThreadedAgent):
    def handle(self, msg):
        batch = msg.payload
        snaps = compute_snapshots(batch.series, batch.params)
        self.send(msg.sender, TechnicalSnapshotBatch(tuple(snaps)))


class AgentCrash(RuntimeError):
    """Injected failure used to exercise re-assignment."""


@dataclass
class PipelineStats:
    messages_sent: int = 0
    articles_scored: int = 0
    fallbacks_used: int = 0
    agent_failures: int = 0
    permanently_failed: int = 0
    peak_in_flight: int = 0
    wall_time: float = 0.0
    audit: list = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "messages_sent": self.messages_sent,
            "articles_scored": self.articles_scored,
            "fallbacks_used": self.fallbacks_used,
            "agent_failures": self.agent_failures,
            "permanently_failed": self.permanently_failed,
            "peak_in_flight": self.peak_in_flight,
            "wall_time": self.wall_time,
            "audit": list(self.audit),
        }


def fallback_score(
    article: NewsArticle,
    stats: PipelineStats | None = None,
    exhaustion: BackendExhausted | None = None,
) -> SentimentScore:
    """Keyword-baseline score used once the scoring backend is exhausted.

    Calling this without the exhaustion that justifies it is recorded as a
    contract violation in ``stats.audit``.
    """
    score = keyword_score(article.text)
    if stats is not None:
        stats.fallbacks_used += 1
        if exhaustion is None:
            stats.audit.append(f"fallback without backend exhaustion for article {article.id}")
    return score


class NewsAnalysisAgent(ThreadedAgent):
    def __init__(self, agent_id, bus, supervisor, backend, policy, fallback, crash_after=None):
        super().__init__(agent_id, bus, supervisor)
        self.backend = backend
        self.policy = policy
        self.fallback = fallback
        self.crash_after = crash_after

    def _score(self, article: NewsArticle) -> ScoredArticle:
        kw = keyword_score(article.text)
        if self.backend is None:
            return ScoredArticle(article.id, article.published_at, kw, kw)
        try:
            dims = score_article(article, self.backend, self.policy)
        except BackendExhausted as exc:
            if not self.fallback:
                return ScoredArticle(article.id, article.published_at, None, kw)
            return ScoredArticle(
                article.id,
                article.published_at,
                fallback_score(article, exhaustion=exc),
                kw,
                fallback=True,
            )
        composite = dims.composite
        return ScoredArticle(
            article.id, article.published_at, to_sentiment(composite), kw, composite
        )

    def handle(self, msg):
        batch = msg.payload
        results = []
        for i, article in enumerate(batch.articles):
            if self.crash_after is not None and i == self.crash_after:
                self.crash_after = None
                raise AgentCrash(f"injected crash after {i} article(s)")
            results.append(self._score(article))
        self.send(msg.sender, ScoredArticleBatch(batch.batch_id, tuple(results)))


def balance_load(count: int, workers: int) -> list[range]:
    """Split ``count`` items into ``workers`` contiguous ranges whose sizes differ by at most one."""
    if workers < 1:
        raise ValueError("need at least one worker")
    if count < 0:
        raise ValueError("count must be non-negative")
    base, extra = divmod(count, workers)
    out, start = [], 0
    for w in range(workers):
        size = base + (1 if w < extra else 0)
        out.append(range(start, start + size))
        start += size
    return out


@dataclass(frozen=True)
class PipelineConfig:
    params: IndicatorParams = IndicatorParams()
    alpha_table: dict = field(default_factory=lambda: dict(DEFAULT_ALPHA))
    band: float = 0.3
    regime_lookback: int = 90
    workers: int = 4
    fallback: bool = True
    policy: BackendPolicy = BackendPolicy()
    max_in_flight: int = 8
    receive_timeout: float = 120.0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for k, v in self.alpha_table.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"alpha for {k} outside [0, 1]")
        if not 0.0 <= self.band <= 1.0:
            raise ValueError("classification band must lie in [0, 1]")


def date_range(start: dt.date, end: dt.date) -> list[dt.date]:
    if end < start:
        raise ValueError("end date precedes start date")
    return [start + dt.timedelta(days=i) for i in range((end - start).days + 1)]


class MarketPredictionAgent(Agent):
    """Hub agent: runs on the caller's thread and owns fusion."""

    def __init__(self, bus, config: PipelineConfig, backend, crash_plan=None):
        super().__init__(AgentId(Role.MARKET_PREDICTION, 0), bus)
        self.config = config
        self.backend = backend
        self.crash_plan = dict(crash_plan or {})
        self.stats = PipelineStats()
        self.workers: dict[AgentId, NewsAnalysisAgent] = {}
        self.tracker: AssetTrackingAgent | None = None
        self._next_instance = 0

    def _spawn_worker(self) -> AgentId:
        aid = AgentId(Role.NEWS_ANALYSIS, self._next_instance)
        self._next_instance += 1
        agent = NewsAnalysisAgent(
            aid,
            self.bus,
            self.id,
            self.backend,
            self.config.policy,
            self.config.fallback,
            crash_after=self.crash_plan.get(aid.instance),
        )
        self.workers[aid] = agent.start()
        return aid

    def _receive(self) -> Message:
        try:
            msg = self.inbox.get(timeout=self.config.receive_timeout)
        except queue.Empty:
            raise PipelineError("timed out waiting for agent replies") from None
        if msg is _STOP:
            raise PipelineError("bus shut down while results were pending")
        return msg

    def _reassign(self, batch_id: int, batch: tuple) -> AgentId:
        while True:
            target = min(self.workers) if self.workers else self._spawn_worker()
            try:
                self.send(target, ArticleBatch(batch_id, batch))
                return target
            except BusError:
                if target not in self.workers:
                    raise
                # crashed but its Failure is still queued behind this one
                self.workers.pop(target, None)

    def collect(self, series: CandleSeries, articles: Sequence[NewsArticle]):
        self.tracker = AssetTrackingAgent(AgentId(Role.ASSET_TRACKING, 0), self.bus, self.id)
        self.tracker.start()
        self.send(self.tracker.id, CandleBatch(series, self.config.params))
        for _ in range(self.config.workers):
            self._spawn_worker()

        pending: dict[int, tuple[AgentId, tuple]] = {}
        live = sorted(self.workers)
        for batch_id, (aid, idx) in enumerate(
            zip(live, balance_load(len(articles), len(live)))
        ):
            if len(idx) == 0:
                continue
            batch = tuple(articles[i] for i in idx)
            pending[batch_id] = (aid, batch)
            self.send(aid, ArticleBatch(batch_id, batch))

        snapshots = None
        scored: dict[str, ScoredArticle] = {}
        while snapshots is None or pending:
            msg = self._receive()
            payload = msg.payload
            if isinstance(payload, TechnicalSnapshotBatch):
                snapshots = payload.snapshots
            elif isinstance(payload, ScoredArticleBatch):
                if pending.pop(payload.batch_id, None) is None:
                    continue  # late duplicate of a re-assigned batch
                for res in payload.results:
                    scored[res.article_id] = res
            elif isinstance(payload, Failure):
                self.stats.agent_failures += 1
                if msg.sender.role is not Role.NEWS_ANALYSIS:
                    raise PipelineError(f"{msg.sender} failed: {payload.reason}")
                self.workers.pop(msg.sender, None)
                self.stats.audit.append(f"{msg.sender} failed: {payload.reason}")
                # everything queued at the dead worker is lost with it
                orphaned = sorted(b for b, (aid, _) in pending.items() if aid == msg.sender)
                for batch_id in orphaned:
                    batch = pending[batch_id][1]
                    target = self._reassign(batch_id, batch)
                    pending[batch_id] = (target, batch)
                    self.stats.audit.append(f"batch {batch_id} re-assigned to {target}")
        return snapshots, scored


def run_pipeline(
    corpus: Iterable[NewsArticle],
    series: CandleSeries,
    dates: Sequence[dt.date],
    horizons: Iterable[Horizon],
    backend=None,
    config: PipelineConfig = PipelineConfig(),
    crash_plan: dict | None = None,
) -> tuple[list[Prediction], PipelineStats]:
    """Backtest predictions for every (date, horizon) pair.

    ``backend=None`` selects the keyword baseline for all articles. With a
    backend, articles whose scoring is exhausted fall back to the keyword
    baseline when ``config.fallback`` is set. ``crash_plan`` maps a
    news-agent instance number to the article index at which it crashes,
    for fault-injection runs.
    """
    started = time.perf_counter()
    dates = sorted(set(dates))
    horizons = sorted(set(horizons), key=lambda h: h.days)
    if not dates:
        raise PipelineError("empty date range")
    if not horizons:
        raise PipelineError("no horizons requested")
    try:
        first = series.index_of(dates[0])
        last = series.index_of(dates[-1])
    except Exception as exc:
        raise PipelineError(f"candle series does not cover the date range: {exc}") from None
    if first < config.params.warmup:
        raise PipelineError(
            f"{dates[0]} precedes the indicator warm-up; first predictable date is "
            f"{series.dates[config.params.warmup]}"
        )
    if last + horizons[-1].days >= len(series):
        raise PipelineError(
            f"series must extend {horizons[-1].days} bar(s) past {dates[-1]} for the "
            f"{horizons[-1].label} horizon"
        )

    day_set = set(dates)
    articles = sorted(
        (a for a in corpus if a.date in day_set), key=lambda a: (a.published_at, a.id)
    )

    bus = MessageBus()
    handle = None if backend is None else BoundedBackend(backend, config.max_in_flight)
    hub = MarketPredictionAgent(bus, config, handle, crash_plan)
    try:
        snapshots, scored = hub.collect(series, articles)
    finally:
        bus.shutdown()
        for agent in [hub.tracker, *hub.workers.values()]:
            if agent is not None:
                agent.thread.join(timeout=5)

    stats = hub.stats
    stats.messages_sent = bus.messages_sent
    stats.peak_in_flight = handle.peak_in_flight if handle is not None else 0
    for art in articles:
        res = scored.get(art.id)
        if res is None or res.sentiment is None:
            stats.permanently_failed += 1
            continue
        stats.articles_scored += 1
        if res.fallback:
            stats.fallbacks_used += 1

    system = "Baseline" if backend is None else "Ours"
    by_day: dict[dt.date, list[ScoredArticle]] = {d: [] for d in dates}
    for art in articles:
        res = scored.get(art.id)
        if res is not None and res.sentiment is not None:
            by_day[art.date].append(res)

    vols = [s.volatility if s is not None else math.nan for s in snapshots]
    predictions = []
    for day in dates:
        t = series.index_of(day)
        snap: TechnicalSnapshot = snapshots[t]
        results = by_day[day]
        fallbacks = sum(r.fallback for r in results)
        if backend is None or fallbacks:
            # one origin per day: any fallback degrades the whole day to the baseline
            pairs = [(r.published_at, r.keyword) for r in results]
            origin = Origin.KEYWORD_BASELINE
        else:
            pairs = [(r.published_at, r.sentiment) for r in results]
            origin = Origin.MULTI_DIMENSIONAL
        daily = aggregate_daily(pairs, day)

        history = [v for v in vols[:t] if not math.isnan(v)]
        notes = []
        if history and not math.isnan(snap.volatility):
            regime = detect_regime(snap.volatility, history, config.regime_lookback)
        else:
            regime = Regime(RegimeKind.NORMAL, snap.volatility, math.nan, math.nan)
            notes.append("no volatility history; Normal regime assumed")
        weights = alpha_for(regime, config.alpha_table)
        p_final = fuse(daily.value, snap.s_technical, weights.alpha)
        predicted, conflict = resolve_conflict(
            classify(daily.value, config.band),
            classify(snap.s_technical, config.band),
            classify(p_final, config.band),
        )
        if conflict:
            notes.append(conflict)
        if daily.empty:
            notes.append("empty-day: no news scored, S_news = 0")
        for h in horizons:
            predictions.append(
                Prediction(
                    date=day,
                    horizon=h,
                    s_news=daily.value,
                    s_technical=snap.s_technical,
                    alpha=weights.alpha,
                    p_final=p_final,
                    predicted=predicted,
                    origin=origin.value,
                    empty_news=daily.empty,
                    regime=regime.kind,
                    volatility=snap.volatility,
                    article_count=daily.article_count,
                    fallback_count=fallbacks,
                    system=system,
                    notes=tuple(notes),
                )
            )
    stats.wall_time = time.perf_counter() - started
    return predictions, stats


def predictions_to_jsonl(predictions: Iterable[Prediction]) -> str:
    return "".join(
        json.dumps(p.to_record(), sort_keys=True, ensure_ascii=False) + "\n" for p in predictions
    )


def predictions_from_jsonl(text: str) -> list[Prediction]:
    return [Prediction.from_record(json.loads(line)) for line in text.splitlines() if line.strip()]
