import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cryptotrend.coordination import (
    AgentId,
    ArticleBatch,
    Failure,
    Message,
    MessageBus,
    PipelineConfig,
    PipelineStats,
    Role,
    balance_load,
    dispatch,
    fallback_score,
    predictions_from_jsonl,
    predictions_to_jsonl,
    run_pipeline,
)
from cryptotrend.exceptions import BusError, PipelineError
from cryptotrend.gateway import BackendPolicy, MockBackend
from cryptotrend.market_data import HORIZONS
from cryptotrend.news import NewsArticle

from conftest import AlwaysFailingBackend, ScriptedBackend

A = AgentId(Role.ASSET_TRACKING)
M = AgentId(Role.MARKET_PREDICTION)
N0 = AgentId(Role.NEWS_ANALYSIS, 0)
H = list(HORIZONS.values())
FAST = BackendPolicy(timeout=5, max_retries=1, backoff_initial=0.0)


def test_dispatch_preserves_order():
    bus = MessageBus()
    inbox = bus.register(M)
    bus.register(N0)
    for seq in range(5):
        assert dispatch(Message(seq, N0, M, Failure(seq, "x")), bus).seq == seq
    assert [inbox.get_nowait().seq for _ in range(5)] == list(range(5))
    assert bus.messages_sent == 5


def test_dispatch_errors():
    bus = MessageBus()
    bus.register(M)
    with pytest.raises(BusError, match="unknown recipient"):
        bus.dispatch(Message(0, M, A, Failure(None, "x")))
    bus.dispatch(Message(3, N0, M, Failure(None, "x")))
    with pytest.raises(BusError, match="out-of-order"):
        bus.dispatch(Message(3, N0, M, Failure(None, "x")))
    with pytest.raises(BusError, match="already registered"):
        bus.register(M)
    bus.shutdown()
    with pytest.raises(BusError, match="shut down"):
        bus.dispatch(Message(4, N0, M, Failure(None, "x")))


def test_message_payload_type_checked():
    with pytest.raises(TypeError):
        Message(0, M, A, "not a payload")


def test_concurrent_dispatch_counts():
    bus = MessageBus()
    inbox = bus.register(M)
    senders = [AgentId(Role.NEWS_ANALYSIS, i) for i in range(8)]

    def send(s):
        for seq in range(50):
            bus.dispatch(Message(seq, s, M, Failure(seq, "")))

    threads = [threading.Thread(target=send, args=(s,)) for s in senders]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    got = [inbox.get_nowait() for _ in range(400)]
    for s in senders:
        assert [m.seq for m in got if m.sender == s] == list(range(50))


def test_balance_load_examples():
    assert [len(r) for r in balance_load(10, 3)] == [4, 3, 3]
    assert [len(r) for r in balance_load(0, 3)] == [0, 0, 0]
    assert balance_load(5, 1) == [range(0, 5)]


@given(st.integers(0, 500), st.integers(1, 32))
def test_balance_load_partition(count, workers):
    parts = balance_load(count, workers)
    assert len(parts) == workers
    assert [i for r in parts for i in r] == list(range(count))
    sizes = [len(r) for r in parts]
    assert max(sizes) - min(sizes) <= 1


def test_balance_load_invalid():
    with pytest.raises(ValueError):
        balance_load(3, 0)


def test_fallback_score_audit():
    art = NewsArticle("x", 1, "Bitcoin surge", "", "")
    stats = PipelineStats()
    assert fallback_score(art, stats).value == 1.0
    assert stats.fallbacks_used == 1
    assert stats.audit == ["fallback without backend exhaustion for article x"]


def _run(fixture60, backend=None, **kw):
    series, dates, corpus = fixture60
    crash = kw.pop("crash_plan", None)
    return run_pipeline(corpus, series, dates, H, backend, PipelineConfig(**kw), crash)


def test_cardinality_and_order(fixture60):
    _, dates, corpus = fixture60
    preds, stats = _run(fixture60, MockBackend(1))
    assert len(preds) == len(dates) * 3
    assert [p.key() for p in preds] == sorted(p.key() for p in preds)
    assert stats.articles_scored == len(corpus) and stats.fallbacks_used == 0
    assert all(p.origin == "MultiDimensional" and p.system == "Ours" for p in preds)
    # fused score is shared across horizons for a day
    by_day = {}
    for p in preds:
        by_day.setdefault(p.date, set()).add(p.p_final)
    assert all(len(v) == 1 for v in by_day.values())


def test_baseline_system(fixture60):
    preds, stats = _run(fixture60)
    assert all(p.origin == "KeywordBaseline" and p.system == "Baseline" for p in preds)
    assert stats.fallbacks_used == 0


def test_determinism_across_worker_counts(fixture60):
    one, _ = _run(fixture60, MockBackend(1), workers=1)
    eight, stats = _run(fixture60, MockBackend(1), workers=8)
    again, _ = _run(fixture60, MockBackend(1), workers=8)
    assert predictions_to_jsonl(one) == predictions_to_jsonl(eight) == predictions_to_jsonl(again)
    assert stats.peak_in_flight <= 8


def test_all_failing_backend_falls_back(fixture60):
    _, dates, corpus = fixture60
    preds, stats = _run(fixture60, AlwaysFailingBackend(), policy=FAST)
    assert stats.fallbacks_used == len(corpus)
    assert all(p.origin == "KeywordBaseline" for p in preds)
    baseline, _ = _run(fixture60)
    assert [p.p_final for p in preds] == [p.p_final for p in baseline]


def test_retry_recovers_without_fallback(fixture60):
    preds, stats = _run(fixture60, ScriptedBackend(failures=1, seed=1), policy=FAST)
    clean, _ = _run(fixture60, MockBackend(1))
    assert stats.fallbacks_used == 0
    assert predictions_to_jsonl(preds) == predictions_to_jsonl(clean)


def test_fallback_disabled_drops_articles(fixture60):
    _, _, corpus = fixture60
    _, stats = _run(fixture60, AlwaysFailingBackend(), policy=FAST, fallback=False)
    assert stats.permanently_failed == len(corpus) and stats.articles_scored == 0


def test_partial_failure_degrades_whole_day(fixture60):
    _, dates, corpus = fixture60
    bad = corpus[0].id

    class OneBad(MockBackend):
        def complete(self, request, timeout=None):
            if request.article_id == bad:
                raise TimeoutError("boom")
            return super().complete(request, timeout)

    preds, stats = _run(fixture60, OneBad(1), policy=FAST)
    assert stats.fallbacks_used == 1
    day = corpus[0].date
    assert {p.origin for p in preds if p.date == day} == {"KeywordBaseline"}
    assert {p.origin for p in preds if p.date != day} == {"MultiDimensional"}


@pytest.mark.parametrize("plan", [{0: 0}, {1: 5}, {0: 3, 1: 0, 2: 7}])
def test_crash_recovery_identical_output(fixture60, plan):
    clean, _ = _run(fixture60, MockBackend(1))
    crashed, stats = _run(fixture60, MockBackend(1), crash_plan=plan)
    assert predictions_to_jsonl(crashed) == predictions_to_jsonl(clean)
    assert stats.agent_failures == len(plan)
    assert any("re-assigned" in line for line in stats.audit)


def test_single_worker_crash_spawns_replacement(fixture60):
    clean, _ = _run(fixture60, MockBackend(1), workers=1)
    crashed, stats = _run(fixture60, MockBackend(1), workers=1, crash_plan={0: 10})
    assert predictions_to_jsonl(crashed) == predictions_to_jsonl(clean)
    assert "NewsAnalysis#1" in " ".join(stats.audit)


def test_empty_corpus(fixture60):
    series, dates, _ = fixture60
    preds, stats = run_pipeline([], series, dates, H, MockBackend(1))
    assert all(p.s_news == 0.0 and p.empty_news for p in preds)
    assert all(any(n.startswith("empty-day") for n in p.notes) for p in preds)
    assert stats.articles_scored == 0


def test_coverage_validation(fixture60):
    series, dates, corpus = fixture60
    with pytest.raises(PipelineError, match="warm-up"):
        run_pipeline(corpus, series, series.dates[:5], H)
    with pytest.raises(PipelineError, match="extend"):
        run_pipeline(corpus, series, series.dates[-3:], H)
    with pytest.raises(PipelineError, match="empty"):
        run_pipeline(corpus, series, [], H)


def test_jsonl_roundtrip(fixture60):
    preds, _ = _run(fixture60, MockBackend(1))
    text = predictions_to_jsonl(preds)
    assert predictions_from_jsonl(text) == preds
    assert predictions_to_jsonl(predictions_from_jsonl(text)) == text


def test_article_batch_message():
    msg = Message(0, M, N0, ArticleBatch(0, ()))
    assert msg.payload.batch_id == 0
