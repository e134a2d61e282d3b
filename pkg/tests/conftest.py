import datetime as dt
import sys
import threading

import pytest

from cryptotrend.exceptions import BackendTimeout, GatewayError
from cryptotrend.gateway import MockBackend
from cryptotrend.synthetic import make_candles, make_corpus

WARMUP_BARS = 30
FIXTURE_DAYS = 60


class ScriptedBackend:
    """Fails the first ``failures`` calls (per article), then delegates to a mock."""

    def __init__(self, failures=0, error=GatewayError, seed=0):
        self.failures = failures
        self.error = error
        self.mock = MockBackend(seed)
        self.calls = []
        self._seen = {}
        self._lock = threading.Lock()

    def complete(self, request, timeout=None):
        with self._lock:
            self.calls.append(request.article_id)
            n = self._seen.get(request.article_id, 0)
            self._seen[request.article_id] = n + 1
        if n < self.failures:
            raise self.error(f"scripted failure {n + 1}")
        return self.mock.complete(request, timeout)


class AlwaysFailingBackend:
    def __init__(self, error=BackendTimeout):
        self.error = error
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, request, timeout=None):
        with self._lock:
            self.calls += 1
        raise self.error("endpoint unavailable")


@pytest.fixture(scope="session")
def fixture60():
    """60 prediction days, 4 articles per day (240 articles), enough bars on both sides."""
    series = make_candles(WARMUP_BARS + FIXTURE_DAYS + 16, seed=11)
    dates = series.dates[WARMUP_BARS : WARMUP_BARS + FIXTURE_DAYS]
    corpus = make_corpus(dates, per_day=4, seed=11)
    return series, dates, corpus


@pytest.fixture
def day():
    return dt.date(2025, 7, 21)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
