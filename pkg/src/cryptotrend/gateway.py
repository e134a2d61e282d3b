"""Scoring backends for the seven-dimension analysis.

A backend is any object with ``complete(request, timeout) -> str`` that returns
the raw model answer for a :class:`ScoringRequest`. This module provides the
prompt template, the response parser, the retry loop, a deterministic mock and
a minimal HTTP client.

Mock score construction
-----------------------
For seed ``s``, article id ``a`` and dimension key ``d`` (e.g. ``market_impact``)::

    digest = sha256(f"{s}|{a}|{d}".encode("utf-8")).digest()
    u = int.from_bytes(digest[:8], "big") / 2**64        # u in [0, 1)
    score = low + (high - low) * u

with ``(low, high)`` the mock's score range, ``(0.0, 1.0)`` by default. The
mock emits these values as a JSON object, so its answers go through the same
parser as a real model's.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import socket
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field

from .exceptions import BackendExhausted, BackendTimeout, GatewayError, ResponseParseError
from .news import DIMENSION_CRITERIA, DIMENSIONS, WEIGHTS, NewsArticle

log = logging.getLogger(__name__)

_ARTICLE_MARKER = "=== ARTICLE ==="


def render_prompt(article: NewsArticle) -> str:
    """Deterministic scoring prompt: instruction block, then the article itself."""
    lines = [
        "You are a financial news analyst. Score the news article below for its expected "
        "effect on the cryptocurrency market.",
        "Rate each of the following seven dimensions with a number between 0.0 and 1.0.",
        "",
    ]
    for i, (key, weight) in enumerate(zip(DIMENSIONS, WEIGHTS), start=1):
        title, criteria = DIMENSION_CRITERIA[key]
        lines.append(f"{i}. {title} [weight {weight:.2f}]: {criteria}.")
    lines += [
        "",
        "The final score is the weighted sum of dimension score times weight; do not compute it.",
        "Reply with one JSON object and nothing else, containing exactly these numeric fields:",
        "{" + ", ".join(f'"{k}": <0.0-1.0>' for k in DIMENSIONS) + "}",
        "",
        _ARTICLE_MARKER,
        f"ID: {article.id}",
        "HEADLINE:",
        article.headline,
        "BODY:",
        article.body,
    ]
    return "\n".join(lines) + "\n"


def _instruction_block(prompt: str) -> str:
    return prompt.split(_ARTICLE_MARKER, 1)[0]


@dataclass(frozen=True)
class ScoringRequest:
    article_id: str
    prompt: str
    max_response_bytes: int = 65_536

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt is empty")
        if self.max_response_bytes <= 0:
            raise ValueError("max_response_bytes must be positive")
        head = _instruction_block(self.prompt)
        for key in DIMENSIONS:
            title = DIMENSION_CRITERIA[key][0]
            if head.count(title) != 1:
                raise ValueError(f"prompt must name dimension {title!r} exactly once")


@dataclass(frozen=True)
class ScoringResponse:
    article_id: str
    raw: str
    parsed: dict
    warnings: tuple = ()
    attempts: int = 1


@dataclass(frozen=True)
class BackendPolicy:
    timeout: float = 30.0
    max_retries: int = 3
    backoff_initial: float = 0.5
    backoff_multiplier: float = 2.0

    def __post_init__(self):
        if not (self.timeout > 0):
            raise ValueError("timeout must be positive")
        if not (0 <= self.max_retries <= 10) or int(self.max_retries) != self.max_retries:
            raise ValueError("max_retries must be an integer in [0, 10]")
        if self.backoff_initial < 0 or self.backoff_multiplier < 1:
            raise ValueError("backoff must be non-negative with multiplier >= 1")

    def delays(self) -> list[float]:
        return [
            self.backoff_initial * self.backoff_multiplier**i for i in range(self.max_retries)
        ]

    @property
    def max_wall_time(self) -> float:
        return (1 + self.max_retries) * self.timeout + sum(self.delays())


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ResponseParseError(f"duplicate field {k!r}")
        out[k] = v
    return out


def parse_response(raw: str, warnings: list | None = None) -> dict[str, float]:
    """Extract the seven named scores from a model answer.

    The answer must contain a JSON object (surrounding prose or code fences are
    tolerated). Out-of-range values are clamped to [0, 1] and reported through
    ``warnings`` and the module logger; missing, duplicate or non-numeric
    fields raise :class:`ResponseParseError`.
    """
    start, end = raw.find("{"), raw.rfind("}")
    if start < 0 or end < start:
        raise ResponseParseError("no JSON object in response")
    try:
        obj = json.loads(raw[start : end + 1], object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ResponseParseError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ResponseParseError("response is not a JSON object")

    out = {}
    for key in DIMENSIONS:
        if key not in obj:
            raise ResponseParseError(f"missing dimension field {key!r}")
        value = obj[key]
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ResponseParseError(f"field {key!r} is not a number: {value!r}")
        try:
            value = float(value)
        except ValueError:
            raise ResponseParseError(f"field {key!r} is not a number: {value!r}") from None
        if not math.isfinite(value):
            raise ResponseParseError(f"field {key!r} is not finite")
        if not 0.0 <= value <= 1.0:
            clamped = min(1.0, max(0.0, value))
            msg = f"{key}={value!r} outside [0, 1], clamped to {clamped}"
            log.warning(msg)
            if warnings is not None:
                warnings.append(msg)
            value = clamped
        out[key] = value
    return out


def call_with_policy(
    req: ScoringRequest, policy: BackendPolicy, endpoint, sleep=time.sleep, clock=time.monotonic
) -> ScoringResponse:
    """Call ``endpoint`` with retries and exponential backoff.

    At most ``1 + policy.max_retries`` requests are issued and no retry starts
    once ``policy.max_wall_time`` has elapsed.
    """
    deadline = clock() + policy.max_wall_time
    delays = policy.delays()
    last_error: Exception | None = None
    attempts = 0
    for attempt in range(1 + policy.max_retries):
        attempts += 1
        try:
            raw = endpoint.complete(req, timeout=policy.timeout)
            if len(raw.encode("utf-8")) > req.max_response_bytes:
                raise ResponseParseError(
                    f"response exceeds {req.max_response_bytes} bytes"
                )
            warnings: list[str] = []
            parsed = parse_response(raw, warnings)
            return ScoringResponse(req.article_id, raw, parsed, tuple(warnings), attempts)
        except (GatewayError, TimeoutError, OSError) as exc:
            last_error = exc
            log.debug("article %s attempt %d failed: %s", req.article_id, attempts, exc)
        if attempt == policy.max_retries:
            break
        delay = delays[attempt]
        if clock() + delay >= deadline:
            break
        sleep(delay)
    raise BackendExhausted(req.article_id, attempts, last_error)


class MockBackend:
    """Deterministic backend; scores are a pure function of (seed, article id).

    See the module docstring for the exact construction.
    """

    def __init__(self, seed: int = 0, score_range: tuple[float, float] = (0.0, 1.0)):
        low, high = score_range
        if not (0.0 <= low <= high <= 1.0):
            raise ValueError("score_range must satisfy 0 <= low <= high <= 1")
        self.seed = int(seed)
        self.score_range = (float(low), float(high))

    def scores(self, article_id: str) -> dict[str, float]:
        low, high = self.score_range
        out = {}
        for key in DIMENSIONS:
            digest = hashlib.sha256(f"{self.seed}|{article_id}|{key}".encode("utf-8")).digest()
            u = int.from_bytes(digest[:8], "big") / 2**64
            out[key] = low + (high - low) * u
        return out

    def complete(self, request: ScoringRequest, timeout: float | None = None) -> str:
        return json.dumps(self.scores(request.article_id))

    def __repr__(self):
        return f"MockBackend(seed={self.seed}, score_range={self.score_range})"


def mock_backend(seed: int, score_range=(0.0, 1.0)) -> MockBackend:
    return MockBackend(seed, score_range)


class HttpBackend:
    """POSTs ``{"article_id", "prompt", "max_response_bytes"}`` as JSON; the
    response body is the model's answer text.

    ``api_key_env`` names an environment variable holding a bearer token. The
    token itself is never logged or included in ``repr``.
    """

    def __init__(self, endpoint: str, api_key_env: str | None = None, model: str | None = None):
        if not endpoint:
            raise ValueError("endpoint URL is required")
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.model = model

    def _headers(self):
        headers = {"Content-Type": "application/json", "Accept": "application/json, text/plain"}
        if self.api_key_env:
            token = os.environ.get(self.api_key_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, request: ScoringRequest, timeout: float | None = None) -> str:
        body = {
            "article_id": request.article_id,
            "prompt": request.prompt,
            "max_response_bytes": request.max_response_bytes,
        }
        if self.model:
            body["model"] = self.model
        http_req = urllib.request.Request(
            self.endpoint,
            data=json.dumps(body).encode("utf-8"),
            headers=self._headers(),
            method="POST",
        )
        try:
            with urllib.request.urlopen(http_req, timeout=timeout) as resp:
                payload = resp.read(request.max_response_bytes + 1)
        except socket.timeout as exc:
            raise BackendTimeout(f"request timed out after {timeout}s") from exc
        except urllib.error.HTTPError as exc:
            raise GatewayError(f"HTTP {exc.code} from scoring endpoint") from None
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, socket.timeout):
                raise BackendTimeout(f"request timed out after {timeout}s") from exc
            raise GatewayError(f"transport error: {exc.reason}") from None
        return payload.decode("utf-8", errors="replace")

    def __repr__(self):
        return f"HttpBackend(endpoint={self.endpoint!r}, model={self.model!r})"


@dataclass
class BoundedBackend:
    """Caps concurrent in-flight calls to a wrapped backend."""

    backend: object
    max_in_flight: int = 8
    peak_in_flight: int = field(default=0, init=False)
    calls: int = field(default=0, init=False)

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self._sem = threading.BoundedSemaphore(self.max_in_flight)
        self._lock = threading.Lock()
        self._in_flight = 0

    def complete(self, request: ScoringRequest, timeout: float | None = None) -> str:
        with self._sem:
            with self._lock:
                self._in_flight += 1
                self.calls += 1
                self.peak_in_flight = max(self.peak_in_flight, self._in_flight)
            try:
                return self.backend.complete(request, timeout=timeout)
            finally:
                with self._lock:
                    self._in_flight -= 1
