"""Chat-completion annotation backends, retry policy and bounded batching."""

from __future__ import annotations

import hashlib
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from typing import Callable, Protocol

from .errors import (
    AnnotationError,
    AuthFailure,
    BackendExhausted,
    EmptyCompletion,
    KlineParseError,
    TransientBackendError,
)
from .prompting import INSTRUCT, PRETRAIN, AnnotationRequest, extract_kline_blocks, parse_kline

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnotationResponse:
    record_id: str
    raw_text: str
    backend_id: str
    latency_ms: int
    attempt: int


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    initial_delay: float = 1.0
    factor: float = 2.0
    jitter: float = 0.1
    max_delay: float = 60.0

    def delay(self, attempt: int, rng: random.Random) -> float:
        base = min(self.initial_delay * self.factor ** (attempt - 1), self.max_delay)
        return base * (1.0 + self.jitter * rng.random())


class Backend(Protocol):
    backend_id: str

    def complete(self, request: AnnotationRequest) -> str: ...


def annotate(
    request: AnnotationRequest,
    backend: Backend,
    policy: RetryPolicy = RetryPolicy(),
    sleep: Callable[[float], None] = time.sleep,
) -> AnnotationResponse:
    """Send one request, retrying transient failures with exponential backoff.

    Auth failures and empty completions are not retried.
    """
    # jitter seeded per record so retries never touch global random state
    rng = random.Random(request.record_id)
    last: Exception | None = None
    for attempt in range(1, policy.max_attempts + 1):
        t0 = time.perf_counter()
        try:
            text = backend.complete(request)
        except TransientBackendError as exc:
            last = exc
            if attempt == policy.max_attempts:
                break
            wait = policy.delay(attempt, rng)
            if exc.retry_after is not None:
                wait = max(wait, exc.retry_after)
            logger.warning("record %s attempt %d failed (%s); retrying in %.2fs", request.record_id, attempt, exc, wait)
            sleep(wait)
            continue
        if not text or not text.strip():
            raise EmptyCompletion(f"record {request.record_id}: backend returned no text")
        latency = int((time.perf_counter() - t0) * 1000)
        return AnnotationResponse(request.record_id, text, backend.backend_id, latency, attempt)
    raise BackendExhausted(f"record {request.record_id}: {policy.max_attempts} attempts failed; last error: {last}")


def annotate_batch(
    requests: list[AnnotationRequest],
    backend: Backend,
    policy: RetryPolicy = RetryPolicy(),
    max_in_flight: int = 4,
    sleep: Callable[[float], None] = time.sleep,
) -> list[AnnotationResponse | AnnotationError]:
    """Annotate ``requests`` with at most ``max_in_flight`` outstanding calls.

    The result is aligned with the input. A request that fails holds its
    :class:`AnnotationError` in its slot instead of a response; the rest of
    the batch still runs.
    """
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")

    def one(req: AnnotationRequest):
        try:
            return annotate(req, backend, policy, sleep)
        except AnnotationError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = [pool.submit(one, r) for r in requests]
        return [f.result() for f in futures]


# --------------------------------------------------------------------------
# Mock backend


def _direction(first: Decimal, last: Decimal, epsilon: Decimal) -> str:
    # deliberately independent of trend.trend_label: cross-multiplied, no division
    if last - first > epsilon * first:
        return "up"
    if first - last > epsilon * first:
        return "down"
    return "flat"


def _pct(a: Decimal, b: Decimal) -> str:
    return f"{float((b - a) / a * 100):+.2f}%"


_TREND_WORDS = {
    "up": "an upward trajectory",
    "down": "a downward trajectory",
    "flat": "a sideways trajectory",
}

_QUESTIONS = (
    "How would you describe the overall trend of this stock in the chart?",
    "What does the trading activity suggest about market participation?",
    "Where are the main support and resistance levels on this chart?",
    "How volatile has this stock been over the period shown?",
    "What is your forecast for the trend of this stock over the coming sessions?",
    "How do the moving averages relate to the latest candles?",
    "Which stage of the chart shows the strongest momentum?",
)


class MockBackend:
    """Offline backend whose answers are derived from the request's own data.

    Answers are a pure function of the request, so corpora built on the mock
    are byte-reproducible. The instruction-stage forecast states the true
    direction of the hidden segment, computed with threshold ``epsilon``.
    ``fault_rate`` deterministically corrupts a fraction of answers (chosen
    by record id) to exercise quarantine paths.
    """

    backend_id = "mock-v1"

    def __init__(self, epsilon: Decimal | str = "0.005", fault_rate: float = 0.0):
        self.epsilon = Decimal(str(epsilon))
        self.fault_rate = fault_rate
        self.calls = 0
        self._lock = threading.Lock()

    def _digest(self, record_id: str) -> bytes:
        return hashlib.sha256(f"mock|{record_id}".encode()).digest()

    def fault_kind(self, request: AnnotationRequest) -> str | None:
        d = self._digest(request.record_id)
        if int.from_bytes(d[:4], "big") / 2**32 >= self.fault_rate:
            return None
        kinds = ("ticker", "segment-name", "empty")
        if request.stage == INSTRUCT:
            kinds = ("ticker", "leakage", "unpaired", "separator")
        return kinds[d[4] % len(kinds)]

    def complete(self, request: AnnotationRequest) -> str:
        with self._lock:
            self.calls += 1
        blocks = extract_kline_blocks(request.user_content)
        try:
            segments = [parse_kline(b) for b in blocks]
        except KlineParseError as exc:
            raise AnnotationError(f"mock cannot read request data: {exc}") from exc
        if not segments:
            raise AnnotationError("mock found no k-line data in request")
        fault = self.fault_kind(request)
        if request.stage == PRETRAIN:
            return self._pretrain(request.record_id, segments[0], fault)
        if len(segments) < 2:
            raise AnnotationError("instruction request needs known and future data")
        return self._instruct(request.record_id, segments[0], segments[1], fault)

    def _pretrain(self, record_id: str, bars, fault: str | None) -> str:
        if fault == "empty":
            return "   \n"
        d = self._digest(record_id)
        closes = [b.close for b in bars]
        n = len(bars)
        cuts = [0, n // 3, 2 * n // 3, n - 1]
        ups = sum(b.close >= b.open for b in bars)
        lines = [
            "## Chart type",
            "",
            "This is a daily k-line chart of this stock covering "
            f"{n} trading sessions, from {bars[0].date.isoformat()} to {bars[-1].date.isoformat()}.",
            "",
            "## Trend stages",
            "",
        ]
        for i in range(3):
            a, b = closes[cuts[i]], closes[cuts[i + 1]]
            word = {"up": "advanced", "down": "declined", "flat": "moved sideways"}[_direction(a, b, self.epsilon)]
            lines.append(
                f"{i + 1}. In stage {i + 1} the price {word}, from about {a:.2f} to {b:.2f} ({_pct(a, b)})."
            )
        hi = max(b.high for b in bars)
        lo = min(b.low for b in bars)
        overall = _direction(closes[0], closes[-1], self.epsilon)
        lines += [
            "",
            "## Analysis",
            "",
            f"The highest point on the chart is near {hi:.2f} and the lowest near {lo:.2f}, "
            f"a range of {_pct(lo, hi)} relative to the low. Rising candles account for "
            f"{ups} of {n} sessions, which points to "
            + ("buyers in control." if ups * 2 > n else "sellers holding the upper hand.")
            + " Trading activity bars show "
            + ("expanding participation." if d[5] % 2 else "fairly steady participation."),
            "",
            "## Summary",
            "",
            f"Overall this stock shows {_TREND_WORDS[overall]} over the period, "
            f"changing {_pct(closes[0], closes[-1])} from the first to the last session.",
        ]
        if fault == "ticker":
            lines.append("This pattern is typical for 600519 in similar markets.")
        elif fault == "segment-name":
            lines.append("Note that the `close` column trends with the `open` column.")
        return "\n".join(lines)

    def _instruct(self, record_id: str, known, future, fault: str | None) -> str:
        d = self._digest(record_id)
        n_turns = 4 + d[6] % 3
        closes = [b.close for b in known]
        first, last = closes[0], closes[-1]
        direction = _direction(future[0].close, future[-1].close, self.epsilon)
        hi = max(b.high for b in known)
        lo = min(b.low for b in known)
        swings = [abs(b.close - b.open) / b.open for b in known]
        answers = {
            0: f"Across the chart this stock moves from about {first:.2f} to {last:.2f} ({_pct(first, last)}), "
            f"with {_TREND_WORDS[_direction(first, last, self.epsilon)]} overall.",
            1: "Trading activity bars "
            + ("rise on the advancing candles, so participation supports the move."
               if d[7] % 2 else "stay fairly even, so participation is neutral."),
            2: f"Support sits near {lo:.2f}, the lowest wick on the chart, and resistance near {hi:.2f}.",
            3: f"The average candle body spans {float(sum(swings) / len(swings)) * 100:.2f}% of the price, "
            "which is a " + ("calm" if sum(swings) / len(swings) < Decimal("0.01") else "lively") + " pace.",
            4: f"Based on the chart, this stock is likely to follow {_TREND_WORDS[direction]} "
            "over the next several sessions.",
            5: "The shorter averages track the latest candles closely, which confirms the recent direction.",
            6: "The strongest momentum appears in the final third of the chart.",
        }
        order = [0, 1, 2, 3, 5, 6][: n_turns - 1]
        order.insert(min(3, len(order)), 4)
        turns = [(_QUESTIONS[i], answers[i]) for i in order]
        if fault == "ticker":
            turns[0] = (turns[0][0], turns[0][1] + " Peers such as 600519 behave alike.")
        elif fault == "leakage":
            turns[-1] = (turns[-1][0], "Based on the future data provided, the move continues.")
        elif fault == "separator":
            turns[1] = (turns[1][0], "Support@resistance are both visible.")
        text = "".join(f"{q}@{a}@" for q, a in turns)
        if fault == "unpaired":
            text += "One more question?@"
        return text


# --------------------------------------------------------------------------
# HTTP backend


class ChatCompletionBackend:
    """Backend speaking the common ``/chat/completions`` JSON schema.

    The credential is read from the environment variable named by
    ``api_key_env`` and is only ever placed in the Authorization header.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "OPENAI_API_KEY",
        temperature: float = 0.7,
        timeout: float = 120.0,
        client=None,
    ):
        import httpx

        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.backend_id = f"chat:{model}"
        self._api_key_env = api_key_env
        self._client = client or httpx.Client(timeout=timeout)
        self._httpx = httpx

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self._api_key_env)
        if not key:
            raise AuthFailure(f"environment variable {self._api_key_env} is not set")
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def payload(self, request: AnnotationRequest) -> dict:
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.append({"role": "user", "content": request.user_content})
        return {"model": self.model, "messages": messages, "temperature": self.temperature}

    def complete(self, request: AnnotationRequest) -> str:
        url = f"{self.endpoint}/chat/completions"
        try:
            resp = self._client.post(url, json=self.payload(request), headers=self._headers())
        except self._httpx.TransportError as exc:
            raise TransientBackendError(f"transport error: {type(exc).__name__}") from exc
        if resp.status_code in (401, 403):
            raise AuthFailure(f"backend refused credentials (HTTP {resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            retry_after = resp.headers.get("retry-after")
            try:
                wait = float(retry_after) if retry_after else None
            except ValueError:
                wait = None
            raise TransientBackendError(f"HTTP {resp.status_code}", retry_after=wait)
        if resp.status_code >= 400:
            raise AnnotationError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise AnnotationError(f"unexpected response body: {exc}") from exc
