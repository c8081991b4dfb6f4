"""Provider-style REST client with retries, rate limiting and provenance.

Wire contract: ``GET {base_url}/bars?symbol=&interval=&start=&end=`` with the
api key in the ``X-API-Key`` header; a 200 body is a JSON array of bar objects
using the OHLCV CSV column names.  Transient failures (HTTP 5xx, 429,
timeouts, connection errors) are retried with exponential backoff and full
jitter; other 4xx codes fail immediately.
"""

from __future__ import annotations

import hashlib
import os
import random
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone

import requests

from ..core import AssetSeries, Bar, ensure_utc
from .parsers import ParseError, parse_timestamp

API_KEY_ENV = "QUANTBENCH_API_KEY"
API_KEY_HEADER = "X-API-Key"
INTERVALS = ("daily", "minute")


class ProviderError(RuntimeError):
    """Request failed; ``status`` carries the last HTTP status when known."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class RetryBackoff:
    """Exponential backoff schedule: delay_k = base * factor**k, full jitter."""

    base: float = 0.1
    factor: float = 2.0
    max_delay: float = 10.0

    def delay(self, attempt: int, rng: random.Random) -> float:
        ceiling = min(self.max_delay, self.base * self.factor**attempt)
        return rng.uniform(0.0, ceiling)


@dataclass(frozen=True)
class RateLimit:
    """At most ``max_requests`` sends per sliding ``window`` seconds."""

    max_requests: int = 10
    window: float = 1.0

    def __post_init__(self) -> None:
        if self.max_requests <= 0:
            raise ValueError("rate limit must allow at least one request")


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str
    api_key: str = ""
    name: str = ""
    max_retries: int = 3
    retry_backoff: RetryBackoff = field(default_factory=RetryBackoff)
    rate_limit: RateLimit = field(default_factory=RateLimit)
    timeout: float = 10.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not self.name:
            host = self.base_url.split("//")[-1].split("/")[0] or "provider"
            object.__setattr__(self, "name", host)

    def resolve_api_key(self) -> str:
        # Env var wins over the configured literal; the key is never logged.
        return os.environ.get(API_KEY_ENV) or self.api_key


@dataclass(frozen=True)
class Provenance:
    provider: str
    version: str
    retrieved_at: datetime
    request_digest: str

    def __post_init__(self) -> None:
        if not (self.provider and self.version and self.request_digest):
            raise ValueError("provenance fields must be non-empty")


class RateLimiter:
    """Sliding-window limiter; ``acquire`` blocks until a send slot is free.

    The only shared mutable state in this module; safe under concurrent use.
    """

    def __init__(self, limit: RateLimit, clock=time.monotonic, sleep=time.sleep):
        self._limit = limit
        self._clock = clock
        self._sleep = sleep
        self._sent: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                while self._sent and now - self._sent[0] >= self._limit.window:
                    self._sent.popleft()
                if len(self._sent) < self._limit.max_requests:
                    self._sent.append(now)
                    return
                wait = self._limit.window - (now - self._sent[0])
            self._sleep(max(wait, 1e-4))


def _request_digest(params: dict[str, str], base_url: str) -> str:
    canon = "&".join(f"{k}={params[k]}" for k in sorted(params)) + f"&url={base_url}"
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _bar_from_record(record: dict) -> Bar:
    try:
        adj = record.get("adjusted_close")
        return Bar(
            timestamp=parse_timestamp(str(record["timestamp"])),
            open=float(record["open"]),
            high=float(record["high"]),
            low=float(record["low"]),
            close=float(record["close"]),
            volume=float(record["volume"]),
            adjusted_close=None if adj is None else float(adj),
        )
    except (KeyError, TypeError, ValueError, ParseError) as exc:
        raise ProviderError(f"malformed bar record: {exc}") from None


def fetch_bars(
    config: ProviderConfig,
    symbol: str,
    interval: str,
    start: datetime,
    end: datetime,
    limiter: RateLimiter | None = None,
    session: requests.Session | None = None,
    rng: random.Random | None = None,
    sleep=time.sleep,
) -> tuple[AssetSeries, Provenance]:
    """Fetch bars in [start, end] for one symbol, with retries and provenance.

    A shared ``limiter`` lets concurrent per-symbol fetches respect one quota.
    """
    from .. import __version__

    if interval not in INTERVALS:
        raise ValueError(f"unsupported interval {interval!r}; expected one of {INTERVALS}")
    start, end = ensure_utc(start), ensure_utc(end)
    if start > end:
        raise ValueError("start must be <= end")

    limiter = limiter or RateLimiter(config.rate_limit)
    rng = rng or random.Random()
    own_session = session is None
    session = session or requests.Session()
    params = {
        "symbol": symbol,
        "interval": interval,
        "start": start.isoformat(),
        "end": end.isoformat(),
    }
    headers = {}
    key = config.resolve_api_key()
    if key:
        headers[API_KEY_HEADER] = key

    last_error: ProviderError | None = None
    try:
        for attempt in range(config.max_retries + 1):
            if attempt > 0:
                sleep(config.retry_backoff.delay(attempt - 1, rng))
            limiter.acquire()
            try:
                resp = session.get(
                    config.base_url.rstrip("/") + "/bars",
                    params=params,
                    headers=headers,
                    timeout=config.timeout,
                )
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_error = ProviderError(f"transport failure: {exc}")
                continue
            if resp.status_code == 200:
                try:
                    payload = resp.json()
                    if not isinstance(payload, list):
                        raise ProviderError("payload is not a JSON array")
                    bars = [_bar_from_record(r) for r in payload]
                except ProviderError:
                    raise
                except ValueError as exc:
                    raise ProviderError(f"undecodable payload: {exc}") from None
                bars = [b for b in bars if start <= b.timestamp <= end]
                bars.sort(key=lambda b: b.timestamp)
                series = AssetSeries(symbol, bars)
                provenance = Provenance(
                    provider=config.name,
                    version=__version__,
                    retrieved_at=datetime.now(timezone.utc),
                    request_digest=_request_digest(params, config.base_url),
                )
                return series, provenance
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = ProviderError(
                    f"HTTP {resp.status_code} from provider", status=resp.status_code
                )
                continue
            raise ProviderError(
                f"HTTP {resp.status_code} from provider (not retryable)",
                status=resp.status_code,
            )
        assert last_error is not None
        raise ProviderError(
            f"retries exhausted after {config.max_retries + 1} attempts: {last_error}",
            status=last_error.status,
        )
    finally:
        if own_session:
            session.close()
