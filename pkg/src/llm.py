"""Completion model gateway: HTTP completions/chat endpoints, mock fixtures, response cache."""

import hashlib
import json
import logging
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

import backoff
import httpx

from .cache import ResponseCache
from .config import (
    AUTH_ENV_VAR,
    CHARS_PER_TOKEN,
    MAX_OUTPUT_TOKENS,
    MAX_PARALLEL,
    MAX_RETRIES,
    RETRY_BASE_S,
    TEMPERATURE,
    TIMEOUT_S,
)
from .errors import BackendError, ConfigError, DataError
from .utils import read_jsonl

logger = logging.getLogger(__name__)

_LENGTH_ERROR_RE = re.compile(
    r"context.length|maximum context|too many tokens|token limit|prompt is too long", re.IGNORECASE
)


class BackendKind(StrEnum):
    HTTP_COMPLETIONS = "http_completions"
    HTTP_CHAT = "http_chat"
    MOCK = "mock"


class AuthMissing(ConfigError):
    """The environment variable holding the API key is unset."""


class BackendExhausted(BackendError):
    """Retries ran out on a transient failure."""


class RateLimitedExhausted(BackendExhausted):
    pass


class BackendTimeout(BackendExhausted):
    pass


class BackendUnavailable(BackendExhausted):
    pass


class TokenLimitExceeded(BackendError):
    """The server rejected the request for its length."""


class MockMiss(DataError):
    """The mock fixture has no completion for a prompt."""


def count_tokens_approx(text: str) -> int:
    return math.ceil(len(text) / CHARS_PER_TOKEN)


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_output_tokens: int = MAX_OUTPUT_TOKENS
    temperature: float = TEMPERATURE
    stop_sequences: tuple[str, ...] = ()
    model_id: str = ""

    def __post_init__(self):
        if not self.prompt:
            raise ConfigError("completion request with an empty prompt")
        if self.max_output_tokens < 1:
            raise ConfigError(f"max_output_tokens must be >= 1, got {self.max_output_tokens}")
        if not 0 <= self.temperature <= 2:
            raise ConfigError(f"temperature must be in [0, 2], got {self.temperature}")
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "prompt": self.prompt,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "stop_sequences": list(self.stop_sequences),
        }

    def cache_key(self) -> str:
        payload = [
            self.model_id,
            self.prompt,
            self.temperature,
            self.max_output_tokens,
            list(self.stop_sequences),
        ]
        return hashlib.sha256(json.dumps(payload, ensure_ascii=False).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CompletionResult:
    text: str
    finish_reason: str  # stop | length | error
    latency_ms: int
    cached: bool


@dataclass(frozen=True)
class BackendConfig:
    kind: BackendKind
    endpoint_url: str = ""
    model_id: str = ""
    auth_env_var: str = AUTH_ENV_VAR
    timeout_s: float = TIMEOUT_S
    max_retries: int = MAX_RETRIES
    max_parallel: int = MAX_PARALLEL
    fixture: Path | None = None
    retry_base_s: float = RETRY_BASE_S
    cache_dir: Path | None = field(default=None)

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", BackendKind(self.kind))
        except ValueError:
            kinds = ", ".join(k.value for k in BackendKind)
            raise ConfigError(f"unknown backend kind {self.kind!r} (expected one of {kinds})") from None
        if self.kind == BackendKind.MOCK and self.fixture is None:
            raise ConfigError("mock backend requires a fixture path")
        if self.kind != BackendKind.MOCK and not self.endpoint_url:
            raise ConfigError(f"{self.kind} backend requires an endpoint_url")
        if self.max_parallel < 1:
            raise ConfigError(f"max_parallel must be >= 1, got {self.max_parallel}")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.timeout_s <= 0:
            raise ConfigError(f"timeout_s must be positive, got {self.timeout_s}")


class MockBackend:
    """Fixture-driven completions: exact prompt hash first, then substring match."""

    def __init__(self, fixture: Path):
        self.by_hash: dict[str, str] = {}
        self.contains: list[tuple[str, str]] = []
        try:
            for lineno, record in read_jsonl(fixture):
                if "completion" not in record:
                    raise DataError(f"{fixture}:{lineno}: mock entry without a completion")
                if "prompt_sha256" in record:
                    self.by_hash[record["prompt_sha256"]] = record["completion"]
                elif record.get("contains"):
                    self.contains.append((record["contains"], record["completion"]))
                else:
                    raise DataError(f"{fixture}:{lineno}: mock entry needs prompt_sha256 or contains")
        except json.JSONDecodeError as e:
            raise DataError(f"{fixture}: invalid JSON line ({e})") from e
        except FileNotFoundError as e:
            raise ConfigError(f"mock fixture not found: {fixture}") from e

    def complete(self, prompt: str) -> str:
        digest = prompt_hash(prompt)
        if digest in self.by_hash:
            return self.by_hash[digest]
        # Exemplar blocks come before the test block, so the latest match is the test case
        best, best_pos = None, -1
        for needle, completion in self.contains:
            pos = prompt.rfind(needle)
            if pos > best_pos:
                best, best_pos = completion, pos
        if best is None:
            raise MockMiss(f"no mock completion for prompt {digest[:12]}")
        return best


class _Transient(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _log_retry(details):
    logger.warning(
        "request failed (%s), retry %d in %.1fs",
        details["exception"],
        details["tries"],
        details["wait"],
    )


class Gateway:
    """Thread-safe access to one configured backend.

    The cache is consulted before every call and written after every success;
    at most `max_parallel` requests are in flight.
    """

    def __init__(
        self,
        config: BackendConfig,
        cache: ResponseCache | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.config = config
        self.cache = cache if cache is not None else ResponseCache(config.cache_dir)
        self.calls = 0
        self._calls_lock = threading.Lock()
        self._semaphore = threading.BoundedSemaphore(config.max_parallel)
        self._mock = None
        self._client = None

        if config.kind == BackendKind.MOCK:
            self._mock = MockBackend(config.fixture)
            return
        self._api_key = os.environ.get(config.auth_env_var)
        if not self._api_key:
            raise AuthMissing(f"environment variable {config.auth_env_var} is not set")
        self._client = httpx.Client(timeout=config.timeout_s, transport=transport)

    def close(self):
        if self._client is not None:
            self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def complete(self, request: CompletionRequest) -> CompletionResult:
        if not request.model_id and self.config.model_id:
            request = CompletionRequest(
                request.prompt,
                request.max_output_tokens,
                request.temperature,
                request.stop_sequences,
                self.config.model_id,
            )
        key = request.cache_key()
        if hit := self.cache.get(key):
            return CompletionResult(hit["text"], hit["finish_reason"], 0, True)

        start = time.monotonic()
        with self._semaphore:
            if self._mock is not None:
                text, finish_reason = self._mock.complete(request.prompt), "stop"
            else:
                text, finish_reason = self._call_http(request)
        latency_ms = round((time.monotonic() - start) * 1000)
        with self._calls_lock:
            self.calls += 1

        self.cache.put(key, request.to_dict(), {"text": text, "finish_reason": finish_reason})
        return CompletionResult(text, finish_reason, latency_ms, False)

    def _call_http(self, request: CompletionRequest) -> tuple[str, str]:
        post = backoff.on_exception(
            backoff.expo,
            _Transient,
            max_tries=self.config.max_retries + 1,
            factor=self.config.retry_base_s,
            jitter=backoff.full_jitter,
            on_backoff=_log_retry,
            logger=None,
        )(self._post)
        try:
            return post(request)
        except _Transient as e:
            tries = self.config.max_retries + 1
            if e.kind == "rate_limited":
                raise RateLimitedExhausted(f"rate limited after {tries} attempts") from e
            if e.kind == "timeout":
                raise BackendTimeout(f"timed out after {tries} attempts") from e
            raise BackendUnavailable(f"{e} after {tries} attempts") from e

    def _body(self, request: CompletionRequest) -> dict:
        body = {
            "model": request.model_id,
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        }
        if request.stop_sequences:
            body["stop"] = list(request.stop_sequences)
        if self.config.kind == BackendKind.HTTP_CHAT:
            body["messages"] = [{"role": "user", "content": request.prompt}]
        else:
            body["prompt"] = request.prompt
        return body

    def _post(self, request: CompletionRequest) -> tuple[str, str]:
        headers = {"Authorization": f"Bearer {self._api_key}"}
        try:
            response = self._client.post(
                self.config.endpoint_url, json=self._body(request), headers=headers
            )
        except httpx.TimeoutException as e:
            raise _Transient("timeout", f"timeout: {e}") from e
        except httpx.TransportError as e:
            raise _Transient("unavailable", f"transport error: {e}") from e

        status = response.status_code
        if status == 429:
            raise _Transient("rate_limited", "HTTP 429")
        if status >= 500:
            raise _Transient("unavailable", f"HTTP {status}")
        if status in (400, 413) and _LENGTH_ERROR_RE.search(response.text):
            raise TokenLimitExceeded(
                f"server rejected a ~{count_tokens_approx(request.prompt)} token prompt: "
                f"{response.text[:200]}"
            )
        if status >= 400:
            raise BackendError(f"HTTP {status}: {response.text[:200]}")
        return self._parse(response)

    def _parse(self, response: httpx.Response) -> tuple[str, str]:
        try:
            choice = response.json()["choices"][0]
            if self.config.kind == BackendKind.HTTP_CHAT:
                text = choice["message"]["content"]
            else:
                text = choice["text"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise BackendError(f"unexpected response body: {response.text[:200]}") from e
        finish_reason = "length" if choice.get("finish_reason") == "length" else "stop"
        return text or "", finish_reason


def complete(config: BackendConfig, request: CompletionRequest) -> CompletionResult:
    """One-off completion through a fresh gateway."""
    with Gateway(config) as gateway:
        return gateway.complete(request)
