"""Chat-completion backends, request hashing, and the on-disk response cache.

Two backends are provided. The HTTP backend speaks the common
``POST {base_url}/chat/completions`` protocol with bearer-token auth taken
from the SQUARE_API_KEY environment variable, retrying transient failures
with exponential backoff. The mock backend serves scripted responses from a
directory keyed by request digest, falling back to a canned reply, and makes
runs fully offline and deterministic.

Every request is identified by a content digest over the model name, decoding
parameters, and full message sequence; the cache stores one file per digest,
so a warm cache replays a run without a single backend call.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import requests

from .errors import (
    AuthError,
    CacheIOError,
    ConfigError,
    MalformedResponseError,
    TransientBackendError,
)
from .prompts import ChatPrompt

logger = logging.getLogger(__name__)

API_KEY_ENV = "SQUARE_API_KEY"
DEFAULT_MAX_OUTPUT_TOKENS = 1024
DEFAULT_MAX_IN_FLIGHT = 4
DEFAULT_FALLBACK_REPLY = "Answer: mock-{digest8}"
_RETRYABLE_STATUS = {429}


class DecodeMode(str, Enum):
    GREEDY = "greedy"


@dataclass(frozen=True)
class DecodingParams:
    mode: DecodeMode = DecodeMode.GREEDY
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self):
        object.__setattr__(self, "mode", DecodeMode(self.mode))
        object.__setattr__(self, "temperature", float(self.temperature))
        if self.mode is DecodeMode.GREEDY and self.temperature != 0.0:
            raise ValueError("greedy decoding requires temperature 0")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


@dataclass(frozen=True)
class Generation:
    """Raw model output plus provenance metadata."""

    text: str
    backend_id: str
    model_name: str
    from_cache: bool = False
    latency_ms: int | None = None
    retries: int = 0


@dataclass(frozen=True)
class CacheKey:
    digest: str


def request_payload(model_name: str, params: DecodingParams, prompt: ChatPrompt) -> dict:
    """Canonical request content: everything that determines the generation."""
    return {
        "model": model_name,
        "decoding": {
            "mode": params.mode.value,
            "temperature": params.temperature,
            "max_output_tokens": params.max_output_tokens,
        },
        "messages": prompt.as_payload(),
    }


def cache_key(model_name: str, params: DecodingParams, prompt: ChatPrompt) -> CacheKey:
    """Stable digest of the canonical request payload."""
    payload = request_payload(model_name, params, prompt)
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return CacheKey(hashlib.sha256(blob.encode("utf-8")).hexdigest())


@dataclass(frozen=True)
class BackendSpec:
    """Declarative backend selection, as written in experiment configs."""

    kind: str  # "mock" or "http"
    model_name: str
    base_url: str | None = None
    script_dir: str | None = None
    fallback_reply: str = DEFAULT_FALLBACK_REPLY
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT

    def __post_init__(self):
        if self.kind not in ("mock", "http"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if not self.model_name:
            raise ConfigError("backend model_name must be non-empty")
        if self.kind == "http" and not self.base_url:
            raise ConfigError("http backend needs a base_url")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")


class MockBackend:
    """Offline backend: scripted responses by digest, else a canned reply.

    A scripted response is a UTF-8 text file ``{digest}.txt`` inside
    ``script_dir``. The fallback reply may reference ``{digest8}``, the first
    eight hex digits of the request digest, so unscripted replies still vary
    per request and stay deterministic.
    """

    backend_id = "mock"

    def __init__(self, spec: BackendSpec):
        self.model_name = spec.model_name
        self.script_dir = Path(spec.script_dir) if spec.script_dir else None
        self.fallback_reply = spec.fallback_reply
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: ChatPrompt, params: DecodingParams) -> Generation:
        with self._lock:
            self.calls += 1
        digest = cache_key(self.model_name, params, prompt).digest
        text = None
        if self.script_dir is not None:
            script = self.script_dir / f"{digest}.txt"
            if script.exists():
                text = script.read_text(encoding="utf-8")
        if text is None:
            text = self.fallback_reply.replace("{digest8}", digest[:8])
        return Generation(text=text, backend_id=self.backend_id, model_name=self.model_name)


def _default_transport(url: str, payload: dict, headers: dict, timeout: float):
    """POST the payload; returns (status_code, parsed_body_or_None)."""
    try:
        response = requests.post(url, json=payload, headers=headers, timeout=timeout)
    except requests.Timeout as exc:
        raise TimeoutError(str(exc)) from exc
    except requests.ConnectionError as exc:
        raise TimeoutError(str(exc)) from exc
    try:
        body = response.json()
    except ValueError:
        body = None
    return response.status_code, body


class HttpChatBackend:
    """OpenAI-compatible chat-completions client with retry on transient errors.

    Retries timeouts, 429s, and 5xx responses up to max_attempts with
    exponential backoff starting at backoff_start seconds. Auth failures and
    malformed responses are raised immediately.
    """

    def __init__(
        self,
        spec: BackendSpec,
        transport=None,
        sleep=time.sleep,
        max_attempts: int = 5,
        backoff_start: float = 1.0,
        timeout: float = 120.0,
    ):
        self.model_name = spec.model_name
        self.base_url = spec.base_url.rstrip("/")
        self.backend_id = f"http:{self.base_url}"
        self._transport = transport or _default_transport
        self._sleep = sleep
        self._max_attempts = max_attempts
        self._backoff_start = backoff_start
        self._timeout = timeout

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def complete(self, prompt: ChatPrompt, params: DecodingParams) -> Generation:
        url = f"{self.base_url}/chat/completions"
        payload = {
            "model": self.model_name,
            "messages": prompt.as_payload(),
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        }
        headers = self._headers()
        started = time.monotonic()
        delay = self._backoff_start
        last_failure = "no attempts made"
        for attempt in range(self._max_attempts):
            if attempt:
                self._sleep(delay)
                delay *= 2
            try:
                status, body = self._transport(url, payload, headers, self._timeout)
            except TimeoutError as exc:
                last_failure = f"timeout ({exc})"
                logger.warning("attempt %d/%d: %s", attempt + 1, self._max_attempts, last_failure)
                continue
            if status in (401, 403):
                raise AuthError(
                    f"backend rejected credentials (HTTP {status}); "
                    f"check the {API_KEY_ENV} environment variable"
                )
            if status in _RETRYABLE_STATUS or status >= 500:
                last_failure = f"HTTP {status}"
                logger.warning("attempt %d/%d: %s", attempt + 1, self._max_attempts, last_failure)
                continue
            if status != 200:
                raise MalformedResponseError(f"unexpected HTTP {status} from {url}")
            text = self._parse_body(body)
            latency_ms = int((time.monotonic() - started) * 1000)
            return Generation(
                text=text,
                backend_id=self.backend_id,
                model_name=self.model_name,
                latency_ms=latency_ms,
                retries=attempt,
            )
        raise TransientBackendError(
            f"giving up after {self._max_attempts} attempts; last failure: {last_failure}"
        )

    @staticmethod
    def _parse_body(body) -> str:
        try:
            text = body["choices"][0]["message"]["content"]
        except (TypeError, KeyError, IndexError):
            raise MalformedResponseError(
                f"response is not a chat completion: {str(body)[:200]}"
            ) from None
        if not isinstance(text, str):
            raise MalformedResponseError("completion content is not a string")
        return text


def make_backend(spec: BackendSpec):
    if spec.kind == "mock":
        return MockBackend(spec)
    return HttpChatBackend(spec)


def complete(prompt: ChatPrompt, params: DecodingParams, backend) -> Generation:
    """Send one prompt to a backend built by make_backend."""
    return backend.complete(prompt, params)


class CacheStore:
    """One JSON file per request digest, written atomically.

    Entries keep the full request payload next to the response so cached runs
    can be audited. Unreadable or malformed entries count as misses and get
    overwritten on the next write.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: CacheKey) -> Path:
        return self.directory / f"{key.digest}.json"

    def get(self, key: CacheKey) -> dict | None:
        path = self._path(key)
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
            response = entry["response"]
            if not isinstance(response["text"], str):
                raise ValueError("cached text is not a string")
            return entry
        except FileNotFoundError:
            return None
        except (OSError, ValueError, KeyError, TypeError) as exc:
            logger.warning("dropping corrupt cache entry %s: %s", path.name, exc)
            return None

    def put(self, key: CacheKey, request: dict, generation: Generation) -> None:
        entry = {
            "digest": key.digest,
            "request": request,
            "response": {
                "text": generation.text,
                "backend_id": generation.backend_id,
                "model_name": generation.model_name,
            },
        }
        path = self._path(key)
        try:
            fd, tmp_name = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False)
            os.replace(tmp_name, path)
        except OSError as exc:
            raise CacheIOError(f"cannot write cache entry {path}: {exc}") from exc

    def stats(self) -> dict:
        entries = list(self.directory.glob("*.json"))
        return {"entries": len(entries), "bytes": sum(p.stat().st_size for p in entries)}

    def clear(self) -> int:
        removed = 0
        for path in self.directory.glob("*.json"):
            path.unlink()
            removed += 1
        return removed


def cached_complete(
    prompt: ChatPrompt, params: DecodingParams, backend, cache: CacheStore
) -> tuple[Generation, bool]:
    """complete() through the cache; returns (generation, was_hit)."""
    key = cache_key(backend.model_name, params, prompt)
    entry = cache.get(key)
    if entry is not None:
        response = entry["response"]
        return (
            Generation(
                text=response["text"],
                backend_id=response.get("backend_id", "unknown"),
                model_name=response.get("model_name", backend.model_name),
                from_cache=True,
            ),
            True,
        )
    generation = backend.complete(prompt, params)
    cache.put(key, request_payload(backend.model_name, params, prompt), generation)
    return generation, False
