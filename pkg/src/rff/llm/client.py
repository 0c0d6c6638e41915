"""Minimal OpenAI-compatible chat client with retries and a record/replay cassette."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import httpx

from ..core import AdapterFailure, ConfigError

log = logging.getLogger(__name__)

Message = Tuple[str, str]

RETRY_STATUS = {429, 500, 502, 503, 504}


class LlmError(AdapterFailure):
    """Base class for chat endpoint failures."""


class TransportError(LlmError):
    """The endpoint could not be reached or returned an unusable reply."""


class AuthError(LlmError):
    """The endpoint rejected the credentials; never retried."""


class LlmTimeout(LlmError, TimeoutError):
    """A call exceeded the per-call timeout on every attempt."""


class CassetteMiss(TransportError):
    """Replay mode found no recorded reply for a request."""


@dataclass(frozen=True)
class LlmConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = "gpt-4o-mini"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: Optional[float] = None
    max_retries: int = 3
    timeout: float = 60.0
    shots: int = 1
    max_concurrency: int = 8
    backoff: float = 0.5
    max_tokens: Optional[int] = None

    def __post_init__(self) -> None:
        if self.temperature is not None and self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.shots < 0:
            raise ConfigError("shots must be >= 0")
        if self.max_concurrency < 1:
            raise ConfigError("max_concurrency must be >= 1")

    @property
    def api_key(self) -> Optional[str]:
        return os.environ.get(self.api_key_env)

    def temperature_for(self, domain: str) -> float:
        """Configured temperature, else 0.7 for Game24 and greedy decoding for math."""
        if self.temperature is not None:
            return self.temperature
        return 0.7 if domain.lower() == "game24" else 0.0


def request_body(cfg: LlmConfig, messages: Sequence[Message], temperature: float) -> dict:
    body = {
        "model": cfg.model,
        "messages": [{"role": r, "content": c} for r, c in messages],
        "temperature": temperature,
    }
    if cfg.max_tokens is not None:
        body["max_tokens"] = cfg.max_tokens
    return body


def request_hash(body: dict) -> str:
    return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


class Cassette:
    """Request-hash → recorded replies, persisted as one JSON file.

    Identical requests (which happen with temperature > 0) are stored as a
    list and replayed in order.
    """

    def __init__(self, path: Union[str, Path, None] = None, mode: str = "replay"):
        if mode not in ("record", "replay"):
            raise ConfigError(f"cassette mode must be record or replay, got {mode!r}")
        self.path = Path(path) if path is not None else None
        self.mode = mode
        self.entries: Dict[str, List[dict]] = {}
        self._cursor: Dict[str, int] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self.entries = json.loads(self.path.read_text())

    def lookup(self, key: str) -> dict:
        with self._lock:
            k = self._cursor.get(key, 0)
            replies = self.entries.get(key, [])
            if k >= len(replies):
                raise CassetteMiss(f"no recorded reply #{k} for request {key[:12]}")
            self._cursor[key] = k + 1
            return replies[k]

    def record(self, key: str, status: int, body: str) -> None:
        with self._lock:
            self.entries.setdefault(key, []).append({"status": status, "body": body})

    def save(self) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.entries, indent=1, sort_keys=True) + "\n")


class CassetteTransport(httpx.BaseTransport):
    """Wraps a transport; records replies or serves them without touching the network."""

    def __init__(self, cassette: Cassette, inner: Optional[httpx.BaseTransport] = None):
        if cassette.mode == "record" and inner is None:
            inner = httpx.HTTPTransport()
        self.cassette = cassette
        self.inner = inner

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        key = request_hash(json.loads(request.read() or b"{}"))
        if self.cassette.mode == "replay":
            rec = self.cassette.lookup(key)
            return httpx.Response(rec["status"], text=rec["body"], request=request)
        resp = self.inner.handle_request(request)
        resp.read()
        self.cassette.record(key, resp.status_code, resp.text)
        return resp


@dataclass
class ChatReply:
    text: str
    retries: int = 0
    request_id: str = ""


@dataclass
class CallRecord:
    messages: List[Message]
    reply: str
    retries: int

    def as_detail(self) -> dict:
        return {"messages": [list(m) for m in self.messages], "reply": self.reply, "retries": self.retries}


class ChatClient:
    """Thread-safe client; the pool and the concurrency limit are shared by all runs."""

    def __init__(self, cfg: LlmConfig, transport: Optional[httpx.BaseTransport] = None,
                 sleep: Callable[[float], None] = time.sleep, seed: int = 0):
        self.cfg = cfg
        self._http = httpx.Client(base_url=cfg.base_url, transport=transport, timeout=cfg.timeout)
        self._limit = threading.BoundedSemaphore(cfg.max_concurrency)
        self._sleep = sleep
        self._jitter = random.Random(seed)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "ChatClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _headers(self) -> dict:
        key = self.cfg.api_key
        return {"Authorization": f"Bearer {key}"} if key else {}

    def chat(self, messages: Sequence[Message], temperature: float = 0.0) -> ChatReply:
        body = request_body(self.cfg, messages, temperature)
        retries = 0
        last: Optional[Exception] = None
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                retries += 1
                delay = self.cfg.backoff * 2 ** (attempt - 1)
                self._sleep(delay * (1 + 0.1 * self._jitter.random()))
            try:
                with self._limit:
                    resp = self._http.post("/chat/completions", json=body, headers=self._headers())
            except httpx.TimeoutException:
                last = LlmTimeout(f"timed out after {self.cfg.timeout}s")
                log.warning("chat timeout (attempt %d)", attempt + 1)
                continue
            except httpx.TransportError as exc:
                last = TransportError(f"transport error: {exc}")
                log.warning("chat transport error (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if resp.status_code in RETRY_STATUS:
                last = TransportError(f"HTTP {resp.status_code} after {retries} retries: {resp.text[:200]}")
                log.warning("chat HTTP %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return ChatReply(_content(resp), retries, request_hash(body))
        assert last is not None
        raise last


def _content(resp: httpx.Response) -> str:
    try:
        data = resp.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        raise TransportError(f"malformed reply body: {resp.text[:200]!r}") from None
    if not isinstance(content, str):
        raise TransportError(f"malformed reply body: {resp.text[:200]!r}")
    return content


def completion_body(text: str) -> dict:
    """A minimal chat-completions response body carrying ``text`` (for stubs)."""
    return {"object": "chat.completion", "choices": [{"index": 0, "message": {"role": "assistant", "content": text},
                                                      "finish_reason": "stop"}]}
