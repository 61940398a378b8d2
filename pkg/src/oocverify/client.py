"""Client for OpenAI-compatible chat-completion and embeddings endpoints.

Requests are retried on timeouts, connection failures, 429 and 5xx with
exponential backoff plus jitter. Responses are stored in a content-addressed
cache keyed on the canonical wire payload, so a warm cache answers without
touching the network.
"""

from __future__ import annotations

import base64
import logging
import mimetypes
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import httpx

from .cache import ResponseCache, digest
from .errors import (
    ClientError,
    ConnectionFailed,
    DimInconsistent,
    EmptyInput,
    HttpStatus,
    MalformedResponse,
    RequestTimeout,
    RetriesExhausted,
    TransientError,
)
from .model import Embedding, ImagePart, Message, Part, Role, TextPart

log = logging.getLogger(__name__)

API_KEY_ENV = "OOCVERIFY_API_KEY"


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_tokens: int = 512
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not any(m.role is Role.USER for m in self.messages):
            raise ValueError("chat request needs at least one user message")
        if any(m.role is Role.ASSISTANT for m in self.messages):
            raise ValueError("chat request must not carry an assistant turn")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def replace(self, **changes) -> "ChatRequest":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "stop"
    usage: dict = field(default_factory=dict, compare=False)
    cached: bool = field(default=False, compare=False)

    def to_dict(self) -> dict:
        return {"text": self.text, "finish_reason": self.finish_reason, "usage": self.usage}

    @classmethod
    def from_dict(cls, d: dict, cached: bool = False) -> "ChatResponse":
        return cls(d["text"], d.get("finish_reason", "stop"), d.get("usage") or {}, cached)


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay: float = 0.5
    max_delay: float = 8.0
    jitter: float = 0.5

    def delay(self, attempt: int, rng: random.Random) -> float:
        """Sleep before retry number ``attempt`` (1-based)."""
        d = min(self.max_delay, self.base_delay * 2 ** (attempt - 1))
        return d * (1.0 + self.jitter * rng.random())


# -- wire format ------------------------------------------------------------------


def image_url(ref: str) -> str:
    """URL for an image reference; local files are inlined as base64 data URLs."""
    if ref.startswith(("http://", "https://", "data:")):
        return ref
    path = Path(ref[7:] if ref.startswith("file://") else ref)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise ClientError(f"cannot read image {ref!r}: {exc}") from exc
    media = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
    return f"data:{media};base64,{base64.b64encode(payload).decode('ascii')}"


def part_to_wire(part: Part) -> dict:
    if isinstance(part, TextPart):
        return {"type": "text", "text": part.text}
    return {"type": "image_url", "image_url": {"url": image_url(part.ref)}}


def request_to_wire(req: ChatRequest) -> dict:
    body = {
        "model": req.model,
        "messages": [
            {"role": m.role.value, "content": [part_to_wire(p) for p in m.content]}
            for m in req.messages
        ],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    }
    if req.seed is not None:
        body["seed"] = req.seed
    return body


def cache_key(req: ChatRequest) -> str:
    return digest({"kind": "chat", "request": request_to_wire(req)})


def _parse_chat(payload: dict) -> ChatResponse:
    try:
        choice = payload["choices"][0]
        content = choice["message"]["content"]
        finish = choice.get("finish_reason") or "stop"
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"unexpected chat payload: {exc!r}") from None
    if isinstance(content, list):
        content = "".join(p.get("text", "") for p in content if isinstance(p, dict))
    if content is None and finish == "stop":
        raise MalformedResponse("finish_reason=stop without content")
    if content is not None and not isinstance(content, str):
        raise MalformedResponse("message content is not text")
    usage = payload.get("usage") or {}
    return ChatResponse(content or "", str(finish), dict(usage))


# -- client -----------------------------------------------------------------------


@dataclass
class ClientStats:
    network_calls: int = 0
    cache_hits: int = 0
    retries: int = 0


class LvlmClient:
    """Shareable across threads; at most ``concurrency`` requests are in flight."""

    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        api_key: Optional[str] = None,
        timeout: float = 60.0,
        cache: ResponseCache | str | os.PathLike | None = None,
        concurrency: int = 8,
        policy: RetryPolicy = RetryPolicy(),
        embedding_model: Optional[str] = None,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
        jitter_seed: int = 0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.embedding_model = embedding_model or model
        self.policy = policy
        if cache is not None and not isinstance(cache, ResponseCache):
            cache = ResponseCache(cache)
        self.cache = cache
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self._slots = threading.BoundedSemaphore(concurrency)
        self._lock = threading.Lock()
        self._rng = random.Random(jitter_seed)
        self._sleep = sleep
        self.stats = ClientStats()

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post_once(self, path: str, body: dict) -> dict:
        with self._lock:
            self.stats.network_calls += 1
        url = f"{self.base_url}{path}"
        with self._slots:
            try:
                resp = self._http.post(url, json=body)
            except httpx.TimeoutException as exc:
                raise RequestTimeout(f"{url}: {exc}") from exc
            except httpx.TransportError as exc:
                raise ConnectionFailed(f"{url}: {exc}") from exc
        if resp.status_code != 200:
            raise HttpStatus(resp.status_code, resp.text)
        try:
            return resp.json()
        except ValueError:
            raise MalformedResponse(f"non-JSON body from {url}") from None

    def _post(self, path: str, body: dict, policy: RetryPolicy) -> dict:
        last: Exception | None = None
        for attempt in range(1, policy.max_attempts + 1):
            try:
                return self._post_once(path, body)
            except HttpStatus as exc:
                if not exc.transient:
                    raise
                last = exc
            except TransientError as exc:
                last = exc
            if attempt < policy.max_attempts:
                with self._lock:
                    self.stats.retries += 1
                    pause = policy.delay(attempt, self._rng)
                log.debug("retrying %s after %s (attempt %d)", path, last, attempt)
                self._sleep(pause)
        assert last is not None
        raise RetriesExhausted(policy.max_attempts, last)

    def chat(self, request: ChatRequest, policy: Optional[RetryPolicy] = None) -> ChatResponse:
        key = cache_key(request)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                with self._lock:
                    self.stats.cache_hits += 1
                return ChatResponse.from_dict(hit, cached=True)
        payload = self._post("/chat/completions", request_to_wire(request), policy or self.policy)
        response = _parse_chat(payload)
        # truncated completions are not cached; a retry with more tokens should refetch
        if self.cache is not None and response.finish_reason == "stop":
            self.cache.put(key, response.to_dict())
        return response

    def embed(self, inputs: Sequence[Part], policy: Optional[RetryPolicy] = None) -> list[Embedding]:
        if not inputs:
            raise EmptyInput("embed() needs at least one input")
        wire_inputs = [
            p.text if isinstance(p, TextPart) else {"image": image_url(p.ref)} for p in inputs
        ]
        body = {"model": self.embedding_model, "input": wire_inputs}
        key = digest({"kind": "embeddings", "request": body})
        if self.cache is not None and (hit := self.cache.get(key)) is not None:
            with self._lock:
                self.stats.cache_hits += 1
            vectors = hit["vectors"]
        else:
            payload = self._post("/embeddings", body, policy or self.policy)
            try:
                data = sorted(payload["data"], key=lambda d: d.get("index", 0))
                vectors = [list(map(float, d["embedding"])) for d in data]
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedResponse(f"unexpected embeddings payload: {exc!r}") from None
            if len(vectors) != len(inputs):
                raise MalformedResponse(f"sent {len(inputs)} inputs, got {len(vectors)} vectors")
            if self.cache is not None:
                self.cache.put(key, {"vectors": vectors})
        if len({len(v) for v in vectors}) != 1:
            raise DimInconsistent("endpoint returned embeddings of differing dims")
        try:
            return [Embedding(tuple(v)) for v in vectors]
        except ValueError as exc:
            raise MalformedResponse(str(exc)) from None
