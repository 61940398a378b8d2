"""Scripted stand-in for an OpenAI-compatible LVLM server.

The script is a YAML (or JSON) document::

    chat:
      - match: ["Reply with the number", "Oslo ceremony"]  # all substrings must occur
        failures: [503, 503]      # served once each before any reply
        reply: "2"
      - match: "claim 7"
        replies: ["first", "second"]   # consumed in order, last one repeats
    default_reply: "Yes."          # optional; unmatched requests get HTTP 404 otherwise
    embeddings:
      - match: "podium"
        vector: [1, 0, 0, 0]
    embedding_dim: 8               # hashed vectors for unmatched inputs
    delay: 0.0                     # seconds slept before each response

Matching runs over the concatenated text parts and image URLs of the request,
first rule wins.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Optional

import yaml

log = logging.getLogger(__name__)


def load_script(path: str | Path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    script = yaml.safe_load(text) or {}
    if not isinstance(script, dict):
        raise ValueError(f"mock script {path} must be a mapping")
    return script


class _Rule:
    def __init__(self, spec: dict):
        match = spec.get("match", [])
        self.needles = [match] if isinstance(match, str) else list(match)
        self.failures = list(spec.get("failures", []))
        if "replies" in spec:
            self.replies = [str(r) for r in spec["replies"]]
        elif "reply" in spec:
            self.replies = [str(spec["reply"])]
        else:
            self.replies = []
        self.vector = spec.get("vector")
        self.finish_reason = spec.get("finish_reason", "stop")
        self.served = 0

    def matches(self, haystack: str) -> bool:
        return all(n in haystack for n in self.needles)

    def next_reply(self) -> Optional[str]:
        if not self.replies:
            return None
        reply = self.replies[min(self.served, len(self.replies) - 1)]
        self.served += 1
        return reply


def _flatten(content: Any) -> str:
    if isinstance(content, str):
        return content
    out = []
    for part in content or []:
        if not isinstance(part, dict):
            continue
        if part.get("type") == "text":
            out.append(part.get("text", ""))
        elif part.get("type") == "image_url":
            out.append(str((part.get("image_url") or {}).get("url", "")))
    return "\n".join(out)


def hashed_vector(text: str, dim: int) -> list[float]:
    """Deterministic pseudo-embedding for unscripted inputs."""
    out: list[float] = []
    counter = 0
    while len(out) < dim:
        block = hashlib.sha256(f"{counter}:{text}".encode()).digest()
        for (v,) in struct.iter_unpack(">i", block):
            out.append(v / 2**31)
        counter += 1
    return out[:dim]


class MockState:
    def __init__(self, script: dict):
        self.script = script
        self.chat_rules = [_Rule(r) for r in script.get("chat", [])]
        self.embed_rules = [_Rule(r) for r in script.get("embeddings", [])]
        self.default_reply = script.get("default_reply")
        self.embedding_dim = int(script.get("embedding_dim", 8))
        self.delay = float(script.get("delay", 0.0))
        self.lock = threading.Lock()
        self.request_count = 0
        self.log: list[dict] = []

    def chat(self, body: dict) -> tuple[int, dict]:
        haystack = "\n".join(_flatten(m.get("content")) for m in body.get("messages", []))
        with self.lock:
            for rule in self.chat_rules:
                if not rule.matches(haystack):
                    continue
                if rule.failures:
                    code = int(rule.failures.pop(0))
                    return code, {"error": {"message": f"scripted failure {code}"}}
                reply = rule.next_reply()
                if reply is not None:
                    return 200, _completion(body, reply, rule.finish_reason)
            if self.default_reply is not None:
                return 200, _completion(body, str(self.default_reply), "stop")
        return 404, {"error": {"message": "no scripted rule matched"}}

    def embeddings(self, body: dict) -> tuple[int, dict]:
        inputs = body.get("input", [])
        if isinstance(inputs, str):
            inputs = [inputs]
        data = []
        for i, item in enumerate(inputs):
            text = item if isinstance(item, str) else json.dumps(item, sort_keys=True)
            vector = None
            for rule in self.embed_rules:
                if rule.matches(text):
                    vector = rule.vector
                    break
            if vector is None:
                vector = hashed_vector(text, self.embedding_dim)
            data.append({"object": "embedding", "index": i, "embedding": vector})
        return 200, {"object": "list", "data": data, "model": body.get("model")}


def _completion(body: dict, text: str, finish: str) -> dict:
    return {
        "id": "mock-" + hashlib.sha256(text.encode()).hexdigest()[:12],
        "object": "chat.completion",
        "model": body.get("model", "mock"),
        "choices": [
            {"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": finish}
        ],
        "usage": {"prompt_tokens": 0, "completion_tokens": len(text.split()), "total_tokens": 0},
    }


class _Handler(BaseHTTPRequestHandler):
    server: "_Server"

    def log_message(self, fmt, *args):
        log.debug("mock: " + fmt, *args)

    def _send(self, code: int, payload: dict):
        raw = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def do_GET(self):
        state = self.server.state
        if self.path.rstrip("/") == "/_mock/stats":
            self._send(200, {"requests": state.request_count})
        elif self.path.rstrip("/") in ("/health", "/v1/models"):
            self._send(200, {"status": "ok", "data": [{"id": "mock"}]})
        else:
            self._send(404, {"error": {"message": "not found"}})

    def do_POST(self):
        state = self.server.state
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self._send(400, {"error": {"message": "invalid JSON"}})
            return
        with state.lock:
            state.request_count += 1
            state.log.append(
                {"path": self.path, "body": body, "authorization": self.headers.get("Authorization")}
            )
        if state.delay:
            time.sleep(state.delay)
        path = self.path.rstrip("/")
        if path.endswith("/chat/completions"):
            code, payload = state.chat(body)
        elif path.endswith("/embeddings"):
            code, payload = state.embeddings(body)
        else:
            code, payload = 404, {"error": {"message": f"unknown path {self.path}"}}
        self._send(code, payload)


class _Server(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr, state: MockState):
        super().__init__(addr, _Handler)
        self.state = state


class MockServer:
    """Run the scripted server on a background thread.

    >>> with MockServer({"default_reply": "Yes."}) as srv:  # doctest: +SKIP
    ...     srv.url
    'http://127.0.0.1:PORT/v1'
    """

    def __init__(self, script: dict | str | Path, host: str = "127.0.0.1", port: int = 0):
        if not isinstance(script, dict):
            script = load_script(script)
        self.state = MockState(script)
        self._server = _Server((host, port), self.state)
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        host = self._server.server_address[0]
        return f"http://{host}:{self.port}/v1"

    @property
    def request_count(self) -> int:
        with self.state.lock:
            return self.state.request_count

    def start(self) -> "MockServer":
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever(poll_interval=0.05)

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
