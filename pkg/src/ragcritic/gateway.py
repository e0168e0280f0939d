"""Chat-completions client with retries, plus a scripted offline stand-in."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import httpx

from ragcritic.text import tokenize

log = logging.getLogger(__name__)

API_KEY_ENV = {
    "judge": "CRITIC_JUDGE_API_KEY",
    "generator": "CRITIC_GEN_API_KEY",
    "embedder": "CRITIC_EMBED_API_KEY",
}


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    """Retries exhausted, or the endpoint could not be reached."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class EndpointConfigError(GatewayError):
    """The endpoint rejected the request (4xx); retrying will not help."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ProtocolError(GatewayError):
    """Response did not match the expected wire schema."""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = ""
    model_name: str = "default"
    api_key: str | None = field(default=None, repr=False)
    temperature: float = 0.7
    top_p: float = 0.9
    max_tokens: int = 1024
    repetition_penalty: float = 1.1
    timeout_seconds: float = 60.0
    max_retries: int = 3
    request_concurrency: int = 4
    backoff_base: float = 1.0

    def __post_init__(self):
        if self.max_tokens < 1 or self.request_concurrency < 1:
            raise ValueError("max_tokens and request_concurrency must be positive")
        if self.max_retries < 0 or self.timeout_seconds <= 0:
            raise ValueError("max_retries must be >= 0 and timeout_seconds > 0")

    def with_key_from_env(self, role: str, environ=None) -> "EndpointConfig":
        environ = os.environ if environ is None else environ
        return replace(self, api_key=environ.get(API_KEY_ENV[role]))


@dataclass(frozen=True)
class ChatExchange:
    system_prompt: str
    user_prompt: str
    response_text: str
    latency_ms: float
    attempt_count: int


class Endpoint:
    """Shared retry, backoff and concurrency logic; subclasses implement ``_send``."""

    def __init__(self, cfg: EndpointConfig, *, sleep=time.sleep, jitter_seed: int = 0):
        self.cfg = cfg
        self.sleep = sleep
        self._jitter = random.Random(jitter_seed)
        self._jitter_lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(cfg.request_concurrency)

    def _send(self, route: str, payload: dict) -> tuple[int, dict]:
        raise NotImplementedError

    def _backoff(self, attempt: int) -> float:
        with self._jitter_lock:
            jitter = self._jitter.uniform(0.5, 1.0)
        return self.cfg.backoff_base * 2 ** (attempt - 1) * jitter

    def _request(self, route: str, payload: dict) -> tuple[dict, int]:
        last_status, last_error = None, None
        attempts = self.cfg.max_retries + 1
        for attempt in range(1, attempts + 1):
            try:
                with self._slots:
                    status, body = self._send(route, payload)
            except (httpx.TransportError, OSError) as exc:
                last_status, last_error = None, exc
                log.warning("%s attempt %d failed: %s", route, attempt, exc)
            else:
                if 200 <= status < 300:
                    return body, attempt
                if 400 <= status < 500:
                    raise EndpointConfigError(f"{route} rejected request with HTTP {status}", status)
                last_status, last_error = status, None
                log.warning("%s attempt %d got HTTP %d", route, attempt, status)
            if attempt < attempts:
                self.sleep(self._backoff(attempt))
        detail = f"HTTP {last_status}" if last_status is not None else repr(last_error)
        raise TransportError(f"{route} failed after {attempts} attempts ({detail})", last_status)

    def complete(self, system: str, user: str, *, seed: int | None = None) -> ChatExchange:
        payload = {
            "model": self.cfg.model_name,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
            "max_tokens": self.cfg.max_tokens,
            "repetition_penalty": self.cfg.repetition_penalty,
        }
        if seed is not None:
            payload["seed"] = seed
        start = time.perf_counter()
        body, attempts = self._request("/chat/completions", payload)
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat completion: {body!r:.200}") from exc
        if not isinstance(text, str):
            raise ProtocolError("assistant content is not a string")
        latency = (time.perf_counter() - start) * 1000.0
        return ChatExchange(system, user, text, latency, attempts)

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            return []
        body, _ = self._request("/embeddings", {"model": self.cfg.model_name, "input": list(texts)})
        try:
            data = sorted(body["data"], key=lambda d: d.get("index", 0))
            vectors = [[float(x) for x in d["embedding"]] for d in data]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError("malformed embeddings response") from exc
        if len(vectors) != len(texts):
            raise ProtocolError(f"asked for {len(texts)} embeddings, got {len(vectors)}")
        if len({len(v) for v in vectors}) > 1:
            raise ProtocolError("embedding dimensions differ within one batch")
        return vectors


class HttpEndpoint(Endpoint):
    def __init__(self, cfg: EndpointConfig, *, transport: httpx.BaseTransport | None = None, **kwargs):
        if not cfg.base_url.startswith(("http://", "https://")):
            raise EndpointConfigError(f"base_url must be an http(s) URL, got {cfg.base_url!r}")
        super().__init__(cfg, **kwargs)
        headers = {"Authorization": f"Bearer {cfg.api_key}"} if cfg.api_key else {}
        self._client = httpx.Client(
            base_url=cfg.base_url.rstrip("/"),
            headers=headers,
            timeout=cfg.timeout_seconds,
            transport=transport,
        )

    def _send(self, route, payload):
        resp = self._client.post(route, json=payload)
        try:
            body = resp.json()
        except ValueError:
            body = {}
        return resp.status_code, body

    def close(self):
        self._client.close()


def hashed_embedding(text: str, dim: int = 256) -> list[float]:
    """Deterministic unit bag-of-words vector; stands in for a sentence encoder offline."""
    vec = [0.0] * dim
    for tok in tokenize(text):
        h = int.from_bytes(hashlib.sha256(tok.encode()).digest()[:8], "big")
        vec[h % dim] += 1.0 if (h >> 32) & 1 else -1.0
    norm = math.sqrt(sum(x * x for x in vec))
    return [x / norm for x in vec] if norm else vec


class ScriptedEndpoint(Endpoint):
    """Offline endpoint answering from a script of JSON entries.

    Each entry holds ``response`` (assistant text) or ``status`` (an HTTP
    failure code), optionally keyed by ``ordinal`` (0-based chat request
    number) or ``match`` (substring of the user prompt). For request ``n``
    the lookup order is: an entry with ``ordinal == n``; the first entry
    whose ``match`` occurs in the prompt; the ``n``-th unkeyed entry.
    """

    def __init__(self, entries, cfg: EndpointConfig | None = None, *, vectors=None, sleep=None, **kwargs):
        cfg = cfg or EndpointConfig(base_url="stub://")
        super().__init__(cfg, sleep=sleep or (lambda s: None), **kwargs)
        self._by_ordinal, self._by_match, self._positional = {}, {}, []
        for e in entries:
            if "ordinal" in e:
                self._by_ordinal.setdefault(int(e["ordinal"]), e)
            elif "match" in e:
                self._by_match.setdefault(e["match"], e)
            else:
                self._positional.append(e)
        self.vectors = dict(vectors or {})
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path, cfg: EndpointConfig | None = None, **kwargs) -> "ScriptedEndpoint":
        with open(path, encoding="utf-8") as fh:
            entries = [json.loads(line) for line in fh if line.strip()]
        return cls(entries, cfg, **kwargs)

    def _lookup(self, n: int, prompt: str):
        if n in self._by_ordinal:
            return self._by_ordinal[n]
        if self._by_match:
            for line in prompt.splitlines():
                hit = self._by_match.get(line.strip())
                if hit is not None:
                    return hit
            for key, entry in self._by_match.items():
                if key in prompt:
                    return entry
        if n < len(self._positional):
            return self._positional[n]
        return None

    def _send(self, route, payload):
        if route == "/embeddings":
            data = [
                {"index": i, "embedding": self.vectors.get(t) or hashed_embedding(t)}
                for i, t in enumerate(payload["input"])
            ]
            return 200, {"data": data}
        with self._lock:
            n = self.calls
            self.calls += 1
        prompt = payload["messages"][-1]["content"]
        entry = self._lookup(n, prompt)
        if entry is None:
            raise OSError(f"script has no response for request {n}")
        if "status" in entry and "response" not in entry:
            return int(entry["status"]), {}
        return 200, {"choices": [{"message": {"role": "assistant", "content": entry["response"]}}]}


def open_endpoint(cfg: EndpointConfig, script: str | Path | None = None, **kwargs) -> Endpoint:
    if script is not None:
        return ScriptedEndpoint.from_file(script, cfg, **kwargs)
    return HttpEndpoint(cfg, **kwargs)
