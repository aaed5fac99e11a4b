"""Chat and embedding endpoint clients.

All model calls in the framework go through these clients: an
OpenAI-compatible HTTP client (works against hosted services or a local
serving shim), plus a deterministic scripted mock for tests and offline
runs.  Responses are cached content-addressed on (endpoint kind, model,
prompt, decoding parameters), which makes warm-cache runs replayable
bit-for-bit without any network traffic.  ``request_count`` on each client
counts upstream requests only; cache hits do not increment it.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import requests

from ._util import atomic_write_text, read_jsonl


class EndpointKind(str, Enum):
    CHAT = "chat"
    EMBED = "embed"


class EndpointError(Exception):
    """The endpoint could not be reached or kept failing after retries."""


class ProtocolError(EndpointError):
    """The endpoint responded, but not in the expected schema."""


@dataclass(frozen=True)
class EndpointSpec:
    kind: EndpointKind
    base_url: str = ""
    model_name: str = ""
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 30.0
    retries: int = 2
    rate_limit: float = 0.0  # requests/second; 0 disables limiting

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


# ---------------------------------------------------------------------------
# response cache


class ResponseCache:
    """Content-addressed response store.  With a root directory, entries
    live one file per key under ``root/<k[:2]>/<k>.json`` (written
    atomically); without one, the cache is memory-only."""

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None
        self._memory: dict[str, object] = {}
        self._lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}

    @staticmethod
    def key(kind: EndpointKind, model: str, prompt: str, params: dict) -> str:
        material = json.dumps(
            {"kind": kind.value, "model": model, "prompt": prompt, "params": params},
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(material.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        assert self.root is not None
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str):
        with self._lock:
            if key in self._memory:
                return self._memory[key]
        if self.root is not None:
            path = self._path(key)
            if path.exists():
                with open(path, encoding="utf-8") as fh:
                    value = json.load(fh)["value"]
                with self._lock:
                    self._memory[key] = value
                return value
        return None

    def put(self, key: str, value) -> None:
        with self._lock:
            self._memory[key] = value
        if self.root is not None:
            entry = {"key": key, "value": value, "created_at": time.time()}
            atomic_write_text(self._path(key), json.dumps(entry, ensure_ascii=False))

    def lock_for(self, key: str) -> threading.Lock:
        """Per-key lock so identical in-flight requests deduplicate."""
        with self._lock:
            return self._key_locks.setdefault(key, threading.Lock())


class RateLimiter:
    """Spaces requests at least 1/rate apart.  Clock and sleep are
    injectable so the behavior is testable with a virtual clock."""

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.rate = rate
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def acquire(self) -> None:
        if self.rate <= 0:
            return
        interval = 1.0 / self.rate
        with self._lock:
            now = self._clock()
            wait = self._next_allowed - now
            if wait > 0:
                self._sleep(wait)
                now = self._clock()
            self._next_allowed = max(self._next_allowed, now) + interval


# ---------------------------------------------------------------------------
# scripted mock


class MatchKind(str, Enum):
    EXACT = "exact"
    SUBSTRING = "substring"
    PATTERN = "pattern"


@dataclass(frozen=True)
class MockRule:
    match: MatchKind
    value: str
    response: str

    def matches(self, prompt: str) -> bool:
        if self.match is MatchKind.EXACT:
            return prompt == self.value
        if self.match is MatchKind.SUBSTRING:
            return self.value in prompt
        return re.search(self.value, prompt, re.DOTALL) is not None


@dataclass(frozen=True)
class MockScript:
    """Ordered prompt->response rules; the first matching rule wins."""

    rules: tuple[MockRule, ...] = ()
    default_response: str = ""

    def respond(self, prompt: str) -> str:
        for rule in self.rules:
            if rule.matches(prompt):
                return rule.response
        return self.default_response


def load_mock_script(path: str | Path) -> MockScript:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    rules = tuple(
        MockRule(MatchKind(r.get("match", "substring")), r["value"], r["response"])
        for r in payload.get("rules", [])
    )
    return MockScript(rules, payload.get("default", ""))


# ---------------------------------------------------------------------------
# transports (separated so tests can stub the network)


def _http_post(url: str, payload: dict, timeout: float) -> tuple[int, dict]:
    resp = requests.post(url, json=payload, timeout=timeout)
    try:
        body = resp.json()
    except ValueError:
        body = {}
    return resp.status_code, body


def _with_retries(spec: EndpointSpec, send: Callable[[], tuple[int, dict]],
                  sleep: Callable[[float], None] | None = None) -> dict:
    if sleep is None:
        sleep = time.sleep  # looked up per call so tests can stub it
    attempts = spec.retries + 1
    last_error: Exception | None = None
    for attempt in range(attempts):
        try:
            status, body = send()
        except requests.RequestException as exc:
            last_error = exc
        else:
            if status == 200:
                return body
            last_error = EndpointError(f"HTTP {status} from {spec.base_url}")
            if not (status == 429 or status >= 500):
                break  # client errors are not transient
        if attempt + 1 < attempts:
            sleep(min(2.0**attempt * 0.5, 8.0))
    raise EndpointError(f"endpoint failed after {attempts} attempts: {last_error}")


def _join(base_url: str, route: str) -> str:
    return base_url.rstrip("/") + route


# ---------------------------------------------------------------------------
# chat clients


class OpenAIChatClient:
    """Chat-completions client (OpenAI wire schema)."""

    def __init__(self, spec: EndpointSpec, cache: ResponseCache | None = None,
                 transport: Callable[[str, dict, float], tuple[int, dict]] = _http_post):
        if spec.kind is not EndpointKind.CHAT:
            raise ValueError("OpenAIChatClient requires a chat endpoint spec")
        self.spec = spec
        self.cache = cache if cache is not None else ResponseCache()
        self.request_count = 0
        self._transport = transport
        self._limiter = RateLimiter(spec.rate_limit)

    def _params(self) -> dict:
        return {"temperature": self.spec.temperature, "max_tokens": self.spec.max_tokens}

    def chat(self, prompt: str) -> str:
        key = ResponseCache.key(EndpointKind.CHAT, self.spec.model_name, prompt, self._params())
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        with self.cache.lock_for(key):
            cached = self.cache.get(key)
            if cached is not None:
                return cached
            payload = {
                "model": self.spec.model_name,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": self.spec.temperature,
                "max_tokens": self.spec.max_tokens,
            }
            url = _join(self.spec.base_url, "/chat/completions")

            def send():
                self._limiter.acquire()
                self.request_count += 1
                return self._transport(url, payload, self.spec.timeout)

            body = _with_retries(self.spec, send)
            try:
                text = body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ProtocolError(f"malformed chat-completions response: {exc}") from exc
            if not isinstance(text, str):
                raise ProtocolError("chat completion content is not text")
            self.cache.put(key, text)
            return text


class MockChatClient:
    """Deterministic scripted stand-in for a chat endpoint."""

    def __init__(self, script: MockScript, cache: ResponseCache | None = None,
                 model_name: str = "mock-chat"):
        self.script = script
        self.cache = cache if cache is not None else ResponseCache()
        self.model_name = model_name
        self.request_count = 0
        self._lock = threading.Lock()

    def chat(self, prompt: str) -> str:
        key = ResponseCache.key(EndpointKind.CHAT, self.model_name, prompt, {"temperature": 0.0})
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        with self._lock:
            self.request_count += 1
        text = self.script.respond(prompt)
        self.cache.put(key, text)
        return text


# ---------------------------------------------------------------------------
# embedding clients


def _unit(vec: Sequence[float]) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if not np.isfinite(norm) or norm == 0.0:
        raise ProtocolError("embedding vector has zero or non-finite norm")
    return arr / norm


class OpenAIEmbedClient:
    """Embeddings client; vectors are L2-normalized on receipt and cached
    per text, with batched requests for cache misses."""

    def __init__(self, spec: EndpointSpec, cache: ResponseCache | None = None,
                 batch_size: int = 32,
                 transport: Callable[[str, dict, float], tuple[int, dict]] = _http_post):
        if spec.kind is not EndpointKind.EMBED:
            raise ValueError("OpenAIEmbedClient requires an embed endpoint spec")
        self.spec = spec
        self.cache = cache if cache is not None else ResponseCache()
        self.batch_size = batch_size
        self.request_count = 0
        self._transport = transport
        self._limiter = RateLimiter(spec.rate_limit)

    def _key(self, text: str) -> str:
        return ResponseCache.key(EndpointKind.EMBED, self.spec.model_name, text, {})

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("texts must be non-empty")
        out: dict[str, np.ndarray] = {}
        missing: list[str] = []
        for text in dict.fromkeys(texts):  # preserve order, fetch each text once
            cached = self.cache.get(self._key(text))
            if cached is not None:
                out[text] = _unit(cached)
            else:
                missing.append(text)
        for start in range(0, len(missing), self.batch_size):
            batch = missing[start : start + self.batch_size]
            payload = {"model": self.spec.model_name, "input": batch}
            url = _join(self.spec.base_url, "/embeddings")

            def send():
                self._limiter.acquire()
                self.request_count += 1
                return self._transport(url, payload, self.spec.timeout)

            body = _with_retries(self.spec, send)
            try:
                data = sorted(body["data"], key=lambda d: d["index"])
                vectors = [d["embedding"] for d in data]
            except (KeyError, TypeError) as exc:
                raise ProtocolError(f"malformed embeddings response: {exc}") from exc
            if len(vectors) != len(batch):
                raise ProtocolError("embeddings response count does not match input")
            for text, vec in zip(batch, vectors):
                unit = _unit(vec)
                self.cache.put(self._key(text), [float(x) for x in unit])
                out[text] = unit
        return [out[t] for t in texts]


class MockEmbedClient:
    """Deterministic embedding stand-in.

    Known texts map through an explicit table; unknown texts hash to a
    stable pseudo-random direction, so equal texts always embed equally
    across processes.
    """

    def __init__(self, mapping: dict[str, Sequence[float]] | None = None, dim: int = 8):
        self.dim = dim
        self.request_count = 0
        self._mapping = {t: _unit(v) for t, v in (mapping or {}).items()}
        for vec in self._mapping.values():
            if vec.shape[0] != dim:
                raise ValueError("mock embedding table entries must match dim")

    def _hash_vector(self, text: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
        rng = np.random.default_rng(seed)
        return _unit(rng.standard_normal(self.dim))

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("texts must be non-empty")
        self.request_count += 1
        return [self._mapping.get(t, self._hash_vector(t)) for t in texts]


def load_mock_vectors(path: str | Path) -> dict[str, list[float]]:
    """JSONL {text, vector} table for scripted embeddings."""
    return {str(row["text"]): [float(x) for x in row["vector"]] for row in read_jsonl(path)}
