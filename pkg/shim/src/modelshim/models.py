"""Built-in stand-in models.

Model ids are small factory specs:

    embed:  "hash:<dim>"        feature-hashed character-trigram encoder
    chat:   "echo"              returns the last user message
            "script:<path>"     ordered prompt -> response rules (JSON)

Everything here is deterministic across processes, which is the point of
the shim: real HTTP traffic with reproducible outputs.  A real encoder or
generator can be registered by adding a factory.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Sequence

import numpy as np


class HashEncoder:
    """L2-normalized bag of hashed character trigrams.

    Texts sharing surface trigrams land near each other, which is enough
    signal for similarity-based demonstration selection at desk scale, and
    the output is stable across processes and platforms.
    """

    def __init__(self, dim: int):
        if dim < 2:
            raise ValueError("hash encoder dimension must be >= 2")
        self.dim = dim

    def _accumulate(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        padded = f" {text.lower()} "
        for i in range(len(padded) - 2):
            trigram = padded[i : i + 3]
            digest = hashlib.md5(trigram.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "big")
            index = bucket % self.dim
            sign = 1.0 if (bucket >> 63) & 1 else -1.0
            vec[index] += sign
        return vec

    def encode(self, texts: Sequence[str]) -> list[list[float]]:
        out = []
        for text in texts:
            vec = self._accumulate(text)
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                vec = np.zeros(self.dim)
                vec[0] = 1.0
            else:
                vec = vec / norm
            out.append([float(x) for x in vec])
        return out


class EchoChat:
    """Returns the last user message unchanged."""

    def reply(self, messages: list[dict]) -> str:
        for message in reversed(messages):
            if message.get("role") == "user":
                return str(message.get("content", ""))
        return ""


class ScriptedChat:
    """Ordered (matcher, response) rules over the last user message; the
    first matching rule wins.  Rule file schema:

        {"rules": [{"match": "exact"|"substring"|"pattern",
                    "value": "...", "response": "..."}],
         "default": "..."}
    """

    def __init__(self, rules: list[dict], default: str = ""):
        self._rules = []
        for rule in rules:
            kind = rule.get("match", "substring")
            if kind not in ("exact", "substring", "pattern"):
                raise ValueError(f"unknown matcher {kind!r}")
            self._rules.append((kind, rule["value"], rule["response"]))
        self._default = default

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedChat":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(payload.get("rules", []), payload.get("default", ""))

    def reply(self, messages: list[dict]) -> str:
        prompt = ""
        for message in reversed(messages):
            if message.get("role") == "user":
                prompt = str(message.get("content", ""))
                break
        for kind, value, response in self._rules:
            if kind == "exact" and prompt == value:
                return response
            if kind == "substring" and value in prompt:
                return response
            if kind == "pattern" and re.search(value, prompt, re.DOTALL):
                return response
        return self._default


def load_embed_model(spec: str):
    kind, _, arg = spec.partition(":")
    if kind == "hash":
        return HashEncoder(int(arg or "256"))
    raise ValueError(f"unknown embed model spec {spec!r} (expected hash:<dim>)")


def load_chat_model(spec: str):
    kind, _, arg = spec.partition(":")
    if kind == "echo":
        return EchoChat()
    if kind == "script":
        if not arg:
            raise ValueError("script chat model needs a path: script:<path>")
        return ScriptedChat.from_file(arg)
    raise ValueError(f"unknown chat model spec {spec!r} (expected echo or script:<path>)")
