"""OpenAI-compatible HTTP surface.

Routes are served both bare and under /v1 so any client-side base_url
convention works.  Models load eagerly at app construction: a bad model
spec aborts startup instead of failing per-request.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .models import load_chat_model, load_embed_model


@dataclass
class ShimConfig:
    embed_model: str = "hash:256"
    chat_model: str = "echo"
    device: str = "cpu"
    port: int = 8331
    max_batch_size: int = 128


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"message": message}})


def create_app(config: ShimConfig) -> FastAPI:
    embedder = load_embed_model(config.embed_model)
    chat = load_chat_model(config.chat_model)

    app = FastAPI(title="modelshim", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def _on_validation(request: Request, exc: RequestValidationError):
        return _error(400, f"invalid request body: {exc.errors()[:1]}")

    @app.exception_handler(json.JSONDecodeError)
    async def _on_bad_json(request: Request, exc: json.JSONDecodeError):
        return _error(400, "request body is not valid JSON")

    @app.get("/health")
    async def health():
        return {"status": "ok", "embed_model": config.embed_model,
                "chat_model": config.chat_model}

    async def _payload(request: Request) -> dict | JSONResponse:
        try:
            payload = await request.json()
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _error(400, "request body is not valid JSON")
        if not isinstance(payload, dict):
            return _error(400, "request body must be a JSON object")
        return payload

    @app.post("/embeddings")
    @app.post("/v1/embeddings")
    async def embeddings(request: Request):
        payload = await _payload(request)
        if isinstance(payload, JSONResponse):
            return payload
        texts = payload.get("input")
        if isinstance(texts, str):
            texts = [texts]
        if not isinstance(texts, list) or not texts or not all(isinstance(t, str) for t in texts):
            return _error(400, "input must be a string or a non-empty list of strings")
        if len(texts) > config.max_batch_size:
            return _error(400, f"batch of {len(texts)} exceeds max batch size "
                               f"{config.max_batch_size}")
        vectors = embedder.encode(texts)
        return {
            "object": "list",
            "model": payload.get("model", config.embed_model),
            "data": [
                {"object": "embedding", "index": i, "embedding": vec}
                for i, vec in enumerate(vectors)
            ],
            "usage": {"prompt_tokens": 0, "total_tokens": 0},
        }

    @app.post("/chat/completions")
    @app.post("/v1/chat/completions")
    async def chat_completions(request: Request):
        payload = await _payload(request)
        if isinstance(payload, JSONResponse):
            return payload
        messages = payload.get("messages")
        if not isinstance(messages, list) or not messages:
            return _error(400, "messages must be a non-empty list")
        for message in messages:
            if not isinstance(message, dict) or "role" not in message or "content" not in message:
                return _error(400, "each message needs role and content")
        content = chat.reply(messages)
        fingerprint = hashlib.sha256(
            json.dumps(messages, sort_keys=True, ensure_ascii=False).encode("utf-8")
        ).hexdigest()[:24]
        return {
            "id": f"chatcmpl-{fingerprint}",
            "object": "chat.completion",
            "created": 0,
            "model": payload.get("model", config.chat_model),
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": content},
                    "finish_reason": "stop",
                }
            ],
            "usage": {"prompt_tokens": 0, "completion_tokens": 0, "total_tokens": 0},
        }

    return app
