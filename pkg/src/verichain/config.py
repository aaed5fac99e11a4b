"""Run configuration: one JSON manifest drives every pipeline command.

Endpoints may point at any OpenAI-compatible service or at a scripted
mock (``mock_script`` for chat endpoints, ``mock_vectors``/``mock_dim``
for embeddings), so whole experiments replay offline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .clients import (
    EndpointKind,
    EndpointSpec,
    MockChatClient,
    MockEmbedClient,
    MockScript,
    OpenAIChatClient,
    OpenAIEmbedClient,
    ResponseCache,
    load_mock_script,
    load_mock_vectors,
)
from .interaction import Ablation, InteractionConfig

MODES = (
    "interactive",
    "vanilla-cot",
    "retrieval-4-passages",
    "qa-pairs-4-shot",
    "cot-fixed",
)


class ConfigError(Exception):
    """Invalid configuration; the message names the offending field."""


def _take(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    return cls(**data)


@dataclass
class PathsConfig:
    # inputs
    triples: str | None = None
    documents: str | None = None
    anchors: str | None = None
    train: str | None = None
    questions: str | None = None
    vectors: str | None = None
    cache_dir: str | None = None
    # produced by one command, consumed by others
    passages: str | None = None
    index: str | None = None
    pool: str | None = None
    # outputs
    collection: str | None = None
    report: str | None = None
    mined: str | None = None
    traces: str | None = None
    predictions: str | None = None
    metrics: str | None = None
    stats: str | None = None


@dataclass
class EndpointConfig:
    base_url: str = ""
    model: str = ""
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 30.0
    retries: int = 2
    rate_limit: float = 0.0
    mock: bool = False
    mock_script: str | None = None
    mock_vectors: str | None = None
    mock_dim: int = 8


@dataclass
class EndpointsConfig:
    llm: EndpointConfig = field(default_factory=EndpointConfig)
    embed: EndpointConfig = field(default_factory=EndpointConfig)
    reader: EndpointConfig = field(default_factory=EndpointConfig)
    verifier: EndpointConfig = field(default_factory=EndpointConfig)


@dataclass
class RetrievalConfig:
    backend: str = "bm25"
    n_passages: int = 100
    k1: float = 0.9
    b: float = 0.4
    rrf_k: float = 60.0
    chunk_words: int = 100


@dataclass
class LoopConfig:
    max_iterations: int = 3
    require_finish_retries: int = 1
    max_rounds: int = 10
    parallel: int = 1


@dataclass
class CollectionConfig:
    max_iterations: int = 5


@dataclass
class BaselineConfig:
    qa_pairs: str | None = None
    rationale: str | None = None


@dataclass
class RunConfig:
    mode: str = "interactive"
    ablation: str = Ablation.NONE.value
    instruction: str = ""
    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    endpoints: EndpointsConfig = field(default_factory=EndpointsConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    interaction: LoopConfig = field(default_factory=LoopConfig)
    collection: CollectionConfig = field(default_factory=CollectionConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)

    def interaction_config(self) -> InteractionConfig:
        return InteractionConfig(
            max_iterations=self.interaction.max_iterations,
            require_finish_retries=self.interaction.require_finish_retries,
            max_rounds=self.interaction.max_rounds,
            ablation=Ablation(self.ablation),
        )


def _from_dict(data: dict) -> RunConfig:
    data = dict(data)
    sections = {
        "paths": PathsConfig,
        "retrieval": RetrievalConfig,
        "interaction": LoopConfig,
        "collection": CollectionConfig,
        "baseline": BaselineConfig,
    }
    kwargs: dict[str, Any] = {}
    for name, cls in sections.items():
        if name in data:
            kwargs[name] = _take(cls, data.pop(name), name)
    if "endpoints" in data:
        eps = data.pop("endpoints")
        unknown = set(eps) - {"llm", "embed", "reader", "verifier"}
        if unknown:
            raise ConfigError(f"endpoints: unknown endpoint(s) {sorted(unknown)}")
        kwargs["endpoints"] = EndpointsConfig(
            **{k: _take(EndpointConfig, v, f"endpoints.{k}") for k, v in eps.items()}
        )
    cfg = _take(RunConfig, {**data, **kwargs}, "config")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {cfg.mode!r}")
    try:
        Ablation(cfg.ablation)
    except ValueError:
        raise ConfigError(
            f"ablation: expected one of {[a.value for a in Ablation]}, got {cfg.ablation!r}"
        ) from None
    if cfg.retrieval.backend not in ("bm25", "dense", "hybrid"):
        raise ConfigError(f"retrieval.backend: unknown backend {cfg.retrieval.backend!r}")
    return cfg


def _apply_override(data: dict, dotted: str, raw: str) -> None:
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {dotted}: {key} is not a section")
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    node[keys[-1]] = value


def load_config(path: str | Path, overrides: list[str] | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        _apply_override(data, dotted, raw)
    try:
        return _from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def require_paths(cfg: RunConfig, names: list[str]) -> None:
    """Check that the named input paths are configured and exist."""
    for name in names:
        value = getattr(cfg.paths, name)
        if not value:
            raise ConfigError(f"paths.{name}: required for this command")
        if not Path(value).exists():
            raise ConfigError(f"paths.{name}: {value} does not exist")


def require_outputs(cfg: RunConfig, names: list[str]) -> None:
    for name in names:
        if not getattr(cfg.paths, name):
            raise ConfigError(f"paths.{name}: required for this command")


# ---------------------------------------------------------------------------
# client factories


def _spec(ep: EndpointConfig, kind: EndpointKind) -> EndpointSpec:
    return EndpointSpec(
        kind=kind,
        base_url=ep.base_url,
        model_name=ep.model,
        temperature=ep.temperature,
        max_tokens=ep.max_tokens,
        timeout=ep.timeout,
        retries=ep.retries,
        rate_limit=ep.rate_limit,
    )


def build_chat_client(ep: EndpointConfig, cache: ResponseCache, where: str):
    if ep.mock or ep.mock_script:
        script = MockScript()
        if ep.mock_script:
            if not Path(ep.mock_script).exists():
                raise ConfigError(f"endpoints.{where}.mock_script: {ep.mock_script} does not exist")
            script = load_mock_script(ep.mock_script)
        return MockChatClient(script, cache=cache, model_name=ep.model or "mock-chat")
    if not ep.base_url:
        raise ConfigError(f"endpoints.{where}: set base_url, or mock/mock_script")
    return OpenAIChatClient(_spec(ep, EndpointKind.CHAT), cache=cache)


def build_embed_client(ep: EndpointConfig, cache: ResponseCache, where: str = "embed"):
    if ep.mock or ep.mock_vectors:
        mapping = None
        if ep.mock_vectors:
            if not Path(ep.mock_vectors).exists():
                raise ConfigError(f"endpoints.{where}.mock_vectors: {ep.mock_vectors} does not exist")
            mapping = load_mock_vectors(ep.mock_vectors)
        return MockEmbedClient(mapping, dim=ep.mock_dim)
    if not ep.base_url:
        raise ConfigError(f"endpoints.{where}: set base_url, or mock/mock_vectors")
    return OpenAIEmbedClient(_spec(ep, EndpointKind.EMBED), cache=cache)
