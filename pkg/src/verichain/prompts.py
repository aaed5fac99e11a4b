"""Demonstration pool, cosine selection, and prompt assembly.

The pool holds structured rationale demonstrations with unit-norm question
embeddings.  Selection is a plain argmax of dot products (equal to cosine
for unit vectors); ties break toward the earliest inserted item so runs
are reproducible.  Embeddings arrive from the embedding client; this
module never computes them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._util import read_jsonl, write_jsonl
from .cot import CoTRecord, MalformedError, parse_cot, serialize_cot
from .corpus import Passage

NORM_TOL = 1e-6


class DemoSource(str, Enum):
    HUMAN_ANCHOR = "human_anchor"
    CONSTRUCTED = "constructed"


def _as_unit_vector(vec: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("embedding must be a non-empty 1-D vector")
    if abs(float(np.linalg.norm(arr)) - 1.0) > NORM_TOL:
        raise ValueError("embedding must be unit-norm")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Demonstration:
    record: CoTRecord
    embedding: np.ndarray
    source: DemoSource = DemoSource.CONSTRUCTED

    def __post_init__(self) -> None:
        object.__setattr__(self, "embedding", _as_unit_vector(self.embedding))


class Pool:
    """Ordered demonstration pool.  Reads are free-threaded; extension
    (during collection construction) requires exclusive access."""

    def __init__(self, items: Iterable[Demonstration] = ()):
        self._items: list[Demonstration] = []
        for demo in items:
            self.add(demo)

    def add(self, demo: Demonstration) -> None:
        if self._items and demo.embedding.shape != self._items[0].embedding.shape:
            raise ValueError(
                f"embedding dimension {demo.embedding.shape[0]} does not match pool "
                f"dimension {self.dim}"
            )
        self._items.append(demo)

    @property
    def items(self) -> tuple[Demonstration, ...]:
        return tuple(self._items)

    @property
    def dim(self) -> int | None:
        return self._items[0].embedding.shape[0] if self._items else None

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i: int) -> Demonstration:
        return self._items[i]


def select_top1(pool: Pool, query_embedding: Sequence[float] | np.ndarray) -> Demonstration:
    """Demonstration with the highest cosine similarity to the query.
    Ties break by lowest insertion index."""
    if len(pool) == 0:
        raise ValueError("cannot select from an empty pool")
    query = _as_unit_vector(query_embedding)
    if query.shape[0] != pool.dim:
        raise ValueError(f"query dimension {query.shape[0]} does not match pool dimension {pool.dim}")
    matrix = np.stack([d.embedding for d in pool])
    scores = matrix @ query
    return pool[int(np.argmax(scores))]


# ---------------------------------------------------------------------------
# prompt assembly


def _hint_line(answers: Sequence[str]) -> str:
    return "Hint: " + "; ".join(answers)


def assemble_inference_prompt(instruction: str, demo: Demonstration, question: str) -> str:
    """One-shot prompt for inference: the demonstration is rendered without
    its hint, and the target question ends at a ``Thought 1:`` stub for the
    model to continue."""
    if not demo.record.finished:
        raise ValueError("inference demonstrations must be finished rationales")
    demo_text = serialize_cot(demo.record, include_hint=False)
    return f"{instruction}\n\n{demo_text}\n\nQuestion: {question}\nThought 1:"


def assemble_construction_prompt(
    instruction: str,
    demo: Demonstration,
    question: str,
    gold: Sequence[str],
    composition: Sequence[str] | None = None,
) -> str:
    """Collection-construction prompt: the demonstration keeps its hint and
    the target question gets its own hint line built from the gold answers
    plus any composition (bridge) answers."""
    if not gold:
        raise ValueError("construction requires at least one gold answer")
    demo_text = serialize_cot(demo.record, include_hint=True)
    hint = _hint_line(list(gold) + list(composition or ()))
    return f"{instruction}\n\n{demo_text}\n\nQuestion: {question}\n{hint}\nThought 1:"


class BaselineMode(str, Enum):
    RETRIEVAL_4_PASSAGES = "retrieval-4-passages"
    QA_PAIRS_4_SHOT = "qa-pairs-4-shot"
    COT_FIXED = "cot-fixed"


def assemble_baseline_prompt(mode: BaselineMode, context, question: str) -> str:
    """Prompts for the non-interactive baselines.

    ``context`` is mode-specific: exactly 4 passages, exactly 4 (question,
    answer) pairs, or one free-form rationale text.
    """
    if mode is BaselineMode.RETRIEVAL_4_PASSAGES:
        passages: Sequence[Passage] = context
        if len(passages) != 4:
            raise ValueError(f"retrieval baseline needs exactly 4 passages, got {len(passages)}")
        blocks = [f"Title: {p.title}\n{p.body}" for p in passages]
    elif mode is BaselineMode.QA_PAIRS_4_SHOT:
        pairs = list(context)
        if len(pairs) != 4:
            raise ValueError(f"QA-pair baseline needs exactly 4 pairs, got {len(pairs)}")
        blocks = [f"Question: {q}\nAnswer: {a}" for q, a in pairs]
    elif mode is BaselineMode.COT_FIXED:
        blocks = [str(context)]
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown baseline mode {mode!r}")
    return "\n\n".join(blocks) + f"\n\nQuestion: {question}\nAnswer:"


# ---------------------------------------------------------------------------
# persistence: one JSON object per demonstration


def save_pool(pool: Pool, path: str | Path) -> None:
    rows = []
    for demo in pool:
        rows.append(
            {
                "question": demo.record.question,
                "hint": list(demo.record.hint) if demo.record.hint else None,
                "cot_text": serialize_cot(demo.record, include_hint=False),
                "embedding": [float(x) for x in demo.embedding],
                "source": demo.source.value,
            }
        )
    write_jsonl(path, rows)


def load_pool(path: str | Path) -> Pool:
    pool = Pool()
    for n, row in enumerate(read_jsonl(path), 1):
        record = parse_cot(row["cot_text"], require_finish=False)
        if isinstance(record, MalformedError):
            raise ValueError(f"{path}: demonstration {n} does not parse ({record.reason.value})")
        hint = tuple(row["hint"]) if row.get("hint") else None
        record = replace(record, question=row.get("question", record.question), hint=hint)
        pool.add(Demonstration(record, np.asarray(row["embedding"]), DemoSource(row["source"])))
    return pool
