"""Answer normalization and QA metrics (Hits@1 containment, set F1).

One normalization is used everywhere answer strings are compared: here,
in retrieval hit/recall, and in the miner's containment tests.
"""

from __future__ import annotations

import re
import string
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ._util import atomic_write_text, dump_json, read_jsonl, write_jsonl

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")
_WS_RE = re.compile(r"\s+")
_EDGE_CHARS = string.punctuation + string.whitespace


def normalize(s: str) -> str:
    """Canonical answer form: accents stripped to base letters, lowercased,
    articles removed as whole words, edge punctuation dropped, whitespace
    collapsed.  Idempotent."""
    s = unicodedata.normalize("NFKD", s)
    s = "".join(ch for ch in s if not unicodedata.combining(ch))
    s = s.lower()
    # stripping may expose a bare article (and vice versa), so iterate to a
    # fixpoint; each changing pass strictly shrinks the string
    prev = None
    while s != prev:
        prev = s
        s = _ARTICLES_RE.sub(" ", s)
        s = s.strip(_EDGE_CHARS)
        s = _WS_RE.sub(" ", s).strip()
    return s


def contains_answer(text: str, answers: Iterable[str]) -> bool:
    """True iff any normalized answer is a substring of the normalized text.
    Answers that normalize to the empty string never match."""
    haystack = normalize(text)
    for a in answers:
        needle = normalize(a)
        if needle and needle in haystack:
            return True
    return False


@dataclass(frozen=True)
class Prediction:
    """One system output: parsed Finish answers, or a single raw text for
    unstructured baselines.  ``malformed`` marks outputs that could not be
    parsed; those carry no answers and score zero."""

    question_id: str
    answer_texts: tuple[str, ...]
    malformed: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "answer_texts", tuple(self.answer_texts))
        if self.malformed and self.answer_texts:
            raise ValueError("a malformed prediction carries no answers")


@dataclass(frozen=True)
class MetricsReport:
    hits_at_1: float
    f1_macro: float
    n_questions: int
    n_malformed: int

    def __post_init__(self) -> None:
        if self.n_malformed > self.n_questions:
            raise ValueError("n_malformed cannot exceed n_questions")


def hits_at_1(pred: Prediction, gold: Sequence[str]) -> bool:
    """Containment criterion: the produced answer text counts as correct if
    it contains a ground-truth answer (after normalization)."""
    if not gold:
        raise ValueError("gold answers must be non-empty")
    if pred.malformed:
        return False
    return contains_answer(" ".join(pred.answer_texts), gold)


def f1(pred_answers: Sequence[str], gold: Sequence[str]) -> float:
    """Set-based F1 over normalized, deduplicated answers; membership is
    exact normalized match (coverage of all gold answers)."""
    if not gold:
        raise ValueError("gold answers must be non-empty")
    pred_set = {normalize(a) for a in pred_answers}
    gold_set = {normalize(a) for a in gold}
    if not pred_set:
        return 0.0
    overlap = len(pred_set & gold_set)
    precision = overlap / len(pred_set)
    recall = overlap / len(gold_set)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def aggregate(
    predictions: Iterable[Prediction], gold_map: Mapping[str, Sequence[str]]
) -> MetricsReport:
    """Mean Hits@1 and macro (per-question) F1 over a batch."""
    hits = 0
    f1_total = 0.0
    n = 0
    n_malformed = 0
    for pred in predictions:
        if pred.question_id not in gold_map:
            raise ValueError(f"no gold answers for question id {pred.question_id!r}")
        gold = gold_map[pred.question_id]
        n += 1
        if pred.malformed:
            n_malformed += 1
            continue
        hits += int(hits_at_1(pred, gold))
        f1_total += f1(pred.answer_texts, gold)
    if n == 0:
        return MetricsReport(0.0, 0.0, 0, 0)
    return MetricsReport(hits / n, f1_total / n, n, n_malformed)


# ---------------------------------------------------------------------------
# file formats: gold JSONL {id, question, answers}, predictions JSONL
# {id, answers, malformed}, report JSON


def read_gold(path: str | Path) -> dict[str, list[str]]:
    gold: dict[str, list[str]] = {}
    for row in read_jsonl(path):
        gold[str(row["id"])] = [str(a) for a in row["answers"]]
    return gold


def read_predictions(path: str | Path) -> list[Prediction]:
    return [
        Prediction(str(row["id"]), tuple(row.get("answers", [])), bool(row.get("malformed", False)))
        for row in read_jsonl(path)
    ]


def write_predictions(path: str | Path, predictions: Iterable[Prediction]) -> None:
    write_jsonl(
        path,
        (
            {"id": p.question_id, "answers": list(p.answer_texts), "malformed": p.malformed}
            for p in predictions
        ),
    )


def write_report(path: str | Path, report: MetricsReport) -> None:
    atomic_write_text(
        path,
        dump_json(
            {
                "hits_at_1": report.hits_at_1,
                "f1_macro": report.f1_macro,
                "n_questions": report.n_questions,
                "n_malformed": report.n_malformed,
            }
        )
        + "\n",
    )
