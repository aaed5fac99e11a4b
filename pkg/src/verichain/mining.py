"""Retriever training data mined from constructed rationales.

For each training item, the query is augmented with the last reasoning
sub-question of its rationale, the answers are appended, and BM25 pulls
the top passages.  Passages containing both a query entity and an answer
string are positives; passages containing exactly one of the two are hard
negatives; when no co-occurrence passage exists, answer-only passages are
promoted to positives so multi-answer questions keep recall.  The emitted
records carry the original question (augmentation is used for mining
only, never as the training query).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

from ._util import write_jsonl
from .collection import TrainItem
from .corpus import PassageStore
from .cot import Ask, CoTRecord
from .metrics import contains_answer
from .retrieval import BM25Index, bm25_search

DEFAULT_TOP_N = 100

Recognizer = Callable[[str], set[str]]

# lowercase tokens allowed to bridge two capitalized tokens inside one entity
CONNECTIVES = frozenset({"de", "of", "the", "da", "von", "van"})

# a single capitalized token at sentence start is ignored when it is one of
# these; real names keep slipping through otherwise ("The dog", "Who said")
SENTENCE_STOPWORDS = frozenset(
    """a an the who what when where which why how whom whose is are was were am
    be been do does did can could will would shall should may might must in on
    at of to for from by with and or but if it its he she they we you i this
    that these those not no yes there here""".split()
)

_QUOTED_RE = re.compile(r'"([^"\n]+)"|“([^”\n]+)”')
_EDGE_PUNCT = "".join(chr(c) for c in range(33, 127) if not chr(c).isalnum())


class MiningRule(str, Enum):
    CO_OCCURRENCE = "co_occurrence"
    ANSWER_ONLY_FALLBACK = "answer_only_fallback"


@dataclass(frozen=True)
class MinedExample:
    """One retriever training record; ``question`` is always the original
    question, and positives/hard negatives are disjoint passage id lists in
    retrieval rank order."""

    question: str
    positives: tuple[str, ...]
    hard_negatives: tuple[str, ...]
    rule: MiningRule

    def __post_init__(self) -> None:
        object.__setattr__(self, "positives", tuple(self.positives))
        object.__setattr__(self, "hard_negatives", tuple(self.hard_negatives))
        if set(self.positives) & set(self.hard_negatives):
            raise ValueError("positives and hard negatives must be disjoint")


def augment_query(question: str, cot: CoTRecord | None) -> str:
    """Original question plus the last reasoning sub-question of the
    rationale; the bare question when the rationale has no Ask rounds."""
    if cot is None:
        return question
    last_ask = None
    for rnd in cot.rounds:
        if isinstance(rnd.action, Ask):
            last_ask = rnd.action.question
    if last_ask is None:
        return question
    return f"{question} {last_ask}"


def _strip_edge_punct(token: str) -> str:
    return token.strip(_EDGE_PUNCT)


def default_recognizer(text: str) -> set[str]:
    """Rule-based entity recognizer: maximal runs of capitalized tokens
    (lowercase connectives may bridge them) plus quoted spans.  A plug-in
    replacement with a real NER model takes the same str -> set signature.
    """
    entities: set[str] = set()
    for m in _QUOTED_RE.finditer(text):
        span = (m.group(1) or m.group(2)).strip()
        if span:
            entities.add(span)

    run: list[str] = []
    pending: list[str] = []  # connectives awaiting another capitalized token
    run_sentence_initial = False
    sentence_start = True

    def flush() -> None:
        nonlocal run, pending
        if run:
            if not (
                len(run) == 1
                and run_sentence_initial
                and run[0].lower() in SENTENCE_STOPWORDS
            ):
                entities.add(" ".join(run))
        run = []
        pending = []

    for raw in text.split():
        token = _strip_edge_punct(raw)
        if not token:
            flush()
            sentence_start = True
            continue
        if token[0].isupper():
            if run:
                run.extend(pending)
                pending = []
                run.append(token)
            else:
                run = [token]
                run_sentence_initial = sentence_start
        elif run and token.lower() in CONNECTIVES and token.islower():
            pending.append(token)
        else:
            flush()
        sentence_start = raw.rstrip()[-1:] in ".!?"
    flush()
    return entities


def mine_examples(
    item: TrainItem,
    cot: CoTRecord | None,
    index: BM25Index,
    store: PassageStore,
    recognizer: Recognizer = default_recognizer,
    top_n: int = DEFAULT_TOP_N,
) -> MinedExample:
    """Classify the BM25 top-``top_n`` for one item into positives and hard
    negatives by entity/answer co-occurrence (answer-only fallback when no
    passage carries both)."""
    augmented = augment_query(item.question, cot)
    search_text = augmented + " " + "; ".join(item.answers)
    ranked = bm25_search(index, search_text, top_n)
    entities = recognizer(augmented)

    co_occurrence: list[str] = []
    answer_only: list[str] = []
    entity_only: list[str] = []
    single_match: list[str] = []  # answer-only + entity-only, in rank order
    for pid, _score in ranked:
        body = store.get(pid).body
        has_answer = contains_answer(body, item.answers)
        has_entity = contains_answer(body, entities) if entities else False
        if has_answer and has_entity:
            co_occurrence.append(pid)
        elif has_answer:
            answer_only.append(pid)
            single_match.append(pid)
        elif has_entity:
            entity_only.append(pid)
            single_match.append(pid)

    if co_occurrence:
        return MinedExample(item.question, tuple(co_occurrence), tuple(single_match),
                            MiningRule.CO_OCCURRENCE)
    return MinedExample(item.question, tuple(answer_only), tuple(entity_only),
                        MiningRule.ANSWER_ONLY_FALLBACK)


def write_dpr_examples(
    pairs: Iterable[tuple[TrainItem, MinedExample]],
    store: PassageStore,
    path,
) -> None:
    """Emit the standard retriever-training JSONL: {question, answers,
    positive_ctxs, hard_negative_ctxs} with {id, title, text} contexts."""

    def ctx(pid: str) -> dict:
        passage = store.get(pid)
        return {"id": passage.id, "title": passage.title, "text": passage.body}

    write_jsonl(
        path,
        (
            {
                "question": example.question,
                "answers": list(item.answers),
                "positive_ctxs": [ctx(p) for p in example.positives],
                "hard_negative_ctxs": [ctx(p) for p in example.hard_negatives],
                "rule": example.rule.value,
            }
            for item, example in pairs
        ),
    )
