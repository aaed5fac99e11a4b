"""Iterative construction of the structured rationale collection.

Starting from a pool of human-written anchor demonstrations, each pass
over the unresolved training items selects the most similar demonstration,
prompts the chat model with the item's gold answers as a hint, and admits
the generated rationale only if its Finish answers match the gold.
Admitted rationales join the pool (becoming selectable in later passes)
and their items leave the queue; after at most ``max_iterations`` passes
the remaining items are reported unresolved.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from ._util import atomic_write_text, dump_json, read_jsonl
from .clients import EndpointError
from .cot import CoTRecord, MalformedError, parse_cot
from .metrics import normalize
from .prompts import Demonstration, DemoSource, Pool, assemble_construction_prompt, select_top1


@dataclass(frozen=True)
class TrainItem:
    id: str
    question: str
    answers: tuple[str, ...]
    composition_answers: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "answers", tuple(self.answers))
        if self.composition_answers is not None:
            object.__setattr__(self, "composition_answers", tuple(self.composition_answers))
        if not self.answers:
            raise ValueError("a training item needs at least one gold answer")


@dataclass(frozen=True)
class BuildReport:
    iterations_run: int
    admitted_per_iteration: tuple[int, ...]
    unresolved: tuple[str, ...]


def answer_match(output: str, gold: Sequence[str]) -> bool:
    """Admission test: the output parses as a finished rationale and some
    Finish answer equals a gold answer after normalization.  Malformed
    output never matches."""
    record = parse_cot(output, require_finish=True)
    if isinstance(record, MalformedError):
        return False
    produced = {normalize(a) for a in record.final_answers}
    return any(normalize(g) in produced for g in gold)


def _hintable(text: str) -> str:
    # hint entries ride on one line of the wire format and must not collide
    # with the "; " separator
    return " ".join(text.replace(";", ",").split())


def _hint_for(item: TrainItem) -> tuple[str, ...] | None:
    entries = [_hintable(a) for a in item.answers]
    entries += [_hintable(c) for c in item.composition_answers or ()]
    entries = [e for e in entries if e]
    return tuple(entries) or None


def build_collection(
    train: Sequence[TrainItem],
    anchors: Sequence[Demonstration],
    chat,
    embed,
    instruction: str = "",
    max_iterations: int = 5,
) -> tuple[Pool, BuildReport]:
    """Run the construction loop and return the grown pool plus a yield
    report.

    Endpoint failures leave the item unresolved for the current pass
    instead of aborting the build.  Demonstrations admitted within a pass
    become selectable only from the next pass on, so items within one pass
    are order-independent (and safe to process in parallel).
    """
    if not anchors:
        raise ValueError("the anchor demonstration set must be non-empty")
    if len({item.id for item in train}) != len(train):
        raise ValueError("training item ids must be unique")

    pool = Pool(anchors)
    remaining = list(train)
    embeddings = dict(zip((i.question for i in remaining),
                          embed.embed([i.question for i in remaining]) if remaining else []))
    admitted_per_iteration: list[int] = []
    iterations = 0

    while remaining and iterations < max_iterations:
        iterations += 1
        admitted: list[Demonstration] = []
        still: list[TrainItem] = []
        for item in remaining:
            query_embedding = embeddings[item.question]
            demo = select_top1(pool, query_embedding)
            prompt = assemble_construction_prompt(
                instruction, demo, item.question, item.answers, item.composition_answers
            )
            try:
                output = chat.chat(prompt)
            except EndpointError:
                still.append(item)
                continue
            if answer_match(output, item.answers):
                record = parse_cot(output, require_finish=True)
                assert isinstance(record, CoTRecord)
                record = replace(record, question=item.question, hint=_hint_for(item))
                admitted.append(Demonstration(record, query_embedding, DemoSource.CONSTRUCTED))
            else:
                still.append(item)
        for demo in admitted:
            pool.add(demo)
        admitted_per_iteration.append(len(admitted))
        remaining = still

    report = BuildReport(iterations, tuple(admitted_per_iteration), tuple(i.id for i in remaining))
    return pool, report


# ---------------------------------------------------------------------------
# file formats: training set JSONL {id, question, answers,
# composition_answers?}; report JSON


def read_train_items(path) -> list[TrainItem]:
    items = []
    for row in read_jsonl(path):
        comp = row.get("composition_answers")
        items.append(
            TrainItem(
                str(row["id"]),
                str(row["question"]),
                tuple(str(a) for a in row["answers"]),
                tuple(str(c) for c in comp) if comp else None,
            )
        )
    return items


def write_build_report(path, report: BuildReport) -> None:
    atomic_write_text(
        path,
        dump_json(
            {
                "iterations_run": report.iterations_run,
                "admitted_per_iteration": list(report.admitted_per_iteration),
                "unresolved": list(report.unresolved),
            }
        )
        + "\n",
    )
