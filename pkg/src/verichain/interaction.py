"""The interactive verification loop over structured rationales.

One run: generate an initial rationale by one-shot ICL, then repeatedly
take the earliest unverified intermediate sub-question, get a candidate
answer from the external QA pipeline, and let the verifier arbitrate.  A
kept answer just marks the round verified; a modified answer rewrites that
round's observation, truncates the rationale there, and re-prompts the
model to regenerate the continuation (later rounds lose their verified
status, earlier ones keep it).  The loop ends when the rationale is
finished and every intermediate round is verified, when the iteration cap
is hit, or when a (re)generation stays unparseable after the configured
retries.  Finish rounds are never verified: the interaction supervises the
reasoning that leads up to the final action, not the final answer itself.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ._util import read_jsonl, write_jsonl
from .clients import EndpointError
from .cot import (
    CoTRecord,
    MalformedError,
    MalformedReason,
    parse_cot,
    pending_subquestion,
    serialize_cot,
    truncate_after,
)
from .metrics import contains_answer
from .prompts import Pool, assemble_inference_prompt, select_top1
from .qa import CandidateAnswer, RetrievalBackend, Verdict, VerdictChoice, answer_subquestion, verify

TRACE_SCHEMA_VERSION = 1


class Ablation(str, Enum):
    NONE = "none"
    NO_RETRIEVE_THEN_READ = "no-retrieve-then-read"
    NO_VERIFIER = "no-verifier"


class TraceStatus(str, Enum):
    FINISHED = "finished"
    MALFORMED_FAILURE = "malformed_failure"
    ITERATION_CAP_REACHED = "iteration_cap_reached"


@dataclass(frozen=True)
class InteractionConfig:
    max_iterations: int = 3
    require_finish_retries: int = 1
    max_rounds: int = 10
    ablation: Ablation = Ablation.NONE


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    round_index: int
    subquestion: str
    original_answer: str
    candidate_answer: str
    verdict: Verdict
    regenerated: bool

    def __post_init__(self) -> None:
        if self.regenerated != (self.verdict.choice is not VerdictChoice.KEEP_ORIGINAL):
            raise ValueError("regenerated must mark exactly the modified verdicts")


@dataclass(frozen=True)
class InteractionTrace:
    question: str
    initial_cot: CoTRecord | MalformedError
    iterations: tuple[IterationRecord, ...]
    final_cot: CoTRecord | MalformedError
    final_answers: tuple[str, ...]
    status: TraceStatus
    question_id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "iterations", tuple(self.iterations))
        object.__setattr__(self, "final_answers", tuple(self.final_answers))
        if self.status is TraceStatus.FINISHED:
            if not (isinstance(self.final_cot, CoTRecord) and self.final_cot.finished):
                raise ValueError("a finished trace must hold a finished rationale")
            if self.final_answers != self.final_cot.final_answers:
                raise ValueError("final answers must be the rationale's Finish answers")


def _single_line(text: str) -> str:
    return " ".join(text.split())


def _generate(chat, prompt: str, retries: int, max_rounds: int,
              prefix_text: str | None = None) -> CoTRecord | MalformedError:
    """Call the chat model and parse, retrying on malformed output.  For
    regenerations the completion continues a serialized prefix, so the two
    are joined before parsing."""
    result: CoTRecord | MalformedError = MalformedError(MalformedReason.MISSING_THOUGHT, 1)
    for _attempt in range(retries + 1):
        completion = chat.chat(prompt)
        text = completion if prefix_text is None else f"{prefix_text}\n{completion}"
        result = parse_cot(text, require_finish=True)
        if isinstance(result, CoTRecord):
            if len(result.rounds) > max_rounds:
                result = MalformedError(MalformedReason.BAD_INDEX_SEQUENCE, 1)
                continue
            return result
    return result


def run_interaction(
    question: str,
    pool: Pool,
    llm,
    embed,
    retriever: RetrievalBackend | None,
    reader,
    verifier,
    config: InteractionConfig = InteractionConfig(),
    instruction: str = "",
    n_passages: int = 100,
    question_id: str = "",
) -> InteractionTrace:
    """Run the full loop for one question and return its trace."""
    question = _single_line(question)
    [query_embedding] = embed.embed([question])
    demo = select_top1(pool, query_embedding)
    prompt = assemble_inference_prompt(instruction, demo, question)

    cot = _generate(llm, prompt, config.require_finish_retries, config.max_rounds)
    if isinstance(cot, MalformedError):
        return InteractionTrace(question, cot, (), cot, (), TraceStatus.MALFORMED_FAILURE,
                                question_id)
    cot = replace(cot, question=question)
    initial = cot

    verified: set[int] = set()
    iterations: list[IterationRecord] = []
    iteration = 1
    while True:
        pending = pending_subquestion(cot, verified)
        if pending is None:
            status = TraceStatus.FINISHED
            break
        if iteration > config.max_iterations:
            status = TraceStatus.ITERATION_CAP_REACHED
            break
        round_index, subq = pending
        original = cot.rounds[round_index - 1].observation or ""

        candidate: CandidateAnswer | None = None
        if config.ablation is not Ablation.NO_RETRIEVE_THEN_READ:
            try:
                candidate = answer_subquestion(subq, retriever, reader, n_passages)
            except EndpointError:
                candidate = None
        if candidate is None and config.ablation is Ablation.NO_RETRIEVE_THEN_READ:
            candidate = CandidateAnswer("", (), "")

        if candidate is None:
            # pipeline failure: degrade to vanilla reasoning for this round
            verdict = Verdict(VerdictChoice.KEEP_ORIGINAL, original)
        elif config.ablation is Ablation.NO_VERIFIER:
            verdict = Verdict(VerdictChoice.USE_CANDIDATE, candidate.text)
        else:
            verdict = verify(subq, original, candidate, verifier)

        corrected = _single_line(verdict.final_text)
        if verdict.choice is not VerdictChoice.KEEP_ORIGINAL and not corrected:
            # nothing usable to write back; keep the round as generated
            verdict = Verdict(VerdictChoice.KEEP_ORIGINAL, original)

        regenerated = verdict.choice is not VerdictChoice.KEEP_ORIGINAL
        iterations.append(
            IterationRecord(iteration, round_index, subq, original,
                            candidate.text if candidate else "", verdict, regenerated)
        )

        if not regenerated:
            verified.add(round_index)
        else:
            fixed_round = replace(cot.rounds[round_index - 1], observation=corrected)
            prefix = truncate_after(
                replace(cot, rounds=cot.rounds[: round_index - 1] + (fixed_round,)
                        + cot.rounds[round_index:]),
                round_index,
            )
            prefix_text = serialize_cot(prefix, include_hint=False)
            regen_prompt = (
                f"{instruction}\n\n"
                f"{serialize_cot(demo.record, include_hint=False)}\n\n"
                f"{prefix_text}"
            )
            regen = _generate(llm, regen_prompt, config.require_finish_retries,
                              config.max_rounds, prefix_text=prefix_text)
            if isinstance(regen, MalformedError):
                return InteractionTrace(question, initial, tuple(iterations), regen, (),
                                        TraceStatus.MALFORMED_FAILURE, question_id)
            cot = regen
            verified = {v for v in verified if v < round_index} | {round_index}
        iteration += 1

    return InteractionTrace(question, initial, tuple(iterations), cot, cot.final_answers,
                            status, question_id)


def run_vanilla(
    question: str,
    pool: Pool,
    llm,
    embed,
    config: InteractionConfig = InteractionConfig(),
    instruction: str = "",
    question_id: str = "",
) -> InteractionTrace:
    """One-shot rationale generation with no interaction (the plain CoT
    ICL setting); the trace carries zero iterations."""
    question = _single_line(question)
    [query_embedding] = embed.embed([question])
    demo = select_top1(pool, query_embedding)
    prompt = assemble_inference_prompt(instruction, demo, question)
    cot = _generate(llm, prompt, config.require_finish_retries, config.max_rounds)
    if isinstance(cot, MalformedError):
        return InteractionTrace(question, cot, (), cot, (), TraceStatus.MALFORMED_FAILURE,
                                question_id)
    cot = replace(cot, question=question)
    return InteractionTrace(question, cot, (), cot, cot.final_answers, TraceStatus.FINISHED,
                            question_id)


# ---------------------------------------------------------------------------
# batch statistics


@dataclass(frozen=True)
class TransitionCounts:
    corrected: int
    broken: int
    kept_correct: int
    kept_incorrect: int


def _hits(answers: Sequence[str], gold: Sequence[str]) -> bool:
    return bool(answers) and contains_answer(" ".join(answers), gold)


def correctness_transitions(
    traces: Iterable[InteractionTrace], gold: Mapping[str, Sequence[str]]
) -> TransitionCounts:
    """Tally correct/incorrect flips between the initial rationale's answer
    and the post-interaction answer (malformed counts as incorrect)."""
    corrected = broken = kept_correct = kept_incorrect = 0
    for trace in traces:
        if trace.question not in gold:
            raise ValueError(f"no gold answers for question {trace.question!r}")
        answers = gold[trace.question]
        initial_answers = (
            trace.initial_cot.final_answers
            if isinstance(trace.initial_cot, CoTRecord)
            else ()
        )
        before = _hits(initial_answers, answers)
        after = _hits(trace.final_answers, answers)
        if before and after:
            kept_correct += 1
        elif before:
            broken += 1
        elif after:
            corrected += 1
        else:
            kept_incorrect += 1
    return TransitionCounts(corrected, broken, kept_correct, kept_incorrect)


@dataclass(frozen=True)
class SourceCounts:
    kept_by_verifier: int = 0
    replaced_by_qa: int = 0
    new_by_verifier: int = 0


_VERDICT_FIELD = {
    VerdictChoice.KEEP_ORIGINAL: "kept_by_verifier",
    VerdictChoice.USE_CANDIDATE: "replaced_by_qa",
    VerdictChoice.NEW_ANSWER: "new_by_verifier",
}


def answer_source_tally(
    traces: Iterable[InteractionTrace], per_iteration: bool = True
) -> dict[int, SourceCounts]:
    """Count verdict outcomes grouped by iteration number; with
    ``per_iteration=False`` everything lands under key 0."""
    buckets: dict[int, dict[str, int]] = {}
    for trace in traces:
        for record in trace.iterations:
            key = record.iteration if per_iteration else 0
            bucket = buckets.setdefault(
                key, {"kept_by_verifier": 0, "replaced_by_qa": 0, "new_by_verifier": 0}
            )
            bucket[_VERDICT_FIELD[record.verdict.choice]] += 1
    return {k: SourceCounts(**buckets[k]) for k in sorted(buckets)}


# ---------------------------------------------------------------------------
# trace persistence: one JSON object per trace, schema versioned


def _cot_to_json(value: CoTRecord | MalformedError) -> dict:
    if isinstance(value, MalformedError):
        return {"malformed": {"reason": value.reason.value, "line": value.line}}
    return {"text": serialize_cot(value, include_hint=True)}


def _cot_from_json(obj: dict) -> CoTRecord | MalformedError:
    if "malformed" in obj:
        return MalformedError(MalformedReason(obj["malformed"]["reason"]),
                              int(obj["malformed"]["line"]))
    parsed = parse_cot(obj["text"], require_finish=False)
    if isinstance(parsed, MalformedError):
        raise ValueError("stored rationale text does not parse")
    return parsed


def save_traces(traces: Iterable[InteractionTrace], path: str | Path) -> None:
    rows = []
    for t in traces:
        rows.append(
            {
                "schema": TRACE_SCHEMA_VERSION,
                "id": t.question_id,
                "question": t.question,
                "status": t.status.value,
                "initial_cot": _cot_to_json(t.initial_cot),
                "final_cot": _cot_to_json(t.final_cot),
                "final_answers": list(t.final_answers),
                "iterations": [
                    {
                        "iteration": r.iteration,
                        "round_index": r.round_index,
                        "subquestion": r.subquestion,
                        "original_answer": r.original_answer,
                        "candidate_answer": r.candidate_answer,
                        "verdict": {"choice": r.verdict.choice.value,
                                    "final_text": r.verdict.final_text},
                        "regenerated": r.regenerated,
                    }
                    for r in t.iterations
                ],
            }
        )
    write_jsonl(path, rows)


def load_traces(path: str | Path) -> list[InteractionTrace]:
    traces = []
    for row in read_jsonl(path):
        if row.get("schema") != TRACE_SCHEMA_VERSION:
            raise ValueError(f"{path}: unsupported trace schema {row.get('schema')!r}")
        iterations = tuple(
            IterationRecord(
                int(r["iteration"]),
                int(r["round_index"]),
                r["subquestion"],
                r["original_answer"],
                r["candidate_answer"],
                Verdict(VerdictChoice(r["verdict"]["choice"]), r["verdict"]["final_text"]),
                bool(r["regenerated"]),
            )
            for r in row["iterations"]
        )
        traces.append(
            InteractionTrace(
                row["question"],
                _cot_from_json(row["initial_cot"]),
                iterations,
                _cot_from_json(row["final_cot"]),
                tuple(row["final_answers"]),
                TraceStatus(row["status"]),
                row.get("id", ""),
            )
        )
    return traces
