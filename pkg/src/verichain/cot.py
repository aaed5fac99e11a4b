"""Structured multi-round QA rationale format.

A rationale is a line-oriented block of numbered Thought / Action /
Observation rounds, optionally preceded by a question header and a hint:

    Question: who recorded Palavras de Guerra Ao Vivo?
    Hint: Olivia Hime
    Thought 1: I need to find the artist of the recording.
    Action 1: Question[who recorded Palavras de Guerra Ao Vivo?]
    Observation 1: Olivia Hime
    Thought 2: That answers it.
    Action 2: Finish[Olivia Hime]

Actions are bracketed ``Question[...]`` (ask an intermediate sub-question)
or ``Finish[a1; a2; ...]`` (terminate with one or more answers).  A Finish
round carries no Observation and must be last.  Round indices run 1..K
consecutively.  Fields are single-line trimmed text; on parsing, lines
without a recognized prefix are folded into the preceding field and blank
lines are skipped, since model output wraps and pads unpredictably.

This text is the exact wire format exchanged with chat endpoints, so the
parser is strict: any structural violation yields a :class:`MalformedError`
value (never an exception) naming the first offending line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum


class MalformedReason(str, Enum):
    MISSING_THOUGHT = "missing_thought"
    MISSING_ACTION = "missing_action"
    BAD_INDEX_SEQUENCE = "bad_index_sequence"
    NO_FINISH = "no_finish"
    UNPARSEABLE_ACTION = "unparseable_action"
    EMPTY_FIELD = "empty_field"


@dataclass(frozen=True)
class MalformedError:
    """Parser rejection: ``reason`` plus the 1-based offending line number."""

    reason: MalformedReason
    line: int


def _check_field(value: str, what: str) -> None:
    if "\n" in value or "\r" in value:
        raise ValueError(f"{what} must be single-line text")
    if value != value.strip():
        raise ValueError(f"{what} must not carry leading/trailing whitespace")


@dataclass(frozen=True)
class Ask:
    """Intermediate sub-question action."""

    question: str

    def __post_init__(self) -> None:
        _check_field(self.question, "Ask.question")
        if not self.question:
            raise ValueError("Ask.question must be non-empty")


@dataclass(frozen=True)
class Finish:
    """Terminal action carrying one or more final answers."""

    answers: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "answers", tuple(self.answers))
        if not self.answers:
            raise ValueError("Finish.answers must be non-empty")
        for a in self.answers:
            _check_field(a, "Finish answer")
            if not a:
                raise ValueError("Finish answers must be non-empty")
            if ";" in a:
                raise ValueError("Finish answers must not contain ';'")


Action = Ask | Finish


@dataclass(frozen=True)
class Round:
    index: int
    thought: str
    action: Action
    observation: str | None = None

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError("round index must be positive")
        _check_field(self.thought, "thought")
        if not self.thought:
            raise ValueError("thought must be non-empty")
        if self.observation is not None:
            if isinstance(self.action, Finish):
                raise ValueError("a Finish round carries no observation")
            _check_field(self.observation, "observation")
            if not self.observation:
                raise ValueError("observation, when present, must be non-empty")


@dataclass(frozen=True)
class CoTRecord:
    """A parsed rationale: question, optional hint answers, rounds."""

    question: str = ""
    hint: tuple[str, ...] | None = None
    rounds: tuple[Round, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "rounds", tuple(self.rounds))
        _check_field(self.question, "question")
        if self.hint is not None:
            object.__setattr__(self, "hint", tuple(self.hint))
            if not self.hint:
                raise ValueError("hint, when present, must be non-empty")
            for h in self.hint:
                _check_field(h, "hint entry")
                if not h:
                    raise ValueError("hint entries must be non-empty")
                if ";" in h:
                    raise ValueError("hint entries must not contain ';'")
        for pos, rnd in enumerate(self.rounds, 1):
            if rnd.index != pos:
                raise ValueError("round indices must run 1..K consecutively")
            if isinstance(rnd.action, Finish) and pos != len(self.rounds):
                raise ValueError("a Finish round must be the last round")

    @property
    def finished(self) -> bool:
        return bool(self.rounds) and isinstance(self.rounds[-1].action, Finish)

    @property
    def final_answers(self) -> tuple[str, ...]:
        """Finish answers, or () when the record is not finished."""
        if self.finished:
            return self.rounds[-1].action.answers  # type: ignore[union-attr]
        return ()


_QUESTION_RE = re.compile(r"^Question:\s*(.*)$")
_HINT_RE = re.compile(r"^Hint:\s*(.*)$")
_THOUGHT_RE = re.compile(r"^Thought (\d+):\s*(.*)$")
_ACTION_RE = re.compile(r"^Action (\d+):\s*(.*)$")
_OBSERVATION_RE = re.compile(r"^Observation (\d+):\s*(.*)$")
_ACTION_BODY_RE = re.compile(r"^(Question|Finish)\[(.*)\]$")

_Q, _H, _T, _A, _O = "question", "hint", "thought", "action", "observation"


@dataclass
class _Event:
    line: int
    kind: str
    index: int | None
    payload: str

    def fold(self, extra: str) -> None:
        self.payload = f"{self.payload} {extra}".strip()


def _scan(text: str) -> list[_Event] | MalformedError:
    """Split text into prefixed events, folding continuation lines."""
    events: list[_Event] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        for regex, kind in (
            (_THOUGHT_RE, _T),
            (_ACTION_RE, _A),
            (_OBSERVATION_RE, _O),
            (_QUESTION_RE, _Q),
            (_HINT_RE, _H),
        ):
            m = regex.match(line)
            if m:
                if kind in (_Q, _H):
                    events.append(_Event(lineno, kind, None, m.group(1).strip()))
                else:
                    events.append(_Event(lineno, kind, int(m.group(1)), m.group(2).strip()))
                break
        else:
            if not events:
                return MalformedError(MalformedReason.MISSING_THOUGHT, lineno)
            events[-1].fold(line)
    return events


def _parse_action(ev: _Event) -> Action | MalformedError:
    m = _ACTION_BODY_RE.match(ev.payload)
    if not m:
        return MalformedError(MalformedReason.UNPARSEABLE_ACTION, ev.line)
    body = m.group(2).strip()
    if m.group(1) == "Question":
        if not body:
            return MalformedError(MalformedReason.EMPTY_FIELD, ev.line)
        return Ask(body)
    answers = [a.strip() for a in body.split(";")]
    if not body or any(not a for a in answers):
        return MalformedError(MalformedReason.EMPTY_FIELD, ev.line)
    return Finish(tuple(answers))


def parse_cot(text: str, require_finish: bool = True) -> CoTRecord | MalformedError:
    """Parse raw model output into a :class:`CoTRecord`.

    ``require_finish=True`` demands a terminal Finish action (collection
    construction and full generations); ``False`` accepts unfinished
    prefixes (mid-interaction state).  Never raises on malformed input;
    returns a :class:`MalformedError` locating the first offending line.
    """
    scanned = _scan(text)
    if isinstance(scanned, MalformedError):
        return scanned
    events = scanned
    end_line = len(text.splitlines()) + 1

    question = ""
    hint: tuple[str, ...] | None = None
    pos = 0
    if pos < len(events) and events[pos].kind == _Q:
        question = events[pos].payload
        pos += 1
    if pos < len(events) and events[pos].kind == _H:
        parts = [p.strip() for p in events[pos].payload.split(";")]
        if not events[pos].payload or any(not p for p in parts):
            return MalformedError(MalformedReason.EMPTY_FIELD, events[pos].line)
        hint = tuple(parts)
        pos += 1

    rounds: list[Round] = []
    while pos < len(events):
        ev = events[pos]
        k = len(rounds) + 1
        if ev.kind != _T:
            return MalformedError(MalformedReason.MISSING_THOUGHT, ev.line)
        if ev.index != k:
            return MalformedError(MalformedReason.BAD_INDEX_SEQUENCE, ev.line)
        if not ev.payload:
            return MalformedError(MalformedReason.EMPTY_FIELD, ev.line)
        thought = ev.payload
        pos += 1

        if pos >= len(events):
            return MalformedError(MalformedReason.MISSING_ACTION, end_line)
        ev = events[pos]
        if ev.kind != _A:
            return MalformedError(MalformedReason.MISSING_ACTION, ev.line)
        if ev.index != k:
            return MalformedError(MalformedReason.BAD_INDEX_SEQUENCE, ev.line)
        action = _parse_action(ev)
        if isinstance(action, MalformedError):
            return action
        pos += 1

        observation: str | None = None
        if pos < len(events) and events[pos].kind == _O:
            ev = events[pos]
            if isinstance(action, Finish) or ev.index != k:
                return MalformedError(MalformedReason.BAD_INDEX_SEQUENCE, ev.line)
            if not ev.payload:
                return MalformedError(MalformedReason.EMPTY_FIELD, ev.line)
            observation = ev.payload
            pos += 1

        rounds.append(Round(k, thought, action, observation))
        if isinstance(action, Finish) and pos < len(events):
            return MalformedError(MalformedReason.BAD_INDEX_SEQUENCE, events[pos].line)

    if not rounds:
        line = events[-1].line + 1 if events else 1
        return MalformedError(MalformedReason.MISSING_THOUGHT, line)
    if require_finish and not isinstance(rounds[-1].action, Finish):
        return MalformedError(MalformedReason.NO_FINISH, events[-1].line)
    return CoTRecord(question=question, hint=hint, rounds=tuple(rounds))


def serialize_cot(record: CoTRecord, include_hint: bool = False) -> str:
    """Render a record back to wire text.  Inverse of :func:`parse_cot` for
    invariant-satisfying records; the hint line is emitted only on request
    (construction prompts carry it, inference demonstrations do not)."""
    lines: list[str] = []
    if record.question:
        lines.append(f"Question: {record.question}")
    if include_hint and record.hint:
        lines.append("Hint: " + "; ".join(record.hint))
    for rnd in record.rounds:
        lines.append(f"Thought {rnd.index}: {rnd.thought}")
        if isinstance(rnd.action, Ask):
            lines.append(f"Action {rnd.index}: Question[{rnd.action.question}]")
        else:
            lines.append(f"Action {rnd.index}: Finish[" + "; ".join(rnd.action.answers) + "]")
        if rnd.observation is not None:
            lines.append(f"Observation {rnd.index}: {rnd.observation}")
    return "\n".join(lines)


def pending_subquestion(
    record: CoTRecord, verified: frozenset[int] | set[int] = frozenset()
) -> tuple[int, str] | None:
    """Earliest Ask round not yet marked verified, as (index, question).

    Returns None when every Ask round is verified or none exists.  Finish
    rounds are never eligible: only sub-questions leading up to the final
    action get checked against external knowledge.
    """
    for rnd in record.rounds:
        if isinstance(rnd.action, Ask) and rnd.index not in verified:
            return rnd.index, rnd.action.question
    return None


def truncate_after(record: CoTRecord, index: int) -> CoTRecord:
    """Copy of ``record`` keeping rounds 1..index (for regeneration after a
    sub-answer correction).  Raises on an out-of-range index."""
    if not 1 <= index <= len(record.rounds):
        raise ValueError(f"round index {index} out of range 1..{len(record.rounds)}")
    return replace(record, rounds=record.rounds[:index])
