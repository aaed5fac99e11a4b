"""External QA pipeline: retrieve-then-read plus answer verification.

A sub-question goes to the configured retrieval backend (lexical, dense,
or a reciprocal-rank-fusion hybrid), each retrieved passage is fused with
the question into one reader segment, and the reader endpoint proposes a
candidate answer.  The verifier endpoint then arbitrates between the
model's original sub-answer and the candidate, or emits a new answer of
its own.  This module never touches the rationale itself; it only returns
answers for the interaction engine to apply.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .clients import EndpointError
from .corpus import Passage, PassageStore
from .metrics import normalize
from .retrieval import BM25Index, DenseVectors, RankedList, bm25_search, dense_search

RRF_CONSTANT = 60.0

VERIFIER_TEMPLATE = (
    "Question: {question}\n"
    "Answer A: {original}\n"
    "Answer B: {candidate}\n"
    "Which answer is correct? Reply 'A', 'B', or give the correct answer."
)

# used when the retrieve-then-read side is ablated away and there is no
# candidate to offer
VERIFIER_TEMPLATE_NO_CANDIDATE = (
    "Question: {question}\n"
    "Answer A: {original}\n"
    "Is this answer correct? Reply 'A' to keep it, or give the correct answer."
)


@dataclass(frozen=True)
class CandidateAnswer:
    text: str
    supporting_passages: tuple[str, ...]
    reader_raw: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "supporting_passages", tuple(self.supporting_passages))


class VerdictChoice(str, Enum):
    KEEP_ORIGINAL = "keep_original"
    USE_CANDIDATE = "use_candidate"
    NEW_ANSWER = "new_answer"


@dataclass(frozen=True)
class Verdict:
    choice: VerdictChoice
    final_text: str


@dataclass(frozen=True)
class FiDInput:
    """Per-passage reader segments; each passage is encoded with the
    question separately, fusion happens inside the reader model."""

    segments: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))


def assemble_fid_inputs(question: str, passages: Sequence[Passage]) -> FiDInput:
    if not passages:
        raise ValueError("reader input needs at least one passage")
    return FiDInput(
        tuple(f"question: {question} title: {p.title} context: {p.body}" for p in passages)
    )


class RetrievalBackendKind(str, Enum):
    BM25 = "bm25"
    DENSE = "dense"
    HYBRID = "hybrid"


class RetrievalBackend:
    """Configured search entry point; counts every search it serves."""

    def __init__(
        self,
        kind: RetrievalBackendKind,
        store: PassageStore,
        index: BM25Index | None = None,
        vectors: DenseVectors | None = None,
        query_embedder=None,
        rrf_k: float = RRF_CONSTANT,
    ):
        if kind in (RetrievalBackendKind.BM25, RetrievalBackendKind.HYBRID) and index is None:
            raise ValueError(f"{kind.value} retrieval needs a BM25 index")
        if kind in (RetrievalBackendKind.DENSE, RetrievalBackendKind.HYBRID):
            if vectors is None or query_embedder is None:
                raise ValueError(f"{kind.value} retrieval needs passage vectors and a query embedder")
        self.kind = kind
        self.store = store
        self.index = index
        self.vectors = vectors
        self.query_embedder = query_embedder
        self.rrf_k = rrf_k
        self.search_count = 0

    def _dense(self, query: str, n: int) -> RankedList:
        [query_vector] = self.query_embedder.embed([query])
        return dense_search(self.vectors, query_vector, n)

    def search(self, query: str, n: int) -> RankedList:
        self.search_count += 1
        if self.kind is RetrievalBackendKind.BM25:
            return bm25_search(self.index, query, n)
        if self.kind is RetrievalBackendKind.DENSE:
            return self._dense(query, n)
        lexical = bm25_search(self.index, query, n)
        dense = self._dense(query, n)
        fused: dict[str, float] = {}
        for ranking in (lexical, dense):
            for rank, (pid, _score) in enumerate(ranking, 1):
                fused[pid] = fused.get(pid, 0.0) + 1.0 / (self.rrf_k + rank)
        ordered = sorted(fused.items(), key=lambda kv: (-kv[1], kv[0]))
        return RankedList(tuple(ordered[:n]))


def answer_subquestion(
    subq: str,
    retriever: RetrievalBackend,
    reader,
    n: int = 100,
) -> CandidateAnswer:
    """Retrieve top-n passages, send fused segments to the reader, and take
    its first output line as the candidate answer.  When retrieval comes
    back empty the reader sees a single bare-question segment."""
    ranked = retriever.search(subq, n)
    passage_ids = ranked.ids()
    if passage_ids:
        passages = [retriever.store.get(pid) for pid in passage_ids]
        prompt = "\n\n".join(assemble_fid_inputs(subq, passages).segments)
    else:
        prompt = f"question: {subq} title: none context: none"
    raw = reader.chat(prompt)
    lines = raw.strip().splitlines()
    text = lines[0].strip() if lines else ""
    return CandidateAnswer(text, passage_ids, raw)


def verify(subq: str, original: str, candidate: CandidateAnswer, verifier) -> Verdict:
    """Arbitrate between the original sub-answer and the candidate.

    The verifier sees both answers in fixed order (original first) and may
    reply 'A', 'B', or produce a new answer.  Equal answers short-circuit
    without a call; endpoint failures conservatively keep the original.
    """
    if normalize(original) == normalize(candidate.text):
        return Verdict(VerdictChoice.KEEP_ORIGINAL, original)
    if candidate.text:
        prompt = VERIFIER_TEMPLATE.format(question=subq, original=original, candidate=candidate.text)
    else:
        prompt = VERIFIER_TEMPLATE_NO_CANDIDATE.format(question=subq, original=original)
    try:
        response = verifier.chat(prompt)
    except EndpointError:
        return Verdict(VerdictChoice.KEEP_ORIGINAL, original)
    reply = response.strip()
    if not reply:
        return Verdict(VerdictChoice.KEEP_ORIGINAL, original)
    if reply.lower() == "a":
        return Verdict(VerdictChoice.KEEP_ORIGINAL, original)
    if reply.lower() == "b":
        return Verdict(VerdictChoice.USE_CANDIDATE, candidate.text)
    return Verdict(VerdictChoice.NEW_ANSWER, reply)
