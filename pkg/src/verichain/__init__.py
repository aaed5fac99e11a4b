"""verichain: structured chain-of-thought QA with retrieval-backed
verification of intermediate answers.

The library covers the full pipeline: a strict multi-round rationale
format, demonstration selection and prompt assembly, iterative collection
construction, KB linearization and BM25/dense retrieval, hard-negative
mining for retriever training, the interactive verify-and-regenerate loop,
and the evaluation metrics.  Model endpoints are pluggable (any
OpenAI-compatible service, or deterministic scripted mocks).
"""

from .clients import (
    EndpointError,
    EndpointKind,
    EndpointSpec,
    MatchKind,
    MockChatClient,
    MockEmbedClient,
    MockRule,
    MockScript,
    OpenAIChatClient,
    OpenAIEmbedClient,
    ProtocolError,
    ResponseCache,
)
from .collection import BuildReport, TrainItem, answer_match, build_collection
from .corpus import (
    Passage,
    PassageSource,
    PassageStore,
    Triple,
    build_kb_passages,
    ingest_text,
    linearize_subgraph,
)
from .cot import (
    Ask,
    CoTRecord,
    Finish,
    MalformedError,
    MalformedReason,
    Round,
    parse_cot,
    pending_subquestion,
    serialize_cot,
    truncate_after,
)
from .interaction import (
    Ablation,
    InteractionConfig,
    InteractionTrace,
    IterationRecord,
    TraceStatus,
    answer_source_tally,
    correctness_transitions,
    run_interaction,
    run_vanilla,
)
from .metrics import MetricsReport, Prediction, aggregate, f1, hits_at_1, normalize
from .mining import MinedExample, MiningRule, augment_query, default_recognizer, mine_examples
from .prompts import (
    BaselineMode,
    Demonstration,
    DemoSource,
    Pool,
    assemble_baseline_prompt,
    assemble_construction_prompt,
    assemble_inference_prompt,
    select_top1,
)
from .qa import (
    CandidateAnswer,
    FiDInput,
    RetrievalBackend,
    RetrievalBackendKind,
    Verdict,
    VerdictChoice,
    answer_subquestion,
    assemble_fid_inputs,
    verify,
)
from .retrieval import (
    BM25Index,
    DenseVectors,
    RankedList,
    bm25_search,
    build_index,
    dense_search,
    hit_at_n,
    recall_at_n,
    tokenize,
)

__version__ = "0.1.0"
