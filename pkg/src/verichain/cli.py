"""Command-line pipelines.

    verichain ingest-corpus   triples TSV + documents JSONL -> passage store
    verichain index           passage store -> BM25 index file
    verichain retrieve        ad-hoc query against the configured backend
    verichain build-collection  grow the demonstration collection
    verichain mine-dpr-data   emit retriever training JSONL
    verichain run             interactive / vanilla / baseline batch runs
    verichain eval            predictions + gold -> metrics report
    verichain stats           trace files -> transition and source tables

Every command takes ``--config manifest.json`` plus optional ``--set
dotted.key=value`` overrides.  Exit codes: 0 success, 1 validation error,
2 endpoint failure, 3 partial completion (some traces failed).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import collection as collection_mod
from . import corpus as corpus_mod
from . import interaction as interaction_mod
from . import metrics as metrics_mod
from . import mining as mining_mod
from . import prompts as prompts_mod
from . import retrieval as retrieval_mod
from ._util import atomic_write_text, dump_json, read_jsonl
from .clients import EndpointError, ResponseCache
from .config import (
    ConfigError,
    RunConfig,
    build_chat_client,
    build_embed_client,
    load_config,
    require_outputs,
    require_paths,
)
from .cot import CoTRecord
from .interaction import Ablation, TraceStatus
from .qa import RetrievalBackend, RetrievalBackendKind


def _cache(cfg: RunConfig) -> ResponseCache:
    root = cfg.paths.cache_dir or os.environ.get("VERICHAIN_CACHE_DIR")
    return ResponseCache(root)


def _load_store_and_index(cfg: RunConfig):
    require_paths(cfg, ["passages", "index"])
    store = corpus_mod.load_store_tsv(cfg.paths.passages)
    index = retrieval_mod.load_index(cfg.paths.index)
    return store, index


def _build_backend(cfg: RunConfig, cache: ResponseCache) -> RetrievalBackend:
    kind = RetrievalBackendKind(cfg.retrieval.backend)
    require_paths(cfg, ["passages"])
    store = corpus_mod.load_store_tsv(cfg.paths.passages)
    index = vectors = embedder = None
    if kind in (RetrievalBackendKind.BM25, RetrievalBackendKind.HYBRID):
        require_paths(cfg, ["index"])
        index = retrieval_mod.load_index(cfg.paths.index)
    if kind in (RetrievalBackendKind.DENSE, RetrievalBackendKind.HYBRID):
        require_paths(cfg, ["vectors"])
        vectors = retrieval_mod.load_vectors(cfg.paths.vectors)
        embedder = build_embed_client(cfg.endpoints.embed, cache, "embed")
    return RetrievalBackend(kind, store, index, vectors, embedder, cfg.retrieval.rrf_k)


def _read_questions(cfg: RunConfig) -> list[dict]:
    require_paths(cfg, ["questions"])
    rows = list(read_jsonl(cfg.paths.questions))
    for row in rows:
        if "id" not in row or "question" not in row:
            raise ConfigError(f"paths.questions: rows need id and question fields")
    return rows


# ---------------------------------------------------------------------------
# commands


def cmd_ingest_corpus(cfg: RunConfig, args) -> int:
    require_outputs(cfg, ["passages"])
    passages = []
    if cfg.paths.triples:
        require_paths(cfg, ["triples"])
        triples = corpus_mod.read_triples_tsv(cfg.paths.triples)
        passages.extend(corpus_mod.build_kb_passages(triples, cfg.retrieval.chunk_words))
    if cfg.paths.documents:
        require_paths(cfg, ["documents"])
        documents = corpus_mod.read_documents_jsonl(cfg.paths.documents)
        passages.extend(corpus_mod.ingest_text(documents, cfg.retrieval.chunk_words))
    if not passages:
        raise ConfigError("ingest-corpus needs paths.triples and/or paths.documents")
    store = corpus_mod.PassageStore(passages)
    corpus_mod.save_store_tsv(store, cfg.paths.passages)
    print(f"wrote {len(store)} passages to {cfg.paths.passages}")
    return 0


def cmd_index(cfg: RunConfig, args) -> int:
    require_paths(cfg, ["passages"])
    require_outputs(cfg, ["index"])
    store = corpus_mod.load_store_tsv(cfg.paths.passages)
    index = retrieval_mod.build_index(store, cfg.retrieval.k1, cfg.retrieval.b)
    retrieval_mod.save_index(index, cfg.paths.index)
    print(f"indexed {index.n_docs} passages ({len(index.postings)} terms) to {cfg.paths.index}")
    return 0


def cmd_retrieve(cfg: RunConfig, args) -> int:
    cache = _cache(cfg)
    backend = _build_backend(cfg, cache)
    ranked = backend.search(args.query, args.n)
    out = [
        {"id": pid, "score": score, "title": backend.store.get(pid).title}
        for pid, score in ranked
    ]
    print(json.dumps(out, ensure_ascii=False, indent=2))
    return 0


def cmd_build_collection(cfg: RunConfig, args) -> int:
    require_paths(cfg, ["train", "anchors"])
    require_outputs(cfg, ["collection", "report"])
    cache = _cache(cfg)
    train = collection_mod.read_train_items(cfg.paths.train)
    anchors = list(prompts_mod.load_pool(cfg.paths.anchors))
    chat = build_chat_client(cfg.endpoints.llm, cache, "llm")
    embed = build_embed_client(cfg.endpoints.embed, cache, "embed")
    pool, report = collection_mod.build_collection(
        train, anchors, chat, embed,
        instruction=cfg.instruction,
        max_iterations=cfg.collection.max_iterations,
    )
    prompts_mod.save_pool(pool, cfg.paths.collection)
    collection_mod.write_build_report(cfg.paths.report, report)
    print(
        f"collection: {len(pool)} demonstrations "
        f"(admitted per iteration {list(report.admitted_per_iteration)}, "
        f"{len(report.unresolved)} unresolved)"
    )
    return 0


def cmd_mine_dpr_data(cfg: RunConfig, args) -> int:
    require_paths(cfg, ["train", "pool"])
    require_outputs(cfg, ["mined"])
    store, index = _load_store_and_index(cfg)
    train = collection_mod.read_train_items(cfg.paths.train)
    pool = prompts_mod.load_pool(cfg.paths.pool)
    cot_by_question: dict[str, CoTRecord] = {d.record.question: d.record for d in pool}
    pairs = []
    for item in train:
        cot = cot_by_question.get(item.question)
        example = mining_mod.mine_examples(item, cot, index, store,
                                           top_n=cfg.retrieval.n_passages)
        pairs.append((item, example))
    mining_mod.write_dpr_examples(pairs, store, cfg.paths.mined)
    n_fallback = sum(1 for _, e in pairs if e.rule is mining_mod.MiningRule.ANSWER_ONLY_FALLBACK)
    print(f"mined {len(pairs)} examples to {cfg.paths.mined} ({n_fallback} via answer-only fallback)")
    return 0


def _prediction_from_trace(trace: interaction_mod.InteractionTrace) -> metrics_mod.Prediction:
    malformed = trace.status is TraceStatus.MALFORMED_FAILURE
    return metrics_mod.Prediction(
        trace.question_id, () if malformed else trace.final_answers, malformed
    )


def _run_interactive(cfg: RunConfig, rows: list[dict], cache: ResponseCache, vanilla: bool) -> int:
    require_paths(cfg, ["pool"])
    require_outputs(cfg, ["traces", "predictions"])
    pool = prompts_mod.load_pool(cfg.paths.pool)
    llm = build_chat_client(cfg.endpoints.llm, cache, "llm")
    embed = build_embed_client(cfg.endpoints.embed, cache, "embed")
    loop_cfg = cfg.interaction_config()

    if vanilla:
        def one(row: dict) -> interaction_mod.InteractionTrace:
            return interaction_mod.run_vanilla(
                str(row["question"]), pool, llm, embed, loop_cfg,
                instruction=cfg.instruction, question_id=str(row["id"]),
            )
    else:
        retriever = None
        reader = verifier = None
        if loop_cfg.ablation is not Ablation.NO_RETRIEVE_THEN_READ:
            retriever = _build_backend(cfg, cache)
            reader = build_chat_client(cfg.endpoints.reader, cache, "reader")
        if loop_cfg.ablation is not Ablation.NO_VERIFIER:
            verifier = build_chat_client(cfg.endpoints.verifier, cache, "verifier")

        def one(row: dict) -> interaction_mod.InteractionTrace:
            return interaction_mod.run_interaction(
                str(row["question"]), pool, llm, embed, retriever, reader, verifier,
                loop_cfg, instruction=cfg.instruction,
                n_passages=cfg.retrieval.n_passages, question_id=str(row["id"]),
            )

    workers = max(1, cfg.interaction.parallel)
    if workers == 1:
        traces = [one(row) for row in rows]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            traces = list(pool_exec.map(one, rows))

    interaction_mod.save_traces(traces, cfg.paths.traces)
    metrics_mod.write_predictions(cfg.paths.predictions,
                                  [_prediction_from_trace(t) for t in traces])
    n_failed = sum(1 for t in traces if t.status is TraceStatus.MALFORMED_FAILURE)
    print(f"ran {len(traces)} questions -> {cfg.paths.traces} ({n_failed} failed)")
    return 3 if n_failed else 0


def _select_qa_pairs(embed, question: str,
                     pairs: list[tuple[str, str]]) -> list[tuple[str, str]]:
    vectors = embed.embed([q for q, _ in pairs])
    [query] = embed.embed([question])
    scores = np.asarray(vectors) @ np.asarray(query)
    order = sorted(range(len(pairs)), key=lambda i: (-scores[i], i))[:4]
    return [pairs[i] for i in order]


def _run_baseline(cfg: RunConfig, rows: list[dict], cache: ResponseCache) -> int:
    require_outputs(cfg, ["predictions"])
    llm = build_chat_client(cfg.endpoints.llm, cache, "llm")
    mode = prompts_mod.BaselineMode(cfg.mode)

    if mode is prompts_mod.BaselineMode.QA_PAIRS_4_SHOT:
        if not cfg.baseline.qa_pairs or not Path(cfg.baseline.qa_pairs).exists():
            raise ConfigError("baseline.qa_pairs: required for the qa-pairs-4-shot mode")
        pairs = [(str(r["question"]), str(r["answer"])) for r in read_jsonl(cfg.baseline.qa_pairs)]
        if len(pairs) < 4:
            raise ConfigError("baseline.qa_pairs: need at least 4 pairs")
        embed = build_embed_client(cfg.endpoints.embed, cache, "embed")
    elif mode is prompts_mod.BaselineMode.COT_FIXED:
        if not cfg.baseline.rationale or not Path(cfg.baseline.rationale).exists():
            raise ConfigError("baseline.rationale: required for the cot-fixed mode")
        rationale = Path(cfg.baseline.rationale).read_text(encoding="utf-8").strip()
    else:
        backend = _build_backend(cfg, cache)

    predictions = []
    for row in rows:
        question = str(row["question"])
        if mode is prompts_mod.BaselineMode.RETRIEVAL_4_PASSAGES:
            ranked = backend.search(question, 4)
            passages = [backend.store.get(pid) for pid, _ in ranked]
            if len(passages) != 4:
                raise ConfigError(
                    f"retrieval returned {len(passages)} passages for {question!r}; "
                    "the 4-passage baseline needs a denser corpus"
                )
            prompt = prompts_mod.assemble_baseline_prompt(mode, passages, question)
        elif mode is prompts_mod.BaselineMode.QA_PAIRS_4_SHOT:
            chosen = _select_qa_pairs(embed, question, pairs)
            prompt = prompts_mod.assemble_baseline_prompt(mode, chosen, question)
        else:
            prompt = prompts_mod.assemble_baseline_prompt(mode, rationale, question)
        answer = llm.chat(prompt).strip()
        predictions.append(metrics_mod.Prediction(str(row["id"]), (answer,) if answer else (),
                                                  malformed=not answer))
    metrics_mod.write_predictions(cfg.paths.predictions, predictions)
    print(f"ran {len(predictions)} questions -> {cfg.paths.predictions}")
    return 0


def cmd_run(cfg: RunConfig, args) -> int:
    rows = _read_questions(cfg)
    cache = _cache(cfg)
    if cfg.mode == "interactive":
        return _run_interactive(cfg, rows, cache, vanilla=False)
    if cfg.mode == "vanilla-cot":
        return _run_interactive(cfg, rows, cache, vanilla=True)
    return _run_baseline(cfg, rows, cache)


def cmd_eval(cfg: RunConfig, args) -> int:
    require_paths(cfg, ["predictions", "questions"])
    require_outputs(cfg, ["metrics"])
    predictions = metrics_mod.read_predictions(cfg.paths.predictions)
    gold = metrics_mod.read_gold(cfg.paths.questions)
    try:
        report = metrics_mod.aggregate(predictions, gold)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    metrics_mod.write_report(cfg.paths.metrics, report)
    print(f"hits@1     {report.hits_at_1:.4f}")
    print(f"f1_macro   {report.f1_macro:.4f}")
    print(f"questions  {report.n_questions} ({report.n_malformed} malformed)")
    return 0


def cmd_stats(cfg: RunConfig, args) -> int:
    require_paths(cfg, ["traces", "questions"])
    traces = interaction_mod.load_traces(cfg.paths.traces)
    gold_rows = list(read_jsonl(cfg.paths.questions))
    gold = {str(r["question"]): [str(a) for a in r["answers"]] for r in gold_rows}
    try:
        transitions = interaction_mod.correctness_transitions(traces, gold)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sources = interaction_mod.answer_source_tally(traces, per_iteration=True)

    payload = {
        "transitions": {
            "corrected": transitions.corrected,
            "broken": transitions.broken,
            "kept_correct": transitions.kept_correct,
            "kept_incorrect": transitions.kept_incorrect,
        },
        "answer_sources": {
            str(it): {
                "kept_by_verifier": c.kept_by_verifier,
                "replaced_by_qa": c.replaced_by_qa,
                "new_by_verifier": c.new_by_verifier,
            }
            for it, c in sources.items()
        },
    }
    if cfg.paths.stats:
        atomic_write_text(cfg.paths.stats, dump_json(payload) + "\n")

    print("transitions:")
    for name in ("corrected", "broken", "kept_correct", "kept_incorrect"):
        print(f"  {name:<15} {payload['transitions'][name]:>6}")
    print("answer sources by iteration:")
    print(f"  {'iter':>4}  {'kept_by_verifier':>16}  {'replaced_by_qa':>14}  {'new_by_verifier':>15}")
    for it, c in sources.items():
        print(f"  {it:>4}  {c.kept_by_verifier:>16}  {c.replaced_by_qa:>14}  {c.new_by_verifier:>15}")
    return 0


# ---------------------------------------------------------------------------


_COMMANDS = {
    "ingest-corpus": cmd_ingest_corpus,
    "index": cmd_index,
    "retrieve": cmd_retrieve,
    "build-collection": cmd_build_collection,
    "mine-dpr-data": cmd_mine_dpr_data,
    "run": cmd_run,
    "eval": cmd_eval,
    "stats": cmd_stats,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verichain", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run manifest")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config field (dotted path)")
        if name == "retrieve":
            p.add_argument("--query", required=True)
            p.add_argument("--n", type=int, default=10)
        if name == "run":
            p.add_argument("--mode", default=None, help="override config mode")
            p.add_argument("--seed", type=int, default=None, help="override config seed")
            p.add_argument("--parallel", type=int, default=None)
            p.add_argument("--output", default=None, help="override paths.traces")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        overrides = list(args.overrides)
        if getattr(args, "mode", None):
            overrides.append(f"mode={args.mode}")
        if getattr(args, "seed", None) is not None:
            overrides.append(f"seed={args.seed}")
        if getattr(args, "parallel", None) is not None:
            overrides.append(f"interaction.parallel={args.parallel}")
        if getattr(args, "output", None):
            overrides.append(f"paths.traces={args.output}")
        cfg = load_config(args.config, overrides)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except EndpointError as exc:
        print(f"endpoint error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
