"""Building the passage store and searching it: KB linearization, text
ingestion, BM25, dense scoring, and the Hit@N / Recall@N measures.

Run:  python demos/04_corpus_and_retrieval.py
"""

import numpy as np

from verichain import (
    DenseVectors,
    PassageStore,
    Triple,
    bm25_search,
    build_index,
    dense_search,
    hit_at_n,
    ingest_text,
    linearize_subgraph,
    recall_at_n,
)

print("== KB triples become plain-text passages ==")
triples = [
    Triple("music recording", "releases", "Palavras de Guerra Ao Vivo"),
    Triple("music recording", "artist", "Olívia Hime"),
]
[kb_passage] = linearize_subgraph("music recording", triples)
print(f"  id={kb_passage.id!r}")
print(f"  body={kb_passage.body!r}")

print("\n== long documents chunk on word boundaries ==")
doc_body = " ".join(f"word{i}" for i in range(230))
chunks = ingest_text([("long article", doc_body)], chunk_words=100)
print(f"  {len(chunks)} chunks of sizes {[len(c.body.split()) for c in chunks]}")

print("\n== one store, both sources, one BM25 index ==")
wiki = ingest_text(
    [
        ("Olívia Hime", "Olívia Hime is a Brazilian singer and composer from Rio de Janeiro."),
        ("Palavras de Guerra", "Palavras de Guerra Ao Vivo is a live album recorded in 1995."),
        ("Unrelated", "Grain exports rose sharply last year according to the report."),
    ]
)
store = PassageStore([kb_passage] + wiki)
index = build_index(store)
query = "who is the artist of Palavras de Guerra Ao Vivo?"
ranked = bm25_search(index, query, 3)
print(f"  query: {query}")
for pid, score in ranked:
    print(f"    {score:7.3f}  {pid}")

print("\n== answer coverage of the top-N passages ==")
answers = ["Olivia Hime", "1995"]
for n in (1, 2, 3):
    print(
        f"  n={n}: hit={hit_at_n(ranked, store, answers, n)} "
        f"recall={recall_at_n(ranked, store, answers, n):.2f}"
    )

print("\n== dense scoring over externally supplied unit vectors ==")
rng = np.random.default_rng(0)


def unit(v):
    return v / np.linalg.norm(v)


vectors = DenseVectors({p.id: unit(rng.standard_normal(8)) for p in store})
probe = unit(rng.standard_normal(8))
for pid, score in dense_search(vectors, probe, 3):
    print(f"    {score:+.3f}  {pid}")
