"""Lexical and dense retrieval over the passage store.

BM25 is the Okapi variant with ``idf = ln(1 + (N - df + 0.5)/(df + 0.5))``
and defaults k1=0.9, b=0.4 (the usual open-domain QA setting).
Tokenization is lowercase unicode alphanumeric runs, no stemming and no
stopword removal, so scores are an exact function of the stored text.
Dense scoring is an exhaustive inner product over externally supplied
unit-norm vectors; the encoder lives behind the embedding endpoint,
never here.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._util import atomic_write_text, read_jsonl, write_jsonl
from .corpus import PassageStore
from .metrics import contains_answer, normalize

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

INDEX_FORMAT = "bm25-index"
INDEX_VERSION = 1


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class RankedList:
    """(passage id, score) entries sorted by score descending, ties by
    ascending id; ids are unique."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple((str(i), float(s)) for i, s in self.entries))
        ids = [i for i, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("ranked list must not repeat passage ids")
        for (id_a, score_a), (id_b, score_b) in zip(self.entries, self.entries[1:]):
            if score_a < score_b or (score_a == score_b and id_a >= id_b):
                raise ValueError("ranked list must sort by score desc, ties by ascending id")

    def ids(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _ranked(scores: Mapping[str, float], n: int) -> RankedList:
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return RankedList(tuple(ordered[:n]))


@dataclass
class BM25Index:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    avg_doc_length: float
    n_docs: int
    k1: float
    b: float

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


def build_index(store: PassageStore, k1: float = 0.9, b: float = 0.4) -> BM25Index:
    if len(store) == 0:
        raise ValueError("cannot index an empty passage store")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for passage in store:
        tokens = tokenize(passage.body)
        doc_lengths[passage.id] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((passage.id, tf))
    avg = sum(doc_lengths.values()) / len(doc_lengths)
    return BM25Index(postings, doc_lengths, avg, len(doc_lengths), k1, b)


def bm25_search(index: BM25Index, query: str, n: int) -> RankedList:
    """Top-n passages by Okapi BM25; zero-score passages are excluded, so
    the result may be shorter than n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    scores: dict[str, float] = {}
    for term in tokenize(query):
        posting = index.postings.get(term)
        if not posting:
            continue
        idf = index.idf(term)
        for pid, tf in posting:
            dl = index.doc_lengths[pid]
            denom = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avg_doc_length)
            scores[pid] = scores.get(pid, 0.0) + idf * tf * (index.k1 + 1.0) / denom
    return _ranked({pid: s for pid, s in scores.items() if s > 0.0}, n)


class DenseVectors:
    """Unit-norm passage vectors of one dimension, keyed by passage id."""

    def __init__(self, vectors: Mapping[str, Sequence[float] | np.ndarray]):
        if not vectors:
            raise ValueError("dense vector set must be non-empty")
        self._ids = tuple(vectors)
        matrix = np.asarray([np.asarray(vectors[i], dtype=np.float64) for i in self._ids])
        if matrix.ndim != 2:
            raise ValueError("all vectors must share one dimension")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("all vectors must be unit-norm")
        self._matrix = matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    def ids(self) -> tuple[str, ...]:
        return self._ids

    def __len__(self) -> int:
        return len(self._ids)

    def __getitem__(self, passage_id: str) -> np.ndarray:
        return self._matrix[self._ids.index(passage_id)]


def dense_search(vectors: DenseVectors, query_vector: Sequence[float] | np.ndarray, n: int) -> RankedList:
    """Top-n passages by inner product (exhaustive).  Unlike BM25, zero
    scores are kept: the dot product is a total relevance order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    query = np.asarray(query_vector, dtype=np.float64)
    if query.shape != (vectors.dim,):
        raise ValueError(f"query dimension {query.shape} does not match vectors ({vectors.dim})")
    scores = vectors._matrix @ query
    return _ranked({pid: float(s) for pid, s in zip(vectors.ids(), scores)}, n)


def hit_at_n(results: RankedList, store: PassageStore, answers: Sequence[str], n: int) -> bool:
    """True iff any top-n passage body contains any normalized answer."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return any(contains_answer(store.get(pid).body, answers) for pid, _ in results.entries[:n])


def recall_at_n(results: RankedList, store: PassageStore, answers: Sequence[str], n: int) -> float:
    """Fraction of distinct gold answers contained in the union of the
    top-n passage bodies."""
    if not answers:
        raise ValueError("answers must be non-empty")
    if n < 1:
        raise ValueError("n must be >= 1")
    needles = {normalize(a) for a in answers} - {""}
    if not needles:
        raise ValueError("answers normalize to nothing")
    bodies = [normalize(store.get(pid).body) for pid, _ in results.entries[:n]]
    covered = sum(1 for needle in needles if any(needle in body for body in bodies))
    return covered / len(needles)


# ---------------------------------------------------------------------------
# persistence


def save_index(index: BM25Index, path: str | Path) -> None:
    payload = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "k1": index.k1,
        "b": index.b,
        "n_docs": index.n_docs,
        "avg_doc_length": index.avg_doc_length,
        "doc_lengths": index.doc_lengths,
        "postings": {t: [[pid, tf] for pid, tf in p] for t, p in index.postings.items()},
    }
    atomic_write_text(path, json.dumps(payload, ensure_ascii=False, sort_keys=True))


def load_index(path: str | Path) -> BM25Index:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != INDEX_FORMAT or payload.get("version") != INDEX_VERSION:
        raise ValueError(f"{path}: not a {INDEX_FORMAT} v{INDEX_VERSION} file")
    postings = {t: [(pid, int(tf)) for pid, tf in p] for t, p in payload["postings"].items()}
    return BM25Index(
        postings,
        {k: int(v) for k, v in payload["doc_lengths"].items()},
        float(payload["avg_doc_length"]),
        int(payload["n_docs"]),
        float(payload["k1"]),
        float(payload["b"]),
    )


def save_vectors(vectors: DenseVectors, path: str | Path) -> None:
    write_jsonl(
        path,
        ({"id": pid, "vector": [float(x) for x in vectors[pid]]} for pid in vectors.ids()),
    )


def load_vectors(path: str | Path) -> DenseVectors:
    return DenseVectors({str(row["id"]): row["vector"] for row in read_jsonl(path)})
