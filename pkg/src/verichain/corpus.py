"""Passage store construction: KB triple linearization plus text ingestion.

KB facts become retrievable text by rendering each (head, relation, tail)
triple as ``head relation tail.`` and joining a head entity's 1-hop group
with single spaces into one passage.  Long groups split on triple
boundaries; plain documents split on word boundaries.  Both sources merge
into one store so a single retriever can search structured and
unstructured knowledge together.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from ._util import read_jsonl

DEFAULT_CHUNK_WORDS = 100


class PassageSource(str, Enum):
    KB = "kb"
    TEXT = "text"


@dataclass(frozen=True)
class Triple:
    head: str
    relation: str
    tail: str

    def __post_init__(self) -> None:
        if not (self.head.strip() and self.relation.strip() and self.tail.strip()):
            raise ValueError("triple fields must all be non-empty")

    def rendition(self) -> str:
        return f"{self.head} {self.relation} {self.tail}."


@dataclass(frozen=True)
class Passage:
    id: str
    title: str
    body: str
    source: PassageSource

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("passage id must be non-empty")
        if not self.body:
            raise ValueError("passage body must be non-empty")


class PassageStore:
    """Immutable id-keyed passage collection, insertion-ordered."""

    def __init__(self, passages: Iterable[Passage] = ()):
        self._by_id: dict[str, Passage] = {}
        for p in passages:
            if p.id in self._by_id:
                raise ValueError(f"duplicate passage id {p.id!r}")
            self._by_id[p.id] = p

    def get(self, passage_id: str) -> Passage:
        return self._by_id[passage_id]

    def ids(self) -> tuple[str, ...]:
        return tuple(self._by_id)

    def __contains__(self, passage_id: str) -> bool:
        return passage_id in self._by_id

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[Passage]:
        return iter(self._by_id.values())


def linearize_subgraph(
    head: str, triples: Sequence[Triple], chunk_words: int = DEFAULT_CHUNK_WORDS
) -> list[Passage]:
    """Render one head entity's triples into KB passages.

    Every rendition lands in exactly one passage and triple order is kept,
    so concatenating a head's chunks recovers the full linearization.  Ids
    are the head entity, suffixed ``#k`` only when the text splits.
    """
    for t in triples:
        if t.head != head:
            raise ValueError(f"triple head {t.head!r} does not match subgraph head {head!r}")
    if not triples:
        return []
    chunks: list[list[str]] = [[]]
    words_used = 0
    for t in triples:
        rendition = t.rendition()
        n_words = len(rendition.split())
        if chunks[-1] and words_used + n_words > chunk_words:
            chunks.append([])
            words_used = 0
        chunks[-1].append(rendition)
        words_used += n_words
    if len(chunks) == 1:
        return [Passage(head, head, " ".join(chunks[0]), PassageSource.KB)]
    return [
        Passage(f"{head}#{k}", head, " ".join(chunk), PassageSource.KB)
        for k, chunk in enumerate(chunks)
    ]


def ingest_text(
    documents: Iterable[tuple[str, str]], chunk_words: int = DEFAULT_CHUNK_WORDS
) -> list[Passage]:
    """Split (title, body) documents into word-bounded chunks with ids
    ``<title>#k``; whitespace is normalized to single spaces."""
    passages: list[Passage] = []
    for title, body in documents:
        words = body.split()
        for k in range(0, len(words), chunk_words):
            chunk = " ".join(words[k : k + chunk_words])
            passages.append(Passage(f"{title}#{k // chunk_words}", title, chunk, PassageSource.TEXT))
    return passages


def build_kb_passages(
    triples: Iterable[Triple], chunk_words: int = DEFAULT_CHUNK_WORDS
) -> list[Passage]:
    """Group triples by head entity (first-appearance order) and linearize
    each group."""
    groups: dict[str, list[Triple]] = {}
    for t in triples:
        groups.setdefault(t.head, []).append(t)
    passages: list[Passage] = []
    for head, group in groups.items():
        passages.extend(linearize_subgraph(head, group, chunk_words))
    return passages


# ---------------------------------------------------------------------------
# file formats: triples TSV (head, relation, tail); documents JSONL
# {title, text}; store TSV (id, title, body, source) with a header row


def read_triples_tsv(path: str | Path) -> list[Triple]:
    triples = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh, delimiter="\t"):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: expected 3 tab-separated fields, got {len(row)}")
            triples.append(Triple(row[0], row[1], row[2]))
    return triples


def read_documents_jsonl(path: str | Path) -> list[tuple[str, str]]:
    return [(str(row["title"]), str(row["text"])) for row in read_jsonl(path)]


def save_store_tsv(store: PassageStore, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["id", "title", "body", "source"])
        for p in store:
            writer.writerow([p.id, p.title, p.body, p.source.value])
    tmp.replace(path)


def load_store_tsv(path: str | Path) -> PassageStore:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header != ["id", "title", "body", "source"]:
            raise ValueError(f"{path}: not a passage store file (bad header)")
        return PassageStore(Passage(r[0], r[1], r[2], PassageSource(r[3])) for r in reader)
