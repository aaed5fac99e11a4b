import math
import random
import re
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from verichain.corpus import Passage, PassageSource, PassageStore
from verichain.retrieval import (
    DenseVectors,
    RankedList,
    bm25_search,
    build_index,
    dense_search,
    hit_at_n,
    load_index,
    load_vectors,
    recall_at_n,
    save_index,
    save_vectors,
)

VOCAB = (
    "apple banana cherry date elderberry fig grape honeydew kiwi lemon mango "
    "nectarine orange papaya quince raspberry strawberry tangerine ugli vanilla "
    "walnut ximenia yuzu zucchini"
).split()


def text_passage(pid, body):
    return Passage(pid, f"title-{pid}", body, PassageSource.TEXT)


def random_store(rng, n_passages, min_words=3, max_words=40, vocab=VOCAB):
    passages = []
    for i in range(n_passages):
        words = [rng.choice(vocab) for _ in range(rng.randint(min_words, max_words))]
        passages.append(text_passage(f"p{i:04d}", " ".join(words)))
    return PassageStore(passages)


def brute_force_bm25(store, query, k1, b, n):
    """Independent scorer: recounts everything from the raw text, no
    inverted index, document-at-a-time."""
    token_re = re.compile(r"[^\W_]+", re.UNICODE)
    docs = {p.id: token_re.findall(p.body.lower()) for p in store}
    n_docs = len(docs)
    avg_len = sum(len(t) for t in docs.values()) / n_docs
    df = Counter()
    for tokens in docs.values():
        df.update(set(tokens))
    query_tokens = token_re.findall(query.lower())
    scored = []
    for pid, tokens in docs.items():
        counts = Counter(tokens)
        score = 0.0
        for term in query_tokens:
            tf = counts.get(term, 0)
            if tf == 0:
                continue
            idf = math.log(1.0 + (n_docs - df[term] + 0.5) / (df[term] + 0.5))
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len(tokens) / avg_len))
        if score > 0.0:
            scored.append((pid, score))
    scored.sort(key=lambda kv: (-kv[1], kv[0]))
    return scored[:n]


def test_build_index_counts():
    store = PassageStore([text_passage("p0", "a b a")])
    index = build_index(store)
    assert index.doc_lengths == {"p0": 3}
    assert dict(index.postings["a"]) == {"p0": 2}
    assert dict(index.postings["b"]) == {"p0": 1}
    assert index.avg_doc_length == 3.0


def test_build_index_identical_passages():
    store = PassageStore([text_passage("p0", "x y"), text_passage("p1", "x y")])
    index = build_index(store)
    assert index.doc_lengths["p0"] == index.doc_lengths["p1"] == 2
    assert [pid for pid, _ in index.postings["x"]] == ["p0", "p1"]


def test_build_index_empty_store():
    with pytest.raises(ValueError):
        build_index(PassageStore())


def test_bm25_no_match_gives_empty():
    store = PassageStore([text_passage("p0", "apple banana")])
    index = build_index(store)
    assert len(bm25_search(index, "zzz qqq", 10)) == 0
    assert len(bm25_search(index, "", 10)) == 0


def test_bm25_single_passage_match():
    store = PassageStore([text_passage("p0", "apple banana cherry")])
    index = build_index(store)
    ranked = bm25_search(index, "apple banana cherry", 5)
    assert ranked.ids() == ("p0",)


def test_bm25_matches_brute_force_oracle():
    rng = random.Random(42)
    store = random_store(rng, 200)
    index = build_index(store)
    for _ in range(50):
        query = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 6)))
        expected = brute_force_bm25(store, query, 0.9, 0.4, 10)
        got = bm25_search(index, query, 10)
        assert got.ids() == tuple(pid for pid, _ in expected)
        for (_, got_score), (_, want_score) in zip(got, expected):
            assert got_score == pytest.approx(want_score, abs=1e-9)


def test_bm25_index_stats_match_recount():
    rng = random.Random(3)
    store = random_store(rng, 40)
    index = build_index(store)
    token_re = re.compile(r"[^\W_]+", re.UNICODE)
    for p in store:
        tokens = token_re.findall(p.body.lower())
        assert index.doc_lengths[p.id] == len(tokens)
        for term, tf in Counter(tokens).items():
            assert (p.id, tf) in index.postings[term]


def test_bm25_ranking_stable_under_insertion_order():
    rng = random.Random(11)
    passages = [text_passage(f"p{i}", " ".join(rng.choice(VOCAB) for _ in range(8)))
                for i in range(30)]
    index_a = build_index(PassageStore(passages))
    shuffled = passages[:]
    rng.shuffle(shuffled)
    index_b = build_index(PassageStore(shuffled))
    for query in ("apple banana", "kiwi", "mango lemon fig"):
        assert bm25_search(index_a, query, 10).ids() == bm25_search(index_b, query, 10).ids()


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_bm25_oracle_property(seed):
    rng = random.Random(seed)
    store = random_store(rng, rng.randint(2, 25), vocab=VOCAB[:8])
    index = build_index(store)
    query = " ".join(rng.choice(VOCAB[:8]) for _ in range(rng.randint(1, 4)))
    expected = brute_force_bm25(store, query, 0.9, 0.4, 10)
    got = bm25_search(index, query, 10)
    assert got.ids() == tuple(pid for pid, _ in expected)


def unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def test_dense_search_basis():
    vectors = DenseVectors({f"p{i}": np.eye(5)[i] for i in range(5)})
    ranked = dense_search(vectors, np.eye(5)[2], 1)
    assert ranked.ids() == ("p2",)


def test_dense_search_orthogonal_ties_by_id():
    vectors = DenseVectors({"b": [0, 1.0], "a": [0, 1.0], "c": [0, -1.0]})
    ranked = dense_search(vectors, np.array([1.0, 0.0]), 3)
    assert ranked.ids() == ("a", "b", "c")
    assert all(score == 0.0 for _, score in ranked)


def test_dense_search_matches_exhaustive_sort():
    rng = np.random.default_rng(9)
    vectors = {f"p{i:02d}": unit(rng.standard_normal(16)) for i in range(50)}
    dv = DenseVectors(vectors)
    query = unit(rng.standard_normal(16))
    expected = sorted(
        ((pid, float(np.dot(v, query))) for pid, v in vectors.items()),
        key=lambda kv: (-kv[1], kv[0]),
    )[:7]
    got = dense_search(dv, query, 7)
    assert got.ids() == tuple(pid for pid, _ in expected)


def test_dense_search_dimension_mismatch():
    dv = DenseVectors({"a": [1.0, 0.0]})
    with pytest.raises(ValueError):
        dense_search(dv, np.array([1.0, 0.0, 0.0]), 1)


def toy_corpus():
    # answer "olivia hime" planted in p01 (rank 1) and p21 (rank 21);
    # answer "recife" planted in p05 (rank 5)
    passages = []
    for i in range(1, 26):
        fillers = f"filler text number {i}"
        if i == 1 or i == 21:
            body = f"{fillers} Olívia Hime appears here"
        elif i == 5:
            body = f"{fillers} the city of Recife"
        else:
            body = fillers
        passages.append(text_passage(f"p{i:02d}", body))
    store = PassageStore(passages)
    ranked = RankedList(tuple((f"p{i:02d}", float(100 - i)) for i in range(1, 26)))
    return store, ranked


def test_hit_at_n_hand_counts():
    store, ranked = toy_corpus()
    answers = ["Olivia Hime"]
    assert hit_at_n(ranked, store, answers, 1)
    assert hit_at_n(ranked, store, answers, 5)
    assert hit_at_n(ranked, store, answers, 20)
    assert not hit_at_n(RankedList(ranked.entries[1:]), store, answers, 19)
    assert hit_at_n(RankedList(ranked.entries[1:]), store, answers, 20)


def test_recall_at_n_hand_counts():
    store, ranked = toy_corpus()
    answers = ["Olivia Hime", "Recife"]
    assert recall_at_n(ranked, store, answers, 1) == 0.5
    assert recall_at_n(ranked, store, answers, 5) == 1.0
    assert recall_at_n(ranked, store, answers, 20) == 1.0
    assert recall_at_n(ranked, store, ["Olivia Hime", "missing thing"], 25) == 0.5
    with pytest.raises(ValueError):
        recall_at_n(ranked, store, [], 5)


def test_hit_recall_monotone_in_n():
    store, ranked = toy_corpus()
    answers = ["Olivia Hime", "Recife"]
    hits = [hit_at_n(ranked, store, answers, n) for n in range(1, 26)]
    recalls = [recall_at_n(ranked, store, answers, n) for n in range(1, 26)]
    assert hits == sorted(hits)
    assert recalls == sorted(recalls)


def test_hit_equals_positive_recall_for_single_answer():
    store, ranked = toy_corpus()
    for n in (1, 5, 20, 25):
        assert hit_at_n(ranked, store, ["Recife"], n) == (
            recall_at_n(ranked, store, ["Recife"], n) > 0
        )


def test_ranked_list_validation():
    with pytest.raises(ValueError):
        RankedList((("a", 1.0), ("b", 2.0)))
    with pytest.raises(ValueError):
        RankedList((("b", 1.0), ("a", 1.0)))
    with pytest.raises(ValueError):
        RankedList((("a", 1.0), ("a", 0.5)))


def test_index_persistence_round_trip(tmp_path):
    rng = random.Random(5)
    store = random_store(rng, 25)
    index = build_index(store)
    path = tmp_path / "index.json"
    save_index(index, path)
    loaded = load_index(path)
    for query in ("apple", "banana cherry", "mango mango"):
        assert bm25_search(index, query, 10) == bm25_search(loaded, query, 10)
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "other"}', encoding="utf-8")
    with pytest.raises(ValueError):
        load_index(bad)


def test_vectors_persistence_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    dv = DenseVectors({f"p{i}": unit(rng.standard_normal(4)) for i in range(6)})
    path = tmp_path / "vectors.jsonl"
    save_vectors(dv, path)
    loaded = load_vectors(path)
    query = unit(rng.standard_normal(4))
    assert dense_search(dv, query, 6) == dense_search(loaded, query, 6)
