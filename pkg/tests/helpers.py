"""Shared test data generators."""

from __future__ import annotations

import random

from verichain.cot import Ask, CoTRecord, Finish, Round, serialize_cot

_WORDS = (
    "alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo lima "
    "mike november oscar papa quebec romeo sierra tango uniform victor whiskey "
    "xray yankee zulu olivia hime palavras guerra vivo recife universidade "
    "música cidade país gênero"
).split()

_DECORATIONS = ("", "?", ".", "!", ",", ")", "(", "[", "]")


def rand_text(rng: random.Random, max_words: int = 5, allow_semicolon: bool = False) -> str:
    words = []
    for _ in range(rng.randint(1, max_words)):
        word = rng.choice(_WORDS)
        if rng.random() < 0.15:
            word += rng.choice(_DECORATIONS)
        if allow_semicolon and rng.random() < 0.1:
            word += ";"
        words.append(word)
    return " ".join(words).strip() or "word"


def rand_answers(rng: random.Random, max_n: int = 3) -> tuple[str, ...]:
    return tuple(rand_text(rng, 3) for _ in range(rng.randint(1, max_n)))


def make_record(
    rng: random.Random,
    finished: bool | None = None,
    with_question: bool | None = None,
    with_hint: bool | None = None,
    max_rounds: int = 5,
) -> CoTRecord:
    """A random invariant-satisfying record."""
    if finished is None:
        finished = rng.random() < 0.8
    if with_question is None:
        with_question = rng.random() < 0.7
    if with_hint is None:
        with_hint = rng.random() < 0.5
    n_ask = rng.randint(0 if finished else 1, max_rounds - 1)
    rounds = []
    for i in range(1, n_ask + 1):
        observation = rand_text(rng, allow_semicolon=True) if rng.random() < 0.8 else None
        rounds.append(
            Round(i, rand_text(rng, allow_semicolon=True), Ask(rand_text(rng, allow_semicolon=True)),
                  observation)
        )
    if finished:
        rounds.append(Round(n_ask + 1, rand_text(rng), Finish(rand_answers(rng))))
    return CoTRecord(
        question=rand_text(rng, allow_semicolon=True) if with_question else "",
        hint=rand_answers(rng) if with_hint else None,
        rounds=tuple(rounds),
    )


def corrupt_text(rng: random.Random) -> str:
    """Serialized text mutated so that it can never parse cleanly."""
    kind = rng.randrange(9)
    if kind == 0:
        return rng.choice(["", "   \n \n", "just some prose\nwithout structure"])
    record = make_record(rng, finished=True, max_rounds=4)
    text = serialize_cot(record, include_hint=True)
    lines = text.splitlines()
    first_thought = next(i for i, l in enumerate(lines) if l.startswith("Thought 1:"))
    if kind == 1:  # garble a Thought prefix
        i = rng.choice([i for i, l in enumerate(lines) if l.startswith("Thought")])
        lines[i] = lines[i].replace("Thought", "Thonk", 1)
    elif kind == 2:  # break an Action index
        i = rng.choice([i for i, l in enumerate(lines) if l.startswith("Action")])
        n = int(lines[i].split()[1].rstrip(":"))
        lines[i] = lines[i].replace(f"Action {n}:", f"Action {n + 3}:", 1)
    elif kind == 3:  # drop the terminal Finish action
        lines = lines[:-1]
    elif kind == 4:  # unparseable action body
        i = rng.choice([i for i, l in enumerate(lines) if l.startswith("Action")])
        lines[i] = lines[i].replace("[", "(", 1).replace("]", ")", 1)
    elif kind == 5:  # empty a thought
        i = rng.choice([i for i, l in enumerate(lines) if l.startswith("Thought")])
        lines[i] = lines[i].split(":")[0] + ":"
    elif kind == 6:  # empty action payload
        i = rng.choice([i for i, l in enumerate(lines) if l.startswith("Action")])
        head = lines[i].split(":")[0]
        lines[i] = f"{head}: Question[]"
    elif kind == 7:  # trailing content after Finish
        lines.append(lines[first_thought])
    else:  # leading garbage before any structure
        lines.insert(0, "?? unstructured noise ??")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# scripted construction fixture: 10 items, 6 admitted in pass 1, 2 more in
# pass 2 (they succeed only once a constructed demonstration is selectable),
# 2 never admitted

import numpy as np

from verichain.clients import MatchKind, MockChatClient, MockEmbedClient, MockRule, MockScript
from verichain.collection import TrainItem
from verichain.cot import Finish as _Finish
from verichain.cot import Round as _Round
from verichain.prompts import Demonstration, DemoSource

ANCHOR_QUESTION = "what is the capital of Brazil?"

WRONG_COT = "Thought 1: not sure.\nAction 1: Finish[unknown]"


def _finish_cot(i: int) -> str:
    return f"Thought 1: this one is known.\nAction 1: Finish[answer {i}]"


def algorithm1_fixture():
    anchor_record = CoTRecord(
        question=ANCHOR_QUESTION,
        hint=("Brasilia",),
        rounds=(_Round(1, "capital city lookup", _Finish(("Brasilia",))),),
    )
    anchor = Demonstration(anchor_record, np.array([1.0, 0.0, 0.0]), DemoSource.HUMAN_ANCHOR)

    items = [TrainItem(f"item-{i}", f"train question {i}", (f"answer {i}",)) for i in range(1, 11)]
    vectors = {}
    for i in range(1, 7):
        vectors[f"train question {i}"] = [0.0, 1.0, 0.0]
    for i in (7, 8):  # nearest neighbour becomes item 1's demo once admitted
        vectors[f"train question {i}"] = [0.0, 1.0, 0.0]
    for i in (9, 10):  # stay nearest to the anchor forever
        vectors[f"train question {i}"] = [1.0, 0.0, 0.0]
    embed = MockEmbedClient(vectors, dim=3)

    rules = [
        # items 7 and 8 answer correctly only when a constructed
        # demonstration (item 1's) is in front of them
        MockRule(MatchKind.PATTERN,
                 r"(?s)Question: train question 1\n.*Question: train question 7\n",
                 _finish_cot(7)),
        MockRule(MatchKind.PATTERN,
                 r"(?s)Question: train question 1\n.*Question: train question 8\n",
                 _finish_cot(8)),
    ]
    for i in range(1, 7):
        rules.append(
            MockRule(MatchKind.SUBSTRING, f"Question: train question {i}\nHint:", _finish_cot(i))
        )
    chat = MockChatClient(MockScript(tuple(rules), default_response=WRONG_COT))
    return items, [anchor], chat, embed


# ---------------------------------------------------------------------------
# scripted correction scenario: the initial rationale hallucinates a college,
# the QA pipeline retrieves the right one, the verifier picks it, and the
# regenerated continuation finishes with the corrected answer

from verichain.corpus import Passage, PassageSource, PassageStore
from verichain.qa import RetrievalBackend, RetrievalBackendKind
from verichain.retrieval import build_index

CORRECTION_QUESTION = "what college did Sam Nashville attend?"
CORRECTION_GOLD = ("Harvard University",)

INITIAL_COT = (
    "Thought 1: I need to find the college Sam Nashville attended.\n"
    "Action 1: Question[what college did Sam Nashville attend?]\n"
    "Observation 1: Collin College\n"
    "Thought 2: So the answer is Collin College.\n"
    "Action 2: Finish[Collin College]"
)

REGEN_SUFFIX = (
    "Thought 2: So Sam Nashville attended Harvard University.\n"
    "Action 2: Finish[Harvard University]"
)


def correction_anchor():
    record = CoTRecord(
        question="what college did Jane Doe attend?",
        rounds=(
            _Round(1, "find the college", Ask("what college did Jane Doe attend?"),
                   "State College"),
            _Round(2, "that answers it", _Finish(("State College",))),
        ),
    )
    return Demonstration(record, np.array([1.0, 0.0]), DemoSource.HUMAN_ANCHOR)


def correction_store():
    return PassageStore(
        [
            Passage("bio#0", "Sam Nashville",
                    "Sam Nashville attended Harvard University from 1990 to 1994.",
                    PassageSource.TEXT),
            Passage("other#0", "colleges",
                    "Collin College is a community college in Texas.",
                    PassageSource.TEXT),
        ]
    )


def correction_fixture(verifier_reply="B"):
    store = correction_store()
    backend = RetrievalBackend(RetrievalBackendKind.BM25, store, index=build_index(store))
    llm = MockChatClient(
        MockScript(
            rules=(
                MockRule(MatchKind.SUBSTRING, "Observation 1: Harvard University", REGEN_SUFFIX),
                MockRule(MatchKind.SUBSTRING, f"Question: {CORRECTION_QUESTION}\nThought 1:",
                         INITIAL_COT),
            ),
        )
    )
    reader = MockChatClient(
        MockScript(
            rules=(
                MockRule(MatchKind.SUBSTRING, "question: what college did Sam Nashville attend",
                         "Harvard University"),
            ),
            default_response="no idea",
        )
    )
    verifier = MockChatClient(MockScript(default_response=verifier_reply))
    embed = MockEmbedClient(dim=2)
    return backend, llm, reader, verifier, embed


# ---------------------------------------------------------------------------
# a complete on-disk CLI workspace: corpus, questions, anchor pool, mock
# scripts, and a run manifest wired for offline mock endpoints

import json as _json


def _write_jsonl(path, rows):
    path.write_text("".join(_json.dumps(r, ensure_ascii=False) + "\n" for r in rows),
                    encoding="utf-8")


def make_cli_workspace(ws):
    """Populate ``ws`` (a Path) and return the config path."""
    facts = [f"the answer to item {i} is gadget-{i}" for i in range(10)]
    _write_jsonl(ws / "documents.jsonl",
                 [{"title": f"doc {i}", "text": body} for i, body in enumerate(facts)])
    (ws / "triples.tsv").write_text(
        "music recording\treleases\tPalavras de Guerra Ao Vivo\n"
        "music recording\tartist\tOlívia Hime\n",
        encoding="utf-8",
    )

    questions = [
        {"id": f"q-{i}", "question": f"what is the answer to item {i}?",
         "answers": [f"gadget-{i}"]}
        for i in range(10)
    ]
    _write_jsonl(ws / "questions.jsonl", questions)
    _write_jsonl(ws / "train.jsonl", questions)

    anchor_record = CoTRecord(
        question=ANCHOR_QUESTION,
        hint=("Brasilia",),
        rounds=(_Round(1, "straight lookup", _Finish(("Brasilia",))),),
    )
    from verichain.prompts import Pool as _Pool
    from verichain.prompts import save_pool as _save_pool
    _save_pool(
        _Pool([Demonstration(anchor_record, np.array([1.0, 0.0, 0.0, 0.0]),
                             DemoSource.HUMAN_ANCHOR)]),
        ws / "anchors.jsonl",
    )

    llm_rules = []
    for i in range(10):
        # regeneration prompts end at the corrected observation; they must
        # match before the initial-generation rules
        llm_rules.append(
            {
                "match": "substring",
                "value": f"Observation 1: gadget-{i}",
                "response": (
                    f"Thought 2: that settles it.\n"
                    f"Action 2: Finish[gadget-{i}]"
                ),
            }
        )
    for i in range(10):
        llm_rules.append(
            {
                "match": "substring",
                "value": f"Question: what is the answer to item {i}?\nThought 1:",
                "response": (
                    f"Thought 1: I should look up item {i}.\n"
                    f"Action 1: Question[what is the answer to item {i}?]\n"
                    f"Observation 1: gadget-{i}\n"
                    f"Thought 2: that settles it.\n"
                    f"Action 2: Finish[gadget-{i}]"
                ),
            }
        )
    (ws / "llm_script.json").write_text(
        _json.dumps({"rules": llm_rules,
                     "default": "Thought 1: lost.\nAction 1: Finish[unknown]"}),
        encoding="utf-8",
    )
    reader_rules = [
        {"match": "substring", "value": f"question: what is the answer to item {i}?",
         "response": f"gadget-{i}"}
        for i in range(10)
    ]
    (ws / "reader_script.json").write_text(
        _json.dumps({"rules": reader_rules, "default": "no idea"}), encoding="utf-8"
    )
    (ws / "verifier_script.json").write_text(_json.dumps({"rules": [], "default": "A"}),
                                             encoding="utf-8")

    config = {
        "mode": "interactive",
        "instruction": "Answer with numbered rounds.",
        "seed": 0,
        "paths": {
            "triples": str(ws / "triples.tsv"),
            "documents": str(ws / "documents.jsonl"),
            "passages": str(ws / "passages.tsv"),
            "index": str(ws / "index.json"),
            "anchors": str(ws / "anchors.jsonl"),
            "pool": str(ws / "anchors.jsonl"),
            "train": str(ws / "train.jsonl"),
            "questions": str(ws / "questions.jsonl"),
            "cache_dir": str(ws / "cache"),
            "collection": str(ws / "collection.jsonl"),
            "report": str(ws / "report.json"),
            "mined": str(ws / "mined.jsonl"),
            "traces": str(ws / "traces.jsonl"),
            "predictions": str(ws / "predictions.jsonl"),
            "metrics": str(ws / "metrics.json"),
            "stats": str(ws / "stats.json"),
        },
        "endpoints": {
            "llm": {"mock_script": str(ws / "llm_script.json")},
            "embed": {"mock": True, "mock_dim": 4},
            "reader": {"mock_script": str(ws / "reader_script.json")},
            "verifier": {"mock_script": str(ws / "verifier_script.json")},
        },
        "retrieval": {"backend": "bm25", "n_passages": 5},
        "interaction": {"max_iterations": 3, "parallel": 1},
    }
    config_path = ws / "config.json"
    config_path.write_text(_json.dumps(config, indent=2), encoding="utf-8")
    return config_path
