"""Iterative collection construction with a scripted chat model.

Ten training items; six answerable immediately, two only once a
constructed demonstration is available to prompt with, two never.

Run:  python demos/03_collection_construction.py
"""

import numpy as np

from verichain import (
    Demonstration,
    DemoSource,
    MatchKind,
    MockChatClient,
    MockEmbedClient,
    MockRule,
    MockScript,
    Pool,
    TrainItem,
    build_collection,
    parse_cot,
)

anchor = Demonstration(
    parse_cot(
        "Question: what is the capital of Brazil?\nHint: Brasilia\n"
        "Thought 1: direct lookup.\nAction 1: Finish[Brasilia]",
    ),
    np.array([1.0, 0.0, 0.0]),
    DemoSource.HUMAN_ANCHOR,
)

items = [TrainItem(f"item-{i}", f"train question {i}", (f"answer {i}",)) for i in range(1, 11)]

vectors = {f"train question {i}": [0.0, 1.0, 0.0] for i in range(1, 9)}
vectors |= {f"train question {i}": [1.0, 0.0, 0.0] for i in (9, 10)}
embed = MockEmbedClient(vectors, dim=3)


def finish(i):
    return f"Thought 1: this is known.\nAction 1: Finish[answer {i}]"


rules = [
    # items 7/8 succeed only when item 1's rationale leads the prompt
    MockRule(MatchKind.PATTERN, r"(?s)Question: train question 1\n.*Question: train question 7\n", finish(7)),
    MockRule(MatchKind.PATTERN, r"(?s)Question: train question 1\n.*Question: train question 8\n", finish(8)),
] + [
    MockRule(MatchKind.SUBSTRING, f"Question: train question {i}\nHint:", finish(i))
    for i in range(1, 7)
]
chat = MockChatClient(MockScript(tuple(rules), default_response="Thought 1: no.\nAction 1: Finish[unknown]"))

pool, report = build_collection(items, [anchor], chat, embed, max_iterations=5)

print("== construction report ==")
print(f"iterations run            : {report.iterations_run}")
print(f"admitted per iteration    : {list(report.admitted_per_iteration)}")
print(f"unresolved items          : {list(report.unresolved)}")
print(f"pool size (anchors + new) : {len(pool)}")

print("\n== every admitted rationale finishes with its gold answer ==")
for demo in pool:
    tag = "anchor" if demo.source is DemoSource.HUMAN_ANCHOR else "built "
    print(f"  [{tag}] {demo.record.question:<32} -> {', '.join(demo.record.final_answers)}")
