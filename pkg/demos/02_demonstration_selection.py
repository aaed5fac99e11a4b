"""Demonstration pools: cosine selection and the three prompt families.

Run:  python demos/02_demonstration_selection.py
"""

import numpy as np

from verichain import (
    BaselineMode,
    Demonstration,
    DemoSource,
    Pool,
    assemble_baseline_prompt,
    assemble_construction_prompt,
    assemble_inference_prompt,
    parse_cot,
    select_top1,
)


def unit(*xs):
    v = np.asarray(xs, float)
    return v / np.linalg.norm(v)


capital = parse_cot(
    "Question: what is the capital of Brazil?\n"
    "Thought 1: simple geography lookup.\nAction 1: Finish[Brasilia]"
)
artist = parse_cot(
    "Question: who painted Guernica?\n"
    "Thought 1: find the painter of the work.\n"
    "Action 1: Question[who painted Guernica?]\nObservation 1: Pablo Picasso\n"
    "Thought 2: done.\nAction 2: Finish[Pablo Picasso]"
)

pool = Pool(
    [
        Demonstration(capital, unit(1.0, 0.1), DemoSource.HUMAN_ANCHOR),
        Demonstration(artist, unit(0.1, 1.0), DemoSource.HUMAN_ANCHOR),
    ]
)

print("== cosine selection picks the nearest demonstration ==")
for query_vec, label in ((unit(0.9, 0.2), "geography-ish"), (unit(0.0, 1.0), "art-ish")):
    chosen = select_top1(pool, query_vec)
    print(f"  {label:<14} -> {chosen.record.question}")

instruction = "Answer the question with numbered Thought/Action/Observation rounds."

print("\n== inference prompt (demonstration hint removed, Thought 1 stub) ==")
print(assemble_inference_prompt(instruction, pool[1], "who sculpted David?"))

print("\n== construction prompt (hints steer generation toward gold) ==")
print(
    assemble_construction_prompt(
        instruction, pool[1], "who sculpted David?", ["Michelangelo"], ["Florence"]
    )
)

print("\n== 4-shot QA-pair baseline prompt ==")
pairs = [("q1?", "a1"), ("q2?", "a2"), ("q3?", "a3"), ("q4?", "a4")]
print(assemble_baseline_prompt(BaselineMode.QA_PAIRS_4_SHOT, pairs, "target question?"))
