"""The full interactive loop: a hallucinated sub-answer is corrected by the
retrieve-then-read pipeline, the verifier picks the candidate, and the
model regenerates the rest of its reasoning from the fixed prefix.

Everything below runs against deterministic scripted endpoints.

Run:  python demos/06_interactive_verification.py
"""

import numpy as np

from verichain import (
    Demonstration,
    DemoSource,
    InteractionConfig,
    MatchKind,
    MockChatClient,
    MockEmbedClient,
    MockRule,
    MockScript,
    PassageStore,
    Pool,
    RetrievalBackend,
    RetrievalBackendKind,
    build_index,
    parse_cot,
    run_interaction,
    serialize_cot,
)
from verichain.corpus import Passage, PassageSource

QUESTION = "what college did Sam Nashville attend?"

store = PassageStore(
    [
        Passage("bio#0", "Sam Nashville",
                "Sam Nashville attended Harvard University from 1990 to 1994.",
                PassageSource.TEXT),
        Passage("tx#0", "colleges", "Collin College is a community college in Texas.",
                PassageSource.TEXT),
    ]
)
backend = RetrievalBackend(RetrievalBackendKind.BM25, store, index=build_index(store))

anchor = Demonstration(
    parse_cot(
        "Question: what college did Jane Doe attend?\n"
        "Thought 1: find the college.\nAction 1: Question[what college did Jane Doe attend?]\n"
        "Observation 1: State College\nThought 2: done.\nAction 2: Finish[State College]"
    ),
    np.array([1.0, 0.0]),
    DemoSource.HUMAN_ANCHOR,
)

# the model first hallucinates "Collin College"; after the observation is
# corrected it continues from the fixed prefix
llm = MockChatClient(MockScript((
    MockRule(MatchKind.SUBSTRING, "Observation 1: Harvard University",
             "Thought 2: So Sam Nashville attended Harvard University.\n"
             "Action 2: Finish[Harvard University]"),
    MockRule(MatchKind.SUBSTRING, f"Question: {QUESTION}\nThought 1:",
             "Thought 1: I need to find the college Sam Nashville attended.\n"
             f"Action 1: Question[{QUESTION}]\n"
             "Observation 1: Collin College\n"
             "Thought 2: So the answer is Collin College.\n"
             "Action 2: Finish[Collin College]"),
)))
reader = MockChatClient(MockScript((
    MockRule(MatchKind.SUBSTRING, "question: what college did Sam Nashville attend",
             "Harvard University"),
), default_response="no idea"))
verifier = MockChatClient(MockScript(default_response="B"))
embed = MockEmbedClient(dim=2)

trace = run_interaction(
    QUESTION, Pool([anchor]), llm, embed, backend, reader, verifier,
    InteractionConfig(max_iterations=3), instruction="Answer with numbered rounds.",
)

print("== initial rationale (wrong) ==")
print(serialize_cot(trace.initial_cot))
print("\n== interaction ==")
for r in trace.iterations:
    print(f"  iteration {r.iteration}: round {r.round_index} asked {r.subquestion!r}")
    print(f"    model said {r.original_answer!r}, pipeline proposed {r.candidate_answer!r}")
    print(f"    verdict: {r.verdict.choice.value} -> {r.verdict.final_text!r} "
          f"(regenerated: {r.regenerated})")
print("\n== final rationale (corrected) ==")
print(serialize_cot(trace.final_cot))
print(f"\nstatus={trace.status.value}  final answers={list(trace.final_answers)}")
