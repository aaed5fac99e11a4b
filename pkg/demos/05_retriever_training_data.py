"""Mining retriever training data from constructed rationales.

The query is augmented with the rationale's last sub-question, the answers
are appended for the lexical search, and the top passages are classified
by entity/answer co-occurrence.

Run:  python demos/05_retriever_training_data.py
"""

from verichain import (
    PassageStore,
    TrainItem,
    augment_query,
    build_index,
    default_recognizer,
    mine_examples,
    parse_cot,
)
from verichain.corpus import Passage, PassageSource

cot = parse_cot(
    "Thought 1: I need the college.\n"
    "Action 1: Question[where did Maya Quintero study medicine?]\n"
    "Observation 1: Hilltop University\n"
    "Thought 2: done.\nAction 2: Finish[Hilltop University]"
)
item = TrainItem("ex-1", "where did Maya Quintero study?", ("Hilltop University",))

print("== query augmentation ==")
augmented = augment_query(item.question, cot)
print(f"  {augmented}")
print(f"  query entities: {default_recognizer(augmented)}")

bodies = {
    "co-1": "Maya Quintero graduated from Hilltop University with honors.",
    "co-2": "At Hilltop University, Maya Quintero led the student study circle.",
    "ans-1": "Hilltop University sits on a hill and offers medicine study programs.",
    "ans-2": "The study halls of Hilltop University are open at night.",
    "ent-1": "Maya Quintero later moved abroad to study languages.",
    "none-1": "A study on sleep was published last week.",
}
store = PassageStore(
    [Passage(pid, pid, body, PassageSource.TEXT) for pid, body in bodies.items()]
)
index = build_index(store)

example = mine_examples(item, cot, index, store)
print("\n== classification of the retrieved passages ==")
print(f"  rule          : {example.rule.value}")
print(f"  positives     : {list(example.positives)}")
print(f"  hard negatives: {list(example.hard_negatives)}")

print("\n== fallback when no passage carries entity and answer together ==")
no_co = PassageStore(
    [Passage(pid, pid, body, PassageSource.TEXT) for pid, body in bodies.items()
     if not pid.startswith("co-")]
)
example2 = mine_examples(item, cot, build_index(no_co), no_co)
print(f"  rule          : {example2.rule.value}")
print(f"  positives     : {list(example2.positives)}")
print(f"  hard negatives: {list(example2.hard_negatives)}")
