"""Answer normalization and the evaluation metrics.

Run:  python demos/07_evaluation.py
"""

from verichain import Prediction, aggregate, f1, hits_at_1, normalize

print("== one normalization everywhere ==")
for s in ("Olívia Hime.", "THE USA", "  Paris,  France! "):
    print(f"  {s!r:<22} -> {normalize(s)!r}")

print("\n== Hits@1 is containment: produced text must contain a gold answer ==")
cases = [
    (("Olivia Hime",), ["Olívia Hime"]),
    (("Paris, France",), ["Paris"]),
    (("London",), ["Paris"]),
]
for answers, gold in cases:
    pred = Prediction("demo", answers)
    print(f"  pred={answers} gold={gold} -> {hits_at_1(pred, gold)}")

print("\n== F1 is set-based with exact normalized membership ==")
print(f"  pred=[x] gold=[x,y,z,w] -> {f1(['x'], ['x', 'y', 'z', 'w'])}")
print(f"  pred=[X, x.] gold=[x]   -> {f1(['X', 'x.'], ['x'])}")

print("\n== batch aggregation ==")
predictions = [
    Prediction("q1", ("x",)),
    Prediction("q2", ("x",)),
    Prediction("q3", (), malformed=True),
    Prediction("q4", ("z",)),
    Prediction("q5", ("wrong",)),
]
gold = {"q1": ["x"], "q2": ["x", "y", "z", "w"], "q3": ["gold"], "q4": ["z"], "q5": ["right"]}
report = aggregate(predictions, gold)
print(f"  hits@1={report.hits_at_1}  f1_macro={report.f1_macro}")
print(f"  questions={report.n_questions}  malformed={report.n_malformed}")
