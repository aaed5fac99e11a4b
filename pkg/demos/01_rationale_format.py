"""The structured rationale format: parsing, serialization, and prefix edits.

Run:  python demos/01_rationale_format.py
"""

from verichain import parse_cot, pending_subquestion, serialize_cot, truncate_after

raw = """\
Question: who recorded Palavras de Guerra Ao Vivo?
Thought 1: I need to find the artist of this recording.
Action 1: Question[who recorded Palavras de Guerra Ao Vivo?]
Observation 1: Olívia Hime
Thought 2: That answers the question.
Action 2: Finish[Olívia Hime]"""

print("== parsing a well-formed rationale ==")
record = parse_cot(raw, require_finish=True)
print(f"rounds: {len(record.rounds)}, finished: {record.finished}")
for rnd in record.rounds:
    print(f"  round {rnd.index}: {type(rnd.action).__name__:<6} obs={rnd.observation!r}")

print("\n== round-trip: serialize(parse(text)) == text ==")
assert serialize_cot(record) == raw
print("byte-identical")

print("\n== malformed input never raises, it returns a reason ==")
for bad in ("", "Thought 1: x\nAction 2: Finish[y]", "Thought 1: x\nAction 1: Lookup[y]"):
    err = parse_cot(bad, require_finish=True)
    print(f"  {bad!r:<45} -> {err.reason.value} at line {err.line}")

print("\n== noisy model output: wrapped lines fold, blank lines vanish ==")
noisy = "Thought 1: a very long thought\nthat wrapped onto another line\n\nAction 1: Finish[fine]"
print(f"  thought: {parse_cot(noisy).rounds[0].thought!r}")

print("\n== interaction plumbing: pending sub-questions and prefixes ==")
print(f"  earliest unverified ask: {pending_subquestion(record)}")
print(f"  after verifying round 1: {pending_subquestion(record, {1})}")
prefix = truncate_after(record, 1)
print(f"  truncated prefix has {len(prefix.rounds)} round(s), finished={prefix.finished}")
