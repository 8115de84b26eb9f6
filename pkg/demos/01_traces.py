"""
Algorithmic traces: sampling, inspecting, validating
====================================================

Every task produces a trace: the input probes, one hint bundle per
reasoning step, and the final outputs. This script walks a BFS trace
step by step, validates it, and round-trips it through JSON.
"""
import numpy as np

from seqreason import TASKS, sample_instance, trace_from_json, trace_to_json, validate_trace
from seqreason.pipeline import rng_for

rng = rng_for(7, "data")

# a small connected graph with a random source
tr = TASKS["bfs"].sample(rng, 6)
print(f"graph: n={tr.graph.n}, m={tr.graph.m} directed edges, T={tr.T} steps")
print("source mask:", tr.inputs["source"].astype(int))

# hints record the frontier expanding one layer per step
for t, hint in enumerate(tr.hints, start=1):
    reached = hint["reach_h"].astype(int)
    parents = hint["parent_h"].astype(int)
    print(f"  step {t}: reached={reached} parents={parents}")
print("final parents:", tr.outputs["parent"].astype(int))

# the validator replays every structural contract and returns violations
violations = validate_trace(tr)
print("violations:", violations if violations else "none")

# traces serialize to a single JSON document and back without loss
blob = trace_to_json(tr)
back = trace_from_json(blob)
assert back.T == tr.T
assert np.array_equal(back.outputs["parent"], tr.outputs["parent"])
print(f"JSON round-trip ok ({len(blob)} bytes)")

# every registered task samples through the same interface
print("\nall tasks:")
for task_id in TASKS:
    sample = sample_instance(task_id, rng, n_lo=4, n_hi=6)
    probes = ", ".join(sorted(sample.outputs))
    print(f"  {task_id}: T={sample.T}, outputs: {probes}")
