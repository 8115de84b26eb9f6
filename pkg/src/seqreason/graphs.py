"""Graph, probe, and trace containers shared by generators, models, and eval.

A trace is one worked instance of an algorithm: the input features, a
sequence of per-step hint snapshots, and the final outputs. Probe layouts
are declared per task via ProbeSpec lists; bundles are plain dicts of
numpy arrays keyed by probe name.

Shape conventions (n = node count):
  node scalar/mask   -> (n,) float
  node node_index    -> (n,) int, values in [0, n)
  edge scalar/mask   -> (n, n) float, adjacency selects live entries
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

STAGES = ("input", "hint", "output")
LOCATIONS = ("node", "edge")
KINDS = ("scalar", "mask", "node_index")


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class ProbeSpec:
    name: str
    stage: str
    location: str
    kind: str

    def __post_init__(self):
        if self.stage not in STAGES:
            raise GraphError(f"bad stage {self.stage!r}")
        if self.location not in LOCATIONS:
            raise GraphError(f"bad location {self.location!r}")
        if self.kind not in KINDS:
            raise GraphError(f"bad kind {self.kind!r}")
        if self.kind == "node_index" and self.location != "node":
            raise GraphError("node_index probes live on nodes")


@dataclass(frozen=True)
class Graph:
    """Directed graph; undirected tasks store both (u,v) and (v,u)."""

    n: int
    edges: tuple  # ordered (u, v) pairs, u != v
    adjacency: np.ndarray = field(compare=False)

    @classmethod
    def from_edges(cls, n, edges):
        if n < 1:
            raise GraphError("need at least one node")
        adj = np.zeros((n, n), dtype=bool)
        seen = set()
        for u, v in edges:
            if u == v:
                raise GraphError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u},{v}) out of range")
            if (u, v) in seen:
                raise GraphError(f"duplicate edge ({u},{v})")
            seen.add((u, v))
            adj[u, v] = True
        return cls(n=n, edges=tuple(sorted(seen)), adjacency=adj)

    def neighbors(self, v):
        """Out-neighbor set N(v) = {u | (v,u) in E}."""
        return np.flatnonzero(self.adjacency[v])

    @property
    def m(self):
        return len(self.edges)


# bundles are {probe name: ndarray}; no wrapper class needed
FeatureBundle = dict


@dataclass
class Trace:
    graph: Graph
    specs: list
    inputs: FeatureBundle
    hints: list  # length T, each a FeatureBundle over stage=hint probes
    outputs: FeatureBundle
    T: int

    def specs_for(self, stage):
        return [s for s in self.specs if s.stage == stage]


def random_graph(n, p, seed, undirected=False):
    """Erdos-Renyi G(n, p); deterministic per seed."""
    if n < 1:
        raise GraphError("need at least one node")
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"p={p} outside [0,1]")
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    if undirected:
        # sample upper triangle, mirror both directions
        mask = np.triu(mask, k=1)
        mask = mask | mask.T
    edges = [(int(u), int(v)) for u, v in zip(*np.nonzero(mask))]
    return Graph.from_edges(n, edges)


def _expected_shape(spec, n):
    return (n, n) if spec.location == "edge" else (n,)


def _check_bundle(bundle, specs, n, where, out):
    names = {s.name for s in specs}
    extra = set(bundle) - names
    if extra:
        out.append(f"{where}: unknown probes {sorted(extra)}")
    for spec in specs:
        if spec.name not in bundle:
            out.append(f"{where}: missing probe {spec.name!r}")
            continue
        arr = np.asarray(bundle[spec.name])
        want = _expected_shape(spec, n)
        if arr.shape != want:
            out.append(f"{where}: {spec.name} shape {arr.shape} != {want}")
            continue
        if spec.kind == "mask" and not np.isin(arr, (0, 1)).all():
            out.append(f"{where}: {spec.name} mask has non-binary values")
        if spec.kind == "node_index":
            if arr.dtype.kind not in "iu":
                out.append(f"{where}: {spec.name} node_index not integer")
            elif arr.min() < 0 or arr.max() >= n:
                out.append(f"{where}: {spec.name} values outside [0,{n})")
        if spec.kind == "scalar" and not np.isfinite(arr).all():
            out.append(f"{where}: {spec.name} has non-finite values")


def validate_trace(trace):
    """Collect contract violations; empty list means the trace is valid."""
    out = []
    g = trace.graph
    if trace.T < 1:
        out.append(f"T={trace.T} < 1")
    if len(trace.hints) != trace.T:
        out.append(f"T={trace.T} but {len(trace.hints)} hint bundles")
    adj = np.zeros((g.n, g.n), dtype=bool)
    for u, v in g.edges:
        adj[u, v] = True
    if not np.array_equal(adj, g.adjacency):
        out.append("adjacency inconsistent with edge list")
    if g.adjacency.diagonal().any():
        out.append("self-loop present")
    _check_bundle(trace.inputs, trace.specs_for("input"), g.n, "inputs", out)
    for t, h in enumerate(trace.hints):
        _check_bundle(h, trace.specs_for("hint"), g.n, f"hint[{t}]", out)
    _check_bundle(trace.outputs, trace.specs_for("output"), g.n, "outputs", out)
    return out


# -- serialization (schema documented in docs/file_formats.md) ----------------


def _bundle_to_json(bundle):
    return {k: np.asarray(v).tolist() for k, v in bundle.items()}


def _bundle_from_json(obj, specs):
    by_name = {s.name: s for s in specs}
    out = {}
    for k, v in obj.items():
        kind = by_name[k].kind if k in by_name else "scalar"
        dtype = np.int64 if kind == "node_index" else np.float64
        out[k] = np.asarray(v, dtype=dtype)
    return out


def trace_to_json(trace):
    return json.dumps(
        {
            "n": trace.graph.n,
            "edges": [list(e) for e in trace.graph.edges],
            "probe_specs": [
                {"name": s.name, "stage": s.stage, "location": s.location, "kind": s.kind}
                for s in trace.specs
            ],
            "inputs": _bundle_to_json(trace.inputs),
            "hints": [_bundle_to_json(h) for h in trace.hints],
            "outputs": _bundle_to_json(trace.outputs),
            "T": trace.T,
        }
    )


def trace_from_json(text):
    obj = json.loads(text)
    specs = [ProbeSpec(**s) for s in obj["probe_specs"]]
    graph = Graph.from_edges(obj["n"], [tuple(e) for e in obj["edges"]])
    return Trace(
        graph=graph,
        specs=specs,
        inputs=_bundle_from_json(obj["inputs"], specs),
        hints=[_bundle_from_json(h, specs) for h in obj["hints"]],
        outputs=_bundle_from_json(obj["outputs"], specs),
        T=obj["T"],
    )
