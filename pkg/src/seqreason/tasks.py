"""Exact classical-algorithm simulators emitting per-step ground-truth traces.

Six tasks: bfs, bellman_ford, insertion_sort, minimum, binary_search,
mst_prim. Each generator runs the textbook algorithm and snapshots its
state once per outer-loop step. These traces are the supervision signal
and the correctness oracle for everything downstream.

Probe naming convention: hint probes end in "_h"; a hint named
"<output>_h" mirrors that output probe and must equal it at the final
step (binary_search has no such mirror: neither boundary mask alone
determines the answer until termination).

Scalars are min-max scaled to [0,1] per instance (keys, weights,
distances) so encoders never see unbounded magnitudes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, ProbeSpec, Trace, random_graph

N_TRAIN = (4, 8)
N_EVAL_OOD = (8, 16)


class TaskError(ValueError):
    pass


def _minmax(x):
    x = np.asarray(x, dtype=np.float64)
    span = x.max() - x.min()
    if span == 0:
        return np.full_like(x, 0.5)
    return (x - x.min()) / span


def _pos(n):
    return np.arange(n, dtype=np.float64) / n


def _onehot_mask(n, i):
    m = np.zeros(n)
    m[i] = 1.0
    return m


def complete_graph(n):
    return Graph.from_edges(n, [(u, v) for u in range(n) for v in range(n) if u != v])


def _specs(task_id):
    P = ProbeSpec
    common = [P("pos", "input", "node", "scalar")]
    layouts = {
        "bfs": common
        + [
            P("source", "input", "node", "mask"),
            P("reach_h", "hint", "node", "mask"),
            P("parent_h", "hint", "node", "node_index"),
            P("parent", "output", "node", "node_index"),
        ],
        "bellman_ford": common
        + [
            P("source", "input", "node", "mask"),
            P("w", "input", "edge", "scalar"),
            P("dist_h", "hint", "node", "scalar"),
            P("pred_h", "hint", "node", "node_index"),
            P("pred", "output", "node", "node_index"),
        ],
        "insertion_sort": common
        + [
            P("key", "input", "node", "scalar"),
            P("chain_h", "hint", "node", "node_index"),
            P("insert_h", "hint", "node", "mask"),
            P("chain", "output", "node", "node_index"),
        ],
        "minimum": common
        + [
            P("key", "input", "node", "scalar"),
            P("min_ptr_h", "hint", "node", "node_index"),
            P("min_ptr", "output", "node", "node_index"),
        ],
        "binary_search": common
        + [
            P("key", "input", "node", "scalar"),
            P("target", "input", "node", "scalar"),
            P("low_h", "hint", "node", "mask"),
            P("high_h", "hint", "node", "mask"),
            P("mid_h", "hint", "node", "node_index"),
            P("ret", "output", "node", "node_index"),
        ],
        "mst_prim": common
        + [
            P("source", "input", "node", "mask"),
            P("w", "input", "edge", "scalar"),
            P("in_tree_h", "hint", "node", "mask"),
            P("parent_h", "hint", "node", "node_index"),
            P("parent", "output", "node", "node_index"),
        ],
    }
    return tuple(layouts[task_id])


# -- generators ----------------------------------------------------------------


def gen_bfs(g, source):
    """Layer-synchronous BFS; T = eccentricity of the source (min 1).

    Hints per layer: reached mask, parent pointers. Unreached nodes and
    the source point to themselves; ties broken toward the lowest index.
    """
    n = g.n
    if not 0 <= source < n:
        raise TaskError(f"source {source} out of range")
    reach = np.zeros(n, dtype=bool)
    reach[source] = True
    parent = np.arange(n, dtype=np.int64)
    hints = []
    while True:
        newly = ~reach & g.adjacency[reach].any(axis=0)
        if not newly.any():
            break
        for v in np.flatnonzero(newly):
            parent[v] = np.flatnonzero(g.adjacency[:, v] & reach).min()
        reach = reach | newly
        hints.append({"reach_h": reach.astype(np.float64), "parent_h": parent.copy()})
    if not hints:  # isolated source still takes one (vacuous) step
        hints.append({"reach_h": reach.astype(np.float64), "parent_h": parent.copy()})
    return Trace(
        graph=g,
        specs=list(_specs("bfs")),
        inputs={"pos": _pos(n), "source": _onehot_mask(n, source)},
        hints=hints,
        outputs={"parent": parent.copy()},
        T=len(hints),
    )


def gen_bellman_ford(g, w, source):
    """Synchronous relaxation rounds; T = number of improving rounds (min 1).

    Tentative distances are normalized by (n-1) * max weight, the longest
    possible shortest path; not-yet-reached nodes carry the ceiling 1.0.
    """
    n = g.n
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n, n):
        raise TaskError(f"weight matrix shape {w.shape} != {(n, n)}")
    if g.m and (w[g.adjacency] <= 0).any():
        raise TaskError("weights must be positive on edges")
    if not 0 <= source < n:
        raise TaskError(f"source {source} out of range")
    wmax = w[g.adjacency].max() if g.m else 1.0
    denom = (n - 1) * wmax if n > 1 else 1.0
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    pred = np.arange(n, dtype=np.int64)

    def snapshot():
        return {
            "dist_h": np.where(np.isinf(dist), 1.0, dist / denom),
            "pred_h": pred.copy(),
        }

    hints = []
    for _ in range(n):
        cand = dist[:, None] + np.where(g.adjacency, w, np.inf)
        best_u = np.argmin(cand, axis=0)
        best = cand[best_u, np.arange(n)]
        improved = best < dist
        if not improved.any():
            break
        dist = np.where(improved, best, dist)
        pred = np.where(improved, best_u, pred)
        hints.append(snapshot())
    if not hints:
        hints.append(snapshot())
    if np.isinf(dist).any():
        raise TaskError("source does not reach every node")
    return Trace(
        graph=g,
        specs=list(_specs("bellman_ford")),
        inputs={"pos": _pos(n), "source": _onehot_mask(n, source), "w": np.where(g.adjacency, w / wmax, 0.0)},
        hints=hints,
        outputs={"pred": pred.copy()},
        T=len(hints),
    )


def gen_insertion_sort(keys):
    """One step per inserted element; T = n-1 (a single trivial step at n=1).

    The chain probe gives each inserted node its predecessor in sorted
    order (head points to itself); uninserted nodes point to themselves.
    The mask marks the element inserted this step.
    """
    keys = np.asarray(keys, dtype=np.float64)
    n = keys.size
    if np.unique(keys).size != n:
        raise TaskError("keys must be distinct")

    def chain_of(order):
        chain = np.arange(n, dtype=np.int64)
        for a, b in zip(order[1:], order[:-1]):
            chain[a] = b
        return chain

    order = [0]
    hints = []
    for i in range(1, n):
        pos = 0
        while pos < len(order) and keys[order[pos]] < keys[i]:
            pos += 1
        order.insert(pos, i)
        hints.append({"chain_h": chain_of(order), "insert_h": _onehot_mask(n, i)})
    if not hints:
        hints.append({"chain_h": chain_of(order), "insert_h": _onehot_mask(n, 0)})
    return Trace(
        graph=complete_graph(n),
        specs=list(_specs("insertion_sort")),
        inputs={"pos": _pos(n), "key": _minmax(keys)},
        hints=hints,
        outputs={"chain": hints[-1]["chain_h"].copy()},
        T=len(hints),
    )


def gen_minimum(keys):
    """Left-to-right scan; hint t points at the argmin of the first t keys."""
    keys = np.asarray(keys, dtype=np.float64)
    n = keys.size
    if np.unique(keys).size != n:
        raise TaskError("keys must be distinct")
    hints = []
    best = 0
    for t in range(n):
        if keys[t] < keys[best]:
            best = t
        hints.append({"min_ptr_h": np.full(n, best, dtype=np.int64)})
    return Trace(
        graph=complete_graph(n),
        specs=list(_specs("minimum")),
        inputs={"pos": _pos(n), "key": _minmax(keys)},
        hints=hints,
        outputs={"min_ptr": np.full(n, best, dtype=np.int64)},
        T=n,
    )


def gen_binary_search(sorted_keys, target):
    """Inclusive-bounds bisection for the first key >= target.

    Hints per halving: one-hot masks at the low/high boundaries and the
    probed midpoint broadcast as a pointer. T >= 1 even when the search
    interval is already a single element.
    """
    keys = np.asarray(sorted_keys, dtype=np.float64)
    n = keys.size
    if n > 1 and (np.diff(keys) <= 0).any():
        raise TaskError("keys must be strictly increasing")
    if not keys.min() <= target <= keys.max():
        raise TaskError("target outside key range")
    lo, hi = 0, n - 1
    hints = []
    while lo < hi:
        mid = (lo + hi) // 2
        hints.append(
            {
                "low_h": _onehot_mask(n, lo),
                "high_h": _onehot_mask(n, hi),
                "mid_h": np.full(n, mid, dtype=np.int64),
            }
        )
        if keys[mid] < target:
            lo = mid + 1
        else:
            hi = mid
    if not hints:
        hints.append(
            {
                "low_h": _onehot_mask(n, lo),
                "high_h": _onehot_mask(n, hi),
                "mid_h": np.full(n, lo, dtype=np.int64),
            }
        )
    span = keys.max() - keys.min()
    t_norm = 0.5 if span == 0 else (target - keys.min()) / span
    return Trace(
        graph=complete_graph(n),
        specs=list(_specs("binary_search")),
        inputs={"pos": _pos(n), "key": _minmax(keys), "target": np.full(n, t_norm)},
        hints=hints,
        outputs={"ret": np.full(n, lo, dtype=np.int64)},
        T=len(hints),
    )


def gen_mst_prim(g, w, source):
    """Prim's algorithm from the source; one step per added node, T = n-1.

    Requires a connected undirected graph with distinct positive weights
    (unique MST). Hints: in-tree mask and tree parent pointers; nodes not
    yet in the tree point to themselves.
    """
    n = g.n
    w = np.asarray(w, dtype=np.float64)
    if not np.array_equal(g.adjacency, g.adjacency.T):
        raise TaskError("graph must be undirected")
    if g.m:
        live = w[g.adjacency]
        if (live <= 0).any():
            raise TaskError("weights must be positive on edges")
        upper = w[np.triu(g.adjacency, 1)]
        if np.unique(upper).size != upper.size:
            raise TaskError("weights must be distinct")
        if not np.allclose(w * g.adjacency, (w * g.adjacency).T):
            raise TaskError("weights must be symmetric")
    if not 0 <= source < n:
        raise TaskError(f"source {source} out of range")
    in_tree = np.zeros(n, dtype=bool)
    in_tree[source] = True
    parent = np.arange(n, dtype=np.int64)
    hints = []
    for _ in range(n - 1):
        cand = np.where(in_tree[:, None] & ~in_tree[None, :] & g.adjacency, w, np.inf)
        if np.isinf(cand.min()):
            raise TaskError("graph not connected")
        u, v = np.unravel_index(np.argmin(cand), cand.shape)
        parent[v] = u
        in_tree[v] = True
        hints.append({"in_tree_h": in_tree.astype(np.float64), "parent_h": parent.copy()})
    if not hints:
        hints.append({"in_tree_h": in_tree.astype(np.float64), "parent_h": parent.copy()})
    wmax = w[g.adjacency].max() if g.m else 1.0
    return Trace(
        graph=g,
        specs=list(_specs("mst_prim")),
        inputs={"pos": _pos(n), "source": _onehot_mask(n, source), "w": np.where(g.adjacency, w / wmax, 0.0)},
        hints=hints,
        outputs={"parent": parent.copy()},
        T=len(hints),
    )


# -- samplers --------------------------------------------------------------------


def _is_connected(adjacency):
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    while True:
        grown = seen | (adjacency[seen].any(axis=0))
        if (grown == seen).all():
            return seen.all()
        seen = grown


def _sample_connected_graph(rng, n, p):
    while True:
        g = random_graph(n, p, int(rng.integers(2**31)), undirected=True)
        if n == 1 or _is_connected(g.adjacency):
            return g


def _sym_weights(rng, g, lo, hi, distinct=False):
    n = g.n
    while True:
        raw = rng.uniform(lo, hi, (n, n))
        w = np.triu(raw, 1)
        w = w + w.T
        w = np.where(g.adjacency, w, 0.0)
        if not distinct:
            return w
        upper = w[np.triu(g.adjacency, 1)]
        if np.unique(upper).size == upper.size:
            return w


def _distinct_uniform(rng, n):
    while True:
        x = rng.uniform(0.0, 1.0, n)
        if np.unique(x).size == n:
            return x


def _sample_bfs(rng, n, p):
    g = random_graph(n, p, int(rng.integers(2**31)), undirected=True)
    return gen_bfs(g, int(rng.integers(n)))


def _sample_bellman_ford(rng, n, p):
    g = _sample_connected_graph(rng, n, p)
    w = _sym_weights(rng, g, 0.2, 1.0)
    return gen_bellman_ford(g, w, int(rng.integers(n)))


def _sample_insertion_sort(rng, n, p):
    return gen_insertion_sort(_distinct_uniform(rng, n))


def _sample_minimum(rng, n, p):
    return gen_minimum(_distinct_uniform(rng, n))


def _sample_binary_search(rng, n, p):
    keys = np.sort(_distinct_uniform(rng, n))
    target = rng.uniform(keys.min(), keys.max()) if n > 1 else float(keys[0])
    return gen_binary_search(keys, target)


def _sample_mst_prim(rng, n, p):
    g = _sample_connected_graph(rng, n, p)
    w = _sym_weights(rng, g, 0.2, 1.0, distinct=True)
    return gen_mst_prim(g, w, int(rng.integers(n)))


@dataclass(frozen=True)
class TaskSpec:
    """Task identity plus its probe layout and instance sampler."""

    task_id: str
    specs: tuple
    sampler: object
    p: float = 0.5  # edge probability for graph tasks; ignored by array tasks

    def sample(self, rng, n):
        return self.sampler(rng, n, self.p)


TASKS = {
    tid: TaskSpec(tid, _specs(tid), fn)
    for tid, fn in [
        ("bfs", _sample_bfs),
        ("bellman_ford", _sample_bellman_ford),
        ("insertion_sort", _sample_insertion_sort),
        ("minimum", _sample_minimum),
        ("binary_search", _sample_binary_search),
        ("mst_prim", _sample_mst_prim),
    ]
}


def sample_instance(task_id, rng, n_lo=N_TRAIN[0], n_hi=N_TRAIN[1]):
    """Draw one training/eval instance with n uniform in [n_lo, n_hi]."""
    if task_id not in TASKS:
        raise TaskError(f"unknown task {task_id!r}")
    n = int(rng.integers(n_lo, n_hi + 1))
    return TASKS[task_id].sample(rng, n)


def output_mirror_hints(task_id):
    """Map output probe -> hint probe that must equal it at the last step."""
    specs = TASKS[task_id].specs
    hint_names = {s.name for s in specs if s.stage == "hint"}
    return {
        s.name: s.name + "_h"
        for s in specs
        if s.stage == "output" and s.name + "_h" in hint_names
    }
