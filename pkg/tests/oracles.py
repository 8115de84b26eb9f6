"""Independent reference algorithms used to cross-check trace generators.

Deliberately written with different data structures than the generators
(queues/heaps/union-find vs vectorized rounds) so agreement is meaningful.
"""
import heapq
from collections import deque

import numpy as np


def bfs_distances(adjacency, source):
    """Unweighted shortest hop counts; unreached nodes get -1."""
    n = adjacency.shape[0]
    dist = [-1] * n
    dist[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        for v in range(n):
            if adjacency[u][v] and dist[v] == -1:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def dijkstra(adjacency, w, source):
    """Shortest path weights with a binary heap; positive weights assumed."""
    n = adjacency.shape[0]
    dist = [float("inf")] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v in range(n):
            if adjacency[u][v] and d + w[u][v] < dist[v]:
                dist[v] = d + w[u][v]
                heapq.heappush(heap, (dist[v], v))
    return dist


def kruskal_weight(n, edges, w):
    """Total MST weight via union-find over undirected edges."""
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    undirected = sorted({(min(u, v), max(u, v)) for u, v in edges}, key=lambda e: w[e[0]][e[1]])
    total, used = 0.0, 0
    for u, v in undirected:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            total += w[u][v]
            used += 1
    if used != n - 1:
        raise ValueError("graph not connected")
    return total


def chain_order(chain):
    """Walk a predecessor chain (head points to itself) into ascending order."""
    chain = list(chain)
    n = len(chain)
    heads = [i for i in range(n) if chain[i] == i]
    assert len(heads) == 1, f"chain must have exactly one head, got {heads}"
    succ = {}
    for i in range(n):
        if chain[i] != i:
            assert chain[i] not in succ, "chain branches"
            succ[chain[i]] = i
    order = [heads[0]]
    while order[-1] in succ:
        order.append(succ[order[-1]])
    assert len(order) == n, "chain does not cover all nodes"
    return order


def linear_scan_geq(keys, target):
    """First index whose key is >= target."""
    for i, k in enumerate(keys):
        if k >= target:
            return i
    raise ValueError("target above all keys")


def parent_depths(parent, source):
    """Hop depth of each node by following parent pointers; self-parented
    non-source nodes are unreached (-1)."""
    n = len(parent)
    depth = [-1] * n
    depth[source] = 0
    for v in range(n):
        if depth[v] >= 0:
            continue
        path = []
        u = v
        while u != source and parent[u] != u and len(path) <= n:
            path.append(u)
            u = parent[u]
        if u == source or depth[u] >= 0:
            base = depth[u]
            for node in reversed(path):
                base += 1
                depth[node] = base
    return depth


def path_weight_to_source(pred, w, source, v):
    """Total weight walking predecessor pointers from v back to source."""
    total, u, hops = 0.0, v, 0
    while u != source:
        total += w[pred[u]][u]
        u = pred[u]
        hops += 1
        assert hops <= len(pred), "predecessor cycle"
    return total
