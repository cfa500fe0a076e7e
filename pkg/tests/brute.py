"""Exhaustive reference searches used as test oracles.

Depth-first enumeration of simple paths; a partial path is abandoned only
when an admissible lower bound (all-pairs shortest distances, which no
simple completion can beat) proves it cannot improve on the best so far.
"""
import math

import numpy as np


def all_pairs(graph):
    nodes = graph.nodes
    index = {v: i for i, v in enumerate(nodes)}
    n = len(nodes)
    d = np.full((n, n), math.inf)
    np.fill_diagonal(d, 0.0)
    for u, v, w in graph.edges:
        d[index[u], index[v]] = d[index[v], index[u]] = min(w, d[index[u], index[v]])
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return index, d


def best_simple_path(graph, source, target, must_visit=()):
    """Minimum weight over simple source-target paths visiting at least one of ``must_visit``."""
    index, d = all_pairs(graph)
    must = set(must_visit)
    t = index[target]
    best = [math.inf]

    def bound(node, satisfied):
        if satisfied:
            return d[index[node], t]
        return min((d[index[node], index[z]] + d[index[z], t] for z in must), default=math.inf)

    def walk(node, cost, seen, satisfied):
        if cost + bound(node, satisfied) >= best[0] + 1e-15:
            return
        if node == target:
            if satisfied:
                best[0] = cost
            return
        for nxt, w in sorted(graph.adj[node].items(), key=lambda kv: kv[1]):
            if nxt not in seen:
                seen.add(nxt)
                walk(nxt, cost + w, seen, satisfied or nxt in must)
                seen.discard(nxt)

    walk(source, 0.0, {source}, not must or source in must)
    return best[0]
