"""Graph algorithms shared by the path-based models.

All graphs are :class:`~fracrom.core.CrackGraph` instances with integer node
ids and non-negative weights.
"""
from __future__ import annotations

import heapq
import math
from collections import defaultdict
from typing import Hashable, Iterable

from .core import CrackGraph


class UnionFind:
    """Disjoint-set forest over arbitrary hashable elements."""

    def __init__(self, elements: Iterable[Hashable] = ()):
        self.parent: dict = {}
        self.rank: dict = {}
        for e in elements:
            self.add(e)

    def add(self, e) -> None:
        if e not in self.parent:
            self.parent[e] = e
            self.rank[e] = 0

    def find(self, e):
        root = e
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[e] != root:
            self.parent[e], e = root, self.parent[e]
        return root

    def union(self, a, b) -> bool:
        """Merge the sets of ``a`` and ``b``; False if already joined."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True

    def connected(self, a, b) -> bool:
        return self.find(a) == self.find(b)

    def groups(self) -> list[list]:
        out = defaultdict(list)
        for e in self.parent:
            out[self.find(e)].append(e)
        return list(out.values())


def dijkstra(graph: CrackGraph, source: int, target: int,
             banned: frozenset[int] = frozenset()) -> tuple[float, tuple[int, ...]]:
    """Shortest path with ties broken by the lexicographically smallest node sequence.

    Returns ``(inf, ())`` when ``target`` is unreachable.
    """
    best: dict[int, tuple[float, tuple[int, ...]]] = {source: (0.0, (source,))}
    heap = [(0.0, (source,))]
    done = set()
    while heap:
        dist, path = heapq.heappop(heap)
        node = path[-1]
        if node in done or best[node] != (dist, path):
            continue
        done.add(node)
        if node == target:
            return dist, path
        for nbr, wt in graph.adj[node].items():
            if nbr in done or nbr in banned:
                continue
            cand = (dist + wt, path + (nbr,))
            if nbr not in best or cand < best[nbr]:
                best[nbr] = cand
                heapq.heappush(heap, cand)
    return math.inf, ()


def _residual_dijkstra(n: int, arcs: list[list], out_arcs: list[list[int]],
                       potential: list[float], source: int):
    """Dijkstra on reduced costs; valid while ``potential`` keeps them non-negative."""
    dist = [math.inf] * n
    prev = [-1] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for idx in out_arcs[u]:
            _, v, cap, cost, _rev = arcs[idx]
            if cap <= 0:
                continue
            nd = d + cost + potential[u] - potential[v]
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = idx
                heapq.heappush(heap, (nd, v))
    return dist, prev


def shortest_simple_path_via(graph: CrackGraph, source: int, target: int,
                             waypoint: int) -> tuple[float, tuple[int, ...]]:
    """Minimum-weight simple ``source``-``target`` path visiting ``waypoint``.

    Solved exactly as a two-unit min-cost flow from the waypoint to the two
    endpoints with unit node capacities, so the two legs are vertex-disjoint.
    """
    if waypoint in (source, target):
        return dijkstra(graph, source, target)

    nodes = graph.nodes
    index = {v: i for i, v in enumerate(nodes)}
    n_orig = len(nodes)
    # v_in = 2i, v_out = 2i + 1, sink = 2n
    sink = 2 * n_orig
    arcs: list[list] = []

    def add_arc(u, v, cost):
        arcs.append([u, v, 1, cost, len(arcs) + 1])
        arcs.append([v, u, 0, -cost, len(arcs) - 1])

    for v in nodes:
        if v != waypoint:
            add_arc(2 * index[v], 2 * index[v] + 1, 0.0)
    for u, v, wt in graph.edges:
        add_arc(2 * index[u] + 1, 2 * index[v], wt)
        add_arc(2 * index[v] + 1, 2 * index[u], wt)
    add_arc(2 * index[source] + 1, sink, 0.0)
    add_arc(2 * index[target] + 1, sink, 0.0)

    n_flow = sink + 1
    out_arcs: list[list[int]] = [[] for _ in range(n_flow)]
    for idx, arc in enumerate(arcs):
        out_arcs[arc[0]].append(idx)

    start = 2 * index[waypoint] + 1
    potential = [0.0] * n_flow
    for _ in range(2):
        dist, prev = _residual_dijkstra(n_flow, arcs, out_arcs, potential, start)
        if dist[sink] == math.inf:
            return math.inf, ()
        potential = [p + d if d < math.inf else p for p, d in zip(potential, dist)]
        v = sink
        while v != start:
            arc = arcs[prev[v]]
            arc[2] -= 1
            arcs[arc[4]][2] += 1
            v = arc[0]

    # Saturated forward arcs (original cap 1, now 0) carry the flow.
    flow_next: dict[int, list[int]] = defaultdict(list)
    for i in range(0, len(arcs), 2):
        u, v, cap, _cost, _ = arcs[i]
        if cap == 0:
            flow_next[u].append(v)

    legs = []
    for first in flow_next[start]:
        leg = [waypoint]
        v = first
        while v != sink:
            if v % 2 == 0:
                leg.append(nodes[v // 2])
            v = flow_next[v][0]
        legs.append(leg)
    by_end = {leg[-1]: leg for leg in legs}
    path = tuple(reversed(by_end[source])) + tuple(by_end[target][1:])
    return graph.path_weight(path), path


def forest_path(edges, source, target) -> tuple | None:
    """Unique ``source``-``target`` path in a forest given by ``edges`` (None if disjoint)."""
    nbrs = defaultdict(list)
    for a, b in edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    prev = {source: None}
    queue = [source]
    for node in queue:
        if node == target:
            break
        for nxt in sorted(nbrs[node]):
            if nxt not in prev:
                prev[nxt] = node
                queue.append(nxt)
    if target not in prev:
        return None
    path = [target]
    while path[-1] != source:
        path.append(prev[path[-1]])
    return tuple(reversed(path))


def spanning_core(links, source, target) -> set:
    """Nodes that lie on at least one simple ``source``-``target`` path through ``links``."""
    graph = CrackGraph()
    for a, b in links:
        if a == b:
            continue
        for v in (a, b):
            if v not in graph.adj:
                graph.add_node(v, (0.0, 0.0), v)
        graph.add_edge(a, b, 1.0)
    if source not in graph.adj or target not in graph.adj:
        return set()
    if dijkstra(graph, source, target)[0] == math.inf:
        return set()
    core = {source, target}
    for v in graph.nodes:
        if v not in core and shortest_simple_path_via(graph, source, target, v)[0] < math.inf:
            core.add(v)
    return core


def replay_links(events, source, target, nodes=(), stop: bool = True):
    """Replay ``(t, a, b)`` links in (t, pair) order until ``source`` meets ``target``.

    Returns ``(t_join, route, forest)``; ``t_join`` is None and ``route`` empty
    when the two never join. With ``stop=False`` the forest covers every event.
    """
    uf = UnionFind(list(nodes) + [source, target])
    forest = []
    join = None
    for t, a, b in sorted(events, key=lambda e: (e[0], min(e[1], e[2]), max(e[1], e[2]))):
        uf.add(a)
        uf.add(b)
        if uf.union(a, b):
            forest.append((a, b))
            if join is None and uf.connected(source, target):
                join = t
                if stop:
                    break
    if join is None:
        return None, (), forest
    return join, forest_path(forest, source, target), forest
