"""Network process-zone model.

Horizontal "seed" cracks and their nearest neighbours coalesce when the
neighbour sits inside the seed's process zone (a fixed fraction of the two
lengths). Linked cracks form failure zones; the predicted failure path is the
cheapest edge-to-edge route through a tip graph that passes through the
top-ranked zone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import (LEFT, RIGHT, Crack, CrackGraph, FailurePath, Scenario, crack_gap,
                   tip_positions, tip_to_body_distance)
from .graphs import UnionFind, dijkstra, shortest_simple_path_via

PZ_FACTOR = 0.3
EPSILON = 1e-6  # weight of an existing crack between its own tips


def pz_size(crack_i, crack_j, factor: float = PZ_FACTOR) -> float:
    """Process-zone size ``factor (l_i + l_j)``; accepts cracks or bare lengths."""
    li = crack_i.length if isinstance(crack_i, Crack) else float(crack_i)
    lj = crack_j.length if isinstance(crack_j, Crack) else float(crack_j)
    return factor * (li + lj)


def tip_gap(a: Crack, b: Crack) -> float:
    return min(math.dist(p, q) for p in tip_positions(a) for q in tip_positions(b))


def is_seed(crack: Crack, tolerance_deg: float = 1.0) -> bool:
    dev = abs(math.remainder(crack.theta_deg, 180.0))
    return crack.is_interior and dev <= tolerance_deg


@dataclass(frozen=True)
class NeighborLink:
    seed: int
    tip: int          # 0 = smaller-x tip, 1 = the other
    neighbor: int
    distance: float   # tip-to-body


@dataclass(frozen=True)
class PzPair:
    i: int
    j: int
    d12: float
    tip_gap: float
    coalesces: bool

    def __post_init__(self):
        if self.coalesces != (self.tip_gap <= self.d12):
            raise ValueError("coalesces must equal tip_gap <= d12")


@dataclass(frozen=True)
class FailureZone:
    members: tuple[int, ...]
    y_band: tuple[float, float]
    total_length: float


def seed_and_neighbors(scenario: Scenario, tolerance_deg: float = 1.0) -> list[NeighborLink]:
    """Nearest other interior crack (tip-to-body) for each tip of every seed."""
    geom = scenario.geometry
    interior = sorted(scenario.interior, key=lambda c: c.id)
    out = []
    for seed in interior:
        if not is_seed(seed, tolerance_deg):
            continue
        for k, tip in enumerate(tip_positions(seed)):
            best = None
            for other in interior:
                if other.id == seed.id:
                    continue
                cand = (tip_to_body_distance(tip, other, geom), other.id)
                if best is None or cand < best:
                    best = cand
            if best is not None:
                out.append(NeighborLink(seed.id, k, best[1], best[0]))
    return out


def candidate_pairs(scenario: Scenario, factor: float = PZ_FACTOR,
                    gap_metric: str = "tip_to_tip",
                    tolerance_deg: float = 1.0) -> list[PzPair]:
    if gap_metric not in ("tip_to_tip", "tip_to_body"):
        raise ValueError("gap_metric must be 'tip_to_tip' or 'tip_to_body'")
    seen, out = set(), []
    for link in seed_and_neighbors(scenario, tolerance_deg):
        key = (min(link.seed, link.neighbor), max(link.seed, link.neighbor))
        if key in seen:
            continue
        seen.add(key)
        a, b = scenario.crack(key[0]), scenario.crack(key[1])
        gap = tip_gap(a, b) if gap_metric == "tip_to_tip" else crack_gap(a, b, scenario.geometry)
        d12 = pz_size(a, b, factor)
        out.append(PzPair(key[0], key[1], d12, gap, gap <= d12))
    return out


def coalescence_clusters(scenario: Scenario, factor: float = PZ_FACTOR,
                         gap_metric: str = "tip_to_tip",
                         tolerance_deg: float = 1.0) -> list[FailureZone]:
    """Failure zones ranked by total member length, largest first."""
    links = [p for p in candidate_pairs(scenario, factor, gap_metric, tolerance_deg) if p.coalesces]
    uf = UnionFind()
    for p in links:
        uf.add(p.i)
        uf.add(p.j)
        uf.union(p.i, p.j)
    zones = []
    for group in uf.groups():
        members = tuple(sorted(group))
        cracks = [scenario.crack(i) for i in members]
        pad = max(c.length for c in cracks) / 2
        ys = [c.cy for c in cracks]
        zones.append(FailureZone(members, (min(ys) - pad, max(ys) + pad),
                                 float(sum(c.length for c in cracks))))
    zones.sort(key=lambda z: (-z.total_length, z.members))
    return zones


# -- tip graph -----------------------------------------------------------------

def tip_node(crack_id: int, tip: int) -> int:
    return 2 * crack_id + tip


def build_tip_graph(scenario: Scenario, epsilon: float = EPSILON) -> CrackGraph:
    """All tips plus the two edge nodes, with crack, gap and edge-approach weights."""
    geom = scenario.geometry
    graph = CrackGraph()
    graph.add_node(LEFT, (0.0, geom.h / 2), LEFT)
    graph.add_node(RIGHT, (geom.w, geom.h / 2), RIGHT)
    graph.add_edge(LEFT, RIGHT, geom.w)
    tips = []
    for c in sorted(scenario.interior, key=lambda c: c.id):
        a, b = tip_positions(c)
        for k, p in enumerate((a, b)):
            node = tip_node(c.id, k)
            graph.add_node(node, p, (c.id, k))
            graph.add_edge(LEFT, node, max(p[0], 0.0))
            graph.add_edge(node, RIGHT, max(geom.w - p[0], 0.0))
            tips.append((node, c.id, p))
        graph.add_edge(tip_node(c.id, 0), tip_node(c.id, 1), epsilon)
    for k, (u, cu, pu) in enumerate(tips):
        for v, cv, pv in tips[k + 1:]:
            if cu != cv:
                graph.add_edge(u, v, math.dist(pu, pv))
    return graph


def route_cracks(graph: CrackGraph, route) -> tuple[int, ...]:
    """Interior crack ids visited by a tip route, in first-visit order."""
    out = []
    for node in route:
        payload = graph.payload.get(node)
        if isinstance(payload, tuple) and payload[0] not in out:
            out.append(payload[0])
    return tuple(out)


@dataclass
class NfpzResult:
    paths: list[FailurePath]
    weights: list[float]
    routes: list[tuple[int, ...]]
    zones: list[FailureZone] = field(default_factory=list)
    fallback: bool = False  # True when no zone constrained the search

    @property
    def best(self) -> FailurePath:
        return self.paths[0]


def likely_failure_paths(scenario: Scenario, zones: list[FailureZone], k: int = 1,
                         epsilon: float = EPSILON) -> NfpzResult:
    """Top-``k`` edge-to-edge routes that pass through the top-ranked zone.

    Candidates are the best simple route through each tip of each top-zone
    crack; distinct crack sequences are ranked by weight.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    graph = build_tip_graph(scenario, epsilon)
    if not zones:
        weight, route = dijkstra(graph, LEFT, RIGHT)
        return NfpzResult([FailurePath(route_cracks(graph, route), True)], [weight],
                          [route], [], True)
    candidates = {}
    for cid in zones[0].members:
        for tip in (0, 1):
            weight, route = shortest_simple_path_via(graph, LEFT, RIGHT, tip_node(cid, tip))
            if weight == math.inf:
                continue
            cracks = route_cracks(graph, route)
            cand = (weight, cracks, route)
            if cracks not in candidates or cand < candidates[cracks]:
                candidates[cracks] = cand
    ranked = sorted(candidates.values())[:k]
    return NfpzResult([FailurePath(c, True) for _, c, _ in ranked], [w for w, _, _ in ranked],
                      [r for _, _, r in ranked], list(zones), False)


@dataclass
class NfpzConfig:
    factor: float = PZ_FACTOR
    gap_metric: str = "tip_to_tip"
    seed_tolerance_deg: float = 1.0
    k: int = 3
    epsilon: float = EPSILON

    def __post_init__(self):
        if self.factor < 0:
            raise ValueError("factor must be non-negative")
        if self.gap_metric not in ("tip_to_tip", "tip_to_body"):
            raise ValueError("gap_metric must be 'tip_to_tip' or 'tip_to_body'")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def predict_nfpz(scenario: Scenario, config: NfpzConfig | None = None) -> NfpzResult:
    config = config or NfpzConfig()
    zones = coalescence_clusters(scenario, config.factor, config.gap_metric,
                                 config.seed_tolerance_deg)
    return likely_failure_paths(scenario, zones, config.k, config.epsilon)
