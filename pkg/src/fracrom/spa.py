"""Shortest-path baseline: the cheapest width-spanning route through the cracks.

No training data and no failure time; the predicted failure path is the
minimum-weight route from the left to the right edge through a complete
graph whose edge weights are tip-to-body gaps.
"""
from __future__ import annotations

from .core import LEFT, RIGHT, CrackGraph, FailurePath, Scenario, crack_gap
from .graphs import dijkstra


def build_spa_graph(scenario: Scenario) -> CrackGraph:
    """Complete graph over interior cracks plus the two edge nodes."""
    scenario = scenario.with_boundaries()
    geom = scenario.geometry
    graph = CrackGraph()
    graph.add_node(LEFT, (0.0, geom.h / 2), LEFT)
    graph.add_node(RIGHT, (geom.w, geom.h / 2), RIGHT)
    interior = scenario.interior
    for c in interior:
        graph.add_node(c.id, c.center, c.id)
    graph.add_edge(LEFT, RIGHT, geom.w)
    left, right = scenario.crack(LEFT), scenario.crack(RIGHT)
    for k, a in enumerate(interior):
        graph.add_edge(LEFT, a.id, crack_gap(a, left, geom))
        graph.add_edge(a.id, RIGHT, crack_gap(a, right, geom))
        for b in interior[k + 1:]:
            graph.add_edge(a.id, b.id, crack_gap(a, b, geom))
    return graph


def shortest_failure_path(graph: CrackGraph) -> tuple[FailurePath, float]:
    """Minimum-weight left-to-right route; interior nodes listed in path order."""
    weight, path = dijkstra(graph, LEFT, RIGHT)
    return FailurePath(tuple(n for n in path if n not in (LEFT, RIGHT)), True), weight


def predict_spa(scenario: Scenario) -> FailurePath:
    path, _ = shortest_failure_path(build_spa_graph(scenario))
    return path


def path_band(scenario: Scenario, path: FailurePath) -> tuple[float, float] | None:
    """Vertical extent of the cracks on ``path`` (None when the path is empty)."""
    if not path.crack_ids:
        return None
    ys = [scenario.crack(i).cy for i in path.crack_ids]
    return min(ys), max(ys)


__all__ = ["build_spa_graph", "shortest_failure_path", "predict_spa", "path_band"]
