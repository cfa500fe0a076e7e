import math

import pytest

from fracrom.core import (Crack, CrackKind, MaterialParams, SampleGeometry, Scenario,
                          boundary_crack)


def make_scenario(cracks, w=2.0, h=3.0, seed=0) -> Scenario:
    """Scenario from (cx, cy, length, theta_deg) tuples; ids follow list order."""
    geom = SampleGeometry(w, h)
    interior = tuple(Crack(i, *row) for i, row in enumerate(cracks))
    edges = (boundary_crack(CrackKind.BOUNDARY_LEFT, geom),
             boundary_crack(CrackKind.BOUNDARY_RIGHT, geom))
    return Scenario(geom, MaterialParams(), interior + edges, seed)


def crack_from_tips(p, q):
    """(cx, cy, length, theta_deg) of the segment p-q."""
    dx, dy = q[0] - p[0], q[1] - p[1]
    return ((p[0] + q[0]) / 2, (p[1] + q[1]) / 2, math.hypot(dx, dy),
            math.degrees(math.atan2(dy, dx)) % 180.0)


@pytest.fixture
def scenario_factory():
    return make_scenario


def all_simple_paths(graph, source, target):
    """Every simple source-target path of a CrackGraph, by depth-first enumeration."""
    out = []

    def walk(node, path, seen):
        if node == target:
            out.append(tuple(path))
            return
        for nxt in graph.adj[node]:
            if nxt not in seen:
                seen.add(nxt)
                path.append(nxt)
                walk(nxt, path, seen)
                path.pop()
                seen.discard(nxt)

    walk(source, [source], {source})
    return out


ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Remember one acceptance verdict; all verdicts are listed at the end of the run."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
