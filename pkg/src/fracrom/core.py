"""Shared domain types and geometric predicates for the crack-network models."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# Node ids reserved for the lateral sample edges.
LEFT = -1
RIGHT = -2

REFERENCE_LENGTH = 0.3  # m, initial crack length of the default problem


class CrackKind(str, Enum):
    INTERIOR = "interior"
    BOUNDARY_LEFT = "boundary_left"
    BOUNDARY_RIGHT = "boundary_right"


@dataclass(frozen=True)
class MaterialParams:
    """Concrete properties used across all models (SI units)."""

    rho: float = 2500.0
    E: float = 22.6e9
    G: float = 9.1e9
    nu: float = 0.24166
    sigma_u: float = 4.0e6
    v: float = 0.1

    def __post_init__(self):
        for name in ("rho", "E", "G", "nu", "sigma_u", "v"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.nu < 0.5:
            raise ValueError("poisson ratio must be below 0.5")


@dataclass(frozen=True)
class SampleGeometry:
    w: float = 2.0  # x-extent; failure spans this direction
    h: float = 3.0  # y-extent; load applied at y = h

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError("sample dimensions must be positive")


@dataclass(frozen=True)
class Crack:
    id: int
    cx: float
    cy: float
    length: float
    theta_deg: float
    kind: CrackKind = CrackKind.INTERIOR

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    @property
    def is_interior(self) -> bool:
        return self.kind is CrackKind.INTERIOR

    @property
    def theta_rad(self) -> float:
        return math.radians(self.theta_deg)


def boundary_crack(kind: CrackKind, geometry: SampleGeometry) -> Crack:
    """Zero-length, vertical pseudo-crack standing in for a lateral edge."""
    if kind is CrackKind.BOUNDARY_LEFT:
        return Crack(LEFT, 0.0, geometry.h / 2, 0.0, 90.0, kind)
    if kind is CrackKind.BOUNDARY_RIGHT:
        return Crack(RIGHT, geometry.w, geometry.h / 2, 0.0, 90.0, kind)
    raise ValueError("not a boundary kind")


@dataclass(frozen=True)
class Scenario:
    geometry: SampleGeometry
    material: MaterialParams
    cracks: tuple[Crack, ...]
    seed: int = 0

    def __post_init__(self):
        ids = [c.id for c in self.cracks]
        if len(set(ids)) != len(ids):
            raise ValueError("crack ids must be unique")
        n_boundary = sum(not c.is_interior for c in self.cracks)
        if n_boundary not in (0, 2):
            raise ValueError("expected exactly two boundary pseudo-cracks")

    @property
    def interior(self) -> tuple[Crack, ...]:
        return tuple(c for c in self.cracks if c.is_interior)

    @property
    def boundaries(self) -> tuple[Crack, ...]:
        return tuple(c for c in self.cracks if not c.is_interior)

    def crack(self, crack_id: int) -> Crack:
        for c in self.cracks:
            if c.id == crack_id:
                return c
        raise KeyError(crack_id)

    def with_boundaries(self) -> "Scenario":
        if self.boundaries:
            return self
        extra = (
            boundary_crack(CrackKind.BOUNDARY_LEFT, self.geometry),
            boundary_crack(CrackKind.BOUNDARY_RIGHT, self.geometry),
        )
        return Scenario(self.geometry, self.material, self.cracks + extra, self.seed)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        m = self.material
        return {
            "seed": self.seed,
            "geometry": {"w": self.geometry.w, "h": self.geometry.h},
            "material": {"rho": m.rho, "E": m.E, "G": m.G, "nu": m.nu,
                         "sigma_u": m.sigma_u, "v": m.v},
            "cracks": [
                {"id": c.id, "cx": c.cx, "cy": c.cy, "length": c.length,
                 "theta_deg": c.theta_deg, "kind": c.kind.value}
                for c in self.cracks
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        geometry = SampleGeometry(**d["geometry"])
        material = MaterialParams(**d["material"])
        cracks = tuple(
            Crack(int(c["id"]), float(c["cx"]), float(c["cy"]), float(c["length"]),
                  float(c["theta_deg"]), CrackKind(c.get("kind", "interior")))
            for c in d["cracks"]
        )
        return cls(geometry, material, cracks, int(d.get("seed", 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_json(Path(path).read_text())


@dataclass
class CrackGraph:
    """Undirected weighted graph with positioned nodes.

    ``payload`` maps node id to whatever the model attaches (crack id for
    crack-node graphs, ``(crack id, tip index)`` for tip graphs).
    """

    positions: dict[int, tuple[float, float]] = field(default_factory=dict)
    payload: dict[int, object] = field(default_factory=dict)
    adj: dict[int, dict[int, float]] = field(default_factory=dict)

    def add_node(self, node: int, position, payload=None) -> None:
        self.positions[node] = (float(position[0]), float(position[1]))
        self.payload[node] = payload
        self.adj.setdefault(node, {})

    def add_edge(self, u: int, v: int, weight: float) -> None:
        if u == v:
            raise ValueError("self-loops are not allowed")
        if weight < 0:
            raise ValueError("edge weights must be non-negative")
        self.adj[u][v] = float(weight)
        self.adj[v][u] = float(weight)

    @property
    def nodes(self) -> list[int]:
        return list(self.adj)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        out = []
        for u, nbrs in self.adj.items():
            for v, wt in nbrs.items():
                if u < v:
                    out.append((u, v, wt))
        return out

    def weight(self, u: int, v: int) -> float:
        return self.adj[u][v]

    def path_weight(self, path: Sequence[int]) -> float:
        return sum(self.adj[a][b] for a, b in zip(path, path[1:]))


@dataclass(frozen=True)
class FailurePath:
    crack_ids: tuple[int, ...] = ()
    spanning: bool = False

    def __post_init__(self):
        if len(set(self.crack_ids)) != len(self.crack_ids):
            raise ValueError("failure path contains duplicate cracks")

    @property
    def id_set(self) -> frozenset[int]:
        return frozenset(self.crack_ids)

    def to_dict(self) -> dict:
        return {"crack_ids": list(self.crack_ids), "spanning": self.spanning}

    @classmethod
    def from_dict(cls, d: dict | None) -> "FailurePath | None":
        if d is None:
            return None
        return cls(tuple(int(i) for i in d["crack_ids"]), bool(d["spanning"]))


def order_by_x(ids: Iterable[int], scenario: Scenario) -> tuple[int, ...]:
    """Interior crack ids sorted left to right by center x (ties by id)."""
    lookup = {c.id: c for c in scenario.interior}
    return tuple(sorted((i for i in ids if i in lookup),
                        key=lambda i: (lookup[i].cx, i)))


# -- geometric predicates ----------------------------------------------

def tip_positions(crack: Crack) -> tuple[tuple[float, float], tuple[float, float]]:
    """Both tips of an interior crack, smaller-x tip first (ties: smaller y)."""
    if not crack.is_interior:
        raise ValueError("no tips: boundary pseudo-crack")
    half = crack.length / 2
    dx = half * math.cos(crack.theta_rad)
    dy = half * math.sin(crack.theta_rad)
    a = (crack.cx - dx, crack.cy - dy)
    b = (crack.cx + dx, crack.cy + dy)
    return (a, b) if a <= b else (b, a)


def point_segment_distance(p, a, b) -> float:
    """Euclidean distance from point ``p`` to the closed segment ``a``-``b``."""
    px, py = p
    ax, ay = a
    bx, by = b
    ux, uy = bx - ax, by - ay
    denom = ux * ux + uy * uy
    if denom == 0.0:
        return math.hypot(px - ax, py - ay)
    s = ((px - ax) * ux + (py - ay) * uy) / denom
    s = min(1.0, max(0.0, s))
    return math.hypot(px - (ax + s * ux), py - (ay + s * uy))


def tip_to_body_distance(tip, target: Crack, geometry: SampleGeometry) -> float:
    if target.kind is CrackKind.BOUNDARY_LEFT:
        return abs(tip[0])
    if target.kind is CrackKind.BOUNDARY_RIGHT:
        return abs(tip[0] - geometry.w)
    a, b = tip_positions(target)
    return point_segment_distance(tip, a, b)


def crack_gap(a: Crack, b: Crack, geometry: SampleGeometry) -> float:
    """Minimum tip-to-body distance between two cracks, taken both ways."""
    if not (a.is_interior or b.is_interior):
        return geometry.w if a.kind != b.kind else 0.0
    best = math.inf
    for src, dst in ((a, b), (b, a)):
        if src.is_interior:
            for tip in tip_positions(src):
                best = min(best, tip_to_body_distance(tip, dst, geometry))
    return best


def horizontal_projection(crack: Crack) -> tuple[float, float]:
    half = 0.5 * crack.length * abs(math.cos(crack.theta_rad))
    return (crack.cx - half, crack.cx + half)


def merge_intervals(intervals: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    merged: list[list[float]] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def spans_width(intervals: Iterable[tuple[float, float]], geometry: SampleGeometry) -> bool:
    """True iff the union of the intervals covers ``[0, w]``."""
    for lo, hi in merge_intervals(intervals):
        if lo <= 0.0 and hi >= geometry.w:
            return True
    return False


def rotate_points(points: np.ndarray, angle: float, shift=(0.0, 0.0)) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return points @ rot.T + np.asarray(shift)


def scenario_hash(obj) -> str:
    import hashlib

    text = json.dumps(obj if not hasattr(obj, "__dataclass_fields__") else asdict(obj),
                      sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]
