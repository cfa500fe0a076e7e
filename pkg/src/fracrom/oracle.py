"""Rule-based reference simulator for quasi-static Mode I crack growth.

Stands in for the high-fidelity code as the source of training labels and
validation ground truth. The rules (defaults):

1. nominal stress ramps as ``sigma(t) = E v t / h``;
2. a crack's tips activate once ``sigma cos^2(theta) sqrt(L / l0) >= c0 sigma_U``,
   with ``L`` the crack's own current length (optionally its whole fracture);
3. active tips advance ``c_g cos^2(phi) sqrt(L) dt`` per step along their
   direction ``phi``, which points at the nearest free tip of another
   fracture inside the capture radius and is horizontal otherwise;
4. a tip whose position comes within ``kappa (l_1 + l_2)`` of another crack's
   body (or ``kappa l`` of a lateral edge) records a coalescence link; the
   tip stops when it touches a body or an edge (or, in "capture" mode, at
   its first link);
5. failure is the first step at which the links join both edges; the
   failure path is the route between the edges through the merge forest.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (LEFT, REFERENCE_LENGTH, RIGHT, Crack, FailurePath, MaterialParams,
                   SampleGeometry, Scenario, boundary_crack, CrackKind, order_by_x,
                   point_segment_distance, scenario_hash, tip_positions)
from .graphs import UnionFind, forest_path, replay_links

DORMANT, ACTIVE, ARRESTED = 0, 1, 2


class PlacementError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    dt: float = 2e-5
    n_steps: int = 350
    c0: float = 0.2825  # first 0-degree activation at 1.5 ms with default material
    c_g: float = 90.0  # ~25 of the 35 validation seeds fail within the horizon
    kappa: float = 0.3
    steer_factor: float = 1.0
    drive_length: str = "crack"  # "crack" or "fracture" (connected component total)
    relax: bool = False  # gradual return to horizontal instead of an immediate one
    arrest: str = "contact"  # "contact": link in passing, stop on touch; "capture": stop at first link
    snapshot_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.n_steps > 0:
            raise ValueError("n_steps must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.arrest not in ("contact", "capture"):
            raise ValueError("arrest must be 'contact' or 'capture'")
        if self.drive_length not in ("crack", "fracture"):
            raise ValueError("drive_length must be 'crack' or 'fracture'")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def digest(self) -> str:
        return scenario_hash(self)


def calibrate_onset(target_time: float, material: MaterialParams | None = None,
                    geometry: SampleGeometry | None = None) -> float:
    """Onset constant that activates a reference 0-degree crack at ``target_time``."""
    material = material or MaterialParams()
    geometry = geometry or SampleGeometry()
    return material.E * material.v * target_time / geometry.h / material.sigma_u


# -- scenario generation ---------------------------------------------------

def _segment_distance(a0, a1, b0, b1) -> float:
    def cross(o, p, q):
        return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])

    d1, d2 = cross(b0, b1, a0), cross(b0, b1, a1)
    d3, d4 = cross(a0, a1, b0), cross(a0, a1, b1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0:
        return 0.0
    return min(point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1),
               point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1))


def generate_scenario(seed: int, n_cracks: int = 20, crack_length: float = 0.3,
                      orientation_set: Sequence[float] = (0.0, 60.0, 120.0),
                      geometry: SampleGeometry | None = None,
                      material: MaterialParams | None = None,
                      margin: float = 0.1, min_separation: float = 0.05,
                      max_attempts: int = 10_000) -> Scenario:
    """Randomly place ``n_cracks`` non-touching cracks inside the sample."""
    if n_cracks < 0:
        raise ValueError("n_cracks must be non-negative")
    if not orientation_set:
        raise ValueError("orientation_set must be non-empty")
    geometry = geometry or SampleGeometry()
    material = material or MaterialParams()
    rng = np.random.default_rng(seed)
    placed: list[Crack] = []
    for i in range(n_cracks):
        for _ in range(max_attempts):
            cx = float(rng.uniform(0.0, geometry.w))
            cy = float(rng.uniform(0.0, geometry.h))
            theta = float(orientation_set[int(rng.integers(len(orientation_set)))])
            cand = Crack(i, cx, cy, crack_length, theta)
            a, b = tip_positions(cand)
            if min(a[0], b[0]) < margin or max(a[0], b[0]) > geometry.w - margin:
                continue
            if min(a[1], b[1]) < margin or max(a[1], b[1]) > geometry.h - margin:
                continue
            if all(_segment_distance(a, b, *tip_positions(o)) >= min_separation
                   for o in placed):
                placed.append(cand)
                break
        else:
            raise PlacementError(f"cannot place cracks (seed {seed}, crack {i})")
    cracks = tuple(placed) + (
        boundary_crack(CrackKind.BOUNDARY_LEFT, geometry),
        boundary_crack(CrackKind.BOUNDARY_RIGHT, geometry),
    )
    return Scenario(geometry, material, cracks, seed)


# -- traces ------------------------------------------------------------------

@dataclass(frozen=True)
class CoalescenceEvent:
    a: int  # crack whose tip arrived
    b: int  # crack (or edge id) that was reached
    t: float
    step: int

    @property
    def pair(self) -> tuple[int, int]:
        return (self.a, self.b) if self.b < 0 or self.a < self.b else (self.b, self.a)


@dataclass
class SimulationTrace:
    seed: int
    config_hash: str
    crack_ids: list[int]
    initial_lengths: np.ndarray        # (n,)
    times: np.ndarray                  # (S,)
    tips: np.ndarray                   # (S, 2n, 2); tips 2i, 2i+1 belong to crack i
    lengths: np.ndarray                # (S, n)
    status: np.ndarray                 # (S, 2n)
    events: list[CoalescenceEvent]
    failure_time: float | None
    failure_path: FailurePath | None
    dominant_path: FailurePath
    tip_paths: list[list[tuple[float, float]]] = field(default_factory=list)
    horizon: float = 0.0

    @property
    def failed(self) -> bool:
        return self.failure_time is not None

    @property
    def truth_path(self) -> FailurePath:
        return self.failure_path if self.failure_path is not None else self.dominant_path

    def accumulated_damage(self) -> list[tuple[float, float]]:
        return accumulated_damage(self)

    def link_edges(self) -> set[tuple[int, int]]:
        return {e.pair for e in self.events}

    # -- JSON-lines ---------------------------------------------------
    def to_jsonl(self) -> str:
        lines = [json.dumps({
            "type": "header", "seed": self.seed, "config_hash": self.config_hash,
            "crack_ids": self.crack_ids, "initial_lengths": self.initial_lengths.tolist(),
            "horizon": self.horizon,
        })]
        damage = accumulated_damage(self)
        for k, t in enumerate(self.times):
            lines.append(json.dumps({
                "type": "snapshot", "t": float(t),
                "tips": self.tips[k].ravel().tolist(),
                "lengths": self.lengths[k].tolist(),
                "status": self.status[k].tolist(),
                "damage": damage[k][1],
            }))
        for e in self.events:
            lines.append(json.dumps({"type": "event", "a": e.a, "b": e.b, "t": e.t,
                                     "step": e.step}))
        lines.append(json.dumps({
            "type": "summary", "failure_time": self.failure_time,
            "failure_path": None if self.failure_path is None else self.failure_path.to_dict(),
            "dominant_path": self.dominant_path.to_dict(),
            "tip_paths": [[list(p) for p in path] for path in self.tip_paths],
        }))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "SimulationTrace":
        header = None
        times, tips, lengths, status, events = [], [], [], [], []
        summary = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec["type"]
            if kind == "header":
                header = rec
            elif kind == "snapshot":
                times.append(rec["t"])
                tips.append(np.asarray(rec["tips"], float).reshape(-1, 2))
                lengths.append(rec["lengths"])
                status.append(rec["status"])
            elif kind == "event":
                events.append(CoalescenceEvent(rec["a"], rec["b"], rec["t"], rec["step"]))
            elif kind == "summary":
                summary = rec
        if header is None:
            raise ValueError("trace has no header line")
        n = len(header["crack_ids"])
        return cls(
            seed=header["seed"], config_hash=header["config_hash"],
            crack_ids=list(header["crack_ids"]),
            initial_lengths=np.asarray(header["initial_lengths"], float),
            times=np.asarray(times, float),
            tips=np.asarray(tips, float).reshape(len(times), 2 * n, 2),
            lengths=np.asarray(lengths, float).reshape(len(times), n),
            status=np.asarray(status, int).reshape(len(times), 2 * n),
            events=events,
            failure_time=summary.get("failure_time"),
            failure_path=FailurePath.from_dict(summary.get("failure_path")),
            dominant_path=FailurePath.from_dict(summary["dominant_path"]),
            tip_paths=[[tuple(p) for p in path] for path in summary.get("tip_paths", [])],
            horizon=header.get("horizon", 0.0),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def load(cls, path: str | Path) -> "SimulationTrace":
        return cls.from_jsonl(Path(path).read_text())


def accumulated_damage(trace: SimulationTrace) -> list[tuple[float, float]]:
    """Total new crack length at each snapshot."""
    grown = (trace.lengths - trace.initial_lengths[None, :]).sum(axis=1)
    return [(float(t), float(max(g, 0.0))) for t, g in zip(trace.times, grown)]


# -- simulation ----------------------------------------------------------------

def _closest_on_segments(p: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Distances from ``p`` to each segment ``a[i]``-``b[i]`` and the closest points."""
    u = b - a
    denom = np.einsum("ij,ij->i", u, u)
    s = np.einsum("ij,ij->i", p[None, :] - a, u) / np.where(denom > 0, denom, 1.0)
    s = np.clip(np.where(denom > 0, s, 0.0), 0.0, 1.0)
    q = a + s[:, None] * u
    return np.hypot(*(q - p[None, :]).T), q


def _relax(direction: np.ndarray, tip_index: int) -> np.ndarray:
    """Halve the angle between ``direction`` and the horizontal it points along."""
    dx, dy = direction
    if dx > 0 or (dx == 0 and tip_index % 2 == 1):
        target = 0.0
    else:
        target = math.pi
    phi = math.atan2(dy, dx)
    dev = math.remainder(phi - target, 2 * math.pi) / 2
    if abs(dev) < math.radians(0.5):
        dev = 0.0
    ang = target + dev
    return np.array([math.cos(ang), math.sin(ang)])


def _horizontal(direction: np.ndarray, tip_index: int) -> np.ndarray:
    dx = direction[0]
    if dx > 0 or (dx == 0 and tip_index % 2 == 1):
        return np.array([1.0, 0.0])
    return np.array([-1.0, 0.0])


class _State:
    def __init__(self, scenario: Scenario, config: OracleConfig):
        self.scenario = scenario
        self.config = config
        self.cracks = list(scenario.interior)
        n = len(self.cracks)
        self.n = n
        self.ids = [c.id for c in self.cracks]
        self.index = {cid: i for i, cid in enumerate(self.ids)}
        self.lengths = np.array([c.length for c in self.cracks], float)
        self.initial_lengths = self.lengths.copy()
        self.cos2 = np.array([math.cos(c.theta_rad) ** 2 for c in self.cracks])
        self.pos = np.zeros((2 * n, 2))
        self.dirs = np.zeros((2 * n, 2))
        self.status = np.zeros(2 * n, int)
        self.origin = []
        for i, c in enumerate(self.cracks):
            a, b = tip_positions(c)
            self.pos[2 * i], self.pos[2 * i + 1] = a, b
            self.origin.append((a, b))
            axis = np.subtract(b, a)
            norm = np.hypot(*axis)
            axis = axis / norm if norm > 0 else np.array([1.0, 0.0])
            self.dirs[2 * i], self.dirs[2 * i + 1] = -axis, axis
        self.paths = [[tuple(p)] for p in self.pos]
        self.last_dir = [None] * (2 * n)
        self.uf = UnionFind(self.ids + [LEFT, RIGHT])
        self.events: list[CoalescenceEvent] = []
        self.forest: list[tuple[int, int]] = []  # links that merged two fractures
        self.linked: set[frozenset] = set()

    def component_lengths(self) -> np.ndarray:
        totals: dict = {}
        for i, cid in enumerate(self.ids):
            root = self.uf.find(cid)
            totals[root] = totals.get(root, 0.0) + self.lengths[i]
        return np.array([totals[self.uf.find(cid)] for cid in self.ids])

    def move_tip(self, k: int, new_pos: np.ndarray, direction: np.ndarray) -> None:
        step = float(np.hypot(*(new_pos - self.pos[k])))
        if step <= 0:
            return
        same = self.last_dir[k] is not None and float(self.last_dir[k] @ direction) > 1 - 1e-12
        if same:
            self.paths[k][-1] = (float(new_pos[0]), float(new_pos[1]))
        else:
            self.paths[k].append((float(new_pos[0]), float(new_pos[1])))
        self.last_dir[k] = direction.copy()
        self.pos[k] = new_pos
        self.lengths[k // 2] += step

    def segments(self):
        """All body segments grouped by crack, with the start offset of each group."""
        starts, ends, offsets = [], [], []
        for i in range(self.n):
            offsets.append(len(starts))
            a, b = self.origin[i]
            starts.append(a)
            ends.append(b)
            for k in (2 * i, 2 * i + 1):
                path = self.paths[k]
                starts.extend(path[:-1])
                ends.extend(path[1:])
        return np.asarray(starts, float), np.asarray(ends, float), np.asarray(offsets, int)


def run_reference(scenario: Scenario, config: OracleConfig | None = None) -> SimulationTrace:
    """Evolve the crack network of ``scenario`` to the configured horizon."""
    config = config or OracleConfig()
    st = _State(scenario, config)
    geom, mat = scenario.geometry, scenario.material
    n = st.n
    threshold = config.c0 * mat.sigma_u
    kappa = config.kappa

    times, tips, lengths, status = [], [], [], []

    def snapshot(t):
        times.append(t)
        tips.append(st.pos.copy())
        lengths.append(st.lengths.copy())
        status.append(st.status.copy())

    snapshot(0.0)
    failure_time = None
    failure_path = None
    for step in range(1, config.n_steps + 1):
        t = step * config.dt
        sigma = mat.E * mat.v * t / geom.h
        comp_len = st.component_lengths() if config.drive_length == "fracture" else st.lengths.copy()

        # activation
        drive = sigma * st.cos2 * np.sqrt(comp_len / REFERENCE_LENGTH)
        for i in range(n):
            if drive[i] >= threshold:
                for k in (2 * i, 2 * i + 1):
                    if st.status[k] == DORMANT:
                        st.status[k] = ACTIVE

        active = np.flatnonzero(st.status == ACTIVE)
        if len(active) == 0:
            if step % config.snapshot_stride == 0:
                snapshot(t)
            continue

        # steering / relaxation and advance
        free = st.status != ARRESTED
        roots = np.array([st.uf.find(cid) for cid in st.ids])
        tip_roots = np.repeat(roots, 2)
        tip_owner = np.arange(2 * n) // 2
        steps = np.zeros(2 * n)
        for k in active:
            i = k // 2
            diff = st.pos - st.pos[k]
            dist = np.hypot(diff[:, 0], diff[:, 1])
            radius = config.steer_factor * kappa * (st.lengths[i] + st.lengths[tip_owner])
            mask = free & (dist <= radius) & (tip_roots != roots[i])
            if mask.any():
                cand = np.flatnonzero(mask)
                order = np.lexsort((cand // 2, dist[cand]))
                target = st.pos[cand[order[0]]]
                d = target - st.pos[k]
                direction = d / np.hypot(*d)
            elif config.relax:
                direction = _relax(st.dirs[k], k)
            else:
                direction = _horizontal(st.dirs[k], k)
            st.dirs[k] = direction
            ds = config.c_g * direction[0] ** 2 * math.sqrt(comp_len[i]) * config.dt
            steps[k] = ds
            st.move_tip(k, st.pos[k] + ds * direction, direction)

        # coalescence
        seg_a, seg_b, offsets = st.segments()
        ids = np.asarray(st.ids)
        for k in active:
            if config.arrest == "capture":
                _capture_and_arrest(st, k, t, step, seg_a, seg_b, offsets, ids, geom, kappa)
            else:
                _capture_in_passing(st, k, t, step, seg_a, seg_b, offsets, ids, geom, kappa,
                                    steps[k])

        if failure_time is None and st.uf.connected(LEFT, RIGHT):
            failure_time = t
            _, route, _ = replay_links([(e.t, e.a, e.b) for e in st.events], LEFT, RIGHT)
            failure_path = FailurePath(order_by_x(route, scenario), True)

        if step % config.snapshot_stride == 0:
            snapshot(t)

    dominant = _dominant_component(st, scenario)
    return SimulationTrace(
        seed=scenario.seed, config_hash=config.digest(), crack_ids=list(st.ids),
        initial_lengths=st.initial_lengths, times=np.asarray(times),
        tips=np.asarray(tips).reshape(len(times), 2 * n, 2),
        lengths=np.asarray(lengths).reshape(len(times), n),
        status=np.asarray(status, int).reshape(len(times), 2 * n),
        events=st.events, failure_time=failure_time, failure_path=failure_path,
        dominant_path=dominant, tip_paths=[list(p) for p in st.paths],
        horizon=config.horizon,
    )


def _record(st: _State, i: int, target: int, t: float, step: int) -> None:
    st.events.append(CoalescenceEvent(st.ids[i], target, t, step))
    st.linked.add(frozenset((st.ids[i], target)))
    if st.uf.union(st.ids[i], target):
        st.forest.append((st.ids[i], target))


def _capture_and_arrest(st, k, t, step, seg_a, seg_b, offsets, ids, geom, kappa):
    """Bridge to the closest crack of another fracture inside the capture radius and stop."""
    n = st.n
    i = k // 2
    p = st.pos[k]
    dists, closest = _closest_on_segments(p, seg_a, seg_b)
    per_crack = np.minimum.reduceat(dists, offsets)
    hit = per_crack <= kappa * (st.lengths[i] + st.lengths)
    own = st.uf.find(st.ids[i])
    hit &= np.array([st.uf.find(cid) != own for cid in st.ids])
    best = None  # (distance, target id, contact point)
    if hit.any():
        cand_j = np.flatnonzero(hit)
        j = cand_j[np.lexsort((ids[cand_j], per_crack[cand_j]))[0]]
        stop = offsets[j + 1] if j + 1 < n else len(dists)
        m = offsets[j] + int(np.argmin(dists[offsets[j]:stop]))
        best = (float(dists[m]), st.ids[j], closest[m])
    for edge, dx, x_edge in ((LEFT, p[0], 0.0), (RIGHT, geom.w - p[0], geom.w)):
        if dx <= kappa * st.lengths[i] and st.uf.find(edge) != own:
            cand = (float(max(dx, 0.0)), edge, np.array([x_edge, p[1]]))
            if best is None or cand[:2] < best[:2]:
                best = cand
    if best is None:
        if p[0] <= 0.0 or p[0] >= geom.w:
            # already linked to this edge through its fracture
            _clamp_to_edge(st, k, geom)
        return
    dist, target, contact = best
    if dist > 0:
        d = contact - p
        st.move_tip(k, contact.astype(float), d / np.hypot(*d))
    st.status[k] = ARRESTED
    _record(st, i, target, t, step)


def _clamp_to_edge(st, k, geom):
    st.pos[k][0] = min(max(st.pos[k][0], 0.0), geom.w)
    st.paths[k][-1] = (float(st.pos[k][0]), float(st.pos[k][1]))
    st.status[k] = ARRESTED


def _capture_in_passing(st, k, t, step, seg_a, seg_b, offsets, ids, geom, kappa, ds):
    """Link every crack whose body comes inside the capture radius; stop only on contact."""
    n = st.n
    i = k // 2
    p = st.pos[k]
    me = st.ids[i]
    dists, closest = _closest_on_segments(p, seg_a, seg_b)
    per_crack = np.minimum.reduceat(dists, offsets)
    per_crack[i] = np.inf
    hit = np.flatnonzero(per_crack <= kappa * (st.lengths[i] + st.lengths))
    for j in hit[np.lexsort((ids[hit], per_crack[hit]))]:
        if frozenset((me, st.ids[j])) not in st.linked:
            _record(st, i, st.ids[j], t, step)
    for edge, dx in ((LEFT, p[0]), (RIGHT, geom.w - p[0])):
        if dx <= kappa * st.lengths[i] and frozenset((me, edge)) not in st.linked:
            _record(st, i, edge, t, step)
    if p[0] <= 0.0 or p[0] >= geom.w:
        _clamp_to_edge(st, k, geom)
        return
    j = int(np.argmin(per_crack)) if n > 1 else -1
    if j >= 0 and per_crack[j] <= ds:
        stop = offsets[j + 1] if j + 1 < n else len(dists)
        m = offsets[j] + int(np.argmin(dists[offsets[j]:stop]))
        if dists[m] > 0:
            d = closest[m] - p
            st.move_tip(k, closest[m].astype(float), d / np.hypot(*d))
        st.status[k] = ARRESTED


def _dominant_component(st: _State, scenario: Scenario) -> FailurePath:
    """Route across the fracture with the widest x-extent (ties by total length).

    The route runs through the merge forest from the member reaching furthest
    left (or the left edge) to the one reaching furthest right.
    """
    if st.n == 0:
        return FailurePath((), False)
    groups: dict = {}
    for i, cid in enumerate(st.ids):
        groups.setdefault(st.uf.find(cid), []).append(i)
    best = None
    for root, members in groups.items():
        lo, lo_id, hi, hi_id = math.inf, None, -math.inf, None
        for i in members:
            xs = [st.origin[i][0][0], st.origin[i][1][0]]
            xs.extend(p[0] for k in (2 * i, 2 * i + 1) for p in st.paths[k])
            if min(xs) < lo:
                lo, lo_id = min(xs), st.ids[i]
            if max(xs) > hi:
                hi, hi_id = max(xs), st.ids[i]
        if st.uf.find(LEFT) == root:
            lo, lo_id = 0.0, LEFT
        if st.uf.find(RIGHT) == root:
            hi, hi_id = scenario.geometry.w, RIGHT
        key = (hi - lo, float(st.lengths[members].sum()), -min(st.ids[i] for i in members))
        if best is None or key > best[0]:
            best = (key, lo_id, hi_id)
    _, lo_id, hi_id = best
    _, _, forest = replay_links([(e.t, e.a, e.b) for e in st.events], LEFT, RIGHT, stop=False)
    route = forest_path(forest, lo_id, hi_id) if lo_id != hi_id else (lo_id,)
    spanning = lo_id == LEFT and hi_id == RIGHT
    return FailurePath(order_by_x(route, scenario), spanning)

def link_degrees(edges, members: set[int] | None = None) -> dict[int, int]:
    nbrs: dict[int, set] = {}
    for a, b in edges:
        if members is not None and not (a in members and b in members):
            continue
        nbrs.setdefault(a, set()).add(b)
        nbrs.setdefault(b, set()).add(a)
    return {k: len(v) for k, v in nbrs.items()}
