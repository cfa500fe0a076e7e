"""Ellipse process-zone model.

Each crack tip is a node joined to the opposite end of its crack. Tips with a
high growth factor carry an elliptical process zone with one vertex at the
tip; a tip that sees another tip inside its zone turns towards it, otherwise
it relaxes towards horizontal. Active tips advance by ``c_L (1 + a)`` per
macro step. Failure is the first step at which both lateral edges belong to
one connected fracture.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (LEFT, RIGHT, FailurePath, MaterialParams, SampleGeometry, Scenario,
                   order_by_x, tip_positions)
from .graphs import UnionFind, replay_links
from .ml.optimize import lsq_minimize

FORMAT = "fracrom.epz/1"
GAMMA_START = 5.0
GAMMA_END = 15.0
DX_FLOOR = 1e-3  # m; keeps the growth factor finite at the lateral edges


@dataclass
class EpzParams:
    gamma_slope: float = 1.0   # multiplier on the 5 -> 15 ramp over the horizon
    e: float = 0.5             # eccentricity
    c_l: float = 0.02          # propagation constant: dL = c_l (1 + a)
    dt: float = 1e-4           # macro step, s
    horizon: float = 0.007     # s
    strict_cutoff: bool = False
    printed_conic: bool = False     # evaluate the zone with the printed cross-term signs
    normalize_radius: bool = False  # scale zones by C^f / max C^f instead of C^f

    def __post_init__(self):
        if not 0.0 < self.e < 1.0:
            raise ValueError("eccentricity must lie in (0, 1)")
        if self.c_l < 0:
            raise ValueError("propagation constant must be non-negative")
        if self.gamma_slope < 0:
            raise ValueError("gamma slope must be non-negative")
        if not (self.dt > 0 and self.horizon > 0):
            raise ValueError("macro step and horizon must be positive")

    def gamma(self, t: float) -> float:
        """Zone scale, linear from 5 at t=0 to 15 at the horizon (slope 1), capped at 15."""
        ramp = GAMMA_START + self.gamma_slope * (GAMMA_END - GAMMA_START) * t / self.horizon
        return min(ramp, GAMMA_END)

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def to_dict(self) -> dict:
        return {"format": FORMAT, **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "EpzParams":
        if d.get("format") != FORMAT:
            raise ValueError(f"unexpected model format {d.get('format')!r}")
        return cls(**{k: v for k, v in d.items() if k != "format"})


@dataclass
class EpzNode:
    id: int
    x: float
    y: float
    partner: int        # node at the other end of this crack
    theta: float        # orientation, degrees in [0, 180)
    active: bool
    lineage: int        # initial crack id

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class EllipsePZ:
    cx: float
    cy: float
    r: float            # semi-major
    b: float            # semi-minor
    theta: float        # degrees
    printed: bool = False


# -- constitutive pieces ---------------------------------------------------

def crack_growth_factor(a: float, theta_deg: float, d_y: float, d_x: float,
                        material: MaterialParams | None = None,
                        geometry: SampleGeometry | None = None) -> float:
    """Heuristic growth propensity with unit proportionality factor."""
    m = material or MaterialParams()
    g = geometry or SampleGeometry()
    d_x = max(d_x, DX_FLOOR)
    c = math.cos(math.radians(theta_deg))
    return (d_y * m.v * m.E * math.sqrt(max(a, 0.0)) * c * c) / (g.h * g.w * m.sigma_u * m.rho * d_x)


def node_growth_factor(node: EpzNode, a: float, material: MaterialParams,
                       geometry: SampleGeometry) -> float:
    d_y = max(geometry.h - node.y, 0.0)
    d_x = min(node.x, geometry.w - node.x)
    return crack_growth_factor(a, node.theta, d_y, d_x, material, geometry)


def active_set(factors: dict[int, float], strict: bool = False) -> set[int]:
    """Nodes whose normalized factor clears the (max + mean) / 2 cutoff."""
    if not factors:
        return set()
    values = np.array(list(factors.values()), float)
    top = float(values.max())
    if top <= 0:
        return set()
    cut = (top + float(values.mean())) / 2 / top
    out = set()
    for node, f in factors.items():
        p = f / top
        if f > 0 and (p > cut if strict else p >= cut):
            out.add(node)
    return out


def ellipse_for(tip, partner, scale: float, gamma: float, e: float,
                printed: bool = False) -> EllipsePZ:
    """Zone with one vertex at ``tip``, major axis along the chord, pointing away from ``partner``.

    ``scale`` is the growth factor entering the semi-major axis
    ``r = scale * a * gamma`` with ``a`` the chord length.
    """
    dx, dy = partner[0] - tip[0], partner[1] - tip[1]
    a = math.hypot(dx, dy)
    if a == 0:
        raise ValueError("degenerate crack")
    nx, ny = dx / a, dy / a
    r = scale * a * gamma
    theta = math.degrees(math.atan2(ny, nx)) % 180.0
    return EllipsePZ(tip[0] - nx * r, tip[1] - ny * r, r, 2 * r * (1 - e), theta, printed)


def conic_value(point, ell: EllipsePZ) -> float:
    u, v = point[0] - ell.cx, point[1] - ell.cy
    c, s = math.cos(math.radians(ell.theta)), math.sin(math.radians(ell.theta))
    major = u * c + v * s
    minor = u * s + v * c if ell.printed else -u * s + v * c
    if ell.r == 0:
        return 0.0 if u == 0 and v == 0 else math.inf
    if ell.b == 0:
        return (major / ell.r) ** 2 if abs(minor) <= 1e-12 else math.inf
    return (major / ell.r) ** 2 + (minor / ell.b) ** 2


def in_ellipse(point, ell: EllipsePZ, tol: float = 1e-9) -> bool:
    return conic_value(point, ell) <= 1.0 + tol


def _line_angle(dx: float, dy: float) -> float:
    return math.degrees(math.atan2(dy, dx)) % 180.0


def update_orientation(node_pos, theta: float, target=None, a_mn: float = 0.0,
                       a_pq: float = 0.0, theta_p: float = 0.0) -> float:
    """New orientation in [0, 180) degrees.

    Towards a detected tip the orientation is the direction to it; when that
    leans more than 45 degrees from horizontal the length-scaled blend
    ``(a_mn theta + a_pq theta_p) / 2`` is used. With no target the
    orientation is halved.
    """
    if target is None:
        return (theta / 2.0) % 180.0
    ang = _line_angle(target[0] - node_pos[0], target[1] - node_pos[1])
    if min(ang, 180.0 - ang) > 45.0:
        ang = (a_mn * ang + a_pq * theta_p) / 2.0
    return ang % 180.0


def propagation_length(a_mn: float, c_l: float) -> float:
    return c_l * (1.0 + a_mn)


# -- state -------------------------------------------------------------------

@dataclass
class EpzEvent:
    kind: str           # "create" | "deactivate" | "coalesce" | "edge"
    t: float
    node: int
    other: int | None = None
    x: float | None = None
    y: float | None = None


@dataclass
class EpzState:
    scenario: Scenario
    nodes: dict[int, EpzNode]
    ends: dict[int, list[int]]               # lineage -> its two current end nodes
    links: list[tuple[float, int, int]] = field(default_factory=list)  # (t, lineage|edge, lineage|edge)
    log: list[EpzEvent] = field(default_factory=list)
    uf: UnionFind = field(default_factory=UnionFind)
    next_id: int = 0

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "EpzState":
        nodes, ends = {}, {}
        uf = UnionFind([LEFT, RIGHT])
        for c in sorted(scenario.interior, key=lambda c: c.id):
            ids = []
            theta = c.theta_deg % 180.0
            for k, p in enumerate(tip_positions(c)):
                nid = 2 * c.id + k
                nodes[nid] = EpzNode(nid, float(p[0]), float(p[1]), 2 * c.id + 1 - k, theta,
                                     True, c.id)
                ids.append(nid)
            ends[c.id] = ids
            uf.add(c.id)
        next_id = max(nodes) + 1 if nodes else 0
        return cls(scenario, nodes, ends, uf=uf, next_id=next_id)

    def partner_of(self, node: EpzNode) -> EpzNode:
        a, b = self.ends[node.lineage]
        return self.nodes[b if a == node.id else a]

    def chord(self, node: EpzNode) -> float:
        p = self.partner_of(node)
        return math.dist(node.position, p.position)

    def alive(self) -> list[EpzNode]:
        return [self.nodes[k] for k in sorted(self.nodes) if self.nodes[k].active]

    def link(self, t: float, a: int, b: int) -> None:
        self.links.append((t, a, b))
        self.uf.add(a)
        self.uf.add(b)
        self.uf.union(a, b)

    def failed(self) -> bool:
        return self.uf.connected(LEFT, RIGHT)


def _deactivate(state: EpzState, node: EpzNode, t: float) -> None:
    node.active = False
    state.log.append(EpzEvent("deactivate", t, node.id))


def _touch_edge(state: EpzState, node: EpzNode, t: float) -> bool:
    w = state.scenario.geometry.w
    edge = LEFT if node.x <= 0.0 else RIGHT if node.x >= w else None
    if edge is None:
        return False
    node.x = min(max(node.x, 0.0), w)
    _deactivate(state, node, t)
    state.log.append(EpzEvent("edge", t, node.id, edge, node.x, node.y))
    state.link(t, node.lineage, edge)
    return True


def initial_contacts(state: EpzState, t: float) -> None:
    for node in state.alive():
        _touch_edge(state, node, t)


def step_epz(state: EpzState, t: float, params: EpzParams) -> EpzState:
    """Advance every node of the active set by one macro step at time ``t``."""
    scenario = state.scenario
    geom, mat = scenario.geometry, scenario.material
    alive = state.alive()
    if not alive:
        return state
    chords = {n.id: state.chord(n) for n in alive}
    factors = {n.id: node_growth_factor(n, chords[n.id], mat, geom) for n in alive}
    growing = active_set(factors, params.strict_cutoff)
    if not growing:
        return state
    top = max(factors.values())
    gamma = params.gamma(t)

    def zone(n: EpzNode) -> EllipsePZ | None:
        if chords[n.id] == 0:
            return None
        scale = factors[n.id] / top if params.normalize_radius else factors[n.id]
        return ellipse_for(n.position, state.partner_of(n).position, scale, gamma,
                           params.e, params.printed_conic)

    zones = {n.id: zone(n) for n in alive}
    for nid in sorted(growing):
        node = state.nodes[nid]
        if not node.active:
            continue  # consumed by an earlier coalescence this step
        ell = zones[nid]
        if ell is None:
            continue
        root = state.uf.find(node.lineage)
        target = None
        for other in state.alive():
            if other.id == nid or state.uf.find(other.lineage) == root:
                continue
            if in_ellipse(other.position, ell):
                target = other
                break
        a_mn = chords[nid]
        dl = propagation_length(a_mn, params.c_l)
        if target is not None:
            other_zone = zones.get(target.id)
            mutual = other_zone is not None and in_ellipse(node.position, other_zone)
            if mutual or math.dist(node.position, target.position) <= dl:
                _deactivate(state, node, t)
                _deactivate(state, target, t)
                state.log.append(EpzEvent("coalesce", t, node.id, target.id))
                state.link(t, node.lineage, target.lineage)
                continue
        if dl <= 0:
            continue
        if target is not None:
            theta = update_orientation(node.position, node.theta, target.position, a_mn,
                                       chords.get(target.id, state.chord(target)), target.theta)
            sense = (target.x - node.x, target.y - node.y)
        else:
            theta = update_orientation(node.position, node.theta)
            partner = state.partner_of(node)
            sense = (node.x - partner.x, node.y - partner.y)
        ux, uy = math.cos(math.radians(theta)), math.sin(math.radians(theta))
        if ux * sense[0] + uy * sense[1] < 0:
            ux, uy = -ux, -uy
        daughter = EpzNode(state.next_id, node.x + dl * ux, node.y + dl * uy, -1, theta,
                           True, node.lineage)
        state.next_id += 1
        _deactivate(state, node, t)
        ends = state.ends[node.lineage]
        ends[ends.index(nid)] = daughter.id
        daughter.partner = ends[0] if ends[1] == daughter.id else ends[1]
        state.nodes[daughter.partner].partner = daughter.id
        state.nodes[daughter.id] = daughter
        state.log.append(EpzEvent("create", t, daughter.id, nid, daughter.x, daughter.y))
        _touch_edge(state, daughter, t)
    return state


@dataclass
class EpzResult:
    failure_time: float | None
    failure_path: FailurePath
    state: EpzState

    def dump_jsonl(self) -> str:
        """Node create/deactivate/coalesce/edge events, one JSON object per line."""
        return "".join(json.dumps(asdict(e)) + "\n" for e in self.state.log)


def predict_epz(scenario: Scenario, params: EpzParams | None = None,
                stop_at_failure: bool = False) -> EpzResult:
    params = params or EpzParams()
    state = EpzState.from_scenario(scenario)
    failure_time = None
    for k in range(1, params.n_steps + 1):
        t = k * params.dt
        if k == 1:
            initial_contacts(state, t)
        if not state.failed():
            step_epz(state, t, params)
        if state.failed():
            failure_time = t
            break
    if failure_time is None:
        return EpzResult(None, FailurePath((), False), state)
    _, route, _ = replay_links(state.links, LEFT, RIGHT)
    return EpzResult(failure_time, FailurePath(order_by_x(route, scenario), True), state)


# -- training ------------------------------------------------------------------

def path_jaccard(a: FailurePath, b: FailurePath) -> float:
    sa, sb = a.id_set, b.id_set
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def epz_objective(params: EpzParams, cases, beta: float = 1.0) -> float:
    """Sum of squared relative time error plus path dissimilarity over ``cases``.

    ``cases`` holds (scenario, truth time or None, truth path); a missing
    time on either side counts as the horizon.
    """
    total = 0.0
    horizon = params.horizon
    for scenario, t_true, path in cases:
        res = predict_epz(scenario, params)
        t_hat = horizon if res.failure_time is None else res.failure_time
        t_ref = horizon if t_true is None else t_true
        total += ((t_hat - t_ref) / horizon) ** 2 + beta * (1.0 - path_jaccard(res.failure_path, path))
    return total


@dataclass
class EpzTrainConfig:
    initial: tuple[float, float, float] = (1.0, 0.5, 0.02)  # gamma slope, e, c_l
    e_bounds: tuple[float, float] = (0.05, 0.95)
    c_l_bounds: tuple[float, float] = (0.001, 0.2)
    slope_bounds: tuple[float, float] = (0.0, 4.0)
    max_cases: int = 40
    budget: int = 80
    beta: float = 1.0
    seed: int = 0


def select_cases(dataset, max_cases: int, seed: int = 0) -> list:
    """Deterministic subsample of (scenario, trace) pairs, failed ones first."""
    dataset = list(dataset)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(dataset))
    failed = [dataset[i] for i in order if dataset[i][1].failed]
    other = [dataset[i] for i in order if not dataset[i][1].failed]
    return (failed + other)[:max_cases]


def train_epz(dataset, base: EpzParams | None = None,
              config: EpzTrainConfig | None = None) -> tuple[EpzParams, float]:
    """Least-squares fit of (gamma slope, e, c_l); returns the params and final objective."""
    config = config or EpzTrainConfig()
    base = base or EpzParams()
    picked = select_cases(dataset, config.max_cases, config.seed)
    if not any(tr.failed for _, tr in picked):
        raise ValueError("training set has no failed cases")
    cases = [(sc, tr.failure_time, tr.truth_path) for sc, tr in picked]

    def build(p) -> EpzParams:
        return EpzParams(float(p[0]), float(p[1]), float(p[2]), base.dt, base.horizon,
                         base.strict_cutoff, base.printed_conic, base.normalize_radius)

    def objective(p) -> float:
        return epz_objective(build(p), cases, config.beta)

    bounds = [config.slope_bounds, config.e_bounds, config.c_l_bounds]
    res = lsq_minimize(objective, config.initial, bounds, budget=config.budget)
    return build(res.x), res.fun
