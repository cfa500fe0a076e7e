"""Crack-pair coalescence model.

Each crack pair (including pairs with the two lateral edges) is described by
nine geometric/mechanical features. One network scores whether the pair
coalesces, a second predicts when; predicted events are replayed in time
order through a disjoint-set forest to find the first edge-to-edge link.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (LEFT, RIGHT, FailurePath, MaterialParams, Scenario, crack_gap,
                   order_by_x, tip_positions)
from .graphs import UnionFind, forest_path, replay_links
from .ml.net import FeedforwardNet, TrainSchedule, nn_train

FORMAT = "fracrom.mcpic/1"
FEATURES = ("a1", "a2", "theta1", "theta2", "dx", "dy", "k1", "k2", "db")
LABELS = ("coalesced", "t_coal")


@dataclass(frozen=True)
class PairFeatures:
    a1: float
    a2: float
    theta1: float
    theta2: float
    dx: float
    dy: float
    k1: float
    k2: float
    db: float

    def __post_init__(self):
        if min(self.a1, self.a2) < 0 or min(self.dx, self.dy, self.db) < 0:
            raise ValueError("lengths and distances must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FEATURES], float)


@dataclass(frozen=True)
class PairLabel:
    coalesced: bool
    t_coal: float | None = None

    def __post_init__(self):
        if self.coalesced and not (self.t_coal is not None and self.t_coal > 0):
            raise ValueError("coalesced pairs need a positive time")


def stress_intensity(crack, material: MaterialParams) -> float:
    """Mode I intensity scale sigma_U cos^2(theta) sqrt(pi l / 2); zero for edges."""
    if not crack.is_interior:
        return 0.0
    return material.sigma_u * math.cos(crack.theta_rad) ** 2 * math.sqrt(math.pi * crack.length / 2)


def _edge_distance(crack, w: float) -> float:
    a, b = tip_positions(crack)
    return max(0.0, min(a[0], b[0], w - a[0], w - b[0]))


def _boundary_features(c, edge: int, scenario: Scenario) -> PairFeatures:
    w = scenario.geometry.w
    a, b = tip_positions(c)
    if edge == LEFT:
        dx, db = c.cx, max(0.0, min(a[0], b[0]))
    else:
        dx, db = w - c.cx, max(0.0, w - max(a[0], b[0]))
    # the pseudo-crack sits at the edge point level with the crack: dy = 0
    return PairFeatures(c.length, 0.0, c.theta_deg, 90.0, max(dx, 0.0), 0.0,
                        stress_intensity(c, scenario.material), 0.0, db)


def enumerate_pairs(scenario: Scenario, mode: str = "all",
                    knn: int | None = None) -> list[tuple[tuple[int, int], PairFeatures]]:
    """Interior pairs ``(i, j)`` with ``i < j``, then ``(i, LEFT)``, ``(i, RIGHT)``.

    ``mode="interior"`` drops the edge pairs. ``knn`` keeps an interior pair
    only if one crack is among the other's ``knn`` nearest by tip-to-body gap.
    """
    if mode not in ("all", "interior"):
        raise ValueError("pair mode must be 'all' or 'interior'")
    geom, mat = scenario.geometry, scenario.material
    interior = sorted(scenario.interior, key=lambda c: c.id)
    keep = None
    if knn is not None:
        keep = set()
        for c in interior:
            others = sorted((crack_gap(c, o, geom), o.id) for o in interior if o.id != c.id)
            for _, oid in others[:knn]:
                keep.add((min(c.id, oid), max(c.id, oid)))
    out = []
    for k, c1 in enumerate(interior):
        for c2 in interior[k + 1:]:
            if keep is not None and (c1.id, c2.id) not in keep:
                continue
            feats = PairFeatures(
                c1.length, c2.length, c1.theta_deg, c2.theta_deg,
                abs(c1.cx - c2.cx), abs(c1.cy - c2.cy),
                stress_intensity(c1, mat), stress_intensity(c2, mat),
                min(_edge_distance(c1, geom.w), _edge_distance(c2, geom.w)))
            out.append(((c1.id, c2.id), feats))
    if mode == "all":
        for c in interior:
            for edge in (LEFT, RIGHT):
                out.append(((c.id, edge), _boundary_features(c, edge, scenario)))
    return out


def _component_touch_times(trace) -> dict[tuple[int, int], float]:
    """First time each crack's fracture joins each edge, replaying the events."""
    uf = UnionFind(list(trace.crack_ids) + [LEFT, RIGHT])
    touched: dict[tuple[int, int], float] = {}
    for e in trace.events:
        uf.union(e.a, e.b)
        for edge in (LEFT, RIGHT):
            root = uf.find(edge)
            for cid in trace.crack_ids:
                if (cid, edge) not in touched and uf.find(cid) == root:
                    touched[(cid, edge)] = e.t
    return touched


def label_pairs(scenario: Scenario, trace, pairs: Sequence[tuple[int, int]] | None = None,
                boundary_labels: str = "direct") -> list[PairLabel]:
    """Coalescence labels for ``pairs`` (default: every enumerated pair).

    Edge pairs are positive when the crack itself reached the edge
    (``"direct"``) or, with ``"component"``, when its fracture did.
    """
    if trace.seed != scenario.seed or sorted(trace.crack_ids) != sorted(c.id for c in scenario.interior):
        raise ValueError("pair/scenario mismatch")
    if boundary_labels not in ("direct", "component"):
        raise ValueError("boundary_labels must be 'direct' or 'component'")
    if pairs is None:
        pairs = [p for p, _ in enumerate_pairs(scenario)]
    first: dict[tuple[int, int], float] = {}
    for e in trace.events:
        first.setdefault(e.pair, e.t)
    touched = _component_touch_times(trace) if boundary_labels == "component" else {}
    known = set(trace.crack_ids) | {LEFT, RIGHT}
    labels = []
    for i, j in pairs:
        if i not in known or j not in known:
            raise ValueError("pair/scenario mismatch")
        key = (i, j) if j < 0 or i < j else (j, i)
        if j < 0 and boundary_labels == "component":
            t = touched.get(key)
        else:
            t = first.get(key)
        labels.append(PairLabel(t is not None, t))
    return labels


def export_pairs_csv(rows, path: str | Path) -> None:
    """Write ``(PairFeatures, PairLabel)`` rows with the fixed 11-column header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURES + LABELS)
        for feats, label in rows:
            writer.writerow([repr(float(v)) for v in feats.as_array()]
                            + [int(label.coalesced), "" if label.t_coal is None else repr(label.t_coal)])


# -- model -------------------------------------------------------------------

@dataclass
class McpicConfig:
    pair_mode: str = "all"
    knn: int | None = None
    boundary_labels: str = "direct"
    holdout_fraction: float = 0.2
    classifier_schedule: TrainSchedule = field(default_factory=TrainSchedule)
    regressor_schedule: TrainSchedule = field(default_factory=TrainSchedule)
    seed: int = 0

    def __post_init__(self):
        if self.pair_mode not in ("all", "interior"):
            raise ValueError("pair_mode must be 'all' or 'interior'")
        if self.boundary_labels not in ("direct", "component"):
            raise ValueError("boundary_labels must be 'direct' or 'component'")
        if not 0 < self.holdout_fraction < 1:
            raise ValueError("holdout_fraction must be in (0, 1)")
        for name in ("classifier_schedule", "regressor_schedule"):
            if isinstance(getattr(self, name), dict):
                setattr(self, name, TrainSchedule(**getattr(self, name)))


@dataclass
class McpicModel:
    classifier: FeedforwardNet
    regressor: FeedforwardNet
    tau: float
    horizon: float
    pair_mode: str = "all"
    knn: int | None = None

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise ValueError("threshold must lie in (0, 1)")
        for net in (self.classifier, self.regressor):
            if net.input_dim != len(FEATURES) or tuple(net.sizes[1:]) != (12, 8, 4, 1):
                raise ValueError("networks must be 9-12-8-4-1")

    def predict_events(self, scenario: Scenario) -> list[tuple[float, int, int]]:
        pairs = enumerate_pairs(scenario, self.pair_mode, self.knn)
        if not pairs:
            return []
        X = np.array([f.as_array() for _, f in pairs])
        scores = self.classifier.predict(X)
        hit = np.flatnonzero(scores >= self.tau)
        if len(hit) == 0:
            return []
        times = np.clip(self.regressor.predict(X[hit]), 1e-12, self.horizon)
        return [(float(t), *pairs[k][0]) for k, t in zip(hit, times)]

    def to_dict(self) -> dict:
        return {"format": FORMAT, "classifier": self.classifier.to_dict(),
                "regressor": self.regressor.to_dict(), "tau": self.tau,
                "horizon": self.horizon, "pair_mode": self.pair_mode, "knn": self.knn}

    @classmethod
    def from_dict(cls, d: dict) -> "McpicModel":
        if d.get("format") != FORMAT:
            raise ValueError(f"unexpected model format {d.get('format')!r}")
        return cls(FeedforwardNet.from_dict(d["classifier"]),
                   FeedforwardNet.from_dict(d["regressor"]), float(d["tau"]),
                   float(d["horizon"]), d.get("pair_mode", "all"), d.get("knn"))


def balanced_accuracy(scores: np.ndarray, truth: np.ndarray, tau: float) -> float:
    pred = scores >= tau
    pos, neg = truth == 1, truth == 0
    tpr = pred[pos].mean() if pos.any() else 0.0
    tnr = (~pred[neg]).mean() if neg.any() else 0.0
    return 0.5 * (tpr + tnr)


def choose_threshold(scores, truth) -> float:
    """Grid threshold maximizing balanced accuracy (first maximum wins)."""
    scores, truth = np.asarray(scores), np.asarray(truth)
    grid = np.round(np.arange(1, 100) / 100, 2)
    values = [balanced_accuracy(scores, truth, tau) for tau in grid]
    return float(grid[int(np.argmax(values))])


def fit_mcpic(X, coalesced, t_coal, horizon: float, config: McpicConfig | None = None,
              groups=None) -> McpicModel:
    """Train both networks on a pair table.

    ``groups`` (e.g. scenario seeds) keeps every pair of a group on the same
    side of the held-out fold used to set the threshold.
    """
    config = config or McpicConfig()
    X = np.asarray(X, float)
    y = np.asarray(coalesced, float).ravel()
    t = np.asarray([np.nan if v is None else v for v in t_coal], float)
    if not (y.any() and (1 - y).any()):
        raise ValueError("degenerate labels")
    rng = np.random.default_rng(config.seed)
    if groups is None:
        groups = np.arange(len(y))
    groups = np.asarray(groups)
    uniq = np.unique(groups)
    held = set(rng.choice(uniq, size=max(1, int(round(config.holdout_fraction * len(uniq)))),
                          replace=False).tolist())
    hold = np.array([g in held for g in groups])
    if not (y[~hold].any() and (1 - y[~hold]).any() and y[hold].any() and (1 - y[hold]).any()):
        hold = np.zeros(len(y), bool)
        hold[rng.permutation(len(y))[: max(1, int(config.holdout_fraction * len(y)))]] = True

    clf = FeedforwardNet.create(X.shape[1], "logistic", seed=config.seed)
    if clf.n_params >= len(y):
        raise ValueError(f"{clf.n_params} parameters for only {len(y)} training pairs")
    clf = nn_train(clf, X[~hold], y[~hold], "cross_entropy", config.classifier_schedule).net
    tau = choose_threshold(clf.predict(X[hold]), y[hold])

    pos = y == 1
    reg = FeedforwardNet.create(X.shape[1], "identity", seed=config.seed + 1)
    reg = nn_train(reg, X[pos], t[pos], "squared", config.regressor_schedule).net
    return McpicModel(clf, reg, tau, float(horizon), config.pair_mode, config.knn)


def build_pair_table(dataset, config: McpicConfig | None = None):
    """Features, labels and scenario groups for a list of (scenario, trace)."""
    config = config or McpicConfig()
    rows, ys, ts, groups = [], [], [], []
    for scenario, trace in dataset:
        pairs = enumerate_pairs(scenario, config.pair_mode, config.knn)
        labels = label_pairs(scenario, trace, [p for p, _ in pairs], config.boundary_labels)
        for (_, feats), lab in zip(pairs, labels):
            rows.append(feats.as_array())
            ys.append(float(lab.coalesced))
            ts.append(lab.t_coal)
            groups.append(scenario.seed)
    return np.array(rows).reshape(-1, len(FEATURES)), np.array(ys), ts, np.array(groups)


def train_mcpic(dataset, config: McpicConfig | None = None) -> McpicModel:
    config = config or McpicConfig()
    dataset = list(dataset)
    X, y, t, groups = build_pair_table(dataset, config)
    horizon = max(float(tr.horizon or tr.times[-1]) for _, tr in dataset)
    return fit_mcpic(X, y, t, horizon, config, groups)


# -- assembly ----------------------------------------------------------------

@dataclass
class Assembly:
    failure_time: float | None
    route: tuple[int, ...]  # node route through the merge forest (edges included)
    forest: list[tuple[int, int]]


def assemble_events(events: Sequence[tuple[float, int, int]],
                    nodes: Sequence[int] = ()) -> Assembly:
    """Replay ``(t, i, j)`` events in time order until the two edges join."""
    t, route, forest = replay_links(events, LEFT, RIGHT, nodes)
    return Assembly(t, route, forest)


def _widest_route(forest, scenario: Scenario) -> tuple[int, ...]:
    """Forest route across the linked component with the widest x-extent."""
    if not forest:
        return ()
    uf = UnionFind()
    for a, b in forest:
        uf.add(a)
        uf.add(b)
        uf.union(a, b)
    w = scenario.geometry.w
    best = None
    for members in uf.groups():
        lo, lo_id, hi, hi_id = math.inf, None, -math.inf, None
        for m in sorted(members):
            if m == LEFT:
                x0, x1 = 0.0, 0.0
            elif m == RIGHT:
                x0, x1 = w, w
            else:
                a, b = tip_positions(scenario.crack(m))
                x0, x1 = min(a[0], b[0]), max(a[0], b[0])
            if x0 < lo:
                lo, lo_id = x0, m
            if x1 > hi:
                hi, hi_id = x1, m
        length = sum(scenario.crack(m).length for m in members if m >= 0)
        key = (hi - lo, length, -min(members))
        if best is None or key > best[0]:
            best = (key, lo_id, hi_id)
    return forest_path(forest, best[1], best[2])


@dataclass
class McpicPrediction:
    failure_time: float | None
    failure_path: FailurePath
    events: list[tuple[float, int, int]]


def predict_failure(scenario: Scenario, model: McpicModel) -> McpicPrediction:
    events = model.predict_events(scenario)
    result = assemble_events(events, [c.id for c in scenario.interior])
    if result.failure_time is not None:
        path = FailurePath(order_by_x(result.route, scenario), True)
    else:
        path = FailurePath(order_by_x(_widest_route(result.forest, scenario), scenario), False)
    return McpicPrediction(result.failure_time, path, events)


def minimax_failure_time(events: Sequence[tuple[float, int, int]]) -> float | None:
    """Bottleneck edge-to-edge time by exhaustive simple-path search (reference only)."""
    best_edge: dict[tuple[int, int], float] = {}
    for t, i, j in events:
        key = (min(i, j), max(i, j))
        best_edge[key] = min(t, best_edge.get(key, math.inf))
    nbrs: dict[int, list[tuple[int, float]]] = {}
    for (i, j), t in best_edge.items():
        nbrs.setdefault(i, []).append((j, t))
        nbrs.setdefault(j, []).append((i, t))
    best = math.inf

    def walk(node, seen, worst):
        nonlocal best
        if node == RIGHT:
            best = min(best, worst)
            return
        for nxt, t in nbrs.get(node, ()):
            if nxt not in seen:
                walk(nxt, seen | {nxt}, max(worst, t))

    walk(LEFT, {LEFT}, -math.inf)
    return None if best == math.inf else best


__all__ = [
    "FEATURES", "LABELS", "PairFeatures", "PairLabel", "stress_intensity", "enumerate_pairs",
    "label_pairs", "export_pairs_csv", "McpicConfig", "McpicModel", "fit_mcpic",
    "build_pair_table", "train_mcpic", "assemble_events", "predict_failure",
    "McpicPrediction", "minimax_failure_time", "choose_threshold", "balanced_accuracy",
]
