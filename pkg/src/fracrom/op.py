"""Orthogonal-projection model.

Every crack is reduced to its horizontal shadow. A polynomial ridge fit maps
projected length ``a`` to the horizontal tip advance ``da`` per snapshot
interval; simulation grows and merges the shadows until one spans the width.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FailurePath, Scenario, horizontal_projection
from .ml.ridge import PolyRidgeModel, fit_poly_ridge

FORMAT = "fracrom.op/1"
MIN_PROJECTION = 1e-6  # floor for cracks parallel to the load
MERGE_DY = math.inf  # vertical reach of a merge; inf is a pure 1D union of shadows


@dataclass(frozen=True)
class GrowthSample:
    a: float   # projected length at the earlier snapshot
    da: float  # horizontal tip advance over the interval

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("projected length must be positive")
        if self.da < 0:
            raise ValueError("horizontal advance must be non-negative")


@dataclass(frozen=True)
class OpModel:
    pir: PolyRidgeModel
    t0: float           # onset delay before any growth
    dt: float           # snapshot interval the da samples refer to
    horizon: float
    a_range: tuple[float, float] = (MIN_PROJECTION, float("inf"))  # inputs clipped to this
    merge_dy: float = MERGE_DY

    def __post_init__(self):
        if self.t0 < 0:
            raise ValueError("onset delay must be non-negative")
        if not self.dt > 0:
            raise ValueError("snapshot interval must be positive")

    def predict_da(self, a) -> np.ndarray:
        a = np.clip(np.maximum(a, MIN_PROJECTION), *self.a_range)
        return np.maximum(self.pir.predict(a), 0.0)

    def to_dict(self) -> dict:
        return {"format": FORMAT, "pir": self.pir.to_dict(), "t0": self.t0,
                "dt": self.dt, "horizon": self.horizon, "a_range": list(self.a_range),
                "merge_dy": None if math.isinf(self.merge_dy) else self.merge_dy}

    @classmethod
    def from_dict(cls, d: dict) -> "OpModel":
        if d.get("format") != FORMAT:
            raise ValueError(f"unexpected model format {d.get('format')!r}")
        return cls(PolyRidgeModel.from_dict(d["pir"]), float(d["t0"]), float(d["dt"]),
                   float(d["horizon"]), tuple(float(v) for v in d["a_range"]),
                   math.inf if d.get("merge_dy") is None else float(d["merge_dy"]))


def _projected_lengths(tips: np.ndarray) -> np.ndarray:
    """Horizontal extent per crack from a (2n, 2) tip array."""
    x = tips[:, 0].reshape(-1, 2)
    return np.abs(x[:, 1] - x[:, 0])


def first_growth_time(trace) -> float | None:
    for t, damage in trace.accumulated_damage():
        if damage > 0:
            return t
    return None


def extract_growth_samples(traces, skip_idle: bool = False) -> list[GrowthSample]:
    """One sample per tip and consecutive snapshot pair after the trace's onset.

    Snapshot pairs before the first growth anywhere in the trace are
    dropped. With ``skip_idle`` the zero samples of dormant or arrested
    tips after onset are dropped as well.
    """
    from .oracle import ACTIVE

    samples = []
    for trace in traces:
        if len(trace.times) < 2:
            continue
        started = False
        for k in range(1, len(trace.times)):
            before, after = trace.tips[k - 1], trace.tips[k]
            moved = np.hypot(*(after - before).T) > 0
            started = started or bool(moved.any())
            if not started:
                continue
            a = np.maximum(_projected_lengths(before), MIN_PROJECTION)
            da = np.abs(after[:, 0] - before[:, 0])
            keep = moved | (trace.status[k - 1] == ACTIVE) if skip_idle else np.ones(len(da), bool)
            for tip in np.flatnonzero(keep):
                samples.append(GrowthSample(float(a[tip // 2]), float(da[tip])))
    return samples


def fit_op(traces, degree: int = 3, lam: float = 1e-3, merge_dy: float = MERGE_DY,
           clip_quantiles: tuple[float, float] = (0.01, 0.99),
           skip_idle: bool = False) -> OpModel:
    """Fit da(a) on every training trace; t0 is the mean first-growth time.

    Predictions are made at inputs clipped to the given quantiles of the
    observed ``a`` so the cubic is never extrapolated into sparse tails.
    """
    traces = list(traces)
    samples = extract_growth_samples(traces, skip_idle)
    if not samples:
        raise ValueError("no growth samples in the training traces")
    x = np.array([s.a for s in samples])
    y = np.array([s.da for s in samples])
    pir = fit_poly_ridge(x, y, degree, lam)
    onsets = [t for t in (first_growth_time(tr) for tr in traces) if t is not None]
    t0 = float(np.mean(onsets)) if onsets else 0.0
    dt = float(np.median(np.diff(traces[0].times)))
    horizon = max(float(tr.times[-1]) for tr in traces)
    lo, hi = np.quantile(x, clip_quantiles)
    return OpModel(pir, t0, dt, horizon, (float(lo), float(hi)), merge_dy)


@dataclass
class OpPrediction:
    failure_time: float | None
    failure_path: FailurePath
    band_y: float | None


def _merge(intervals: list[list], merge_dy: float = math.inf) -> list[list]:
    """Merge [lo, hi, ids, y_lo, y_hi] intervals that overlap or touch in x.

    Two intervals only merge when their vertical bands are within
    ``merge_dy`` of each other; ``merge_dy = inf`` is a purely 1D union.
    """
    items = [list(iv) for iv in intervals]
    changed = True
    while changed:
        changed = False
        items.sort(key=lambda iv: (iv[0], iv[1], iv[3]))
        out: list[list] = []
        for iv in items:
            for other in out:
                if (iv[0] <= other[1] and other[0] <= iv[1]
                        and iv[3] - other[4] <= merge_dy and other[3] - iv[4] <= merge_dy):
                    other[0], other[1] = min(other[0], iv[0]), max(other[1], iv[1])
                    other[2] = other[2] | iv[2]
                    other[3], other[4] = min(other[3], iv[3]), max(other[4], iv[4])
                    changed = True
                    break
            else:
                out.append(iv)
        items = out
    return items


def simulate_op(scenario: Scenario, model: OpModel) -> OpPrediction:
    geom = scenario.geometry
    cracks = {c.id: c for c in scenario.interior}
    intervals = []
    for c in cracks.values():
        lo, hi = horizontal_projection(c)
        if hi - lo < MIN_PROJECTION:
            lo, hi = c.cx - MIN_PROJECTION / 2, c.cx + MIN_PROJECTION / 2
        intervals.append([lo, hi, frozenset([c.id]), c.cy, c.cy])
    intervals = _merge(intervals, model.merge_dy)

    def spanning(ivs):
        for lo, hi, ids, _, _ in ivs:
            if lo <= 0.0 and hi >= geom.w:
                return ids
        return None

    t = model.t0
    step = 0
    ids = spanning(intervals)
    while ids is None and intervals:
        step += 1
        t = model.t0 + step * model.dt
        if t > model.horizon + 1e-12:
            break
        lengths = np.array([iv[1] - iv[0] for iv in intervals])
        da = model.predict_da(lengths)
        grown = [[max(lo - d, 0.0), min(hi + d, geom.w), s, y0, y1]
                 for (lo, hi, s, y0, y1), d in zip(intervals, da)]
        intervals = _merge(grown, model.merge_dy)
        ids = spanning(intervals)
    if ids is None:
        return OpPrediction(None, FailurePath((), False), None)
    members = sorted(ids, key=lambda i: (cracks[i].cx, i))
    weights = np.array([cracks[i].length for i in members])
    ys = np.array([cracks[i].cy for i in members])
    band = float(np.average(ys, weights=weights)) if weights.sum() > 0 else float(ys.mean())
    return OpPrediction(t, FailurePath(tuple(members), True), band)
