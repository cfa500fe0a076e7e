import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_scenario
from fracrom.core import FailurePath
from fracrom.ml import fit_poly_ridge
from fracrom.op import (OpModel, extract_growth_samples, first_growth_time, fit_op,
                        simulate_op)
from fracrom.oracle import ACTIVE, DORMANT, SimulationTrace


def synthetic_trace(tips, dt=1e-4, t_start=0.0):
    """Trace of a single crack from an (S, 2, 2) tip history."""
    tips = np.asarray(tips, float)
    lengths = np.hypot(*(tips[:, 1] - tips[:, 0]).T)[:, None]
    times = t_start + dt * np.arange(len(tips))
    status = np.full((len(tips), 2), ACTIVE)
    return SimulationTrace(0, "", [0], lengths[0].copy(), times, tips, lengths, status,
                           [], None, None, FailurePath(()), horizon=float(times[-1]))


def constant_model(da, t0=0.001, dt=1e-4, horizon=0.007):
    pir = fit_poly_ridge([0.1, 0.2, 0.3], [da] * 3, 0)
    return OpModel(pir, t0, dt, horizon)


def horizontal(cx, lo, hi, y=1.0):
    return ((lo + hi) / 2, y, hi - lo, 0.0)


def test_no_growth_no_samples():
    tips = [[[0.85, 1.0], [1.15, 1.0]]] * 5
    assert extract_growth_samples([synthetic_trace(tips)]) == []
    assert first_growth_time(synthetic_trace(tips)) is None


def test_horizontal_advance_sample():
    tips = [[[0.85, 1.0], [1.15, 1.0]], [[0.84, 1.0], [1.16, 1.0]]]
    samples = extract_growth_samples([synthetic_trace(tips)])
    assert [s.a for s in samples] == pytest.approx([0.3, 0.3])
    assert [s.da for s in samples] == pytest.approx([0.01, 0.01])


def test_inclined_advance_is_projected():
    step = 0.02
    c, s = math.cos(math.radians(60)), math.sin(math.radians(60))
    a0, b0 = np.array([0.925, 0.87]), np.array([1.075, 1.13])
    tips = [[a0, b0], [a0 - step * np.array([c, s]), b0 + step * np.array([c, s])]]
    samples = extract_growth_samples([synthetic_trace(tips)])
    assert [x.da for x in samples] == pytest.approx([0.01, 0.01])
    assert samples[0].a == pytest.approx(0.15)


def test_samples_start_at_onset():
    still = [[[0.9, 1.0], [1.1, 1.0]]] * 15
    moving = [[[0.9 - 0.01 * k, 1.0], [1.1 + 0.01 * k, 1.0]] for k in range(1, 6)]
    tr = synthetic_trace(still + moving)
    assert len(extract_growth_samples([tr])) == 2 * 5
    assert first_growth_time(tr) == pytest.approx(15e-4)


def test_skip_idle_drops_dormant_zeros():
    tips = [[[0.9, 1.0], [1.1, 1.0]], [[0.89, 1.0], [1.1, 1.0]], [[0.88, 1.0], [1.1, 1.0]]]
    tr = synthetic_trace(tips)
    tr.status[:, 1] = DORMANT
    assert len(extract_growth_samples([tr])) == 4
    assert len(extract_growth_samples([tr], skip_idle=True)) == 2


def test_fit_recovers_linear_law():
    # each tip advances 0.1 a per interval, with a the current projected length
    traces = []
    for a0 in (0.1, 0.15, 0.2, 0.25):
        tips = []
        lo, hi = 1.0 - a0 / 2, 1.0 + a0 / 2
        for _ in range(6):
            tips.append([[lo, 1.0], [hi, 1.0]])
            d = 0.1 * (hi - lo)
            lo, hi = lo - d, hi + d
        traces.append(synthetic_trace(tips, t_start=0.0))
    model = fit_op(traces, degree=3, lam=1e-6, clip_quantiles=(0.0, 1.0))
    assert float(model.predict_da(0.2)) == pytest.approx(0.02, rel=1e-3)
    assert model.dt == pytest.approx(1e-4)


def test_onset_is_mean_first_growth():
    traces = []
    for idle in (10, 20):
        still = [[[0.9, 1.0], [1.1, 1.0]]] * idle  # growth seen at snapshot idle
        traces.append(synthetic_trace(still + [[[0.89, 1.0], [1.11, 1.0]]]))
    assert fit_op(traces, degree=0).t0 == pytest.approx(0.0015)


def test_fit_without_growth_fails():
    with pytest.raises(ValueError):
        fit_op([synthetic_trace([[[0.9, 1.0], [1.1, 1.0]]] * 4)])


def test_spanning_crack_fails_at_onset():
    s = make_scenario([horizontal(1.0, -0.05, 2.05)])
    pred = simulate_op(s, constant_model(0.01))
    assert pred.failure_time == pytest.approx(0.001)
    assert pred.failure_path.crack_ids == (0,)


def test_no_growth_never_fails():
    s = make_scenario([horizontal(1.0, 0.5, 1.5)])
    pred = simulate_op(s, constant_model(0.0))
    assert pred.failure_time is None and not pred.failure_path.spanning


def test_two_shadows_merge_then_span():
    s = make_scenario([horizontal(0, 0.125, 0.9375, 1.0), horizontal(0, 1.0625, 1.875, 2.0)])
    model = constant_model(0.0625)
    pred = simulate_op(s, model)
    assert pred.failure_time == pytest.approx(model.t0 + 2 * model.dt)
    assert pred.failure_path.crack_ids == (0, 1)
    assert pred.band_y == pytest.approx(1.5)


def test_vertical_reach_blocks_merge():
    s = make_scenario([horizontal(0, 0.125, 0.9375, 1.0), horizontal(0, 1.0625, 1.875, 2.0)])
    pir = fit_poly_ridge([0.1, 0.2, 0.3], [0.0625] * 3, 0)
    pred = simulate_op(s, OpModel(pir, 0.001, 1e-4, 0.007, merge_dy=0.5))
    # unmerged, the left shadow alone needs (2 - 0.9375) / 0.0625 = 17 steps
    assert pred.failure_time == pytest.approx(0.001 + 17 * 1e-4)


def test_model_roundtrip():
    m = constant_model(0.01)
    back = OpModel.from_dict(m.to_dict())
    assert back == OpModel(back.pir, m.t0, m.dt, m.horizon, m.a_range, m.merge_dy)
    assert math.isinf(back.merge_dy)
    with pytest.raises(ValueError):
        OpModel.from_dict({**m.to_dict(), "format": "other"})


cracks = st.lists(st.tuples(st.floats(0.1, 1.9), st.floats(0.2, 2.8),
                            st.sampled_from([0.0, 60.0, 90.0, 120.0])), min_size=1, max_size=8)


@settings(max_examples=40, deadline=None)
@given(cracks, st.floats(0.0, 0.05))
def test_prediction_invariants(specs, da):
    s = make_scenario([(x, y, 0.3, th) for x, y, th in specs])
    model = constant_model(da)
    pred = simulate_op(s, model)
    if pred.failure_time is not None:
        assert pred.failure_time >= model.t0
        assert set(pred.failure_path.crack_ids) <= set(range(len(specs)))
        mirrored = make_scenario([(2.0 - x, y, 0.3, (180.0 - th) % 180.0) for x, y, th in specs])
        other = simulate_op(mirrored, model)
        assert other.failure_time == pytest.approx(pred.failure_time)
        assert set(other.failure_path.crack_ids) == set(pred.failure_path.crack_ids)
