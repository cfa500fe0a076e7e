import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_scenario
from fracrom.core import LEFT, RIGHT, point_segment_distance
from fracrom.graphs import UnionFind
from fracrom.oracle import (OracleConfig, SimulationTrace, accumulated_damage,
                            calibrate_onset, generate_scenario, run_reference)

SHORT = OracleConfig(n_steps=120)


@pytest.fixture(scope="module")
def default_runs():
    return [(s := generate_scenario(seed), run_reference(s)) for seed in range(150, 158)]


def test_generate_empty():
    s = generate_scenario(3, n_cracks=0)
    assert s.interior == () and len(s.boundaries) == 2


def test_generate_deterministic():
    assert generate_scenario(7).to_json() == generate_scenario(7).to_json()
    assert generate_scenario(7).to_json() != generate_scenario(8).to_json()


def test_generate_defaults():
    s = generate_scenario(11)
    assert len(s.interior) == 20
    assert {c.theta_deg for c in s.interior} <= {0.0, 60.0, 120.0}
    assert all(c.length == 0.3 for c in s.interior)


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(dt=0)
    with pytest.raises(ValueError):
        OracleConfig(arrest="sometimes")


def test_onset_calibration_constant():
    # first 0-degree activation at 1.5 ms with the default material and height
    assert calibrate_onset(0.0015) == pytest.approx(OracleConfig().c0, rel=1e-3)


def test_empty_scenario_has_no_damage():
    tr = run_reference(generate_scenario(0, n_cracks=0), SHORT)
    assert tr.events == [] and tr.failure_time is None
    assert all(d == 0 for _, d in tr.accumulated_damage())


def test_centered_crack_fails_symmetrically():
    s = make_scenario([(1.0, 1.5, 0.3, 0.0)])
    tr = run_reference(s)
    moving = np.argmax(np.abs(tr.tips[:, :, 0] - tr.tips[0, :, 0]) > 0, axis=0)
    assert moving[0] == moving[1] > 0
    left, right = tr.tips[-1, 0, 0], tr.tips[-1, 1, 0]
    assert 1.0 - left == pytest.approx(right - 1.0, abs=1e-12)
    assert tr.truth_path.crack_ids == (0,)


def test_damage_definition_on_synthetic_trace():
    n = 1
    times = np.array([0.0, 1.0, 2.0, 3.0])
    lengths = np.array([[0.3], [0.31], [0.32], [0.33]])
    tr = SimulationTrace(0, "", [0], np.array([0.3]), times, np.zeros((4, 2 * n, 2)),
                         lengths, np.zeros((4, 2 * n), int), [], None, None, None)
    assert [d for _, d in accumulated_damage(tr)] == pytest.approx([0, 0.01, 0.02, 0.03])


def test_damage_last_value_matches_length_change(default_runs):
    for _, tr in default_runs:
        expected = float(np.sum(tr.lengths[-1] - tr.initial_lengths))
        assert tr.accumulated_damage()[-1][1] == pytest.approx(expected, abs=1e-12)


def test_damage_monotone(default_runs):
    for _, tr in default_runs:
        d = [v for _, v in tr.accumulated_damage()]
        assert all(b >= a for a, b in zip(d, d[1:]))


def test_deterministic():
    s = generate_scenario(160)
    assert run_reference(s).to_jsonl() == run_reference(s).to_jsonl()


def test_jsonl_roundtrip(tmp_path, default_runs):
    _, tr = default_runs[0]
    path = tmp_path / "t.jsonl"
    tr.save(path)
    back = SimulationTrace.load(path)
    assert back.to_jsonl() == tr.to_jsonl()
    assert back.failure_time == tr.failure_time


def test_failure_is_persistent(default_runs):
    for _, tr in default_runs:
        uf = UnionFind([LEFT, RIGHT])
        joined_at = None
        for e in sorted(tr.events, key=lambda e: e.t):
            uf.add(e.a)
            uf.add(e.b)
            uf.union(e.a, e.b)
            if joined_at is None and uf.connected(LEFT, RIGHT):
                joined_at = e.t
        assert joined_at == tr.failure_time
        if tr.failed:
            assert tr.failure_path.spanning and tr.failure_path.crack_ids


def test_truth_path_is_a_linked_route(default_runs):
    for _, tr in default_runs:
        if not tr.failed:
            continue
        members = set(tr.failure_path.crack_ids) | {LEFT, RIGHT}
        uf = UnionFind(members)
        for e in tr.events:
            if e.t <= tr.failure_time and e.a in members and e.b in members:
                uf.union(e.a, e.b)
        assert uf.connected(LEFT, RIGHT)


def test_mode_one_bias():
    rng = np.random.default_rng(0)
    growth = {0.0: [], 60.0: [], 90.0: []}
    for _ in range(50):
        cx, cy = rng.uniform(0.5, 1.5), rng.uniform(0.5, 2.5)
        for theta in growth:
            tr = run_reference(make_scenario([(cx, cy, 0.3, theta)]))
            growth[theta].append(tr.lengths[-1, 0] - tr.initial_lengths[0])
    assert np.mean(growth[0.0]) > np.mean(growth[60.0]) > np.mean(growth[90.0])


def _body_segments(tr, j, k):
    """Segments of crack index ``j`` as of snapshot ``k`` (origin plus tip trails)."""
    segs = [(tr.tips[0, 2 * j], tr.tips[0, 2 * j + 1])]
    for tip in (2 * j, 2 * j + 1):
        trail = tr.tips[: k + 1, tip]
        segs.extend((trail[m], trail[m + 1]) for m in range(k))
    return segs


def test_events_within_capture_radius(default_runs):
    kappa = OracleConfig().kappa
    for scenario, tr in default_runs[:4]:
        index = {cid: i for i, cid in enumerate(tr.crack_ids)}
        for e in tr.events:
            k = int(np.argmin(np.abs(tr.times - e.t)))
            i = index[e.a]
            tips = tr.tips[k, 2 * i: 2 * i + 2]
            if e.b in (LEFT, RIGHT):
                x_edge = 0.0 if e.b == LEFT else scenario.geometry.w
                gap = min(abs(p[0] - x_edge) for p in tips)
                assert gap <= kappa * tr.lengths[k, i] + 1e-9
                continue
            j = index[e.b]
            gap = min(point_segment_distance(p, a, b)
                      for p in tips for a, b in _body_segments(tr, j, k))
            assert gap <= kappa * (tr.lengths[k, i] + tr.lengths[k, j]) + 1e-9


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_random_scenarios_respect_invariants(seed):
    s = generate_scenario(seed, n_cracks=8)
    tr = run_reference(s, SHORT)
    d = [v for _, v in tr.accumulated_damage()]
    assert all(b >= a for a, b in zip(d, d[1:]))
    assert np.all(tr.lengths[-1] >= tr.initial_lengths - 1e-12)
    assert np.all(tr.tips[..., 0] >= -1e-12) and np.all(tr.tips[..., 0] <= s.geometry.w + 1e-12)
    if tr.failed:
        assert 0 < tr.failure_time <= SHORT.horizon
