import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_scenario
from fracrom.core import LEFT, RIGHT, FailurePath, MaterialParams, order_by_x
from fracrom.ml import FeedforwardNet, TrainSchedule
from fracrom.mcpic import (FEATURES, McpicConfig, McpicModel, PairFeatures, PairLabel,
                           assemble_events, balanced_accuracy, build_pair_table,
                           choose_threshold, enumerate_pairs, export_pairs_csv, fit_mcpic,
                           label_pairs, minimax_failure_time, predict_failure,
                           stress_intensity, train_mcpic)
from fracrom.oracle import CoalescenceEvent, SimulationTrace, generate_scenario, run_reference


@pytest.fixture(scope="module")
def small_dataset():
    return [(s := generate_scenario(seed), run_reference(s)) for seed in range(200, 206)]


def test_pair_count_default_scenario():
    pairs = enumerate_pairs(generate_scenario(5))
    assert len(pairs) == 20 * 19 // 2 + 2 * 20 == 230
    assert len(enumerate_pairs(generate_scenario(5), "interior")) == 190


def test_single_crack_has_two_edge_pairs():
    s = make_scenario([(0.5, 1.0, 0.3, 0.0)])
    pairs = dict(enumerate_pairs(s))
    assert list(pairs) == [(0, LEFT), (0, RIGHT)]
    left, right = pairs[(0, LEFT)], pairs[(0, RIGHT)]
    assert left.dx == pytest.approx(0.5) and left.dy == 0.0 and left.db == pytest.approx(0.35)
    assert right.dx == pytest.approx(1.5) and right.db == pytest.approx(1.35)


def test_interior_pair_features():
    s = make_scenario([(0.5, 1.0, 0.3, 0.0), (1.5, 1.0, 0.3, 60.0)])
    (pair, f), = [p for p in enumerate_pairs(s) if p[0] == (0, 1)]
    assert f.dx == pytest.approx(1.0) and f.dy == pytest.approx(0.0)
    assert (f.theta1, f.theta2) == (0.0, 60.0)
    assert f.k1 == pytest.approx(4.0e6 * math.sqrt(math.pi * 0.15))
    assert f.k2 == pytest.approx(f.k1 * 0.25)
    assert f.db == pytest.approx(0.35)


def test_stress_intensity_value():
    s = make_scenario([(1.0, 1.0, 0.3, 0.0)])
    assert stress_intensity(s.crack(0), MaterialParams()) == pytest.approx(2.746e6, rel=1e-3)
    assert stress_intensity(s.crack(LEFT), MaterialParams()) == 0.0


def test_knn_restriction():
    s = generate_scenario(5)
    pairs = enumerate_pairs(s, "interior", knn=2)
    assert 20 <= len(pairs) <= 40


def test_feature_validation():
    with pytest.raises(ValueError):
        PairFeatures(-1, 0, 0, 0, 0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        PairLabel(True, None)


def synthetic_trace_with_events(scenario, events):
    ids = [c.id for c in scenario.interior]
    z = np.zeros((1, 2 * len(ids), 2))
    return SimulationTrace(scenario.seed, "", ids, np.full(len(ids), 0.3), np.zeros(1), z,
                           np.zeros((1, len(ids))), np.zeros((1, 2 * len(ids)), int),
                           events, None, None, FailurePath(()))


def test_label_examples():
    s = make_scenario([(0.3, 1.0, 0.3, 0.0), (0.8, 1.0, 0.3, 0.0), (1.5, 2.0, 0.3, 0.0)])
    events = [CoalescenceEvent(1, 0, 0.002, 100), CoalescenceEvent(0, LEFT, 0.003, 150),
              CoalescenceEvent(0, 1, 0.004, 200)]
    tr = synthetic_trace_with_events(s, events)
    labels = dict(zip([p for p, _ in enumerate_pairs(s)], label_pairs(s, tr)))
    assert labels[(0, 1)] == PairLabel(True, 0.002)
    assert labels[(0, LEFT)] == PairLabel(True, 0.003)
    assert labels[(1, LEFT)] == PairLabel(False)
    assert labels[(1, 2)] == PairLabel(False)
    component = label_pairs(s, tr, [(1, LEFT), (2, LEFT)], "component")
    assert component == [PairLabel(True, 0.003), PairLabel(False)]
    with pytest.raises(ValueError):
        label_pairs(s, tr, [(0, 7)])


def test_export_csv(tmp_path):
    rows = [(PairFeatures(*range(9)), PairLabel(True, 0.001)), (PairFeatures(*[0] * 9), PairLabel(False))]
    path = tmp_path / "pairs.csv"
    export_pairs_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(FEATURES) + ["coalesced", "t_coal"]
    assert lines[1].endswith(",1,0.001") and lines[2].endswith(",0,")


def test_threshold_choice():
    scores = np.array([0.1, 0.2, 0.6, 0.7])
    truth = np.array([0, 0, 1, 1])
    tau = choose_threshold(scores, truth)
    assert 0.2 < tau <= 0.6
    assert balanced_accuracy(scores, truth, tau) == 1.0


def synthetic_table(n=1500, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(n, len(FEATURES)))
    y = (X[:, 0] + X[:, 4] > 1.0).astype(float)
    t = [0.002 + 0.003 * x[0] if c else None for x, c in zip(X, y)]
    return X, y, t


def test_fit_on_synthetic_table():
    X, y, t = synthetic_table()
    model = fit_mcpic(X, y, t, 0.007, McpicConfig(seed=1))
    Xt, yt, tt = synthetic_table(500, seed=9)
    acc = ((model.classifier.predict(Xt) >= model.tau) == (yt == 1)).mean()
    assert acc >= 0.95
    pos = yt == 1
    err = model.regressor.predict(Xt[pos]) - np.array([v for v in tt if v is not None])
    assert np.sqrt(np.mean(err ** 2)) < 1e-4


def test_fit_deterministic_and_roundtrip():
    X, y, t = synthetic_table(400)
    cfg = McpicConfig(classifier_schedule=TrainSchedule(epochs=20),
                      regressor_schedule=TrainSchedule(epochs=20))
    a = fit_mcpic(X, y, t, 0.007, cfg)
    b = fit_mcpic(X, y, t, 0.007, cfg)
    assert a.to_dict() == b.to_dict()
    back = McpicModel.from_dict(a.to_dict())
    assert np.array_equal(back.classifier.predict(X), a.classifier.predict(X))


def test_fit_rejects_degenerate_labels():
    X, _, _ = synthetic_table(200)
    with pytest.raises(ValueError):
        fit_mcpic(X, np.zeros(200), [None] * 200, 0.007)


def test_model_architecture_enforced():
    net = FeedforwardNet.create(9, "logistic", hidden=(5,))
    with pytest.raises(ValueError):
        McpicModel(net, net, 0.5, 0.007)


def test_pair_table_from_oracle(small_dataset):
    X, y, t, groups = build_pair_table(small_dataset)
    assert X.shape == (6 * 230, 9)
    assert set(groups) == set(range(200, 206))
    assert all((v is not None) == bool(c) for v, c in zip(t, y))


# -- assembly ----------------------------------------------------------------

def test_assembly_examples():
    a = assemble_events([(0.003, 0, 1)], [0, 1])
    assert a.failure_time is None and a.forest == [(0, 1)]
    assert assemble_events([], [0, 1]).failure_time is None
    a = assemble_events([(0.002, 0, RIGHT), (0.001, LEFT, 0), (0.003, 0, 1)], [0, 1])
    assert a.failure_time == 0.002
    assert a.route == (LEFT, 0, RIGHT)
    assert assemble_events([(0.002, LEFT, RIGHT)]).failure_time == 0.002


def random_events(rng, n_nodes, n_events):
    nodes = list(range(n_nodes)) + [LEFT, RIGHT]
    out = []
    for _ in range(n_events):
        a, b = rng.sample(nodes, 2)
        out.append((round(rng.uniform(0, 0.007), 6), a, b))
    return out


def test_assembly_time_is_bottleneck_path():
    rng = random.Random(0)
    for _ in range(500):
        events = random_events(rng, rng.randint(1, 6), rng.randint(0, 12))
        assert assemble_events(events).failure_time == minimax_failure_time(events)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0, 0.007))
def test_dropping_late_events_is_monotone(seed, tau):
    rng = random.Random(seed)
    events = random_events(rng, 5, 10)
    full = assemble_events(events).failure_time
    early = assemble_events([e for e in events if e[0] <= tau]).failure_time
    if early is not None:
        assert full is not None and full <= early
    if full is not None and full <= tau:
        assert early == full


def test_true_events_reproduce_truth(small_dataset):
    for scenario, trace in small_dataset:
        result = assemble_events([(e.t, e.a, e.b) for e in trace.events],
                                 [c.id for c in scenario.interior])
        assert result.failure_time == trace.failure_time
        if trace.failed:
            assert order_by_x(result.route, scenario) == trace.failure_path.crack_ids


def test_trained_model_predicts(small_dataset):
    cfg = McpicConfig(classifier_schedule=TrainSchedule(epochs=30),
                      regressor_schedule=TrainSchedule(epochs=30))
    model = train_mcpic(small_dataset, cfg)
    scenario = small_dataset[0][0]
    pred = predict_failure(scenario, model)
    assert pred == predict_failure(scenario, model)
    assert all(0 < t <= model.horizon for t, _, _ in pred.events)
    if pred.failure_time is not None:
        assert pred.failure_path.spanning
