import random

import pytest
from hypothesis import given, settings, strategies as st

from brute import best_simple_path
from conftest import make_scenario
from fracrom.core import LEFT, RIGHT
from fracrom.graphs import dijkstra
from fracrom.nfpz import (NfpzConfig, PzPair, build_tip_graph, candidate_pairs,
                          coalescence_clusters, is_seed, likely_failure_paths, predict_nfpz,
                          pz_size, seed_and_neighbors, tip_node)
from fracrom.oracle import generate_scenario


def random_cracks(rng, n):
    return [(rng.uniform(0.2, 1.8), rng.uniform(0.3, 2.7), 0.3, rng.choice([0.0, 60.0, 120.0]))
            for _ in range(n)]


def test_pz_size_examples():
    assert pz_size(0.3, 0.3) == pytest.approx(0.18)
    assert pz_size(0.15, 0.15) == pytest.approx(0.09)
    assert pz_size(0.0, 0.0) == 0.0


@given(st.floats(0, 5), st.floats(0, 5))
def test_pz_size_symmetric(a, b):
    assert pz_size(a, b) == pz_size(b, a)


def test_pair_consistency_enforced():
    with pytest.raises(ValueError):
        PzPair(0, 1, 0.18, 0.1, False)


def test_seed_detection():
    s = make_scenario([(1.0, 1.0, 0.3, 0.0), (1.0, 2.0, 0.3, 60.0), (1.0, 2.5, 0.3, 179.5)])
    assert [is_seed(c) for c in s.interior] == [True, False, True]
    assert not is_seed(s.crack(LEFT))


def test_seed_neighbors_example():
    s = make_scenario([(0.5, 1.0, 0.3, 0.0), (1.0, 1.0, 0.3, 0.0), (1.0, 2.5, 0.3, 90.0)])
    links = {(l.seed, l.tip): (l.neighbor, l.distance) for l in seed_and_neighbors(s)}
    assert links[(0, 1)] == (1, pytest.approx(0.2))
    assert links[(1, 0)] == (0, pytest.approx(0.2))
    assert all(seed != 2 for seed, _ in links)


@pytest.mark.parametrize("gap, joined", [(0.15, True), (0.25, False)])
def test_cluster_threshold(gap, joined):
    s = make_scenario([(0.6, 1.0, 0.3, 0.0), (0.6 + 0.3 + gap, 1.0, 0.3, 0.0)])
    zones = coalescence_clusters(s)
    assert (len(zones) == 1 and zones[0].members == (0, 1)) == joined
    if not joined:
        assert zones == []


def test_chain_forms_one_zone():
    s = make_scenario([(0.3 + 0.4 * i, 1.5, 0.3, 0.0) for i in range(4)] + [(1.0, 0.3, 0.3, 0.0)])
    zones = coalescence_clusters(s)
    assert zones[0].members == (0, 1, 2, 3)
    assert zones[0].total_length == pytest.approx(1.2)
    assert zones[0].y_band == pytest.approx((1.35, 1.65))


def test_gap_metric_validation():
    with pytest.raises(ValueError):
        candidate_pairs(make_scenario([]), gap_metric="euclid")
    with pytest.raises(ValueError):
        NfpzConfig(k=0)


def test_no_zone_is_plain_dijkstra():
    s = make_scenario([(1.0, 1.0, 0.3, 60.0), (0.4, 2.0, 0.3, 120.0)])
    res = predict_nfpz(s)
    assert res.fallback
    weight, _ = dijkstra(build_tip_graph(s), LEFT, RIGHT)
    assert res.weights[0] == pytest.approx(weight)


@pytest.mark.parametrize("seed", range(25))
def test_constrained_route_matches_exhaustive_search(seed):
    rng = random.Random(seed)
    cracks = random_cracks(rng, rng.randint(1, 4))
    cracks += [(0.7, 1.5, 0.3, 0.0), (1.15, 1.5, 0.3, 0.0)]  # guarantees a zone
    s = make_scenario(cracks)
    zones = coalescence_clusters(s)
    assert zones
    res = likely_failure_paths(s, zones, k=3)
    graph = build_tip_graph(s)
    must = [tip_node(c, k) for c in zones[0].members for k in (0, 1)]
    assert res.weights[0] == pytest.approx(best_simple_path(graph, LEFT, RIGHT, must), abs=1e-12)
    free = best_simple_path(graph, LEFT, RIGHT)
    assert res.weights[0] >= free - 1e-12
    for path in res.paths:
        assert set(path.crack_ids) & set(zones[0].members)
    assert res.weights == sorted(res.weights)
    assert len({p.crack_ids for p in res.paths}) == len(res.paths)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_generated_scenarios(seed):
    s = generate_scenario(seed, n_cracks=10)
    res = predict_nfpz(s)
    assert 1 <= len(res.paths) <= 3
    assert all(w <= s.geometry.w + 1e-12 for w in res.weights) or not res.fallback
    if not res.fallback:
        assert all(set(p.crack_ids) & set(res.zones[0].members) for p in res.paths)
