import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make_set
from loadshield.cluster import (LINKAGES, ClusterModel, agglomerate, build_cluster_models,
                                cut_trace, linkage_trace, proximity, select_k, silhouette)


def blobs(rng, centers, per, spread=0.05, dim=20):
    pts = [np.asarray(c, dtype=float) + rng.normal(0, spread, (per, dim)) for c in centers]
    return np.vstack(pts)


def test_proximity_basics():
    e = np.eye(3)
    d = proximity(np.vstack([e[0], e[1], e[0]])).distances
    assert d[0, 2] == 0.0
    assert d[0, 1] == pytest.approx(np.sqrt(2), abs=1e-15)


def test_proximity_matches_double_loop(rng):
    x = rng.normal(size=(5, 20))
    d = proximity(x).distances
    np.testing.assert_allclose(d, oracles.distances(x.tolist()), atol=1e-12)
    assert np.all(d == d.T) and np.all(np.diag(d) == 0) and np.all(d >= 0)
    for i, j, k in itertools.permutations(range(5), 3):
        assert d[i, k] <= d[i, j] + d[j, k] + 1e-12


def test_proximity_rejects_nan():
    with pytest.raises(ValueError):
        proximity(np.array([[0.0, np.nan], [1.0, 1.0]]))


def test_agglomerate_extremes(rng):
    p = proximity(rng.normal(size=(6, 3)))
    a = agglomerate(p, 6)
    assert a.merge_trace == [] and sorted(a.labels) == list(range(6))
    one = agglomerate(p, 1)
    assert set(one.labels) == {0} and len(one.merge_trace) == 5
    for bad in (0, 7):
        with pytest.raises(ValueError):
            agglomerate(p, bad)


def test_two_blobs_recovered_and_match_exhaustive_oracle(rng):
    x = blobs(rng, [np.zeros(20), np.full(20, 3.0)], 3)
    p = proximity(x)
    a = agglomerate(p, 2, "average")
    assert oracles.as_partition(a.labels) == {frozenset({0, 1, 2}), frozenset({3, 4, 5})}
    d = p.distances.tolist()
    # exhaustive over all 2-partitions: the blob split maximises the average-link gap
    best = max(oracles.set_partitions(range(6), 2),
               key=lambda q: oracles.linkage_distance(d, q[0], q[1], "average"))
    assert {frozenset(b) for b in best} == oracles.as_partition(a.labels)


@pytest.mark.parametrize("linkage", LINKAGES)
def test_matches_stepwise_exhaustive_oracle(rng, linkage):
    for _ in range(25):
        n = int(rng.integers(3, 9))
        x = rng.normal(size=(n, 4))
        p = proximity(x)
        k = int(rng.integers(1, n + 1))
        part, dists = oracles.greedy_partition(p.distances.tolist(), k, linkage)
        a = agglomerate(p, k, linkage)
        assert oracles.as_partition(a.labels) == part
        np.testing.assert_allclose([m.distance for m in a.merge_trace], dists, atol=1e-12)


def test_single_linkage_is_exhaustive_max_gap(rng):
    for _ in range(20):
        n = int(rng.integers(3, 9))
        p = proximity(rng.normal(size=(n, 3)))
        k = int(rng.integers(2, n + 1))
        part, _ = oracles.best_separated_partition(p.distances.tolist(), k)
        assert oracles.as_partition(agglomerate(p, k, "single").labels) == part


@pytest.mark.parametrize("linkage", LINKAGES)
def test_dendrogram_monotone_and_cut_consistent(rng, linkage):
    for _ in range(10):
        n = int(rng.integers(3, 30))
        p = proximity(rng.normal(size=(n, 5)))
        trace = linkage_trace(p, linkage)
        assert len(trace) == n - 1
        dist = np.array([m.distance for m in trace])
        assert np.all(np.diff(dist) >= -1e-12)
        for k in range(1, n + 1):
            a = agglomerate(p, k, linkage)
            assert len(a.merge_trace) == n - k
            assert a.labels.tolist() == cut_trace(trace, n, k).tolist()
            assert set(a.labels) == set(range(k))


def test_equal_distances_are_deterministic():
    # square: all four sides tie; lowest id pair (0, 1) merges first
    x = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    trace = linkage_trace(proximity(x), "single")
    assert (trace[0].cluster_a, trace[0].cluster_b) == (0, 1)


def test_silhouette_coincident_clusters():
    x = np.vstack([np.zeros((3, 2)), np.ones((3, 2))])
    s = silhouette(proximity(x), np.array([0, 0, 0, 1, 1, 1]))
    assert s.per_point.tolist() == [1.0] * 6


def test_silhouette_equidistant_point():
    x = np.array([[-1.0, 0], [-1.0, 0], [1.0, 0], [1.0, 0], [0.0, 0]])
    # z sits with the left pair: a(z) = 1 = b(z)
    s = silhouette(proximity(x), np.array([0, 0, 1, 1, 0]))
    assert s.per_point[4] == 0.0


def test_silhouette_matches_oracle(rng):
    x = rng.normal(size=(8, 20))
    p = proximity(x)
    labels = np.array([0, 0, 1, 1, 1, 2, 2, 0])
    s = silhouette(p, labels)
    np.testing.assert_allclose(s.per_point, oracles.silhouette(p.distances.tolist(), labels.tolist()),
                               atol=1e-12)


def test_silhouette_singleton_and_undefined(rng):
    p = proximity(rng.normal(size=(4, 2)))
    assert silhouette(p, np.array([0, 1, 1, 1])).per_point[0] == 0.0
    with pytest.raises(ValueError, match="undefined"):
        silhouette(p, np.zeros(4, dtype=int))


@pytest.mark.parametrize("n_blobs", [2, 3])
def test_select_k_recovers_blobs(rng, n_blobs):
    centers = [np.full(20, 4.0 * i) for i in range(n_blobs)]
    p = proximity(blobs(rng, centers, 5))
    a, diag = select_k(p, 5)
    assert diag.selected_k == n_blobs == a.k
    for k, v in diag.mean_by_k.items():
        brute = np.mean(oracles.silhouette(p.distances.tolist(), cut_trace(linkage_trace(p), p.n, k).tolist()))
        assert v == pytest.approx(brute, abs=1e-12)
        if k != n_blobs:
            assert diag.mean_by_k[n_blobs] > v


def test_select_k_coincident_points_tie_to_two():
    a, diag = select_k(proximity(np.zeros((6, 3))), 5)
    assert set(diag.mean_by_k.values()) == {0.0}
    assert a.k == 2


def test_select_k_range_and_errors(rng):
    p = proximity(rng.normal(size=(4, 3)))
    _, diag = select_k(p, 5)
    assert sorted(diag.mean_by_k) == [2, 3]
    a, _ = select_k(proximity(rng.normal(size=(9, 3))), 2)
    assert a.k == 2
    with pytest.raises(ValueError):
        select_k(proximity(rng.normal(size=(2, 3))))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_select_k_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    x = blobs(rng, [np.zeros(6), np.full(6, 2.0), np.r_[np.full(3, 4.0), np.zeros(3)]], 4, spread=0.4, dim=6)
    perm = rng.permutation(len(x))
    a, _ = select_k(proximity(x))
    b, _ = select_k(proximity(x[perm]))
    mapped = {frozenset(int(perm[i]) for i in block) for block in oracles.as_partition(b.labels)}
    assert mapped == oracles.as_partition(a.labels)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 12))
def test_silhouette_bounds_and_mean(seed, n):
    rng = np.random.default_rng(seed)
    p = proximity(rng.normal(size=(n, 3)))
    labels = cut_trace(linkage_trace(p), n, int(rng.integers(2, n)))
    s = silhouette(p, labels)
    assert np.all(s.per_point >= -1) and np.all(s.per_point <= 1)
    assert s.mean == pytest.approx(float(np.mean(s.per_point)), abs=1e-12)


def test_build_models_single_member():
    day = np.linspace(0, 1, 48)
    (m,) = build_cluster_models([make_set(day)], np.array([0]), "hotel")
    assert m.ac.tolist() == day.tolist() and m.asd.tolist() == [0.0] * 48 and m.n_members == 1


def test_build_models_pools_days():
    (m,) = build_cluster_models([make_set([np.zeros(48), np.ones(48)])], np.array([0]))
    assert m.ac.tolist() == [0.5] * 48 and m.asd.tolist() == [0.5] * 48


def test_build_models_match_oracle(rng):
    sets = [make_set(rng.random((int(rng.integers(1, 5)), 48)), f"b{i}") for i in range(6)]
    labels = np.array([0, 1, 0, 1, 1, 0])
    models = build_cluster_models(sets, labels, "hotel")
    for m in models:
        days = [row.tolist() for s, l in zip(sets, labels) if l == m.cluster_id for row in s.matrix()]
        mean, std = oracles.mean_std_per_period(days)
        np.testing.assert_allclose(m.ac, mean, atol=1e-12)
        np.testing.assert_allclose(m.asd, std, atol=1e-12)
        assert np.all((m.ac >= 0) & (m.ac <= 1)) and np.all(m.asd >= 0)
    assert models[0].member_ids == ["b0", "b2", "b5"]


def test_model_json_roundtrip():
    m = ClusterModel("pub", 1, np.linspace(0, 1, 48), np.full(48, 0.1), ["a", "b"],
                     {"linkage": "average", "selected_k": 2})
    doc = json.loads(m.to_json())
    assert set(doc) == {"industry", "cluster_id", "ac", "asd", "members", "provenance"}
    back = ClusterModel.from_dict(doc)
    assert back.ac.tolist() == m.ac.tolist() and back.to_json() == m.to_json()
