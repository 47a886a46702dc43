import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imputeinr.clustering import (ClusterPartition, agglomerate, inverse_reorder, inverse_reorder_window,
                                  linkage_distance, permutation_from_clusters, reorder, similarity_matrix)
from imputeinr.data import TimeSeriesWindow


def test_similarity_examples():
    rng = np.random.default_rng(0)
    x = rng.normal(size=50)
    s = similarity_matrix(np.stack([x, x, -x]), np.ones((3, 50)))
    assert s[0, 1] == pytest.approx(1.0)
    assert s[0, 2] == pytest.approx(-1.0)
    np.testing.assert_array_equal(np.diag(s), 1.0)
    np.testing.assert_array_equal(s, s.T)


def test_similarity_independent_draws():
    rng = np.random.default_rng(42)
    hits = 0
    for _ in range(20):
        s = similarity_matrix(rng.standard_normal((2, 1000)), np.ones((2, 1000)))
        hits += abs(s[0, 1]) < 0.1
    assert hits >= 19


def test_similarity_pairwise_observed():
    vals = np.array([[1.0, 2.0, 3.0, 100.0], [2.0, 4.0, 6.0, -50.0], [1.0, 0.0, 0.0, 0.0]])
    mask = np.array([[1, 1, 1, 0], [1, 1, 1, 1], [1, 0, 0, 0]])
    s = similarity_matrix(vals, mask)
    assert s[0, 1] == pytest.approx(1.0)
    assert s[0, 2] == 0.0  # one common observation


def test_agglomerate_trivial_cases():
    assert agglomerate(np.ones((1, 1)), 0.5).K == 1
    S = np.full((4, 4), 0.9)
    np.fill_diagonal(S, 1.0)
    assert agglomerate(S, 0.0).K == 4
    assert agglomerate(S, 1e9).K == 1


def _pairs_matrix():
    S = np.array([[1.0, 0.95, 0.1, 0.0],
                  [0.95, 1.0, 0.05, 0.1],
                  [0.1, 0.05, 1.0, 0.9],
                  [0.0, 0.1, 0.9, 1.0]])
    return S


def test_agglomerate_recovers_pairs():
    p = agglomerate(_pairs_matrix(), 0.5)
    assert p.K == 2
    assert sorted(map(tuple, p.clusters())) == [(0, 1), (2, 3)]


def _random_similarity(rng, n):
    x = rng.normal(size=(n, 40))
    x[n // 2:] += x[0]
    return similarity_matrix(x, np.ones_like(x))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 8), eps=st.floats(0.0, 2.0))
def test_final_clusters_respect_threshold(seed, n, eps):
    S = _random_similarity(np.random.default_rng(seed), n)
    p = agglomerate(S, eps)
    clusters = p.clusters()
    for a, b in itertools.combinations(clusters, 2):
        assert linkage_distance(S, a, b) >= eps
    assert sorted(i for c in clusters for i in c) == list(range(n))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 7))
def test_clustering_permutation_equivariant(seed, n):
    rng = np.random.default_rng(seed)
    S = _random_similarity(rng, n)
    q = rng.permutation(n)
    base = {frozenset(c) for c in agglomerate(S, 0.6).clusters()}
    perm = {frozenset(q[i] for i in c) for c in agglomerate(S[np.ix_(q, q)], 0.6).clusters()}
    assert base == perm


def test_permutation_from_clusters():
    p = permutation_from_clusters(ClusterPartition([0, 0, 1, 1]))
    np.testing.assert_array_equal(p.pi, [0, 1, 2, 3])
    p = permutation_from_clusters(ClusterPartition([1, 0, 1, 0]))
    np.testing.assert_array_equal(p.pi, [1, 3, 0, 2])
    p = permutation_from_clusters(ClusterPartition([0, 0, 0]))
    np.testing.assert_array_equal(p.pi, [0, 1, 2])


def test_reorder_examples():
    w = TimeSeriesWindow(np.arange(6.0).reshape(3, 2), [[1, 0], [1, 1], [0, 1]], ["a", "b", "c"])
    ident = ClusterPartition([0, 0, 0], [0, 1, 2])
    r = reorder(w, ident)
    assert np.array_equal(r.values, w.values) and r.variable_names == w.variable_names
    rev = ClusterPartition([2, 1, 0], [2, 1, 0])
    r = reorder(w, rev)
    np.testing.assert_array_equal(r.values, w.values[[2, 1, 0]])
    assert r.variable_names == ["c", "b", "a"]
    np.testing.assert_array_equal(r.mask, w.mask[[2, 1, 0]])


@settings(max_examples=50)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 9))
def test_reorder_roundtrip(seed, n):
    rng = np.random.default_rng(seed)
    w = TimeSeriesWindow(rng.normal(size=(n, 5)), (rng.random((n, 5)) > 0.5).astype(int))
    p = permutation_from_clusters(ClusterPartition(rng.integers(0, 3, n)))
    r = reorder(w, p)
    assert np.array_equal(inverse_reorder(r.values, p), w.values)
    back = inverse_reorder_window(r, p)
    assert np.array_equal(back.values, w.values)
    assert np.array_equal(back.mask, w.mask)
    assert back.variable_names == w.variable_names
    # cluster members are contiguous after reordering
    reordered_ids = p.assignment[p.pi]
    assert np.all(np.diff(reordered_ids) >= 0)
