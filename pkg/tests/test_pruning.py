import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from narxprune.dictionary import Dictionary, learn_dictionary
from narxprune.exceptions import DataError, RankExhaustedError
from narxprune.fastcan import select_greedy
from narxprune.pruning import (
    build_batch_matrix,
    prune_minibatch_fastcan,
    prune_random,
    resolve_batch_size,
)


@pytest.mark.parametrize("q, p", [(15, 7), (20, 5), (25, 4), (5, 10)])
def test_default_batch_sizes(q, p):
    assert resolve_batch_size(100, q, 10) == p


def test_requested_batch_size_bounds():
    assert resolve_batch_size(100, 15, 10, 3) == 3
    assert resolve_batch_size(100, 15, 10, 50) == 7
    assert resolve_batch_size(100, 2, 10, 30) == 10
    with pytest.raises(ValueError):
        resolve_batch_size(100, 15, 10, 0)


def test_batch_matrix_round_robin():
    bm = build_batch_matrix(100, 15, 7)
    assert bm.B.shape == (15, 1)
    np.testing.assert_array_equal(bm.B[:, 0], [7] * 14 + [2])


def test_batch_matrix_exact_division():
    bm = build_batch_matrix(100, 5, 10)
    np.testing.assert_array_equal(bm.B, np.full((5, 2), 10))


def test_batch_matrix_one_per_atom():
    np.testing.assert_array_equal(build_batch_matrix(6, 6, 1).B, np.ones((6, 1)))


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 400), q=st.integers(1, 40), p=st.integers(1, 20))
def test_batch_matrix_invariants(n, q, p):
    bm = build_batch_matrix(n, q, p)
    assert bm.t == -(-n // (q * p))
    assert bm.B.min() >= 0 and bm.B.max() <= p
    assert bm.B.sum() == n
    rows = bm.B.sum(axis=1)
    assert rows.max() - rows.min() <= p


def _sample_matrix(rng, m=6, N=200):
    return rng.normal(size=(m, N)) + rng.normal(size=(m, 1))


def test_select_everything_when_n_equals_n(rng):
    X = _sample_matrix(rng, 4, 30)
    res = prune_minibatch_fastcan(X, learn_dictionary(X, 3, seed=0), 30, p=4)
    assert sorted(res.indices) == list(range(30))


def test_single_atom_equals_one_selector_call(rng):
    X = _sample_matrix(rng)
    m = X.shape[0]
    mean = X.mean(axis=1, keepdims=True)
    dic = Dictionary(atoms=mean, inertia=0.0, seed=None)
    res = prune_minibatch_fastcan(X, dic, m, p=m)
    direct = select_greedy(X, mean[:, 0], m, center=False)
    assert list(res.indices) == list(direct.indices)


def test_accounting_and_exclusivity(rng):
    X = _sample_matrix(rng)
    dic = learn_dictionary(X, 7, seed=2)
    res = prune_minibatch_fastcan(X, dic, 45, p=3)
    assert len(set(res.indices)) == 45
    assert res.indices.min() >= 0 and res.indices.max() < X.shape[1]
    # atoms are visited in order; batches of atom i are contiguous
    per_atom = res.batches.sum(axis=1)
    np.testing.assert_array_equal(np.cumsum(per_atom)[-1], 45)
    assert res.config["p"] == 3 and res.config["q"] == 7


def test_within_batch_vectors_independent(rng):
    X = _sample_matrix(rng, 6, 300)
    dic = learn_dictionary(X, 4, seed=5)
    res = prune_minibatch_fastcan(X, dic, 48, p=6)
    start = 0
    for i in range(res.batches.shape[0]):
        for j in range(res.batches.shape[1]):
            size = int(res.batches[i, j])
            block = X[:, res.indices[start:start + size]]
            start += size
            s = np.linalg.svd(block, compute_uv=False)
            assert s[-1] > 1e-8 * s[0]


def test_duplicates_split_by_batch(rng):
    base = rng.normal(size=(5, 40))
    X = np.hstack([base, base])
    dic = Dictionary(atoms=base[:, :1] + 0.01, inertia=0.0, seed=None)
    res = prune_minibatch_fastcan(X, dic, 10, p=5)
    first, second = res.indices[:5] % 40, res.indices[5:] % 40
    assert len(set(first)) == 5
    assert len(set(second)) == 5
    # with no deflation across batches, the twins of batch one come back
    assert set(first) == set(second)


def test_rank_exhaustion_reports_the_batch(rng):
    X = _sample_matrix(rng, 4, 50)
    dic = learn_dictionary(X, 2, seed=0)
    with pytest.raises(RankExhaustedError, match=r"atom 0, batch 0"):
        prune_minibatch_fastcan(X, dic, 8, p=4, center=True)


def test_dictionary_shape_mismatch(rng):
    X = _sample_matrix(rng, 4, 50)
    dic = Dictionary(atoms=np.ones((3, 2)), inertia=0.0, seed=None)
    with pytest.raises(DataError):
        prune_minibatch_fastcan(X, dic, 10)


def test_random_full_and_deterministic():
    assert sorted(prune_random(20, 20, seed=1).indices) == list(range(20))
    np.testing.assert_array_equal(prune_random(100, 10, 9).indices, prune_random(100, 10, 9).indices)
    with pytest.raises(DataError):
        prune_random(5, 6, 0)


def test_random_uniform_frequency():
    counts = np.zeros(100)
    for seed in range(10_000):
        counts[prune_random(100, 10, seed).indices] += 1
    freq = counts / 10_000
    assert np.all(np.abs(freq - 0.10) <= 0.01)


def test_fastcan_deterministic_given_dictionary(rng):
    X = _sample_matrix(rng)
    dic = learn_dictionary(X, 5, seed=4)
    a = prune_minibatch_fastcan(X, dic, 30)
    b = prune_minibatch_fastcan(X, dic, 30)
    np.testing.assert_array_equal(a.indices, b.indices)
