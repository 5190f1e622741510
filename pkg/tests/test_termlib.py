from itertools import product
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from narxprune import datasets
from narxprune.exceptions import InsufficientSamplesError, NonUniformSamplingError
from narxprune.termlib import (
    TermDescriptor,
    TimeSeries,
    build_library,
    build_shift_matrix,
    enumerate_monomials,
    evaluate_terms,
    expand_polynomial,
    term_count,
)


def _series(y, u=None, dt=0.1):
    y = np.asarray(y, dtype=float)
    u = np.zeros_like(y) if u is None else np.asarray(u, dtype=float)
    return TimeSeries(t=dt * np.arange(y.size), u=u, y=y)


def _multisets_by_brute_force(n, degree):
    """Count sorted index tuples of every length 1..degree by filtering all tuples."""
    total = 0
    for d in range(1, degree + 1):
        total += sum(1 for tup in product(range(n), repeat=d) if list(tup) == sorted(tup))
    return total


@pytest.mark.parametrize("n", range(1, 11))
@pytest.mark.parametrize("degree", range(1, 5))
def test_term_count_matches_enumeration(n, degree):
    expected = comb(n + degree, degree)
    assert len(enumerate_monomials(n, degree)) + 1 == expected
    assert term_count(n, degree) == expected
    if n ** degree <= 10 ** 4:
        assert _multisets_by_brute_force(n, degree) + 1 == expected


def test_narx_library_has_165_terms():
    s = _series(np.random.default_rng(0).normal(size=40), np.random.default_rng(1).normal(size=40))
    lib = build_library(s, 4, 4, 3)
    assert lib.n_terms + 1 == 165
    assert len(set(lib.descriptors)) == 164


def test_single_variable_degree_two():
    s = _series([1.0, 2.0, 3.0, 4.0])
    shift = build_shift_matrix(s, 1, 0)
    lib = expand_polynomial(shift, 2)
    np.testing.assert_array_equal(lib.X, [[1, 2, 3], [1, 4, 9]])
    assert [str(d) for d in lib.descriptors] == ["y[k-1]", "y[k-1]*y[k-1]"]


def test_degree_one_is_identity(rng):
    s = _series(rng.normal(size=20), rng.normal(size=20))
    shift = build_shift_matrix(s, 3, 2)
    lib = expand_polynomial(shift, 1)
    np.testing.assert_array_equal(lib.X, shift.values)


def test_sine_demo_shift_matrix():
    s = datasets.generate_sine_demo().train[0]
    shift = build_shift_matrix(s, 20, 0)
    assert shift.values.shape == (20, 80)
    # first usable sample is k=20; its lag-20 entry is y(0)
    assert shift.index[0] == 20
    np.testing.assert_allclose(shift.values[19, 0], 0.0, atol=5e-4)

    full = build_shift_matrix(s, 20, 0, dropna=False)
    # row at k=3: (y(2), y(1), y(0), NaN, ...)
    np.testing.assert_allclose(full.values[:3, 3], [0.127, 0.063, 0.000], atol=5e-4)
    assert np.isnan(full.values[3:, 3]).all()
    assert np.isnan(full.values[1, 0:2]).all() and np.isnan(full.values[0, 0])
    np.testing.assert_allclose(full.values[0, 4], 0.189, atol=5e-4)
    # last usable sample, k=99
    np.testing.assert_allclose(shift.values[0, 79], -0.063, atol=5e-4)
    np.testing.assert_allclose(shift.values[19, 79], -0.955, atol=5e-4)


def test_constant_series_lags_are_constant():
    s = _series(np.full(12, 3.5), np.full(12, -1.0))
    shift = build_shift_matrix(s, 3, 2)
    np.testing.assert_array_equal(shift.values[:3], 3.5)
    np.testing.assert_array_equal(shift.values[3:], -1.0)


def test_insufficient_samples():
    with pytest.raises(InsufficientSamplesError, match="insufficient samples"):
        build_shift_matrix(_series([1.0, 2.0, 3.0]), 3, 0)


def test_non_uniform_time_rejected():
    t = np.array([0.0, 0.01, 0.02 * (1 + 1e-3)])
    with pytest.raises(NonUniformSamplingError):
        TimeSeries(t=t, u=np.zeros(3), y=np.zeros(3))


def test_library_rows_match_explicit_products(rng):
    y, u = rng.normal(size=15), rng.normal(size=15)
    lib = build_library(_series(y, u), 2, 2, 3)
    for row, desc in enumerate(lib.descriptors):
        for col, k in enumerate(lib.index):
            expected = 1.0
            for sig, lag in desc.factors:
                expected *= (y if sig == "y" else u)[k - lag]
            assert lib.X[row, col] == pytest.approx(expected, rel=1e-14)


def test_pooled_library_never_straddles_records(rng):
    a = _series(rng.normal(size=10) + 100.0)
    b = _series(rng.normal(size=12) - 100.0)
    lib = build_library([a, b], 2, 0, 1)
    assert lib.n_samples == 8 + 10
    np.testing.assert_array_equal(lib.groups, [0] * 8 + [1] * 10)
    # every lag of group 0 is positive, every lag of group 1 negative
    assert (lib.X[:, lib.groups == 0] > 0).all()
    assert (lib.X[:, lib.groups == 1] < 0).all()


def test_evaluate_terms_matches_library(rng):
    series = [_series(rng.normal(size=20), rng.normal(size=20)) for _ in range(2)]
    lib = build_library(series, 3, 2, 2)
    pick = [0, 5, 11, len(lib.descriptors) - 1]
    X, target, groups = evaluate_terms([lib.descriptors[i] for i in pick], series, 3, 2)
    np.testing.assert_array_equal(X, lib.X[pick])
    np.testing.assert_array_equal(target, lib.target)
    np.testing.assert_array_equal(groups, lib.groups)


def test_descriptor_canonical_order_and_json():
    a = TermDescriptor((("u", 2), ("y", 1)))
    b = TermDescriptor((("y", 1), ("u", 2)))
    assert a == b and hash(a) == hash(b)
    assert str(a) == "y[k-1]*u[k-2]"
    assert a.degree == 2
    assert TermDescriptor.from_json(a.to_json()) == a


def test_library_is_deterministic(rng):
    s = _series(rng.normal(size=30), rng.normal(size=30))
    a, b = build_library(s, 4, 4, 3), build_library(s, 4, 4, 3)
    np.testing.assert_array_equal(a.X, b.X)
    assert a.descriptors == b.descriptors


@settings(max_examples=40, deadline=None)
@given(n_y=st.integers(0, 4), n_u=st.integers(0, 4), degree=st.integers(1, 3),
       length=st.integers(6, 20))
def test_library_shape_property(n_y, n_u, degree, length):
    if n_y + n_u == 0:
        return
    r = np.random.default_rng(length)
    s = _series(r.normal(size=length), r.normal(size=length))
    lib = build_library(s, n_y, n_u, degree)
    assert lib.n_terms + 1 == comb(n_y + n_u + degree, degree)
    assert lib.n_samples == length - max(n_y, n_u)
    assert np.isfinite(lib.X).all()
