"""Lagged polynomial term libraries for NARX identification.

A library is built in two stages. :func:`build_shift_matrix` turns one
input/output record into the lagged regressors ``y(k-1) .. y(k-n_y)``,
``u(k-1) .. u(k-n_u)``, dropping the leading samples whose lags reach
before the start of the record. :func:`expand_polynomial` then forms every
monomial of those regressors up to the requested degree.

Layout convention: matrices are ``(n_terms, n_samples)``, one row per term
and one column per usable time index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb
from typing import Sequence

import numpy as np

from .exceptions import DataError, InsufficientSamplesError, NonUniformSamplingError

OUTPUT = "y"
INPUT = "u"

# relative tolerance on the sampling step
DT_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Aligned input/output record sampled on a uniform time grid."""

    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        u = np.asarray(self.u, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if t.ndim != 1 or u.shape != t.shape or y.shape != t.shape:
            raise DataError(
                f"t, u and y must be 1-D with equal length, got "
                f"{t.shape}, {u.shape}, {y.shape}"
            )
        if t.size < 2:
            raise InsufficientSamplesError("a time series needs at least 2 samples")
        check_uniform_step(t)
        for name, arr in (("t", t), ("u", u), ("y", y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self):
        return self.t.size

    @property
    def dt(self):
        return (self.t[-1] - self.t[0]) / (self.t.size - 1)


def check_uniform_step(t, rtol=DT_RTOL):
    """Raise unless ``t`` is strictly increasing with a constant step."""
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise NonUniformSamplingError("time stamps must be strictly increasing")
    dt = (t[-1] - t[0]) / (t.size - 1)
    worst = np.max(np.abs(steps - dt))
    if worst > rtol * dt:
        raise NonUniformSamplingError(
            f"non-uniform sampling: step deviates by {worst / dt:.3g} "
            f"(relative) from the mean step {dt:.6g}"
        )


@dataclass(frozen=True, order=True)
class TermDescriptor:
    """A monomial of lagged signals.

    ``factors`` holds ``(signal, lag)`` pairs in canonical order: output lags
    before input lags, each by increasing lag. Two descriptors compare equal
    exactly when they denote the same product.
    """

    factors: tuple = ()

    def __post_init__(self):
        canon = tuple(sorted((_normalise_factor(f) for f in self.factors), key=_factor_key))
        object.__setattr__(self, "factors", canon)

    @property
    def degree(self):
        return len(self.factors)

    def max_lag(self, signal):
        lags = [lag for sig, lag in self.factors if sig == signal]
        return max(lags, default=0)

    def __str__(self):
        if not self.factors:
            return "1"
        return "*".join(f"{sig}[k-{lag}]" for sig, lag in self.factors)

    def to_json(self):
        return [[sig, lag] for sig, lag in self.factors]

    @classmethod
    def from_json(cls, data):
        return cls(tuple((sig, int(lag)) for sig, lag in data))


def _normalise_factor(factor):
    sig, lag = factor
    if sig not in (OUTPUT, INPUT):
        raise ValueError(f"unknown signal {sig!r}")
    lag = int(lag)
    if lag < 1:
        raise ValueError(f"lags start at 1, got {lag}")
    return (sig, lag)


def _factor_key(factor):
    sig, lag = factor
    return (0 if sig == OUTPUT else 1, lag)


def lagged_variables(n_y, n_u):
    """Regressor order used throughout: y lags 1..n_y then u lags 1..n_u."""
    return [(OUTPUT, i) for i in range(1, n_y + 1)] + [
        (INPUT, i) for i in range(1, n_u + 1)
    ]


def term_count(n, degree):
    """Number of monomials of ``n`` variables up to ``degree``, intercept included."""
    return comb(n + degree, degree)


@dataclass(frozen=True, eq=False)
class ShiftMatrix:
    """Lagged regressors of one record.

    ``values`` is ``(n_y + n_u, N)``; ``index`` maps each column back to the
    time index ``k`` of the record it was taken from.
    """

    values: np.ndarray
    target: np.ndarray
    variables: tuple
    index: np.ndarray
    n_y: int
    n_u: int


def build_shift_matrix(series, n_y, n_u, dropna=True):
    """Time-shift a record into lagged regressors.

    Parameters
    ----------
    series : TimeSeries
    n_y, n_u : int
        Maximum output and input lags.
    dropna : bool, default=True
        Drop the first ``max(n_y, n_u)`` samples, whose lags would reach
        before the record start. With ``dropna=False`` those entries are NaN
        and every sample is kept, which is only useful for display.

    Returns
    -------
    ShiftMatrix
    """
    if n_y < 0 or n_u < 0 or n_y + n_u < 1:
        raise ValueError(f"need n_y, n_u >= 0 and n_y + n_u >= 1, got {n_y}, {n_u}")
    total = len(series)
    skip = max(n_y, n_u)
    if total < skip + 1:
        raise InsufficientSamplesError(
            f"insufficient samples: {total} samples cannot supply lags up to {skip}"
        )
    variables = lagged_variables(n_y, n_u)
    start = skip if dropna else 0
    k = np.arange(start, total)
    values = np.empty((len(variables), k.size))
    for row, (sig, lag) in enumerate(variables):
        source = series.y if sig == OUTPUT else series.u
        src = k - lag
        valid = src >= 0
        values[row] = np.nan
        values[row, valid] = source[src[valid]]
    return ShiftMatrix(
        values=values,
        target=np.array(series.y[k]),
        variables=tuple(variables),
        index=k,
        n_y=n_y,
        n_u=n_u,
    )


@dataclass(frozen=True, eq=False)
class TermLibrary:
    """Candidate polynomial terms evaluated over the usable samples.

    Attributes
    ----------
    X : ndarray of shape (n_terms, N)
    target : ndarray of shape (N,)
        ``y(k)`` aligned with the columns of ``X``.
    descriptors : tuple of TermDescriptor
    config : tuple
        ``(n_y, n_u, degree)``.
    groups : ndarray of shape (N,)
        Record number each column was taken from; lags never cross records.
    index : ndarray of shape (N,)
        Time index ``k`` inside that record.
    """

    X: np.ndarray
    target: np.ndarray
    descriptors: tuple
    config: tuple
    groups: np.ndarray
    index: np.ndarray

    @property
    def n_terms(self):
        return self.X.shape[0]

    @property
    def n_samples(self):
        return self.X.shape[1]

    def rows(self, term_indices):
        return self.X[np.asarray(term_indices, dtype=int)]


def enumerate_monomials(n, degree):
    """All multisets of ``range(n)`` with sizes 1..degree, graded-lex ordered."""
    out = []
    for d in range(1, degree + 1):
        out.extend(combinations_with_replacement(range(n), d))
    return out


def expand_polynomial(shift, degree):
    """Expand lagged regressors into all monomials up to ``degree``.

    Rows follow :func:`enumerate_monomials`; the intercept is not a row.
    """
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    monomials = enumerate_monomials(len(shift.variables), degree)
    X = np.empty((len(monomials), shift.values.shape[1]))
    descriptors = []
    for row, idx in enumerate(monomials):
        prod = shift.values[idx[0]].copy()
        for i in idx[1:]:
            prod *= shift.values[i]
        X[row] = prod
        descriptors.append(TermDescriptor(tuple(shift.variables[i] for i in idx)))
    n = shift.index.size
    return TermLibrary(
        X=X,
        target=shift.target,
        descriptors=tuple(descriptors),
        config=(shift.n_y, shift.n_u, degree),
        groups=np.zeros(n, dtype=int),
        index=shift.index,
    )


def build_library(series, n_y, n_u, degree):
    """Term library pooled over one or several records.

    Each record is shifted and expanded on its own and the columns are then
    concatenated, so no column mixes samples of two records.
    """
    if isinstance(series, TimeSeries):
        series = [series]
    parts = [expand_polynomial(build_shift_matrix(s, n_y, n_u), degree) for s in series]
    if not parts:
        raise DataError("no time series given")
    groups = np.concatenate(
        [np.full(p.n_samples, g, dtype=int) for g, p in enumerate(parts)]
    )
    return TermLibrary(
        X=np.hstack([p.X for p in parts]),
        target=np.concatenate([p.target for p in parts]),
        descriptors=parts[0].descriptors,
        config=(n_y, n_u, degree),
        groups=groups,
        index=np.concatenate([p.index for p in parts]),
    )


def evaluate_terms(descriptors: Sequence[TermDescriptor], series, n_y, n_u):
    """Evaluate chosen terms on records without building the full library.

    Returns ``(X, target, groups)`` laid out like :class:`TermLibrary`, using
    the same lag trimming ``max(n_y, n_u)`` so columns line up with a library
    built from the same records and config.
    """
    if isinstance(series, TimeSeries):
        series = [series]
    variables = lagged_variables(n_y, n_u)
    pos = {v: i for i, v in enumerate(variables)}
    blocks, targets, groups = [], [], []
    for g, s in enumerate(series):
        shift = build_shift_matrix(s, n_y, n_u)
        block = np.empty((len(descriptors), shift.index.size))
        for row, desc in enumerate(descriptors):
            block[row] = _monomial(shift.values, [pos[f] for f in desc.factors])
        blocks.append(block)
        targets.append(shift.target)
        groups.append(np.full(shift.index.size, g, dtype=int))
    return np.hstack(blocks), np.concatenate(targets), np.concatenate(groups)


def _monomial(values, rows):
    if not rows:
        return np.ones(values.shape[1])
    prod = values[rows[0]].copy()
    for i in rows[1:]:
        prod *= values[i]
    return prod
