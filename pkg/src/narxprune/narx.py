"""Reduced polynomial NARX models.

A reduced model keeps ``m`` terms of the full polynomial library plus an
intercept. Terms are chosen with :func:`select_terms`; coefficients come
from ordinary least squares in :func:`fit`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DataError, DivergenceError, RankDeficientError
from .fastcan import select_greedy
from .termlib import (
    INPUT,
    OUTPUT,
    TermDescriptor,
    TermLibrary,
    TimeSeries,
    evaluate_terms,
)

DIVERGENCE_GUARD = 1e6
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class NarxPreset:
    name: str
    n_y: int
    n_u: int
    degree: int
    n_terms: int
    n_atoms: int

    @property
    def config(self):
        return (self.n_y, self.n_u, self.degree)


# model structure per dataset; n_atoms is the best atom count found by the
# atom-size sweep on each dataset
PRESETS = {
    "sdse": NarxPreset("sdse", 4, 4, 3, 10, 15),
    "adse": NarxPreset("adse", 4, 4, 3, 10, 20),
    "emps": NarxPreset("emps", 4, 4, 3, 10, 25),
    "whs": NarxPreset("whs", 7, 7, 3, 10, 5),
}


def get_preset(name):
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise DataError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}"
        ) from None


@dataclass(frozen=True, eq=False)
class ReducedNarxModel:
    """Selected terms with their least-squares coefficients.

    Attributes
    ----------
    config : tuple
        ``(n_y, n_u, degree)`` of the library the terms came from.
    terms : tuple of TermDescriptor
    coefficients : ndarray of shape (m,)
    intercept : float
    """

    config: tuple
    terms: tuple
    coefficients: np.ndarray
    intercept: float

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float).copy()
        if len(self.terms) != coef.size or coef.size < 1:
            raise ValueError("need one coefficient per term and at least one term")
        if not np.all(np.isfinite(coef)) or not np.isfinite(self.intercept):
            raise RankDeficientError("non-finite coefficients")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "config", tuple(int(c) for c in self.config))
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def n_terms(self):
        return len(self.terms)

    @property
    def max_lag(self):
        return max(self.config[0], self.config[1])

    def full_coefficients(self):
        """Intercept followed by term coefficients."""
        return np.concatenate([[self.intercept], self.coefficients])

    def to_json(self):
        n_y, n_u, degree = self.config
        return {
            "n_y": n_y,
            "n_u": n_u,
            "degree": degree,
            "terms": [t.to_json() for t in self.terms],
            "term_names": [str(t) for t in self.terms],
            "coefficients": [float(c) for c in self.coefficients],
            "intercept": self.intercept,
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            config=(data["n_y"], data["n_u"], data["degree"]),
            terms=tuple(TermDescriptor.from_json(t) for t in data["terms"]),
            coefficients=np.array(data["coefficients"], dtype=float),
            intercept=float(data["intercept"]),
        )


def select_terms(library: TermLibrary, m: int):
    """Indices of the ``m`` library rows picked against ``y(k)``, in pick order."""
    if not 1 <= m <= library.n_terms:
        raise ValueError(f"m={m} outside [1, {library.n_terms}]")
    sel = select_greedy(library.X.T, library.target, m)
    return list(sel.indices)


def lstsq_with_intercept(features, target):
    """OLS of ``target`` on ``[1, features]`` via pivoted QR.

    ``features`` is ``(m, n_samples)``. Returns ``(intercept, coefficients)``.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    target = np.asarray(target, dtype=float)
    m, n = features.shape
    if n < m + 1:
        raise RankDeficientError(
            f"rank deficient design: {n} samples cannot determine "
            f"{m} coefficients and an intercept"
        )
    A = np.column_stack([np.ones(n), features.T])
    Q, R, perm = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[-1] <= RANK_RTOL * diag[0] * max(A.shape):
        raise RankDeficientError(
            f"rank deficient design: condition estimate {diag[0] / max(diag[-1], 1e-300):.3g}"
        )
    z = scipy.linalg.solve_triangular(R, Q.T @ target)
    theta = np.empty_like(z)
    theta[perm] = z
    return theta[0], theta[1:]


def fit(library: TermLibrary, term_indices, sample_indices=None):
    """Fit a reduced model on the given terms and (optionally) a subset of samples.

    Parameters
    ----------
    library : TermLibrary
    term_indices : sequence of int
        Rows of ``library.X`` to keep, in model order.
    sample_indices : sequence of int, optional
        Columns to train on; all columns when omitted.

    Returns
    -------
    ReducedNarxModel
    """
    term_indices = [int(i) for i in term_indices]
    X = library.X[term_indices]
    y = library.target
    if sample_indices is not None:
        sample_indices = np.asarray(sample_indices, dtype=int)
        X = X[:, sample_indices]
        y = y[sample_indices]
    intercept, coef = lstsq_with_intercept(X, y)
    return ReducedNarxModel(
        config=library.config,
        terms=tuple(library.descriptors[i] for i in term_indices),
        coefficients=coef,
        intercept=intercept,
    )


def predict_features(model, features):
    """``intercept + coefficients @ features`` for a ``(m, N)`` term matrix.

    Accumulated term by term so each column's value does not depend on how
    many columns are evaluated together.
    """
    features = np.asarray(features, dtype=float)
    out = np.full(features.shape[1], model.intercept)
    for c, row in zip(model.coefficients, features):
        out += c * row
    return out


def predict_one_step(model, series):
    """One-step-ahead prediction from measured lags.

    Returns ``(k, y_hat)``: the time indices that have a full lag window and
    the predictions there.
    """
    n_y, n_u, _ = model.config
    features, _, _ = evaluate_terms(model.terms, series, n_y, n_u)
    k = np.arange(max(n_y, n_u), len(series))
    return k, predict_features(model, features)


def simulate_free_run(model, initial_window, u, guard=DIVERGENCE_GUARD):
    """Simulate the model on its own past outputs.

    Parameters
    ----------
    model : ReducedNarxModel
    initial_window : array-like
        The first outputs of the trajectory, at least ``n_y`` of them. They
        are copied to the front of the result unchanged and the simulation
        starts right after them.
    u : array-like
        Input for the whole trajectory, aligned with the output; its length
        sets the length of the result.
    guard : float
        Raise :class:`DivergenceError` once ``|y_hat|`` exceeds this.

    Returns
    -------
    ndarray
        The simulated output, same length as ``u``.
    """
    n_y, n_u, _ = model.config
    u = np.asarray(u, dtype=float)
    y0 = np.asarray(initial_window, dtype=float).ravel()
    start = max(y0.size, n_u)
    if y0.size < n_y:
        raise DataError(f"initial window needs {n_y} outputs, got {y0.size}")
    if start > u.size:
        raise DataError("input sequence shorter than the initial window")
    if y0.size < start:
        raise DataError(f"initial window needs {start} outputs to cover input lags")

    y = np.empty(u.size)
    y[:start] = y0[:start]
    terms = [
        [(0 if sig == OUTPUT else 1, lag) for sig, lag in t.factors] for t in model.terms
    ]
    coef = model.coefficients
    for k in range(start, u.size):
        acc = model.intercept
        for c, factors in zip(coef, terms):
            prod = 1.0
            for sig, lag in factors:
                prod *= y[k - lag] if sig == 0 else u[k - lag]
            acc += c * prod
        if not np.isfinite(acc) or abs(acc) > guard:
            raise DivergenceError(
                f"divergence: free-run output reached {acc:.3g} at step {k}"
            )
        y[k] = acc
    return y


def simulate_series(model, series: TimeSeries, guard=DIVERGENCE_GUARD):
    """Free-run a model along a recorded trajectory, seeded with its first outputs."""
    n_y, n_u, _ = model.config
    warm = max(n_y, n_u, 1)
    return simulate_free_run(model, series.y[:warm], series.u, guard=guard)


def r2_score(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    ss_res = np.sum((y_true - y_pred) ** 2)
    ss_tot = np.sum((y_true - y_true.mean()) ** 2)
    return 1.0 - ss_res / ss_tot


def rmse(y_true, y_pred):
    return float(np.sqrt(np.mean((np.asarray(y_true) - np.asarray(y_pred)) ** 2)))


__all__ = [
    "INPUT",
    "OUTPUT",
    "NarxPreset",
    "PRESETS",
    "ReducedNarxModel",
    "fit",
    "get_preset",
    "lstsq_with_intercept",
    "predict_one_step",
    "select_terms",
    "simulate_free_run",
    "simulate_series",
]
