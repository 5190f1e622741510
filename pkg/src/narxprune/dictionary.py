"""Dictionary learning by mini-batch k-means.

The samples (columns of the ``(m, N)`` feature matrix) are clustered and
the ``q`` centres become the atoms of the dictionary. Centres follow the
per-centre learning rate of web-scale mini-batch k-means (each centre is the
running mean of every point ever assigned to it), after greedy k-means++
seeding. One full-batch Lloyd pass finishes the fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import DataError, EmptyClusterError


@dataclass(frozen=True)
class KMeansOptions:
    """Knobs of :func:`learn_dictionary`.

    ``batch_size=None`` means ``min(256, N)``. A batch size of ``N`` or more
    switches to plain Lloyd iterations.
    """

    batch_size: int | None = None
    max_iter: int = 100
    refine: bool = True
    n_local_trials: int | None = None


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Atoms in feature space.

    Attributes
    ----------
    atoms : ndarray of shape (m, q)
    inertia : float
        Sum of squared distances from every sample to its nearest atom.
    seed : int or None
    history : tuple of float
        Inertia of the points processed by each iteration, measured before
        that iteration moves the centres. In full-batch mode this is the full
        inertia before each Lloyd step.
    """

    atoms: np.ndarray
    inertia: float
    seed: int | None
    history: tuple = ()

    @property
    def q(self):
        return self.atoms.shape[1]

    @property
    def n_features(self):
        return self.atoms.shape[0]

    def to_json(self):
        return {
            "q": self.q,
            "seed": self.seed,
            "inertia": float(self.inertia),
            "atoms": self.atoms.T.tolist(),
        }


def _kmeans_plusplus(P, q, rng, n_local_trials=None):
    """Greedy k-means++ seeding; returns row indices of ``P``."""
    N = P.shape[0]
    if n_local_trials is None:
        n_local_trials = 2 + int(np.log(q))
    first = int(rng.integers(N))
    chosen = [first]
    closest = cdist(P[first : first + 1], P, "sqeuclidean")[0]
    for _ in range(1, q):
        pot = closest.sum()
        if pot <= 0:
            # every point coincides with a chosen centre
            rest = np.setdiff1d(np.arange(N), chosen)
            chosen.append(int(rest[0]) if rest.size else int(rng.integers(N)))
            continue
        cum = np.cumsum(closest)
        draws = rng.random(n_local_trials) * cum[-1]
        cand = np.minimum(np.searchsorted(cum, draws), N - 1)
        cand_d = np.minimum(closest, cdist(P[cand], P, "sqeuclidean"))
        best = int(np.argmin(cand_d.sum(axis=1)))
        chosen.append(int(cand[best]))
        closest = cand_d[best]
    return np.array(chosen)


def _assign(P, C):
    d = cdist(P, C, "sqeuclidean")
    labels = np.argmin(d, axis=1)
    return labels, d[np.arange(P.shape[0]), labels]


def _reseed_empty(P, C, labels, dist):
    """Move empty centres onto the samples farthest from their centres.

    Taking a point away can empty its old cluster, so this repeats until no
    cluster is empty; ``q`` consecutive reseeds that fail to shrink the set
    of empty clusters is an error.
    """
    q = C.shape[0]
    labels = labels.copy()
    dist = dist.copy()
    n_empty = q + 1
    failures = 0
    while True:
        empty = np.flatnonzero(np.bincount(labels, minlength=q) == 0)
        if empty.size == 0:
            return labels
        failures = 0 if empty.size < n_empty else failures + 1
        n_empty = empty.size
        far = int(np.argmax(dist))
        if failures >= q or dist[far] <= 0:
            raise EmptyClusterError(
                f"empty cluster unrecoverable: cannot reseed cluster {empty[0]} "
                f"away from the existing centres"
            )
        C[empty[0]] = P[far]
        dist[far] = 0.0
        labels[far] = empty[0]


def _lloyd_step(P, C):
    labels, dist = _assign(P, C)
    inertia = float(dist.sum())
    labels = _reseed_empty(P, C, labels, dist)
    counts = np.bincount(labels, minlength=C.shape[0])
    sums = np.zeros_like(C)
    np.add.at(sums, labels, P)
    C[:] = sums / counts[:, None]
    return inertia


def learn_dictionary(X, q, seed=None, options=KMeansOptions()):
    """Cluster the samples of ``X`` into ``q`` atoms.

    Parameters
    ----------
    X : array-like of shape (m, N)
        Feature matrix; each column is one sample.
    q : int
        Number of atoms.
    seed : int, optional
    options : KMeansOptions

    Returns
    -------
    Dictionary
    """
    P = np.ascontiguousarray(np.asarray(X, dtype=float).T)
    if P.ndim != 2:
        raise DataError("X must be 2-D")
    N = P.shape[0]
    if q < 1:
        raise DataError(f"q must be >= 1, got {q}")
    if q > N:
        raise DataError(f"q exceeds sample count: {q} atoms for {N} samples")
    if not np.all(np.isfinite(P)):
        raise DataError("X contains non-finite values")

    rng = np.random.default_rng(seed)
    C = P[_kmeans_plusplus(P, q, rng, options.n_local_trials)].copy()
    batch = 256 if options.batch_size is None else options.batch_size
    batch = min(batch, N)
    history = []

    if batch >= N:
        for _ in range(options.max_iter):
            history.append(_lloyd_step(P, C))
            if len(history) > 1 and history[-1] == history[-2]:
                break
    else:
        counts = np.zeros(q)
        for _ in range(options.max_iter):
            idx = rng.choice(N, size=batch, replace=False)
            B = P[idx]
            labels, dist = _assign(B, C)
            history.append(float(dist.sum()))
            hit = np.bincount(labels, minlength=q)
            sums = np.zeros_like(C)
            np.add.at(sums, labels, B)
            upd = hit > 0
            # running mean over everything ever assigned to each centre
            C[upd] = (counts[upd, None] * C[upd] + sums[upd]) / (
                counts[upd] + hit[upd]
            )[:, None]
            counts += hit
        if options.refine:
            _lloyd_step(P, C)
        else:
            labels, dist = _assign(P, C)
            _reseed_empty(P, C, labels, dist)

    labels, _ = _assign(P, C)
    inertia = float(np.sum((P - C[labels]) ** 2))
    return Dictionary(atoms=C.T.copy(), inertia=inertia, seed=seed, history=tuple(history))
