"""Sample pruning: mini-batch FastCan and uniform random selection.

Mini-batch FastCan picks samples atom by atom. Each atom of a learned
dictionary serves as the target of a greedy correlation selection over the
samples still in the pool, in batches of at most ``p`` samples; picked
samples leave the pool. Within a batch, deflation keeps near-duplicates
out; across batches nothing is deflated.

Sample and atom vectors are correlated without centering by default: the
features of one sample are heterogeneous term values, and a centered
``m``-vector leaves only ``m - 1`` directions, one short of the batch-size
cap ``p <= m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .dictionary import Dictionary
from .exceptions import DataError, RankExhaustedError
from .fastcan import select_greedy

MINIBATCH_FASTCAN = "minibatch_fastcan"
RANDOM = "random"
METHODS = (MINIBATCH_FASTCAN, RANDOM)


def resolve_batch_size(n, q, m, p=None):
    """Effective batch size for selecting ``n`` samples with ``q`` atoms.

    ``p`` falls back to ``ceil(n / q)`` when missing or larger than that,
    and is capped at the feature count ``m``.
    """
    if n < 1 or q < 1 or m < 1:
        raise ValueError(f"need n, q, m >= 1, got {n}, {q}, {m}")
    if p is not None and p < 1:
        raise ValueError(f"batch size must be >= 1, got {p}")
    per_atom = ceil(n / q)
    if p is None or p > per_atom:
        p = per_atom
    return min(p, m)


@dataclass(frozen=True, eq=False)
class BatchMatrix:
    """How many samples each (atom, batch) slot contributes.

    ``B[i, j]`` is the size of batch ``j`` for atom ``i``.
    """

    B: np.ndarray
    p: int

    @property
    def t(self):
        return self.B.shape[1]

    @property
    def n(self):
        return int(self.B.sum())


def build_batch_matrix(n, q, p):
    """Fill a ``q x ceil(n / (q p))`` batch matrix round-robin over atoms.

    Slots are visited batch by batch and, within a batch, atom by atom; each
    gets ``p`` until less than ``p`` remains, which goes to the next slot.
    """
    if n < 1 or q < 1 or p < 1:
        raise ValueError(f"need n, q, p >= 1, got {n}, {q}, {p}")
    t = ceil(n / (q * p))
    B = np.zeros((q, t), dtype=int)
    left = n
    for j in range(t):
        for i in range(q):
            take = min(p, left)
            B[i, j] = take
            left -= take
    return BatchMatrix(B=B, p=p)


@dataclass(frozen=True, eq=False)
class PruneResult:
    """Selected global sample indices, in selection order."""

    indices: np.ndarray
    method: str
    config: dict = field(default_factory=dict)
    dictionary: Dictionary | None = None
    batches: np.ndarray | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return self.indices.size

    def to_json(self, include_atoms=True):
        out = {
            "method": self.method,
            "config": dict(self.config),
            "indices": [int(i) for i in self.indices],
        }
        if self.batches is not None:
            out["batch_matrix"] = self.batches.tolist()
        if self.dictionary is not None and include_atoms:
            out["dictionary"] = self.dictionary.to_json()
        return out


def prune_minibatch_fastcan(X, dictionary, n, p=None, center=False):
    """Select ``n`` samples of ``X`` using the dictionary atoms as targets.

    Parameters
    ----------
    X : array-like of shape (m, N)
        Feature matrix; columns are samples.
    dictionary : Dictionary
        Atoms of shape ``(m, q)``.
    n : int
        Number of samples to keep.
    p : int, optional
        Requested batch size, resolved by :func:`resolve_batch_size`.
    center : bool, default=False
        Center sample and atom vectors across their features before
        correlating. Centering costs one dimension, so ``p = m`` then
        exhausts the rank.

    Returns
    -------
    PruneResult
    """
    X = np.asarray(X, dtype=float)
    m, N = X.shape
    D = dictionary.atoms
    if D.shape[0] != m:
        raise DataError(
            f"dictionary atoms have {D.shape[0]} features but X has {m}"
        )
    if n > N:
        raise DataError(f"n exceeds candidates: {n} > {N}")
    q = dictionary.q
    p_eff = resolve_batch_size(n, q, m, p)
    bm = build_batch_matrix(n, q, p_eff)

    pool = np.arange(N)
    selected = []
    for i in range(q):
        for j in range(bm.t):
            size = int(bm.B[i, j])
            if size == 0:
                continue
            try:
                sel = select_greedy(X[:, pool], D[:, i], size, center=center)
            except RankExhaustedError as exc:
                raise RankExhaustedError(
                    f"rank exhausted in batch (atom {i}, batch {j}): {exc}",
                    step=exc.step,
                    batch=(i, j),
                ) from exc
            picked = pool[list(sel.indices)]
            selected.extend(int(k) for k in picked)
            pool = np.delete(pool, sel.indices)
    config = {
        "q": q, "p": p_eff, "p_requested": p, "n": n, "seed": dictionary.seed, "center": center,
    }
    return PruneResult(
        indices=np.array(selected, dtype=int),
        method=MINIBATCH_FASTCAN,
        config=config,
        dictionary=dictionary,
        batches=bm.B,
    )


def prune_random(N, n, seed=None):
    """Uniform sample of ``n`` of ``N`` indices without replacement."""
    if n > N:
        raise DataError(f"n exceeds candidates: {n} > {N}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(N, size=n, replace=False)
    return PruneResult(
        indices=idx, method=RANDOM, config={"n": n, "seed": seed}
    )
