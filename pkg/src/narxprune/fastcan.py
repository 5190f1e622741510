"""Greedy correlation-based column selection with orthogonal deflation.

Each step scores every remaining candidate by the sum, over target columns,
of the squared correlation between the candidate's residual (after removing
the span of the columns already picked) and the target column, then keeps
the best one and deflates the rest against it with modified Gram-Schmidt.

The same routine picks model terms (observations are time samples) and
picks samples for a dictionary atom (observations are term values).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateTargetError, RankExhaustedError

# residual norm below RANK_TOL * original norm counts as exhausted
RANK_TOL = 1e-10


@dataclass(frozen=True)
class Selection:
    """Picked column indices (in order) and the score each had when picked."""

    indices: tuple
    scores: tuple

    def __len__(self):
        return len(self.indices)


def _center(a, center):
    a = np.array(a, dtype=float)
    if center:
        a -= a.mean(axis=0)
    return a


def select_greedy(candidates, target, k, preselected=None, center=True, tol=RANK_TOL):
    """Pick ``k`` columns of ``candidates`` most correlated with ``target``.

    Parameters
    ----------
    candidates : array-like of shape (n_obs, n_candidates)
    target : array-like of shape (n_obs,) or (n_obs, n_targets)
    k : int
        Number of columns to pick.
    preselected : sequence of int, optional
        Columns deflated out before scoring; they are not returned and do not
        count towards ``k``.
    center : bool, default=True
        Remove column means from candidates and targets first.
    tol : float
        Relative residual-norm threshold below which a candidate is treated
        as lying in the span of the picked columns.

    Returns
    -------
    Selection

    Raises
    ------
    DegenerateTargetError
        A target column has zero variance (zero norm when ``center=False``).
    RankExhaustedError
        Fewer than ``k`` candidates carry information outside the span of
        the columns already picked.
    """
    W = _center(candidates, center)
    Y = _center(target, center)
    if W.ndim != 2:
        raise ValueError("candidates must be 2-D")
    if Y.ndim == 1:
        Y = Y[:, None]
    n_obs, n_cand = W.shape
    if Y.shape[0] != n_obs:
        raise ValueError(
            f"candidates have {n_obs} observations but target has {Y.shape[0]}"
        )
    if n_obs < 2:
        raise ValueError("need at least 2 observations")
    if not 0 <= k <= n_cand:
        raise ValueError(f"k={k} outside [0, {n_cand}]")

    y_norm = np.linalg.norm(Y, axis=0)
    raw_norm = np.linalg.norm(np.reshape(np.asarray(target, dtype=float), Y.shape), axis=0)
    if np.any(y_norm == 0) or np.any(y_norm <= 1e-12 * raw_norm):
        raise DegenerateTargetError("degenerate target: a target column is constant")
    Y /= y_norm

    norm0 = np.linalg.norm(W, axis=0)
    # zero-variance candidates never carry information
    alive = norm0 > 0
    taken = np.zeros(n_cand, dtype=bool)

    for j in preselected or ():
        taken[j] = True
        _deflate(W, W[:, j].copy(), norm0[j], tol)

    picked, scores = [], []
    for step in range(k):
        norm2 = np.einsum("ij,ij->j", W, W)
        usable = alive & ~taken & (norm2 > (tol * norm0) ** 2)
        if not usable.any():
            raise RankExhaustedError(
                f"rank exhausted after {step} of {k} picks: every remaining "
                "candidate lies in the span of the selected columns",
                step=step,
            )
        score = np.zeros(n_cand)
        proj = Y.T @ W[:, usable]
        score[usable] = np.einsum("ij,ij->j", proj, proj) / norm2[usable]
        # zero-variance and exhausted columns rank below everything usable
        score[~usable] = -np.inf
        best = int(np.argmax(score))
        picked.append(best)
        scores.append(float(score[best]))
        taken[best] = True
        _deflate(W, W[:, best].copy(), norm0[best], tol)
    return Selection(tuple(picked), tuple(scores))


def _deflate(W, w, w0, tol):
    """Remove the direction of ``w`` from every column of ``W`` in place."""
    norm = np.linalg.norm(w)
    if norm <= tol * w0 or norm == 0:
        return
    q = w / norm
    # second pass restores orthogonality lost to cancellation
    for _ in range(2):
        W -= np.outer(q, q @ W)
