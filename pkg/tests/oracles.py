"""Independent reference implementations used by the tests."""

import numpy as np


def greedy_oracle(candidates, target, k, center=True):
    """Per-step argmax with residuals recomputed by least squares each step.

    Each remaining candidate is regressed on the already picked columns; its
    residual is scored by the summed squared correlation with every target
    column. No state is carried between steps except the picked indices.
    """
    W = np.array(candidates, dtype=float)
    Y = np.array(target, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if center:
        W = W - W.mean(axis=0)
        Y = Y - Y.mean(axis=0)
    picked = []
    for _ in range(k):
        best, best_score = None, -np.inf
        S = W[:, picked]
        for j in range(W.shape[1]):
            if j in picked:
                continue
            w = W[:, j]
            if picked:
                coef, *_ = np.linalg.lstsq(S, w, rcond=None)
                w = w - S @ coef
            nw = np.linalg.norm(w)
            if nw <= 1e-10 * np.linalg.norm(W[:, j]):
                continue
            score = sum((w @ Y[:, t]) ** 2 / (nw ** 2 * (Y[:, t] @ Y[:, t])) for t in range(Y.shape[1]))
            if score > best_score:
                best, best_score = j, score
        picked.append(best)
    return picked


def random_instance(rng):
    n_obs = int(rng.integers(4, 13))
    n_cand = int(rng.integers(2, 41))
    n_tgt = int(rng.integers(1, 4))
    W = rng.normal(size=(n_obs, n_cand))
    Y = rng.normal(size=(n_obs, n_tgt))
    # keep away from the rank limit, where the tolerance decides
    k = int(rng.integers(1, min(n_cand, n_obs - 2) + 1))
    return W, Y, k
