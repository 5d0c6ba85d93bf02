"""Expected improvement and the feasibility-weighted proposal step."""
from __future__ import annotations

import numpy as np
from scipy.stats import norm, qmc

N_CANDIDATES = 8192
FEASIBLE_PROB = 0.5


def expected_improvement(mean, std, y_best):
    """EI for minimisation; reduces to max(0, y_best - mean) where std is 0."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    gain = y_best - mean
    out = np.maximum(gain, 0.0)
    pos = std > 0
    if np.any(pos):
        u = gain[pos] / std[pos]
        out = out.astype(np.float64, copy=True)
        with np.errstate(over="ignore", under="ignore"):  # pdf of a huge |u| is 0
            out[pos] = gain[pos] * norm.cdf(u) + std[pos] * norm.pdf(u)
    return np.maximum(out, 0.0)


def sobol_candidates(bounds, n=N_CANDIDATES, seed=0):
    bounds = np.asarray(bounds, dtype=np.float64)
    m = int(np.ceil(np.log2(max(n, 2))))
    pts = qmc.Sobol(bounds.shape[0], scramble=True, seed=seed).random_base2(m)[:n]
    return bounds[:, 0] + pts * (bounds[:, 1] - bounds[:, 0])


def _score_fn(gp, classifier, y_best):
    def score(X):
        X = np.atleast_2d(X)
        mean, std = gp.predict(X, return_std=True)
        ei = expected_improvement(mean, std, y_best)
        p = classifier.predict_proba(X) if classifier is not None else np.ones(X.shape[0])
        return ei * p, p, std
    return score


def _compass(score, x0, s0, bounds, min_step=1e-4, max_evals=200):
    """Comparison-only pattern search that never accepts an infeasible move.

    All 2*dim axis moves are scored together; the best admissible improvement
    is taken, otherwise the step halves.
    """
    x, best = x0.copy(), s0
    width = bounds[:, 1] - bounds[:, 0]
    dim = x.size
    step = 0.05
    evals = 0
    while step >= min_step and evals < max_evals:
        moves = np.repeat(x[None, :], 2 * dim, axis=0)
        idx = np.arange(dim)
        moves[idx, idx] += step * width
        moves[dim + idx, idx] -= step * width
        moves = np.clip(moves, bounds[:, 0], bounds[:, 1])
        s, p, _ = score(moves)
        evals += 2 * dim
        s = np.where((p >= FEASIBLE_PROB) & np.any(moves != x, axis=1), s, -np.inf)
        k = int(np.argmax(s))
        if s[k] > best:
            x, best = moves[k], s[k]
        else:
            step *= 0.5
    return x


def propose_next(gp, classifier, bounds, y_best, seed=0, n_candidates=N_CANDIDATES,
                 refine=True, candidates=None):
    """Maximise EI(x) * Pr(feasible | x) subject to Pr >= 0.5.

    ``classifier`` is anything with ``predict_proba`` (or None for plain EI).
    Candidates come from a scrambled Sobol sweep; the best is refined by a
    pattern search that respects the box and the feasibility constraint. When
    no candidate reaches Pr >= 0.5 the most probably feasible one is returned.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    X = sobol_candidates(bounds, n_candidates, seed) if candidates is None else np.asarray(candidates)
    score = _score_fn(gp, classifier, y_best)
    s, p, std = score(X)
    ok = p >= FEASIBLE_PROB
    if not ok.any():
        return X[int(np.argmax(p))].copy()
    s_ok = np.where(ok, s, -np.inf)
    if not np.any(s_ok > 0):
        # flat acquisition: fall back to the most uncertain admissible candidate
        i = int(np.argmax(np.where(ok, std, -np.inf)))
    else:
        i = int(np.argmax(s_ok))
    x = X[i].copy()
    if refine and s_ok[i] > 0:
        x = _compass(score, x, s_ok[i], bounds)
    return np.clip(x, bounds[:, 0], bounds[:, 1])
