"""Efficient global optimisation: GP surrogate + feasibility classifier + constrained EI."""
from __future__ import annotations

import numpy as np
from scipy.stats import qmc

from .acquisition import N_CANDIDATES, propose_next
from .gp import GaussianProcess, GPError
from .gpc import GPClassifier
from .trace import History, evaluate_safely

FULL_FIT_FEASIBLE = 20


def initial_design(bounds, n, seed):
    bounds = np.asarray(bounds, dtype=np.float64)
    pts = qmc.LatinHypercube(bounds.shape[0], seed=seed).random(n)
    return bounds[:, 0] + pts * (bounds[:, 1] - bounds[:, 0])


def _fit_gp(X, y, bounds, theta, restarts, seed, full):
    """Tune hyperparameters from ``restarts`` starts when ``full``, else reuse ``theta``."""
    try:
        return GaussianProcess(X, y, bounds=bounds, theta=theta, restarts=restarts, seed=seed, optimize=full)
    except GPError:
        if full:
            return None
    try:
        return GaussianProcess(X, y, bounds=bounds, theta=theta, restarts=restarts, seed=seed)
    except GPError:
        return None


def ego_run(objective, bounds, budget, seed=0, n_init=None, restarts=8, refit_every=10,
            n_candidates=N_CANDIDATES, history=None, stage=1):
    """Minimise ``objective`` over the box with ``budget`` evaluations.

    ``objective(x)`` returns a float; None, non-finite values or exceptions are
    recorded as infeasible. The first ``3 * dim`` points (capped at the budget)
    come from a Latin hypercube. Hyperparameters of both surrogates are tuned
    (GP from ``restarts`` starts, classifier by grid) while there are at most
    20 feasible points and every ``refit_every`` evaluations afterwards; in
    between the last hyperparameters are reused and only the posterior is
    refitted.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    dim = bounds.shape[0]
    hist = history if history is not None else History()
    start = len(hist)
    rng = np.random.default_rng(seed)
    n_init = 3 * dim if n_init is None else n_init
    # the design does not depend on the budget, so a shorter run is a prefix of a longer one
    for x in initial_design(bounds, n_init, int(rng.integers(2 ** 31)))[:budget]:
        val, ok = evaluate_safely(objective, x)
        hist.add(x, val, ok, stage)
    theta, clf_hyper = None, None
    while len(hist) - start < budget:
        run = hist.records[start:]
        X = np.array([r.x for r in run])
        feas = np.array([r.feasible for r in run])
        y = np.array([r.value for r in run])
        sweep_seed = int(rng.integers(2 ** 31))
        x_next = None
        if feas.sum() >= 2:
            n_done = len(run)
            full = theta is None or feas.sum() <= FULL_FIT_FEASIBLE or n_done % refit_every == 0
            gp = _fit_gp(X[feas], y[feas], bounds, theta, restarts, sweep_seed, full)
            if gp is not None:
                theta = gp.theta
                if full or clf_hyper is None:
                    clf = GPClassifier(X, feas, bounds=bounds)
                else:
                    clf = GPClassifier(X, feas, bounds=bounds, signal_var=clf_hyper[0], length=clf_hyper[1])
                if clf.constant is None:
                    clf_hyper = (clf.signal_var, clf.length)
                x_next = propose_next(gp, clf, bounds, float(np.min(y[feas])), seed=sweep_seed,
                                      n_candidates=n_candidates)
        if x_next is None:
            # not enough feasible data for a surrogate: explore uniformly
            x_next = bounds[:, 0] + rng.uniform(size=dim) * (bounds[:, 1] - bounds[:, 0])
        val, ok = evaluate_safely(objective, x_next)
        hist.add(x_next, val, ok, stage)
    return hist
