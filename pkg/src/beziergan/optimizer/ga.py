"""Real-coded genetic algorithm with truncation-plus-random selection and elitism."""
from __future__ import annotations

import math

import numpy as np

from .trace import History, evaluate_safely

POP_SIZE = 100
N_BEST = 30
N_RANDOM = 10
CHILDREN_PER_PAIR = 5
BLEND_ALPHA = 0.5
MUTATION_RATE = 0.1
SIGMA_FRACTION = 0.1


def ga_run(objective, start, bounds, budget, seed=0, pop_size=POP_SIZE, history=None, stage=2):
    """Minimise ``objective`` from ``start`` within the box using exactly ``budget`` evaluations.

    The first population is ``start`` plus Gaussian perturbations of it.
    Each generation keeps the 30 best and 10 random individuals as parents,
    pairs them at random, and breeds 5 blend-crossover children per pair with
    per-gene Gaussian mutation. The best individual so far always survives.
    When the budget is smaller than the population, the population shrinks.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    lo, hi = bounds[:, 0], bounds[:, 1]
    width = hi - lo
    dim = bounds.shape[0]
    rng = np.random.default_rng(seed)
    hist = history if history is not None else History()
    used = 0

    def evaluate(x):
        nonlocal used
        val, ok = evaluate_safely(objective, x)
        hist.add(x, val, ok, stage)
        used += 1
        return val if ok else math.inf

    size = max(1, min(pop_size, budget))
    start = np.clip(np.asarray(start, dtype=np.float64), lo, hi)
    pop = [start] + [np.clip(start + rng.normal(0.0, SIGMA_FRACTION * width), lo, hi) for _ in range(size - 1)]
    fit = [evaluate(x) for x in pop]

    while used < budget:
        order = np.argsort(fit, kind="stable")
        n_best = min(N_BEST, len(pop))
        chosen = list(order[:n_best])
        rest = list(order[n_best:])
        if rest:
            chosen += list(rng.choice(rest, size=min(N_RANDOM, len(rest)), replace=False))
        chosen = rng.permutation(chosen)
        pairs = [(chosen[2 * k], chosen[2 * k + 1]) for k in range(len(chosen) // 2)]
        if not pairs:
            pairs = [(chosen[0], chosen[0])]
        children = []
        for a, b in pairs:
            pa, pb = pop[a], pop[b]
            span = np.abs(pa - pb)
            cl = np.minimum(pa, pb) - BLEND_ALPHA * span
            ch = np.maximum(pa, pb) + BLEND_ALPHA * span
            for _ in range(CHILDREN_PER_PAIR):
                child = cl + rng.uniform(size=dim) * (ch - cl)
                mutate = rng.uniform(size=dim) < MUTATION_RATE
                child = child + mutate * rng.normal(0.0, SIGMA_FRACTION * width)
                children.append(np.clip(child, lo, hi))
        elite = int(order[0])
        new_pop, new_fit = [pop[elite]], [fit[elite]]
        for child in children[:max(size - 1, 1)]:
            if used >= budget:
                break
            new_pop.append(child)
            new_fit.append(evaluate(child))
        pop, fit = new_pop, new_fit
    return hist
