"""Two-stage optimisation over a generator's latent codes, then codes plus noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ego import ego_run
from .ga import ga_run
from .trace import History

LATENT_BOUNDS = (-0.2, 1.2)
LATENT_MARGIN = 0.1
NOISE_BOUND = 1.0


class NoFeasibleDesign(RuntimeError):
    pass


@dataclass(frozen=True)
class Budget:
    total: int
    latent_dim: int
    noise_dim: int

    def __post_init__(self):
        if self.total < 1 or self.latent_dim < 1 or self.noise_dim < 0:
            raise ValueError(f"invalid budget {self}")

    @property
    def stage1(self):
        if self.noise_dim == 0:
            return self.total
        return (self.total * self.latent_dim) // (self.latent_dim + self.noise_dim)

    @property
    def stage2(self):
        return self.total - self.stage1


@dataclass
class TsoResult:
    curve: np.ndarray
    c: np.ndarray
    z: np.ndarray
    value: float
    history: History
    budget: Budget


def tso_run(synth, evaluate, latent_dim, noise_dim, budget, seed=0, oso=False, **ego_kw):
    """Optimise a design generated by ``synth(c, z) -> curve``.

    ``evaluate(curve)`` returns a value to minimise, or None when the design is
    infeasible. Stage one runs EGO over c in [-0.2, 1.2]^d with z = 0; stage two
    runs the GA over (c, z) around the stage-one optimum. With ``oso`` the
    whole budget goes to stage one.
    """
    if budget < 10:
        raise ValueError(f"budget must be at least 10, got {budget}")
    plan = Budget(budget, latent_dim, 0 if oso else noise_dim)
    z0 = np.zeros(noise_dim)
    hist = History()

    def stage1_obj(c):
        return evaluate(synth(c, z0))

    bounds1 = np.tile(LATENT_BOUNDS, (latent_dim, 1)).astype(np.float64)
    ego_run(stage1_obj, bounds1, plan.stage1, seed=seed, history=hist, stage=1, **ego_kw)
    best1 = hist.best()
    if best1 is None:
        raise NoFeasibleDesign(f"stage one found no feasible design in {plan.stage1} evaluations")
    c_best = np.asarray(best1.x)
    c_out, z_out, value = c_best, z0, best1.value
    # store every record as a full (c, z) design so the trace has one shape
    for rec in hist.records:
        rec.x = list(rec.x) + [0.0] * noise_dim

    if plan.stage2 > 0:
        def stage2_obj(v):
            return evaluate(synth(v[:latent_dim], v[latent_dim:]))

        bounds2 = np.vstack([
            np.stack([c_best - LATENT_MARGIN, c_best + LATENT_MARGIN], axis=1),
            np.tile([-NOISE_BOUND, NOISE_BOUND], (noise_dim, 1)),
        ])
        start = np.concatenate([c_best, z0])
        ga_run(stage2_obj, start, bounds2, plan.stage2, seed=seed + 7919, history=hist, stage=2)
        best = hist.best()
        v = np.asarray(best.x)
        c_out, z_out, value = v[:latent_dim], v[latent_dim:], best.value
    return TsoResult(synth(c_out, z_out), c_out, z_out, value, hist, plan)
