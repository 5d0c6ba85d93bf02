"""Adam with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state: AdamState) -> AdamState:
    """Update ``params`` (arrays or Tensors) in place and advance ``state``."""
    arrays = [p if isinstance(p, np.ndarray) else p.data for p in params]
    if not state.m:
        state.m = [np.zeros_like(a) for a in arrays]
        state.v = [np.zeros_like(a) for a in arrays]
    if len(grads) != len(arrays) or len(state.m) != len(arrays):
        raise ValueError("params, grads and Adam moments differ in length")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        g = np.asarray(g)
        if g.shape != a.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {a.shape}")
        _kernels.adam_update(a, g, m, v, state.lr, b1, b2, c1, c2, state.eps)
    return state
