"""Finite-difference check of the whole generator graph, aware of activation kinks.

Leaky-ReLU, ReLU, abs and max are piecewise smooth. A central difference whose
stencil straddles a branch switch measures the average of two one-sided
slopes, not the derivative. Every piecewise op is wrapped to record its branch
pattern; a coordinate whose +-h stencil changes the pattern is re-differenced
with a step shrunk until both sides stay on the base branch.
"""
import contextlib

import numpy as np

from beziergan import autodiff as ad
from beziergan.autodiff import Tensor
from beziergan.gan import BezierGAN, GanConfig, regularizers
from oracles import relative_error

_PIECEWISE = {
    "leaky_relu": lambda x, *a, **k: x.data > 0,
    "relu": lambda x, *a, **k: x.data > 0,
    "absolute": lambda x, *a, **k: x.data > 0,
    "tmax": lambda x, axis=None, **k: np.argmax(x.data, axis=axis),
}


@contextlib.contextmanager
def branch_recorder(log):
    originals = {name: getattr(ad, name) for name in _PIECEWISE}

    def wrap(name, fn):
        def inner(x, *args, **kwargs):
            log.append(np.asarray(_PIECEWISE[name](x, *args, **kwargs)).copy())
            return fn(x, *args, **kwargs)
        return inner

    for name, fn in originals.items():
        setattr(ad, name, wrap(name, fn))
    try:
        yield
    finally:
        for name, fn in originals.items():
            setattr(ad, name, fn)


def generator_objective(model, c, z, training, max_term=True):
    model.generator.train(training)
    curve, P, w, t = model.generator(c, z)
    out = (curve * curve).sum() * (1.0 / c.shape[0])
    for r in regularizers(P, w, max_term=max_term):
        out = out + r
    return out


def _pattern(model, c, z, training):
    log = []
    with branch_recorder(log):
        val = float(generator_objective(model, Tensor(c), Tensor(z), training).data)
    return val, log


def _same(a, b):
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def kink_aware_difference(f_pattern, x, base, h=1e-4, shrink=8.0, tries=6):
    """Central differences; returns (gradient, number of coordinates that needed a smaller step)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    shrunk = 0
    for k in range(flat.size):
        old = flat[k]
        step = h
        for attempt in range(tries):
            flat[k] = old + step
            fp, pp = f_pattern(x)
            flat[k] = old - step
            fm, pm = f_pattern(x)
            flat[k] = old
            if _same(pp, base) and _same(pm, base):
                break
            step /= shrink
        shrunk += attempt > 0
        gflat[k] = (fp - fm) / (2 * step)
    return g, shrunk


def check_configuration(seed, batch=8, h=1e-4):
    """Max relative error of d(objective)/d(c, z) for one random model and input.

    Odd seeds run batch norm on batch statistics, even seeds on (randomised)
    running statistics. Small training batches make the normalisation so
    curved that h=1e-4 truncation error dominates, hence the batch of 8.
    """
    rng = np.random.default_rng(seed)
    cfg = GanConfig()
    training = bool(seed % 2)
    with ad.precision(np.float64):
        model = BezierGAN(cfg, seed=seed).astype(np.float64)
        if not training:
            for name, buf in model.generator.named_buffers():
                if name.endswith("running_mean"):
                    buf[...] = rng.normal(0.0, 0.5, buf.shape)
                elif name.endswith("running_var"):
                    buf[...] = rng.uniform(0.5, 1.5, buf.shape)
        c = rng.uniform(0.0, 1.0, (batch, cfg.latent_dim))
        z = rng.normal(0.0, cfg.noise_std, (batch, cfg.noise_dim))
        ct, zt = Tensor(c, requires_grad=True), Tensor(z, requires_grad=True)
        generator_objective(model, ct, zt, training).backward()
        _, base = _pattern(model, c, z, training)
        gc, s1 = kink_aware_difference(lambda cc: _pattern(model, cc, z, training), c.copy(), base, h)
        gz, s2 = kink_aware_difference(lambda zz: _pattern(model, c, zz, training), z.copy(), base, h)
        errs = [relative_error(ct.grad, gc), relative_error(zt.grad, gz)]
    return max(errs), s1 + s2
