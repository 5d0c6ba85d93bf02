"""Losses, Bezier-parameter regularisers and the alternating training loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import AdamState, Tensor, adam_step
from ..evaluation import mmd_squared
from .model import BezierGAN, GanConfig, synthesize

LOG_2PI = math.log(2.0 * math.pi)


class TrainingDiverged(RuntimeError):
    """Raised when a loss becomes non-finite. Carries the model and history so far."""

    def __init__(self, step, model, history):
        super().__init__(f"training diverged at step {step}: non-finite loss")
        self.step = step
        self.model = model
        self.history = history


def regularizers(P, w, max_term=False):
    """R1..R4 for a batch of control points ``P`` (N, n+1, 2) and weights ``w`` (N, n+1).

    R1 averages the adjacent control-point distances (plus the per-sample
    maximum when ``max_term`` is set). R2 sums the interior weights and
    divides by N*n. R3 is the mean gap between first and last control point.
    R4 penalises a first control point lying below the last.
    """
    P = P if isinstance(P, Tensor) else Tensor(P)
    w = w if isinstance(w, Tensor) else Tensor(w)
    N, n = P.shape[0], P.shape[1] - 1
    gaps = ad.l2norm(P[:, 1:, :] - P[:, :-1, :], axis=-1)       # (N, n)
    r1 = gaps.mean()
    if max_term:
        r1 = r1 + ad.tmax(gaps, axis=1).mean()
    r2 = ad.absolute(w[:, 1:n]).sum() * (1.0 / (N * n))
    r3 = ad.l2norm(P[:, 0, :] - P[:, n, :], axis=-1).mean()
    r4 = ad.relu((P[:, 0, 1] - P[:, n, 1]) * -10.0).mean()
    return r1, r2, r3, r4


def info_lower_bound(c, mean, logvar):
    """Mean factored-Gaussian log-likelihood of ``c`` under Q (entropy of c dropped)."""
    c = c if isinstance(c, Tensor) else Tensor(c)
    resid = c - mean
    ll = (logvar + resid * resid * ad.exp(-logvar) + LOG_2PI) * -0.5
    return ll.sum(axis=1).mean()


def discriminator_loss(logit_real, logit_fake):
    # -log sigmoid(a) = softplus(-a); -log(1 - sigmoid(a)) = softplus(a)
    return ad.softplus(-logit_real).mean() + ad.softplus(logit_fake).mean()


def generator_adv_loss(logit_fake):
    return ad.softplus(-logit_fake).mean()


@dataclass
class LossTerms:
    d_loss: Tensor
    g_loss: Tensor
    info: Tensor
    regs: tuple


def losses(model: BezierGAN, real, c, z, training=True):
    """All loss terms for one real batch and one synthetic batch drawn at (c, z).

    ``d_loss`` is the plain discriminator loss on real vs detached fakes;
    ``g_loss`` includes the information and regulariser terms.
    """
    cfg = model.cfg
    lam = cfg.lambdas
    fake, P, w, _ = model.generate(c, z, training=training)
    logit_real, _, _ = model.discriminate(real, training=training)
    logit_fake_d, _, _ = model.discriminate(Tensor(fake.data), training=training)
    d_loss = discriminator_loss(logit_real, logit_fake_d)
    logit_fake, mean, logvar = model.discriminate(fake, training=training)
    info = info_lower_bound(np.asarray(c, dtype=fake.dtype), mean, logvar)
    regs = regularizers(P, w, cfg.r1_max_term)
    g_loss = generator_adv_loss(logit_fake) - lam[0] * info
    for lam_r, r in zip(lam[1:], regs):
        g_loss = g_loss + lam_r * r
    return LossTerms(d_loss, g_loss, info, regs)


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)      # dicts per step
    mmd: list = field(default_factory=list)         # (step, value)
    initial_mmd: float = math.nan

    def to_dict(self):
        return {"losses": self.losses, "mmd": [list(r) for r in self.mmd], "initial_mmd": self.initial_mmd}


def model_mmd(model: BezierGAN, curves, num, rng):
    """MMD^2 between ``num`` synthesized curves (c ~ prior, z = 0) and ``num`` corpus curves."""
    num = min(num, len(curves))
    idx = rng.choice(len(curves), size=num, replace=False)
    c = rng.uniform(0.0, 1.0, size=(num, model.cfg.latent_dim))
    fake = synthesize(model, c)
    return mmd_squared(fake, np.asarray(curves)[idx], sigma=model.cfg.mmd_sigma)


def _discriminate_pair(model, real, fake):
    logit_real, _, _ = model.discriminate(real, training=True)
    logit_fake, mean, logvar = model.discriminate(fake, training=True)
    return logit_real, logit_fake, mean, logvar


def _finite(*values):
    return all(math.isfinite(v) for v in values)


def train(curves, cfg: GanConfig | None = None, seed: int = 0, model=None, log=None):
    """Alternate one discriminator (with Q) and one generator Adam step per iteration.

    ``curves`` is an (N, M, 2) array. Returns ``(model, history)``. Raises
    :class:`TrainingDiverged` if a loss becomes non-finite.
    """
    cfg = cfg or (model.cfg if model is not None else GanConfig())
    curves = np.asarray(curves, dtype=np.float64)
    if curves.ndim != 3 or curves.shape[1:] != (cfg.num_points, 2):
        raise ValueError(f"expected curves of shape (N, {cfg.num_points}, 2), got {curves.shape}")
    if len(curves) < cfg.batch_size:
        raise ValueError(f"corpus has {len(curves)} curves, fewer than the batch size {cfg.batch_size}")
    model = model or BezierGAN(cfg, seed)
    rng = np.random.default_rng([seed, 1])
    mmd_rng_seed = [seed, 2]
    history = TrainHistory()
    if cfg.steps == 0:
        return model, history

    dtype = model.generator.trunk[0].weight.dtype
    real_all = curves.astype(dtype)
    g_params = model.generator.parameters()
    d_params = model.discriminator.parameters()
    g_opt = AdamState(lr=cfg.lr_g, beta1=cfg.beta1, beta2=cfg.beta2)
    d_opt = AdamState(lr=cfg.lr_d, beta1=cfg.beta1, beta2=cfg.beta2)
    lam = cfg.lambdas
    mmd_every = cfg.mmd_every if cfg.mmd_every and cfg.mmd_every > 0 else 0
    if mmd_every:
        history.initial_mmd = model_mmd(model, curves, cfg.mmd_samples, np.random.default_rng(mmd_rng_seed))

    for step in range(1, cfg.steps + 1):
        idx = rng.choice(len(real_all), size=cfg.batch_size, replace=False)
        real = Tensor(real_all[idx], dtype=dtype)
        c, z = model.sample_inputs(cfg.batch_size, rng)

        fake, P, w, _ = model.generate(c, z, training=True)

        # discriminator + Q update on detached fakes
        model.discriminator.zero_grad()
        logit_real, logit_fake, mean, logvar = _discriminate_pair(model, real, Tensor(fake.data))
        d_loss = discriminator_loss(logit_real, logit_fake)
        info_d = info_lower_bound(c.astype(dtype), mean, logvar)
        (d_loss - lam[0] * info_d).backward()
        adam_step(d_params, [p.grad for p in d_params], d_opt)

        # generator update(s) through the refreshed discriminator
        for k in range(cfg.g_updates):
            if k:
                c, z = model.sample_inputs(cfg.batch_size, rng)
                fake, P, w, _ = model.generate(c, z, training=True)
            model.generator.zero_grad()
            model.discriminator.zero_grad()
            _, logit_fake, mean, logvar = _discriminate_pair(model, real, fake)
            info = info_lower_bound(c.astype(dtype), mean, logvar)
            regs = regularizers(P, w, cfg.r1_max_term)
            adv = generator_adv_loss(logit_fake)
            g_loss = adv - lam[0] * info
            for lam_r, r in zip(lam[1:], regs):
                g_loss = g_loss + lam_r * r
            g_loss.backward()
            adam_step(g_params, [p.grad for p in g_params], g_opt)

        row = {"step": step, "d_loss": float(d_loss.data), "g_loss": float(g_loss.data),
               "g_adv": float(adv.data), "info": float(info.data)}
        row.update({f"r{k + 1}": float(r.data) for k, r in enumerate(regs)})
        history.losses.append(row)
        if not _finite(row["d_loss"], row["g_loss"]) or not all(
                np.all(np.isfinite(p.data)) for p in (g_params[-1], d_params[-1])):
            raise TrainingDiverged(step, model, history)
        if mmd_every and step % mmd_every == 0:
            value = model_mmd(model, curves, cfg.mmd_samples, np.random.default_rng(mmd_rng_seed))
            history.mmd.append((step, value))
            if log:
                log(f"step {step}: d_loss {row['d_loss']:.4f} g_loss {row['g_loss']:.4f} mmd2 {value:.5f}")
    return model, history
