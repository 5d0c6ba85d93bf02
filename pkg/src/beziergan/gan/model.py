"""Generator with a rational Bezier output layer, and discriminator with an auxiliary Q head."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import BatchNorm, Conv1d, ConvTranspose1d, Dense, Module, Tensor
from ..geometry import BezierParams

INTERVAL_FLOOR = 1e-6


@dataclass
class GanConfig:
    latent_dim: int = 3
    noise_dim: int = 10
    degree: int = 31
    num_points: int = 192
    lambdas: tuple = (1.0, 10.0, 10.0, 10.0, 10.0)
    batch_size: int = 32
    steps: int = 10_000
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    noise_std: float = math.sqrt(0.5)
    leaky_slope: float = 0.2
    trunk_widths: tuple = (128, 256, 512)
    cp_channels: tuple = (64, 32)
    t_hidden: int = 256
    disc_channels: tuple = (32, 64, 128)
    disc_hidden: int = 256
    logvar_clamp: float = 7.0
    r1_max_term: bool = False
    g_updates: int = 1
    mmd_every: int = 100
    mmd_samples: int = 1000
    mmd_sigma: float = 1.0
    # batch norm in D lets it ignore a constant offset shared by a whole fake batch
    disc_batchnorm: bool = False

    def __post_init__(self):
        self.lambdas = tuple(float(v) for v in self.lambdas)
        for key in ("trunk_widths", "cp_channels", "disc_channels"):
            setattr(self, key, tuple(int(v) for v in getattr(self, key)))
        if len(self.lambdas) != 5:
            raise ValueError("lambdas needs five entries (info weight and four regularisers)")
        if (self.degree + 1) % 4:
            raise ValueError(f"degree + 1 must be divisible by 4 for the two upsampling stages, got {self.degree}")
        if self.g_updates < 1:
            raise ValueError(f"g_updates must be at least 1, got {self.g_updates}")
        if self.latent_dim < 1 or self.noise_dim < 0:
            raise ValueError("latent_dim >= 1 and noise_dim >= 0 required")

    def to_dict(self):
        return asdict(self)


def bezier_layer(P, w, t, degree):
    """Rational Bezier evaluation. P: (B, n+1, 2), w: (B, n+1), t: (B, m+1) -> (B, m+1, 2)."""
    basis = ad.bernstein(t, degree)                       # (B, M, n+1)
    bw = basis * w.reshape(w.shape[0], 1, w.shape[1])     # (B, M, n+1)
    num = bw @ P                                          # (B, M, 2)
    den = bw.sum(axis=-1, keepdims=True)                  # (B, M, 1)
    return num / den


class Generator(Module):
    def __init__(self, cfg: GanConfig, rng):
        self.cfg = cfg
        widths = (cfg.latent_dim + cfg.noise_dim,) + cfg.trunk_widths
        self.trunk = [Dense(a, b, rng) for a, b in zip(widths[:-1], widths[1:])]
        self.trunk_bn = [BatchNorm(b) for b in widths[1:]]
        c0, c1 = cfg.cp_channels
        self.base_len = (cfg.degree + 1) // 4
        self.cp_dense = Dense(widths[-1], c0 * self.base_len, rng)
        self.cp_dense_bn = BatchNorm(c0 * self.base_len)
        self.cp_up1 = ConvTranspose1d(c0, c1, 4, stride=2, padding=1, rng=rng)
        self.cp_up1_bn = BatchNorm(c1)
        self.cp_up2 = ConvTranspose1d(c1, 3, 4, stride=2, padding=1, rng=rng)
        self.t_dense = Dense(widths[-1], cfg.t_hidden, rng)
        self.t_dense_bn = BatchNorm(cfg.t_hidden)
        self.t_out = Dense(cfg.t_hidden, cfg.num_points - 1, rng)

    def forward(self, c, z=None):
        cfg = self.cfg
        act = lambda x: ad.leaky_relu(x, cfg.leaky_slope)  # noqa: E731
        h = c if z is None or z.shape[1] == 0 else ad.concat([c, z], axis=1)
        for dense, bn in zip(self.trunk, self.trunk_bn):
            h = act(bn(dense(h)))
        batch = h.shape[0]

        u = act(self.cp_dense_bn(self.cp_dense(h)))
        u = u.reshape(batch, cfg.cp_channels[0], self.base_len)
        u = act(self.cp_up1_bn(self.cp_up1(u)))
        u = self.cp_up2(u)                                     # (B, 3, n+1)
        P = ad.tanh(u[:, :2, :]).transpose(0, 2, 1)             # (B, n+1, 2)
        w = ad.sigmoid(u[:, 2, :])                             # (B, n+1)

        v = act(self.t_dense_bn(self.t_dense(h)))
        m = cfg.num_points - 1
        delta = ad.softmax(self.t_out(v), axis=1) * (1.0 - m * INTERVAL_FLOOR) + INTERVAL_FLOOR
        zeros = Tensor(np.zeros((batch, 1), dtype=delta.dtype), dtype=delta.dtype)
        ones = Tensor(np.ones((batch, 1), dtype=delta.dtype), dtype=delta.dtype)
        # the intervals sum to one, so the last entry is pinned rather than left to rounding
        t = ad.concat([zeros, ad.cumsum(delta, axis=1)[:, :-1], ones], axis=1)  # (B, m+1)

        return bezier_layer(P, w, t, cfg.degree), P, w, t


class Discriminator(Module):
    def __init__(self, cfg: GanConfig, rng):
        self.cfg = cfg
        chans = (2,) + cfg.disc_channels
        self.convs = [Conv1d(a, b, 4, stride=2, padding=1, rng=rng) for a, b in zip(chans[:-1], chans[1:])]
        self.conv_bn = [BatchNorm(b) for b in chans[1:]]
        length = cfg.num_points
        for _ in self.convs:
            length = (length + 2 - 4) // 2 + 1
        self.flat = chans[-1] * length
        self.hidden = Dense(self.flat, cfg.disc_hidden, rng)
        self.hidden_bn = BatchNorm(cfg.disc_hidden)
        self.source = Dense(cfg.disc_hidden, 1, rng)
        self.q = Dense(cfg.disc_hidden, 2 * cfg.latent_dim, rng)

    def forward(self, x):
        """x: (B, M, 2) -> (source logit (B,), Q mean (B, d), Q log-variance (B, d))."""
        cfg = self.cfg
        if x.ndim != 3 or x.shape[1] != cfg.num_points or x.shape[2] != 2:
            raise ad.ShapeError(f"discriminator expects (B, {cfg.num_points}, 2), got {x.shape}")
        h = x.transpose(0, 2, 1)
        for k, (conv, bn) in enumerate(zip(self.convs, self.conv_bn)):
            h = conv(h)
            if cfg.disc_batchnorm:
                h = bn(h)
            h = ad.leaky_relu(h, cfg.leaky_slope)
        h = h.reshape(h.shape[0], self.flat)
        h = self.hidden(h)
        if cfg.disc_batchnorm:
            h = self.hidden_bn(h)
        h = ad.leaky_relu(h, cfg.leaky_slope)
        logit = self.source(h).reshape(h.shape[0])
        q = self.q(h)
        d = cfg.latent_dim
        mean = q[:, :d]
        logvar = ad.clip(q[:, d:], -cfg.logvar_clamp, cfg.logvar_clamp)
        return logit, mean, logvar


class BezierGAN:
    """Generator/discriminator pair plus the configuration that built them."""

    def __init__(self, cfg: GanConfig | None = None, seed: int = 0):
        self.cfg = cfg or GanConfig()
        rng = np.random.default_rng(seed)
        self.generator = Generator(self.cfg, rng)
        self.discriminator = Discriminator(self.cfg, rng)

    def state_dict(self):
        out = {f"generator.{k}": v for k, v in self.generator.state_dict().items()}
        out.update({f"discriminator.{k}": v for k, v in self.discriminator.state_dict().items()})
        return out

    def load_state_dict(self, state):
        self.generator.load_state_dict({k[10:]: v for k, v in state.items() if k.startswith("generator.")})
        self.discriminator.load_state_dict(
            {k[14:]: v for k, v in state.items() if k.startswith("discriminator.")})

    def astype(self, dtype):
        self.generator.astype(dtype)
        self.discriminator.astype(dtype)
        return self

    def sample_inputs(self, batch, rng):
        c = rng.uniform(0.0, 1.0, size=(batch, self.cfg.latent_dim))
        z = rng.normal(0.0, self.cfg.noise_std, size=(batch, self.cfg.noise_dim))
        return c, z

    def generate(self, c, z=None, training=False):
        """Run the generator on numpy inputs; returns Tensors (curve, P, w, t)."""
        dtype = self.generator.trunk[0].weight.dtype
        c = np.atleast_2d(np.asarray(c, dtype=dtype))
        if z is None:
            z = np.zeros((c.shape[0], self.cfg.noise_dim), dtype=dtype)
        z = np.asarray(z, dtype=dtype).reshape(c.shape[0], self.cfg.noise_dim)
        self.generator.train(training)
        return self.generator(Tensor(c, dtype=dtype), Tensor(z, dtype=dtype))

    def discriminate(self, curves, training=False):
        dtype = self.generator.trunk[0].weight.dtype
        self.discriminator.train(training)
        x = curves if isinstance(curves, Tensor) else Tensor(curves, dtype=dtype)
        return self.discriminator(x)


def synthesize(model: BezierGAN, c, z=None, return_params=False):
    """Inference-mode curves for latent codes ``c`` (and noise ``z``, default the prior mean 0).

    A single design vector gives a ``(M, 2)`` array, a batch gives ``(B, M, 2)``.
    """
    single = np.ndim(c) == 1
    curve, P, w, t = model.generate(c, z, training=False)
    curves = curve.data.astype(np.float64)
    if not return_params:
        return curves[0] if single else curves
    tt = np.clip(t.data.astype(np.float64), 0.0, 1.0)
    tt[:, -1] = 1.0
    params = [BezierParams(P.data[k], w.data[k], tt[k]) for k in range(curves.shape[0])]
    return (curves[0], params[0]) if single else (curves, params)
