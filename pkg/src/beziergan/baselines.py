"""Baseline parameterizations (SVD, GMDV, FFD), NACA 4-digit sections and least-squares fitting."""
from __future__ import annotations

import copy

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .geometry import DEFAULT_NUM_POINTS

FIT_RESTARTS = 8
FIT_ITERATIONS = 500


class Parameterization:
    """Maps a bounded design vector to a (192, 2) curve."""

    name = "parameterization"
    closed_form = False

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    def synthesize(self, v) -> np.ndarray:
        raise NotImplementedError

    def batch_mse_and_grad(self, V, target):
        """MSE to ``target`` and its gradient for every row of ``V`` (finite differences)."""
        V = np.atleast_2d(np.asarray(V, dtype=np.float64))
        tgt = np.asarray(target, dtype=np.float64)
        mse = np.array([_mse(self.synthesize(v), tgt) for v in V])
        grads = np.zeros_like(V)
        h = 1e-6 * np.maximum(np.ptp(self.bounds, axis=1), 1e-12)
        for r, v in enumerate(V):
            for k in range(V.shape[1]):
                vp, vm = v.copy(), v.copy()
                vp[k] += h[k]
                vm[k] -= h[k]
                grads[r, k] = (_mse(self.synthesize(vp), tgt) - _mse(self.synthesize(vm), tgt)) / (2 * h[k])
        return mse, grads

    def clip(self, v):
        return np.clip(v, self.bounds[:, 0], self.bounds[:, 1])


def _mse(curve, target):
    d = np.asarray(curve) - target
    return float(np.mean(np.sum(d * d, axis=-1)))


class LinearParameterization(Parameterization):
    """curve = base + basis @ v, on flattened (x0, y0, x1, y1, ...) coordinates."""

    closed_form = True

    def __init__(self, base, basis, bounds, name="linear"):
        self.base = np.asarray(base, dtype=np.float64).reshape(-1)
        self.basis = np.asarray(basis, dtype=np.float64)
        self.bounds = np.asarray(bounds, dtype=np.float64)
        self.name = name
        if self.basis.shape != (self.base.size, self.bounds.shape[0]):
            raise ValueError(f"basis shape {self.basis.shape} inconsistent with base {self.base.size} "
                             f"and {self.bounds.shape[0]} variables")

    def synthesize(self, v):
        v = np.asarray(v, dtype=np.float64)
        return (self.base + self.basis @ v).reshape(-1, 2)

    def batch_mse_and_grad(self, V, target):
        V = np.atleast_2d(np.asarray(V, dtype=np.float64))
        npts = self.base.size // 2
        resid = self.base[None, :] + V @ self.basis.T - np.asarray(target, dtype=np.float64).reshape(1, -1)
        mse = np.sum(resid * resid, axis=1) / npts
        return mse, (2.0 / npts) * resid @ self.basis

    def project(self, target):
        """Unconstrained least-squares coefficients (normal equations)."""
        rhs = np.asarray(target, dtype=np.float64).reshape(-1) - self.base
        coef, *_ = np.linalg.lstsq(self.basis, rhs, rcond=None)
        return coef


# ----------------------------------------------------------------------- SVD

class SvdBasis(LinearParameterization):
    def __init__(self, mean, modes, singular_values, bounds):
        super().__init__(mean, modes.T, bounds, name="svd")
        self.mean = self.base
        self.modes = np.asarray(modes)
        self.singular_values = np.asarray(singular_values)

    def project(self, target):
        return self.modes @ (np.asarray(target, dtype=np.float64).reshape(-1) - self.mean)


def svd_fit(curves, k: int) -> SvdBasis:
    """Top-``k`` principal directions of the mean-centred flattened curves."""
    X = np.asarray(curves, dtype=np.float64)
    X = X.reshape(X.shape[0], -1)
    if k < 1:
        raise ValueError(f"mode count must be >= 1, got {k}")
    if X.shape[0] <= k:
        raise ValueError(f"corpus of {X.shape[0]} curves too small for {k} modes")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    # relative to the uncentred data, so round-off left by centring counts as zero
    tol = max(X.shape) * np.finfo(float).eps * max(np.linalg.norm(X), 1e-300)
    rank = int(np.sum(s > tol))
    if k > rank:
        raise ValueError(f"requested {k} modes but the centred corpus has rank {rank}")
    modes = vt[:k]
    coef = (X - mean) @ modes.T
    bounds = np.stack([coef.min(axis=0), coef.max(axis=0)], axis=1)
    return SvdBasis(mean, modes, s[:k], bounds)


def svd_residuals(curves, ks):
    """Sum of squared reconstruction residuals of the corpus for each mode count."""
    X = np.asarray(curves, dtype=np.float64).reshape(len(curves), -1)
    Xc = X - X.mean(axis=0)
    _, s, _ = np.linalg.svd(Xc, full_matrices=False)
    total = float(np.sum(s ** 2))
    return [max(total - float(np.sum(s[:k] ** 2)), 0.0) for k in ks]


# ---------------------------------------------------------------------- GMDV

def third_difference_matrix(num_points: int) -> np.ndarray:
    D = np.zeros((num_points - 3, num_points))
    for i in range(num_points - 3):
        D[i, i:i + 4] = (-1.0, 3.0, -3.0, 1.0)
    return D


def gmdv_build(num_points: int = DEFAULT_NUM_POINTS, k: int = 8, baseline=None,
               max_displacement: float = 0.1) -> LinearParameterization:
    """Y-displacement modes from the right singular vectors of the third-difference operator.

    Modes are ordered from the smallest singular value up (the smooth end of the
    spectrum) and each is bounded so its largest displacement is ``max_displacement``.
    """
    if not 1 <= k <= num_points - 3:
        raise ValueError(f"GMDV mode count must be in [1, {num_points - 3}], got {k}")
    base = naca4("0012", num_points) if baseline is None else np.asarray(baseline, dtype=np.float64)
    if base.shape != (num_points, 2):
        raise ValueError(f"baseline must have shape ({num_points}, 2), got {base.shape}")
    _, s, vt = np.linalg.svd(third_difference_matrix(num_points), full_matrices=True)
    sv = np.concatenate([s, np.zeros(num_points - s.size)])
    order = np.argsort(sv, kind="stable")
    modes = vt[order[:k]]
    # deterministic signs: largest-magnitude entry positive
    idx = np.argmax(np.abs(modes), axis=1)
    modes = modes * np.sign(modes[np.arange(k), idx])[:, None]
    basis = np.zeros((2 * num_points, k))
    basis[1::2] = modes.T
    bound = max_displacement / np.max(np.abs(modes), axis=1)
    par = LinearParameterization(base, basis, np.stack([-bound, bound], axis=1), name="gmdv")
    par.modes = modes
    par.singular_values = sv[order[:k]]
    return par


# ----------------------------------------------------------------------- FFD

def _bernstein_1d(n, u):
    from math import comb

    u = np.asarray(u, dtype=np.float64)
    return np.stack([comb(n, i) * u ** i * (1 - u) ** (n - i) for i in range(n + 1)], axis=-1)


class FFD(LinearParameterization):
    """Bezier-volume deformation; design variables are y-offsets of the lattice points.

    The lattice has ``nx`` columns along the chord and ``ny`` rows across the
    thickness. x coordinates of the curve never change.
    """

    closed_form = False

    def __init__(self, baseline=None, nx=4, ny=3, box=((0.0, 1.0), (-0.2, 0.2)),
                 inflate=0.01, perturb_bound=0.2):
        base = naca4("0012") if baseline is None else np.asarray(baseline, dtype=np.float64)
        (x0, x1), (y0, y1) = box
        dx, dy = (x1 - x0) * inflate, (y1 - y0) * inflate
        self.box = ((x0 - dx, x1 + dx), (y0 - dy, y1 + dy))
        (bx0, bx1), (by0, by1) = self.box
        u = (base[:, 0] - bx0) / (bx1 - bx0)
        v = (base[:, 1] - by0) / (by1 - by0)
        if np.any(u < 0) or np.any(u > 1) or np.any(v < 0) or np.any(v > 1):
            raise ValueError("baseline lies outside the FFD lattice")
        self.nx, self.ny = nx, ny
        self.uv = np.stack([u, v], axis=1)
        Bu = _bernstein_1d(nx - 1, u)            # (M, nx)
        Bv = _bernstein_1d(ny - 1, v)            # (M, ny)
        weights = (Bu[:, :, None] * Bv[:, None, :]).reshape(base.shape[0], nx * ny)
        basis = np.zeros((2 * base.shape[0], nx * ny))
        basis[1::2] = weights
        bounds = np.tile([-perturb_bound, perturb_bound], (nx * ny, 1))
        super().__init__(base, basis, bounds, name="ffd")

    def lattice_index(self, i, j):
        """Design-variable index of lattice column ``i`` (chordwise), row ``j``."""
        return i * self.ny + j


def ffd_build(baseline=None, grid=(3, 4), perturb_bound=0.2) -> FFD:
    rows, cols = grid
    return FFD(baseline, nx=cols, ny=rows, perturb_bound=perturb_bound)


# ---------------------------------------------------------------------- NACA

def naca4(code: str = "0012", count: int = DEFAULT_NUM_POINTS) -> np.ndarray:
    """Closed-trailing-edge NACA 4-digit section, trailing edge -> upper -> leading edge -> lower."""
    code = str(code)
    if len(code) != 4 or not code.isdigit():
        raise ValueError(f"expected a 4-digit NACA code, got {code!r}")
    m = int(code[0]) / 100.0
    p = int(code[1]) / 10.0
    tk = int(code[2:]) / 100.0
    theta = 2.0 * np.pi * np.arange(count) / (count - 1)
    x = 0.5 * (1.0 + np.cos(theta))
    upper = theta <= np.pi
    yt = 5.0 * tk * (0.2969 * np.sqrt(x) - 0.1260 * x - 0.3516 * x ** 2 + 0.2843 * x ** 3 - 0.1036 * x ** 4)
    if m > 0 and p > 0:
        fore = x < p
        yc = np.where(fore, m / p ** 2 * (2 * p * x - x ** 2), m / (1 - p) ** 2 * ((1 - 2 * p) + 2 * p * x - x ** 2))
        dyc = np.where(fore, 2 * m / p ** 2 * (p - x), 2 * m / (1 - p) ** 2 * (p - x))
    else:
        yc = np.zeros_like(x)
        dyc = np.zeros_like(x)
    ang = np.arctan(dyc)
    sgn = np.where(upper, 1.0, -1.0)
    out = np.stack([x - sgn * yt * np.sin(ang), yc + sgn * yt * np.cos(ang)], axis=1)
    out[0] = out[-1] = (1.0, 0.0)
    return out


def naca_camber(code: str, x):
    m = int(code[0]) / 100.0
    p = int(code[1]) / 10.0
    x = np.asarray(x, dtype=np.float64)
    if m == 0 or p == 0:
        return np.zeros_like(x)
    return np.where(x < p, m / p ** 2 * (2 * p * x - x ** 2), m / (1 - p) ** 2 * ((1 - 2 * p) + 2 * p * x - x ** 2))


# ------------------------------------------------------------------ Bezier-GAN

class GanParameterization(Parameterization):
    """Design vector (c, z) or c alone (z held at zero) through a trained generator.

    A 64-bit copy of the model is used so fitted gradients are accurate.
    """

    name = "bezier-gan"

    def __init__(self, model, fit_noise=True, c_bounds=(0.0, 1.0), z_bound=1.0):
        from .gan import synthesize  # noqa: F401  (import check)

        self.model = copy.deepcopy(model).astype(np.float64)
        self.model.generator.eval()
        self.d = model.cfg.latent_dim
        self.dn = model.cfg.noise_dim
        self.fit_noise = bool(fit_noise) and self.dn > 0
        rows = [c_bounds] * self.d + ([(-z_bound, z_bound)] * self.dn if self.fit_noise else [])
        self.bounds = np.asarray(rows, dtype=np.float64)

    def _split(self, V):
        V = np.atleast_2d(np.asarray(V, dtype=np.float64))
        c = V[:, :self.d]
        z = V[:, self.d:] if self.fit_noise else np.zeros((V.shape[0], self.dn))
        return c, z

    def synthesize(self, v):
        c, z = self._split(v)
        with ad.precision(np.float64):
            curve = self.model.generator(Tensor(c), Tensor(z))[0]
        return curve.data[0]

    def batch_mse_and_grad(self, V, target):
        c, z = self._split(V)
        with ad.precision(np.float64):
            ct = Tensor(c, requires_grad=True)
            zt = Tensor(z, requires_grad=self.fit_noise)
            curve = self.model.generator(ct, zt)[0]
            d = curve - np.asarray(target, dtype=np.float64)[None]
            per = (d * d).sum(axis=(1, 2)) * (1.0 / curve.shape[1])
            per.sum().backward()
        grad = np.concatenate([ct.grad, zt.grad], axis=1) if self.fit_noise else ct.grad.copy()
        return per.data.copy(), grad


# ------------------------------------------------------------------- fitting

def least_squares_fit(param: Parameterization, target, restarts=FIT_RESTARTS,
                      iterations=FIT_ITERATIONS, seed=0, initial=None, lr=0.05):
    """Best design vector and its MSE (mean squared point distance) for ``target``.

    Linear parameterizations with ``closed_form`` use the normal equations.
    Others run ``restarts`` projected-Adam descents of ``iterations`` steps in
    parallel from random starts in the bounds (plus any ``initial`` points);
    the best end point wins.
    """
    target = np.asarray(target, dtype=np.float64)
    if param.closed_form:
        v = param.project(target)
        return v, _mse(param.synthesize(v), target)
    rng = np.random.default_rng(seed)
    lo, hi = param.bounds[:, 0], param.bounds[:, 1]
    starts = lo + (hi - lo) * rng.uniform(size=(restarts, param.dim))
    if initial is not None:
        starts = np.vstack([np.atleast_2d(initial), starts])
    V = param.clip(starts)
    width = np.maximum(hi - lo, 1e-12)
    m = np.zeros_like(V)
    s = np.zeros_like(V)
    b1, b2 = 0.9, 0.999
    best_v = V.copy()
    best_f = np.full(V.shape[0], np.inf)
    for it in range(1, iterations + 1):
        f, g = param.batch_mse_and_grad(V, target)
        better = f < best_f
        best_f[better] = f[better]
        best_v[better] = V[better]
        step = lr * (0.02 ** ((it - 1) / max(iterations - 1, 1)))
        m = b1 * m + (1 - b1) * g
        s = b2 * s + (1 - b2) * g * g
        upd = (m / (1 - b1 ** it)) / (np.sqrt(s / (1 - b2 ** it)) + 1e-12)
        V = param.clip(V - step * width * upd)
    f, _ = param.batch_mse_and_grad(V, target)
    better = f < best_f
    best_f[better] = f[better]
    best_v[better] = V[better]
    k = int(np.argmin(best_f))
    return best_v[k], float(best_f[k])
