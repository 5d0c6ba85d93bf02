"""Gaussian-process regression with an anisotropic squared-exponential kernel."""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
LOG_SIGNAL_BOUNDS = (np.log(1e-2), np.log(1e2))
LOG_LENGTH_BOUNDS = (np.log(1e-2), np.log(1e1))
LOG_NOISE_BOUNDS = (np.log(1e-8), np.log(1e-1))


class GPError(RuntimeError):
    pass


def sq_exp(A, B, lengths):
    """Unit-amplitude squared-exponential kernel between rows of ``A`` and ``B``."""
    a = A / lengths
    b = B / lengths
    k = a @ b.T
    k *= -2.0
    k += np.sum(a * a, 1)[:, None]
    k += np.sum(b * b, 1)[None, :]
    np.maximum(k, 0.0, out=k)
    k *= -0.5
    return np.exp(k, out=k)


def robust_cholesky(K):
    """Cholesky factor with adaptive diagonal jitter (relative to the mean diagonal)."""
    scale = float(np.mean(np.diag(K))) or 1.0
    eye = np.eye(K.shape[0])
    for j in JITTERS:
        try:
            return np.linalg.cholesky(K + j * scale * eye), j * scale
        except np.linalg.LinAlgError:
            continue
    raise GPError("kernel matrix is not positive definite even with 1e-6 jitter")


class GaussianProcess:
    """Exact GP regressor.

    Inputs are mapped to the unit box given by ``bounds`` (default: data range)
    and targets are standardised. Hyperparameters ``theta`` are
    ``[log signal variance, log length scales..., log noise variance]`` in
    those scaled units.
    """

    def __init__(self, X, y, bounds=None, theta=None, restarts=8, seed=0, optimize=True):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
        if X.shape[0] < 2:
            raise ValueError("a GP needs at least two observations")
        if bounds is None:
            lo, hi = X.min(axis=0), X.max(axis=0)
            hi = np.where(hi > lo, hi, lo + 1.0)
            bounds = np.stack([lo, hi], axis=1)
        self.bounds = np.asarray(bounds, dtype=np.float64)
        self.dim = X.shape[1]
        self.X = X
        self.U = self.scale(X)
        self.y_mean = float(y.mean())
        self.y_std = float(y.std()) or 1.0
        self.t = (y - self.y_mean) / self.y_std
        if theta is None:
            theta = self.default_theta()
        theta = np.asarray(theta, dtype=np.float64)
        if optimize:
            theta = self.optimize(theta, restarts, seed)
        self.set_theta(theta)

    # --------------------------------------------------------------- basics
    def scale(self, X):
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return (np.atleast_2d(np.asarray(X, dtype=np.float64)) - lo) / (hi - lo)

    def default_theta(self):
        return np.concatenate([[0.0], np.full(self.dim, np.log(0.3)), [np.log(1e-6)]])

    def theta_bounds(self):
        return [LOG_SIGNAL_BOUNDS] + [LOG_LENGTH_BOUNDS] * self.dim + [LOG_NOISE_BOUNDS]

    def _unpack(self, theta):
        return np.exp(theta[0]), np.exp(theta[1:1 + self.dim]), np.exp(theta[-1])

    # ------------------------------------------------------------ likelihood
    def log_marginal_likelihood(self, theta, grad=False):
        theta = np.asarray(theta, dtype=np.float64)
        s2, ell, noise = self._unpack(theta)
        n = self.U.shape[0]
        R = sq_exp(self.U, self.U, ell)
        K = s2 * R + noise * np.eye(n)
        L, _ = robust_cholesky(K)
        alpha = cho_solve((L, True), self.t)
        lml = -0.5 * self.t @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(2 * np.pi)
        if not grad:
            return lml
        Kinv = cho_solve((L, True), np.eye(n))
        A = np.outer(alpha, alpha) - Kinv
        g = np.empty_like(theta)
        g[0] = 0.5 * np.sum(A * (s2 * R))
        for k in range(self.dim):
            diff = self.U[:, k][:, None] - self.U[:, k][None, :]
            dK = s2 * R * diff ** 2 / ell[k] ** 2
            g[1 + k] = 0.5 * np.sum(A * dK)
        g[-1] = 0.5 * noise * np.trace(A)
        return lml, g

    def optimize(self, theta0, restarts=8, seed=0):
        rng = np.random.default_rng(seed)
        bnds = self.theta_bounds()
        lo = np.array([b[0] for b in bnds])
        hi = np.array([b[1] for b in bnds])
        starts = [np.clip(theta0, lo, hi)]
        starts += [lo + (hi - lo) * rng.uniform(size=lo.size) for _ in range(max(restarts, 1) - 1)]

        def neg(th):
            try:
                v, g = self.log_marginal_likelihood(th, grad=True)
            except GPError:
                return 1e25, np.zeros_like(th)
            return -v, -g

        best, best_val = starts[0], np.inf
        for th in starts:
            res = minimize(neg, th, jac=True, method="L-BFGS-B", bounds=bnds)
            if np.isfinite(res.fun) and res.fun < best_val:
                best, best_val = res.x, res.fun
        if not np.isfinite(best_val) or best_val >= 1e25:
            raise GPError("no hyperparameter setting gave a usable kernel matrix")
        return best

    def set_theta(self, theta):
        self.theta = np.asarray(theta, dtype=np.float64)
        self.signal_var, self.lengths, self.noise_var = self._unpack(self.theta)
        n = self.U.shape[0]
        K = self.signal_var * sq_exp(self.U, self.U, self.lengths) + self.noise_var * np.eye(n)
        self.L, self.jitter = robust_cholesky(K)
        self.alpha = cho_solve((self.L, True), self.t)

    # -------------------------------------------------------------- predict
    def predict(self, Xq, return_std=False):
        """Posterior mean and variance (or std) in the original target units."""
        Uq = self.scale(Xq)
        Ks = self.signal_var * sq_exp(Uq, self.U, self.lengths)
        mu = Ks @ self.alpha
        v = solve_triangular(self.L, Ks.T, lower=True)
        var = np.maximum(self.signal_var - np.sum(v * v, axis=0), 0.0)
        mean = self.y_mean + self.y_std * mu
        var = var * self.y_std ** 2
        return (mean, np.sqrt(var)) if return_std else (mean, var)


def gp_fit(X, y, bounds=None, restarts=8, seed=0, theta=None):
    return GaussianProcess(X, y, bounds=bounds, theta=theta, restarts=restarts, seed=seed)
