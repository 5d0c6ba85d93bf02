"""Binary GP classifier: Laplace approximation with a logistic link."""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import expit

from .gp import robust_cholesky, sq_exp

SINGLE_CLASS_CLIP = (0.1, 0.9)
SIGNAL_GRID = (1.0, 4.0, 16.0)
LENGTH_GRID = (0.05, 0.1, 0.2, 0.4)


class GPClassifier:
    """Probability that a design is feasible.

    Labels are booleans (True = feasible). With only one class present the
    classifier returns the class fraction clipped to [0.1, 0.9]. Otherwise an
    isotropic squared-exponential prior is used, its amplitude and length
    scale picked from a small grid by the Laplace evidence.
    """

    def __init__(self, X, labels, bounds=None, signal_var=None, length=None, newton_iters=100):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        lab = np.asarray(labels, dtype=bool).reshape(-1)
        if X.shape[0] != lab.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {lab.shape[0]} labels")
        if bounds is None:
            lo, hi = X.min(axis=0), X.max(axis=0)
            hi = np.where(hi > lo, hi, lo + 1.0)
            bounds = np.stack([lo, hi], axis=1)
        self.bounds = np.asarray(bounds, dtype=np.float64)
        self.X = X
        self.U = self._scale(X)
        self.y = lab.astype(np.float64)
        self.constant = None
        if lab.all() or not lab.any():
            self.constant = float(np.clip(self.y.mean() if lab.size else 0.5, *SINGLE_CLASS_CLIP))
            return
        self.newton_iters = newton_iters
        grid = [(s, l) for s in ((signal_var,) if signal_var else SIGNAL_GRID)
                for l in ((length,) if length else LENGTH_GRID)]
        best = None
        for s, l in grid:
            fit = self._laplace(s, l)
            if best is None or fit["evidence"] > best["evidence"]:
                best = fit
        self.__dict__.update(best)

    def _scale(self, X):
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return (np.atleast_2d(np.asarray(X, dtype=np.float64)) - lo) / (hi - lo)

    def _laplace(self, s2, ell):
        n = self.U.shape[0]
        K = s2 * sq_exp(self.U, self.U, np.full(self.U.shape[1], ell))
        K = K + 1e-8 * s2 * np.eye(n)
        f = np.zeros(n)
        obj_old = -np.inf
        for _ in range(self.newton_iters):
            pi = expit(f)
            W = pi * (1 - pi)
            sw = np.sqrt(W)
            B = np.eye(n) + sw[:, None] * K * sw[None, :]
            L, _ = robust_cholesky(B)
            b = W * f + (self.y - pi)
            a = b - sw * cho_solve((L, True), sw * (K @ b))
            f = K @ a
            obj = -0.5 * a @ f + np.sum(self.y * f - np.logaddexp(0.0, f))
            if abs(obj - obj_old) < 1e-10:
                break
            obj_old = obj
        pi = expit(f)
        W = pi * (1 - pi)
        sw = np.sqrt(W)
        B = np.eye(n) + sw[:, None] * K * sw[None, :]
        L, _ = robust_cholesky(B)
        evidence = obj - np.sum(np.log(np.diag(L)))
        return {"signal_var": s2, "length": ell, "f_hat": f, "pi": pi, "sw": sw, "Lb": L, "evidence": evidence}

    def predict_proba(self, Xq):
        Xq = np.atleast_2d(np.asarray(Xq, dtype=np.float64))
        if self.constant is not None:
            return np.full(Xq.shape[0], self.constant)
        Uq = self._scale(Xq)
        Ks = self.signal_var * sq_exp(Uq, self.U, np.full(self.U.shape[1], self.length))
        mean = Ks @ (self.y - self.pi)
        v = solve_triangular(self.Lb, (self.sw[:, None] * Ks.T), lower=True)
        var = np.maximum(self.signal_var - np.sum(v * v, axis=0), 0.0)
        # probit-matched approximation of the logistic-Gaussian integral
        return expit(mean / np.sqrt(1.0 + np.pi * var / 8.0))


def gpc_fit(X, labels, bounds=None):
    return GPClassifier(X, labels, bounds=bounds)
