"""Hot numeric kernels with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``BEZIERGAN_DISABLE_NUMBA``
is unset (or ``0``).  Both paths are importable side by side so tests and
``benchmarks/bench_kernels.py`` can compare them.
"""
from __future__ import annotations

import math
import os

import numpy as np
from scipy.special import gammaln

T_EPS = 1e-7


def _numba_requested() -> bool:
    flag = os.environ.get("BEZIERGAN_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()


# --------------------------------------------------------------------------
# pure numpy implementations
# --------------------------------------------------------------------------

def bernstein_basis_numpy(t: np.ndarray, n: int) -> np.ndarray:
    """Bernstein basis of degree ``n`` at every entry of 1-D ``t``; shape (len(t), n+1)."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty((t.shape[0], n + 1))
    if n == 0:
        out[:] = 1.0
        return out
    i = np.arange(n + 1, dtype=np.float64)
    log_binom = gammaln(n + 1.0) - gammaln(i + 1.0) - gammaln(n - i + 1.0)
    tc = np.clip(t, T_EPS, 1.0 - T_EPS)[:, None]
    out[:] = np.exp(log_binom + i * np.log(tc) + (n - i) * np.log1p(-tc))
    lo = t <= 0.0
    hi = t >= 1.0
    if lo.any():
        out[lo] = 0.0
        out[lo, 0] = 1.0
    if hi.any():
        out[hi] = 0.0
        out[hi, n] = 1.0
    return out


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def crossing_pairs_numpy(points: np.ndarray, stop_at_first: bool = False) -> int:
    """Count pairs of polyline segments that properly cross.

    Segments touching only at an endpoint, overlapping collinearly, or
    sharing a vertex are not counted.
    """
    p = np.asarray(points, dtype=np.float64)
    a = p[:-1]
    b = p[1:]
    s = a.shape[0]
    if s < 3:
        return 0
    # o1[i, j] = orientation of segment i w.r.t. endpoint a_j, etc.
    ax, ay = a[:, 0][:, None], a[:, 1][:, None]
    bx, by = b[:, 0][:, None], b[:, 1][:, None]
    cx, cy = a[:, 0][None, :], a[:, 1][None, :]
    dx, dy = b[:, 0][None, :], b[:, 1][None, :]
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    cross = (o1 * o2 < 0.0) & (o3 * o4 < 0.0)
    cross = np.triu(cross, k=2)
    return int(cross.sum())


def pairwise_sqdist_numpy(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Squared distances from explicit differences (entry (i, j) depends only on X[i], Y[j])."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    out = np.empty((X.shape[0], Y.shape[0]))
    for i in range(X.shape[0]):
        diff = Y - X[i]
        out[i] = np.einsum("jk,jk->j", diff, diff)
    return out


def adam_update_numpy(a, g, m, v, lr, b1, b2, c1, c2, eps):
    """One in-place Adam update of ``a`` with moments ``m``, ``v`` and bias corrections ``c1``, ``c2``."""
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    a -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(a.dtype)


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def bernstein_basis_numba(t, n):
        m = t.shape[0]
        out = np.zeros((m, n + 1))
        lgn = math.lgamma(n + 1.0)
        logc = np.empty(n + 1)
        for i in range(n + 1):
            logc[i] = lgn - math.lgamma(i + 1.0) - math.lgamma(n - i + 1.0)
        for j in range(m):
            tj = t[j]
            if n == 0:
                out[j, 0] = 1.0
            elif tj <= 0.0:
                out[j, 0] = 1.0
            elif tj >= 1.0:
                out[j, n] = 1.0
            else:
                tc = min(max(tj, T_EPS), 1.0 - T_EPS)
                lt = math.log(tc)
                l1t = math.log1p(-tc)
                for i in range(n + 1):
                    out[j, i] = math.exp(logc[i] + i * lt + (n - i) * l1t)
        return out

    @numba.njit(cache=True)
    def _crossing_pairs_numba(p, stop_at_first):
        s = p.shape[0] - 1
        count = 0
        for i in range(s):
            ax = p[i, 0]
            ay = p[i, 1]
            bx = p[i + 1, 0]
            by = p[i + 1, 1]
            minx_i = min(ax, bx)
            maxx_i = max(ax, bx)
            miny_i = min(ay, by)
            maxy_i = max(ay, by)
            for j in range(i + 2, s):
                cx = p[j, 0]
                cy = p[j, 1]
                dx = p[j + 1, 0]
                dy = p[j + 1, 1]
                if max(cx, dx) < minx_i or min(cx, dx) > maxx_i:
                    continue
                if max(cy, dy) < miny_i or min(cy, dy) > maxy_i:
                    continue
                o1 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
                o2 = (bx - ax) * (dy - ay) - (by - ay) * (dx - ax)
                o3 = (dx - cx) * (ay - cy) - (dy - cy) * (ax - cx)
                o4 = (dx - cx) * (by - cy) - (dy - cy) * (bx - cx)
                if o1 * o2 < 0.0 and o3 * o4 < 0.0:
                    count += 1
                    if stop_at_first:
                        return count
        return count

    @numba.njit(cache=True)
    def _pairwise_sqdist_numba(X, Y):
        n, m, k = X.shape[0], Y.shape[0], X.shape[1]
        out = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                acc = 0.0
                for q in range(k):
                    d = X[i, q] - Y[j, q]
                    acc += d * d
                out[i, j] = acc
        return out

    def pairwise_sqdist_numba(X, Y):
        return _pairwise_sqdist_numba(np.ascontiguousarray(X, dtype=np.float64),
                                      np.ascontiguousarray(Y, dtype=np.float64))

    @numba.njit(cache=True)
    def _adam_update_numba(a, g, m, v, lr, b1, b2, c1, c2, eps):
        for k in range(a.size):
            gk = g[k]
            mk = b1 * m[k] + (1.0 - b1) * gk
            vk = b2 * v[k] + (1.0 - b2) * gk * gk
            m[k] = mk
            v[k] = vk
            a[k] -= lr * (mk / c1) / (math.sqrt(vk / c2) + eps)

    def adam_update_numba(a, g, m, v, lr, b1, b2, c1, c2, eps):
        if not (a.flags.c_contiguous and m.flags.c_contiguous and v.flags.c_contiguous):
            return adam_update_numpy(a, g, m, v, lr, b1, b2, c1, c2, eps)
        g = np.ascontiguousarray(g, dtype=a.dtype)
        _adam_update_numba(a.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1),
                           lr, b1, b2, c1, c2, eps)

    def crossing_pairs_numba(points, stop_at_first=False):
        p = np.ascontiguousarray(points, dtype=np.float64)
        if p.shape[0] < 4:
            return 0
        return int(_crossing_pairs_numba(p, stop_at_first))

else:  # pragma: no cover
    bernstein_basis_numba = None
    crossing_pairs_numba = None
    pairwise_sqdist_numba = None
    adam_update_numba = None


def bernstein_basis(t, n: int) -> np.ndarray:
    t = np.ascontiguousarray(np.ravel(t), dtype=np.float64)
    if USE_NUMBA:
        return bernstein_basis_numba(t, int(n))
    return bernstein_basis_numpy(t, int(n))


def crossing_pairs(points, stop_at_first: bool = False) -> int:
    if USE_NUMBA:
        return crossing_pairs_numba(points, stop_at_first)
    return crossing_pairs_numpy(points, stop_at_first)


def pairwise_sqdist(X, Y) -> np.ndarray:
    if USE_NUMBA:
        return pairwise_sqdist_numba(X, Y)
    return pairwise_sqdist_numpy(X, Y)


def adam_update(a, g, m, v, lr, b1, b2, c1, c2, eps) -> None:
    if USE_NUMBA:
        adam_update_numba(a, g, m, v, lr, b1, b2, c1, c2, eps)
    else:
        adam_update_numpy(a, g, m, v, lr, b1, b2, c1, c2, eps)
