"""Rational Bezier curves, curvature, self-intersection and resampling.

Curves are plain ``(num_points, 2)`` float arrays ordered from the trailing
edge over the upper surface to the leading edge and back along the lower
surface.  Everything here works in float64.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import splev, splprep
from scipy.special import gammaln

from . import _kernels
from ._kernels import T_EPS

DEFAULT_NUM_POINTS = 192
DENSITY_GAMMA = 4.0


class GeometryError(ValueError):
    pass


class DegenerateCurveError(GeometryError):
    pass


class SingularPointError(GeometryError):
    pass


@dataclass(frozen=True)
class BezierParams:
    """Control points ``(n+1, 2)``, weights ``(n+1,)`` and parameter values ``(m+1,)``."""

    control_points: np.ndarray
    weights: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.control_points, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        t = np.asarray(self.params, dtype=np.float64)
        if P.ndim != 2 or P.shape[1] != 2:
            raise GeometryError(f"control points must be (n+1, 2), got {P.shape}")
        if w.shape != (P.shape[0],):
            raise GeometryError(f"weights shape {w.shape} does not match {P.shape[0]} control points")
        if np.any(w < 0):
            raise GeometryError("weights must be nonnegative")
        if t.ndim != 1 or np.any(t < 0) or np.any(t > 1):
            raise GeometryError("parameter values must lie in [0, 1]")
        object.__setattr__(self, "control_points", P)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "params", t)

    @property
    def degree(self) -> int:
        return self.control_points.shape[0] - 1

    def check_monotone(self, tol: float = 0.0) -> bool:
        t = self.params
        return bool(abs(t[0]) <= tol and abs(t[-1] - 1.0) <= tol and np.all(np.diff(t) > 0))


def log_bernstein(n: int, i: int, t):
    """Natural log of ``C(n, i) t^i (1-t)^(n-i)``, computed with log-gamma.

    ``t`` is clamped to ``[1e-7, 1 - 1e-7]``; use :func:`bernstein` when the
    exact values at ``t = 0`` or ``t = 1`` matter.
    """
    if not 0 <= i <= n:
        raise GeometryError(f"index {i} out of range for degree {n}")
    t = np.clip(np.asarray(t, dtype=np.float64), T_EPS, 1.0 - T_EPS)
    log_binom = gammaln(n + 1.0) - gammaln(i + 1.0) - gammaln(n - i + 1.0)
    return log_binom + i * np.log(t) + (n - i) * np.log1p(-t)


def bernstein(n: int, t) -> np.ndarray:
    """All degree-``n`` Bernstein polynomials at ``t``; shape ``(len(t), n+1)``."""
    return _kernels.bernstein_basis(t, n)


def bernstein_derivative(n: int, t, order: int = 1) -> np.ndarray:
    """``order``-th derivative of every degree-``n`` Bernstein polynomial at ``t``."""
    t = np.ravel(np.asarray(t, dtype=np.float64))
    if order == 0:
        return bernstein(n, t)
    if order > n:
        return np.zeros((t.shape[0], n + 1))
    lower = bernstein_derivative(n - 1, t, order - 1)
    out = np.zeros((t.shape[0], n + 1))
    out[:, 1:] += lower
    out[:, :-1] -= lower
    return n * out


def _rational_parts(params: BezierParams, t, order: int):
    P, w = params.control_points, params.weights
    n = params.degree
    parts = []
    for k in range(order + 1):
        B = bernstein_derivative(n, t, k)
        parts.append((B @ (P * w[:, None]), B @ w))
    return parts


def bezier_eval(params: BezierParams) -> np.ndarray:
    """Evaluate the rational Bezier curve at ``params.params``."""
    (num, den), = _rational_parts(params, params.params, 0)
    if np.any(np.abs(den) <= np.finfo(float).tiny):
        raise DegenerateCurveError("rational Bezier denominator vanishes")
    return num / den[:, None]


def bezier_derivatives(params: BezierParams, t):
    """Point, first and second derivative of the curve at ``t`` (quotient rule)."""
    (N, W), (N1, W1), (N2, W2) = _rational_parts(params, t, 2)
    if np.any(np.abs(W) <= np.finfo(float).tiny):
        raise DegenerateCurveError("rational Bezier denominator vanishes")
    W = W[:, None]
    W1 = W1[:, None]
    W2 = W2[:, None]
    x = N / W
    d1 = (N1 - x * W1) / W
    d2 = (N2 - 2.0 * d1 * W1 - x * W2) / W
    return x, d1, d2


def signed_curvature(d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    speed2 = d1[:, 0] ** 2 + d1[:, 1] ** 2
    if np.any(speed2 == 0.0):
        raise SingularPointError("zero speed: curvature undefined")
    return (d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1]) / speed2 ** 1.5


def curvature(params: BezierParams, t):
    """Signed curvature at ``t`` from analytic derivatives; scalar in, scalar out."""
    scalar = np.ndim(t) == 0
    _, d1, d2 = bezier_derivatives(params, np.atleast_1d(t))
    kappa = signed_curvature(d1, d2)
    return float(kappa[0]) if scalar else kappa


def is_self_intersecting(curve) -> bool:
    """True iff two non-adjacent segments of the polyline properly cross."""
    pts = np.asarray(curve, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError(f"curve must be (k, 2), got {pts.shape}")
    if pts.shape[0] < 4:
        return False
    return _kernels.crossing_pairs(pts, stop_at_first=True) > 0


def signed_area(curve) -> float:
    x, y = np.asarray(curve, dtype=np.float64).T
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _drop_repeats(pts: np.ndarray) -> np.ndarray:
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(np.abs(np.diff(pts, axis=0)) > 1e-12, axis=1)
    return pts[keep]


def resample_by_curvature(raw, count: int = DEFAULT_NUM_POINTS, gamma: float = DENSITY_GAMMA,
                          dense: int = 4000) -> np.ndarray:
    """Refit ``raw`` with an interpolating cubic B-spline and resample it.

    Samples are placed with arc-length density proportional to
    ``1 + gamma * |curvature|``.  The first and last raw points are kept as
    the end samples, and the result is oriented counterclockwise (upper
    surface first when starting at the trailing edge).
    """
    pts = _drop_repeats(np.asarray(raw, dtype=np.float64))
    if pts.shape[0] < 4:
        raise DegenerateCurveError("need at least 4 distinct points")
    seg = np.hypot(*np.diff(pts, axis=0).T)
    if seg.sum() <= 0.0:
        raise DegenerateCurveError("zero arc length")
    u0 = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
    tck, _ = splprep(pts.T, u=u0, k=3, s=0.0)
    u = np.linspace(0.0, 1.0, dense)
    dx, dy = splev(u, tck, der=1)
    ddx, ddy = splev(u, tck, der=2)
    speed = np.hypot(dx, dy)
    kappa = np.abs(dx * ddy - ddx * dy) / np.maximum(speed, 1e-300) ** 3
    density = (1.0 + gamma * kappa) * speed
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(u))])
    cum /= cum[-1]
    us = np.interp(np.linspace(0.0, 1.0, count), cum, u)
    out = np.column_stack(splev(us, tck))
    out[0] = pts[0]
    out[-1] = pts[-1]
    if signed_area(out) < 0:
        out = out[::-1].copy()
    return out
