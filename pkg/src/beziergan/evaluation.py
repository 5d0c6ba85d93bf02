"""Objective evaluators (XFOIL subprocess, synthetic stand-in) and the MMD metric."""
from __future__ import annotations

import math
import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import pairwise_sqdist
from .geometry import is_self_intersecting

XFOIL_ENV = "BEZIERGAN_XFOIL"
XFOIL_PANELS = 160
XFOIL_ITERATIONS = 200
XFOIL_TIMEOUT = 20.0
SMOOTHNESS_WEIGHT = 0.1


@dataclass(frozen=True)
class OperatingConditions:
    re: float = 1.8e6
    mach: float = 0.01
    alpha: float = 0.0

    def __post_init__(self):
        if not self.re > 0:
            raise ValueError(f"Reynolds number must be positive, got {self.re}")
        if not self.mach >= 0:
            raise ValueError(f"Mach number must be nonnegative, got {self.mach}")


@dataclass(frozen=True)
class EvalOutcome:
    """Result of one evaluation. ``objective`` is nan when ``valid`` is false.

    The synthetic evaluator has no lift or drag; it reports ``cl = objective``
    and ``cd = 1`` so that ``objective == cl / cd`` holds for both evaluators.
    """
    cl: float
    cd: float
    objective: float
    valid: bool

    @classmethod
    def invalid(cls):
        return cls(math.nan, math.nan, math.nan, False)


class XfoilConfigError(RuntimeError):
    """The external solver cannot be run at all (as opposed to a design failing)."""


# --------------------------------------------------------------------------
# MMD
# --------------------------------------------------------------------------

def _flat(sample):
    a = np.asarray(sample, dtype=np.float64)
    return a.reshape(a.shape[0], -1)


def mmd_squared(sample_a, sample_b, sigma: float = 1.0) -> float:
    """Unbiased estimate of the squared MMD with a Gaussian kernel.

    Curves are flattened to vectors. Every kernel value depends only on its
    two rows and the sums are exactly rounded, so the result is invariant
    to row order and symmetric in its arguments, bit for bit.
    """
    X, Y = _flat(sample_a), _flat(sample_b)
    n, m = X.shape[0], Y.shape[0]
    if n < 2 or m < 2:
        raise ValueError(f"mmd_squared needs at least 2 samples per set, got {n} and {m}")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"sample dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
    scale = -0.5 / (sigma * sigma)

    def ksum(A, B, drop_diag):
        K = np.exp(scale * pairwise_sqdist(A, B))
        if drop_diag:
            np.fill_diagonal(K, 0.0)
        return math.fsum(K.ravel())

    kxx = ksum(X, X, True) / (n * (n - 1))
    kyy = ksum(Y, Y, True) / (m * (m - 1))
    kxy = ksum(X, Y, False) / (n * m)
    return math.fsum([kxx, kyy, -2.0 * kxy])


# --------------------------------------------------------------------------
# synthetic objective
# --------------------------------------------------------------------------

def default_target(count: int = 192) -> np.ndarray:
    from .dataset import superellipse_foil

    return superellipse_foil(2.1, 0.09, 0.05, count)


def smoothness(curve) -> float:
    c = np.asarray(curve, dtype=np.float64)
    d2 = c[2:] - 2.0 * c[1:-1] + c[:-2]
    return float(np.mean(np.sum(d2 * d2, axis=1)))


class SyntheticObjective:
    """Negative squared distance to a hidden target minus a smoothness penalty."""

    def __init__(self, target=None, smooth_weight=SMOOTHNESS_WEIGHT):
        self.target = default_target() if target is None else np.asarray(target, dtype=np.float64)
        self.smooth_weight = smooth_weight
        self.optimum = -smooth_weight * smoothness(self.target)

    def __call__(self, curve) -> EvalOutcome:
        c = np.asarray(curve, dtype=np.float64)
        if c.shape != self.target.shape:
            raise ValueError(f"curve shape {c.shape} does not match target {self.target.shape}")
        if not np.all(np.isfinite(c)) or is_self_intersecting(c):
            return EvalOutcome.invalid()
        dist = float(np.mean(np.sum((c - self.target) ** 2, axis=1)))
        f = -dist - self.smooth_weight * smoothness(c)
        return EvalOutcome(f, 1.0, f, True)


_DEFAULT_SYNTHETIC = None


def evaluate_synthetic(curve) -> EvalOutcome:
    global _DEFAULT_SYNTHETIC
    if _DEFAULT_SYNTHETIC is None:
        _DEFAULT_SYNTHETIC = SyntheticObjective()
    return _DEFAULT_SYNTHETIC(curve)


# --------------------------------------------------------------------------
# XFOIL client
# --------------------------------------------------------------------------

def find_xfoil(executable=None) -> str:
    """Resolve the solver path: explicit argument, then the environment, then PATH."""
    candidate = executable or os.environ.get(XFOIL_ENV) or "xfoil"
    resolved = shutil.which(candidate)
    if resolved is None:
        raise XfoilConfigError(
            f"XFOIL executable {candidate!r} not found; set {XFOIL_ENV} or pass --xfoil-path")
    return resolved


def write_coordinates(curve, path, name="airfoil"):
    lines = [name] + [f"{x:.6f} {y:.6f}" for x, y in np.asarray(curve, dtype=np.float64)]
    Path(path).write_text("\n".join(lines) + "\n")


def xfoil_script(coord_file, polar_file, cond: OperatingConditions,
                 panels=XFOIL_PANELS, iterations=XFOIL_ITERATIONS) -> str:
    cmds = [
        "PLOP", "G F", "",
        f"LOAD {coord_file}",
        "PPAR", f"N {panels}", "", "",
        "OPER",
        f"VISC {cond.re:g}",
        f"MACH {cond.mach:g}",
        f"ITER {iterations}",
        "PACC", str(polar_file), "",
        f"ALFA {cond.alpha:g}",
        "PACC",
        "", "QUIT",
    ]
    return "\n".join(cmds) + "\n"


POLAR_COLUMNS = ("alpha", "CL", "CD", "CDp", "CM")


def parse_polar(text: str) -> list[dict]:
    """Rows of an XFOIL polar accumulation file (the table after the dashed rule)."""
    rows = []
    lines = text.splitlines()
    start = None
    for k, line in enumerate(lines):
        if line.strip().startswith("----"):
            start = k + 1
    if start is None:
        return rows
    for line in lines[start:]:
        parts = line.split()
        if len(parts) < len(POLAR_COLUMNS):
            continue
        try:
            vals = [float(p) for p in parts[:len(POLAR_COLUMNS)]]
        except ValueError:
            continue
        rows.append(dict(zip(POLAR_COLUMNS, vals)))
    return rows


def evaluate_xfoil(curve, cond: OperatingConditions | None = None, workdir=None,
                   executable=None, timeout=XFOIL_TIMEOUT) -> EvalOutcome:
    """Run XFOIL on one curve at one operating point.

    Raises :class:`XfoilConfigError` when the executable is missing. Failed
    convergence, timeouts and self-intersecting inputs give an invalid outcome.
    """
    cond = cond or OperatingConditions()
    exe = find_xfoil(executable)
    c = np.asarray(curve, dtype=np.float64)
    if not np.all(np.isfinite(c)) or is_self_intersecting(c):
        return EvalOutcome.invalid()
    with tempfile.TemporaryDirectory(prefix="xfoil-", dir=workdir) as tmp:
        write_coordinates(c, Path(tmp) / "foil.dat")
        script = xfoil_script("foil.dat", "polar.txt", cond)
        try:
            subprocess.run([exe], input=script, cwd=tmp, capture_output=True, text=True,
                           timeout=timeout, check=False)
        except subprocess.TimeoutExpired:
            return EvalOutcome.invalid()
        except OSError as exc:
            raise XfoilConfigError(f"cannot launch {exe}: {exc}") from exc
        polar = Path(tmp) / "polar.txt"
        rows = parse_polar(polar.read_text()) if polar.exists() else []
    if not rows:
        return EvalOutcome.invalid()
    row = rows[-1]
    cl, cd = row["CL"], row["CD"]
    if not (math.isfinite(cl) and math.isfinite(cd)) or cd <= 0:
        return EvalOutcome.invalid()
    return EvalOutcome(cl, cd, cl / cd, True)
