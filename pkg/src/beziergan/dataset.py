"""Airfoil coordinate ingestion, outlier filtering and the corpus file format.

Corpus file layout (all little-endian)::

    offset 0   6 bytes   magic b"BZCORP"
    offset 6   uint16    format version (1)
    offset 8   uint32    number of curves N
    offset 12  uint32    points per curve M
    offset 16  float32   N * M * 2 coordinates, row-major (curve, point, xy)
    then       N names, each uint16 byte length + UTF-8 bytes
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .geometry import DEFAULT_NUM_POINTS, is_self_intersecting, resample_by_curvature

MAGIC = b"BZCORP"
VERSION = 1
_HEADER = struct.Struct("<6sHII")
MIN_POINTS = 8


class DatasetError(Exception):
    pass


class ParseError(DatasetError):
    pass


class TooFewPointsError(ParseError):
    pass


class CorpusFormatError(DatasetError):
    pass


class EmptyCorpusError(DatasetError):
    pass


@dataclass
class RawAirfoil:
    name: str
    points: np.ndarray


@dataclass
class Corpus:
    curves: np.ndarray  # (N, M, 2) float
    names: list
    dropped: list = field(default_factory=list)  # (name, reason)

    def __len__(self):
        return len(self.names)


def parse_dat(data, name_hint: str = "") -> RawAirfoil:
    """Parse a UIUC coordinate file in Selig or Lednicer layout."""
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    lines = data.splitlines()
    if not lines:
        raise ParseError("empty file")
    name = lines[0].strip() or name_hint
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        text = line.strip()
        if not text:
            continue
        parts = text.replace(",", " ").split()
        try:
            vals = [float(v) for v in parts[:2]]
        except ValueError:
            raise ParseError(f"line {lineno}: cannot parse {text!r}") from None
        if len(vals) < 2 or not all(np.isfinite(vals)):
            raise ParseError(f"line {lineno}: expected two finite numbers, got {text!r}")
        rows.append(vals)

    if rows and rows[0][0] > 1.5 and rows[0][1] > 1.5 and all(float(v).is_integer() for v in rows[0]):
        n_upper, n_lower = int(rows[0][0]), int(rows[0][1])
        body = rows[1:]
        if len(body) != n_upper + n_lower:
            raise ParseError(
                f"Lednicer header announces {n_upper}+{n_lower} points, found {len(body)}"
            )
        upper = np.array(body[:n_upper])
        lower = np.array(body[n_upper:])
        if np.allclose(upper[0], lower[0]):
            lower = lower[1:]
        pts = np.vstack([upper[::-1], lower])
    else:
        pts = np.array(rows, dtype=np.float64).reshape(-1, 2)

    if pts.shape[0] < MIN_POINTS:
        raise TooFewPointsError(f"{name!r}: {pts.shape[0]} points, need at least {MIN_POINTS}")
    if pts[:, 0].min() < -0.1 or pts[:, 0].max() > 1.1:
        raise ParseError(f"{name!r}: x coordinates outside [-0.1, 1.1]")
    return RawAirfoil(name, pts)


def write_dat(name: str, points, path=None, precision: int = 17) -> str:
    """Selig-format text; ``precision`` significant digits (17 round-trips float64)."""
    fmt = f"{{:.{precision}g}} {{:.{precision}g}}"
    text = "\n".join([name] + [fmt.format(x, y) for x, y in np.asarray(points)]) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_dat_dir(directory) -> tuple[list, list]:
    """Parse every ``.dat`` file in ``directory``; returns (airfoils, failures)."""
    if not os.path.isdir(directory):
        raise FileNotFoundError(directory)
    airfoils, failures = [], []
    for fname in sorted(os.listdir(directory)):
        if not fname.lower().endswith(".dat"):
            continue
        stem = os.path.splitext(fname)[0]
        with open(os.path.join(directory, fname), "rb") as fh:
            raw = fh.read()
        try:
            airfoils.append(parse_dat(raw, name_hint=stem))
        except ParseError as exc:
            failures.append((stem, f"parse error: {exc}"))
    return airfoils, failures


def rejection_reason(points, max_thickness=0.5, max_te_gap=0.02, te_tol=0.05):
    """First failed filter for a raw outline, or None."""
    pts = np.asarray(points, dtype=np.float64)
    if is_self_intersecting(pts):
        return "self-intersecting"
    chord = pts[:, 0].max() - pts[:, 0].min()
    if chord <= 0 or (pts[:, 1].max() - pts[:, 1].min()) / chord > max_thickness:
        return "too thick"
    if np.linalg.norm(pts[0] - pts[-1]) > max_te_gap:
        return "trailing-edge gap"
    te = np.array([1.0, 0.0])
    if np.linalg.norm(pts[0] - te) > te_tol or np.linalg.norm(pts[-1] - te) > te_tol:
        return "trailing edge not at (1, 0)"
    return None


def preprocess(airfoils, count: int = DEFAULT_NUM_POINTS, **filters) -> Corpus:
    """Filter outliers and resample survivors to ``count`` points.

    Outlines that already have exactly ``count`` points are taken to be
    resampled and pass through unchanged, which makes the step idempotent.
    """
    if not airfoils:
        raise EmptyCorpusError("no airfoils given")
    curves, names, dropped = [], [], []
    for af in airfoils:
        reason = rejection_reason(af.points, **filters)
        if reason is None:
            if af.points.shape[0] == count:
                curve = np.array(af.points, dtype=np.float64)
            else:
                try:
                    curve = resample_by_curvature(af.points, count)
                except ValueError as exc:
                    reason = f"resampling failed: {exc}"
            if reason is None and is_self_intersecting(curve):
                reason = "self-intersecting after resampling"
        if reason is not None:
            dropped.append((af.name, reason))
            continue
        curves.append(curve)
        names.append(af.name)
    if not curves:
        raise EmptyCorpusError(f"all {len(airfoils)} airfoils were dropped")
    return Corpus(np.stack(curves), names, dropped)


def save_corpus(corpus: Corpus, path) -> None:
    curves = np.ascontiguousarray(corpus.curves, dtype="<f4")
    n, m, _ = curves.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, m))
        fh.write(curves.tobytes())
        for name in corpus.names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)


def load_corpus(path) -> Corpus:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise CorpusFormatError("truncated corpus header")
    magic, version, n, m = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CorpusFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorpusFormatError(f"unsupported corpus version {version}")
    nbytes = n * m * 2 * 4
    off = _HEADER.size
    if len(blob) < off + nbytes:
        raise CorpusFormatError("truncated corpus data")
    curves = np.frombuffer(blob, dtype="<f4", count=n * m * 2, offset=off).reshape(n, m, 2).copy()
    off += nbytes
    names = []
    for _ in range(n):
        if len(blob) < off + 2:
            raise CorpusFormatError("truncated name table")
        (k,) = struct.unpack_from("<H", blob, off)
        off += 2
        if len(blob) < off + k:
            raise CorpusFormatError("truncated name table")
        names.append(blob[off:off + k].decode("utf-8"))
        off += k
    return Corpus(curves.astype(np.float32), names)


def superellipse_foil(exponent: float, upper: float, lower: float,
                      count: int = DEFAULT_NUM_POINTS) -> np.ndarray:
    """Closed superellipse outline on chord [0, 1] with separate upper/lower half-thickness.

    Starts and ends at the trailing edge (1, 0), upper surface first.
    """
    theta = np.linspace(0.0, 2.0 * np.pi, count)
    c, s = np.cos(theta), np.sin(theta)
    e = 2.0 / exponent
    x = 0.5 + 0.5 * np.sign(c) * np.abs(c) ** e
    y = np.sign(s) * np.abs(s) ** e * np.where(s >= 0, upper, lower)
    pts = np.column_stack([x, y])
    pts[0] = pts[-1] = (1.0, 0.0)
    return pts


SYNTHETIC_RANGES = {"exponent": (1.6, 2.6), "upper": (0.05, 0.12), "lower": (0.02, 0.08)}


def synthetic_corpus(num: int = 500, seed: int = 0, count: int = DEFAULT_NUM_POINTS) -> Corpus:
    """Superellipse-foil family with three shape factors drawn uniformly."""
    rng = np.random.default_rng(seed)
    lo = np.array([r[0] for r in SYNTHETIC_RANGES.values()])
    hi = np.array([r[1] for r in SYNTHETIC_RANGES.values()])
    factors = rng.uniform(lo, hi, size=(num, 3))
    curves = np.stack([superellipse_foil(*f, count=count) for f in factors])
    names = [f"se-{i:04d}" for i in range(num)]
    return Corpus(curves, names)
