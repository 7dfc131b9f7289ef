"""Discrete distributions on R^d and reference measures on the unit cube."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

WEIGHT_TOL = 1e-12


class InputError(ValueError):
    """Raised for malformed distribution data (bad weights, bad CSV rows)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Weighted point cloud in R^d.

    ``points`` has shape (n, d) and ``weights`` shape (n,). Both arrays are
    copied and made read-only, so instances can be shared freely.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise InputError("distribution needs at least one point with d >= 1")
        if w.shape[0] != pts.shape[0]:
            raise InputError("points and weights have different lengths")
        if not np.all(np.isfinite(pts)):
            raise InputError("non-finite coordinate")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InputError("negative weight")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise InputError(f"weights sum to {w.sum()!r}, not 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def map(self, fn) -> "DiscreteDistribution":
        """Push forward through ``fn`` applied row-wise to the (n, d) points array."""
        return DiscreteDistribution(np.asarray(fn(self.points), dtype=float), self.weights)

    def shift(self, c) -> "DiscreteDistribution":
        return DiscreteDistribution(self.points + np.asarray(c, dtype=float), self.weights)

    def scale(self, a: float) -> "DiscreteDistribution":
        return DiscreteDistribution(a * self.points, self.weights)

    def canonical(self, tol: float = 0.0) -> "DiscreteDistribution":
        """Sort lexicographically, merge coincident points and drop null atoms."""
        keep = self.weights > 0
        pts, w = self.points[keep], self.weights[keep]
        order = np.lexsort(pts.T[::-1])
        pts, w = pts[order], w[order]
        merged_pts, merged_w = [pts[0]], [w[0]]
        for p, wi in zip(pts[1:], w[1:]):
            if np.max(np.abs(p - merged_pts[-1])) <= tol:
                merged_w[-1] += wi
            else:
                merged_pts.append(p)
                merged_w.append(wi)
        w = np.array(merged_w)
        return DiscreteDistribution(np.array(merged_pts), w / w.sum())

    def marginal(self, i: int) -> "DiscreteDistribution":
        return DiscreteDistribution(self.points[:, [i]], self.weights)

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}

    def __repr__(self) -> str:
        return f"DiscreteDistribution(n={self.n}, dim={self.dim})"


def _normalize(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise InputError("negative weight")
    total = w.sum()
    if total <= 0:
        raise InputError("degenerate weights")
    return w / total


def from_samples(rows, weights=None) -> DiscreteDistribution:
    """Build a distribution from sample rows, normalizing optional weights.

    Duplicate rows are kept as separate atoms.
    """
    pts = np.asarray(rows, dtype=float)
    if pts.size == 0:
        raise InputError("empty input")
    if pts.ndim == 1:
        pts = pts[:, None]
    if not np.all(np.isfinite(pts)):
        raise InputError("non-finite coordinate")
    if weights is None:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    else:
        w = _normalize(weights)
        if w.shape[0] != pts.shape[0]:
            raise InputError("points and weights have different lengths")
    return DiscreteDistribution(pts, w)


def uniform(points) -> DiscreteDistribution:
    return from_samples(points)


def dirac(x) -> DiscreteDistribution:
    return from_samples(np.atleast_2d(np.asarray(x, dtype=float)))


def mean(dist: DiscreteDistribution) -> np.ndarray:
    return dist.mean()


def mixture(dists: Sequence[DiscreteDistribution], coeffs) -> DiscreteDistribution:
    coeffs = np.asarray(coeffs, dtype=float)
    if len(dists) == 0 or len(dists) != len(coeffs):
        raise InputError("need one coefficient per distribution")
    if np.any(coeffs < 0) or abs(coeffs.sum() - 1.0) > WEIGHT_TOL:
        raise InputError("mixture coefficients must be nonnegative and sum to 1")
    d = dists[0].dim
    if any(D.dim != d for D in dists):
        raise InputError("dimension mismatch")
    pts = np.vstack([D.points for D in dists])
    w = np.concatenate([c * D.weights for c, D in zip(coeffs, dists)])
    return DiscreteDistribution(pts, w / w.sum())


def mix_with_dirac(dist: DiscreteDistribution, x, t: float) -> DiscreteDistribution:
    """(1 - t) F + t delta_x, keeping F's atoms in place and appending x."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    pts = np.vstack([dist.points, x])
    w = np.append((1.0 - t) * dist.weights, t)
    return DiscreteDistribution(pts, w / w.sum())


class ReferenceKind(str, Enum):
    GRID = "grid"
    LOW_DISCREPANCY = "low-discrepancy"
    IID_UNIFORM = "iid-uniform"

    @classmethod
    def _missing_(cls, value):
        return {"sobol": cls.LOW_DISCREPANCY, "iid": cls.IID_UNIFORM}.get(value)


@dataclass(frozen=True, eq=False)
class ReferenceMeasure:
    """Equally weighted stand-in for an absolutely continuous law on [0,1]^d."""

    base: DiscreteDistribution
    kind: ReferenceKind
    seed: int | None = None

    @property
    def points(self) -> np.ndarray:
        return self.base.points

    @property
    def weights(self) -> np.ndarray:
        return self.base.weights

    @property
    def m(self) -> int:
        return self.base.n

    @property
    def dim(self) -> int:
        return self.base.dim

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "m": self.m, "d": self.dim, "seed": self.seed}


def _grid_points(m: int, d: int) -> np.ndarray:
    side = int(round(m ** (1.0 / d)))
    for cand in (side - 1, side, side + 1):
        if cand >= 1 and cand**d == m:
            side = cand
            break
    else:
        raise InputError(f"grid reference needs m to be a perfect {d}-th power, got m={m}")
    axis = (np.arange(side) + 0.5) / side
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def reference_measure(kind, m: int, d: int, seed: int | None = 0) -> ReferenceMeasure:
    kind = ReferenceKind(kind)
    if m < 1:
        raise InputError("reference measure needs m >= 1")
    if d < 1:
        raise InputError("reference measure needs d >= 1")
    if kind is ReferenceKind.GRID:
        pts = _grid_points(m, d)
    elif kind is ReferenceKind.LOW_DISCREPANCY:
        from scipy.stats import qmc

        with warnings.catch_warnings():
            # balance-property warning for non powers of two
            warnings.simplefilter("ignore", UserWarning)
            pts = qmc.Sobol(d, scramble=True, seed=seed).random(m)
    else:
        pts = np.random.default_rng(seed).random((m, d))
    return ReferenceMeasure(DiscreteDistribution(pts, np.full(m, 1.0 / m)), kind, seed)


def as_reference(points) -> ReferenceMeasure:
    """Wrap arbitrary points (equal weights) as a reference measure."""
    return ReferenceMeasure(from_samples(points), ReferenceKind.IID_UNIFORM, None)


def quantile_cells(dist: DiscreteDistribution):
    """Sorted distinct atoms and cumulative probabilities of a 1-d law."""
    if dist.dim != 1:
        raise InputError("univariate distribution required")
    c = dist.canonical()
    return c.points[:, 0], np.cumsum(c.weights)


def merged_breakpoints(*cdfs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Union of cumulative-probability breakpoints in (0, 1), merged within ``tol``."""
    pts = np.sort(np.concatenate([np.asarray(c, dtype=float) for c in cdfs] + [[0.0, 1.0]]))
    out = [0.0]
    for p in pts:
        if p - out[-1] > tol:
            out.append(p)
    if 1.0 - out[-1] <= tol:
        out[-1] = 1.0
    else:
        out.append(1.0)
    return np.array(out)


def quantile_on_cells(atoms: np.ndarray, cdf: np.ndarray, breaks: np.ndarray) -> np.ndarray:
    """Value of the right-continuous quantile on each cell [b_k, b_{k+1})."""
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    idx = np.searchsorted(cdf, mids, side="right")
    return atoms[np.minimum(idx, len(atoms) - 1)]


def law_distance(F: DiscreteDistribution, G: DiscreteDistribution) -> float:
    """Distance between laws: sup-gap of quantile functions for d = 1, W1 otherwise."""
    if F.dim != G.dim:
        raise InputError("dimension mismatch")
    if F.dim == 1:
        xa, ca = quantile_cells(F)
        xb, cb = quantile_cells(G)
        breaks = merged_breakpoints(ca, cb)
        return float(np.max(np.abs(quantile_on_cells(xa, ca, breaks) - quantile_on_cells(xb, cb, breaks))))
    from .transport import wasserstein1

    return wasserstein1(F, G)


# ---------------------------------------------------------------- CSV ingestion


def parse_csv(text: str) -> DiscreteDistribution:
    """Parse ``x1,...,xd[,w]`` CSV text. Errors carry the offending line number."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("empty input", line=1) from None
    header = [h.strip() for h in header]
    has_w = bool(header) and header[-1] == "w"
    coords = header[:-1] if has_w else header
    expected = [f"x{i + 1}" for i in range(len(coords))]
    if not coords or coords != expected:
        raise InputError(f"header must be x1,...,xd[,w], got {','.join(header)}", line=1)
    rows, weights = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise InputError(f"not a number in {row!r}", line=lineno) from None
        if not all(np.isfinite(vals)):
            raise InputError("non-finite coordinate", line=lineno)
        if has_w:
            if vals[-1] < 0:
                raise InputError("negative weight", line=lineno)
            weights.append(vals[-1])
            vals = vals[:-1]
        rows.append(vals)
    if not rows:
        raise InputError("empty input", line=2)
    return from_samples(rows, weights if has_w else None)


def read_csv(path: str | Path) -> DiscreteDistribution:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


def to_csv(dist: DiscreteDistribution, weights: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [f"x{i + 1}" for i in range(dist.dim)] + (["w"] if weights else [])
    writer.writerow(header)
    for p, w in zip(dist.points, dist.weights):
        writer.writerow([repr(float(v)) for v in p] + ([repr(float(w))] if weights else []))
    return buf.getvalue()


def write_csv(dist: DiscreteDistribution, path: str | Path) -> None:
    Path(path).write_text(to_csv(dist), encoding="utf-8")

