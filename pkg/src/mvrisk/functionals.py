"""Rank-dependent utility functionals, local utilities and risk-attitude tests.

Functionals are plain callables on :class:`DiscreteDistribution`. The ones
defined here also expose ``local_utility(F)`` (closed form) and, where the
map is linear along comonotone perturbations, ``directional_derivative``.
Any other callable is handled by finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .dist import (
    DiscreteDistribution,
    InputError,
    ReferenceMeasure,
    dirac,
    mix_with_dirac,
    mixture,
    quantile_cells,
)
from .quantile import mu_quantile
from .verdict import Holds, OrderVerdict, Relation

Functional = Callable[[DiscreteDistribution], float]

_GRID = np.linspace(0.0, 1.0, 1001)


# ---------------------------------------------------------------- distortions


@dataclass(frozen=True)
class DistortionFunction:
    """Probability distortion f on [0, 1] with f(0) = 0 and f(1) = 1.

    Families: ``power`` (f(u) = u**p), ``linear`` (p = 1) and ``tabulated``
    (piecewise linear through ``knots``/``values``; derivatives are segment
    slopes, taking the left slope at interior knots).
    """

    family: str
    p: float = 1.0
    knots: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.family not in ("power", "linear", "tabulated"):
            raise InputError(f"unknown distortion family {self.family!r}")
        if self.family == "power" and self.p <= 0:
            raise InputError("power distortion needs p > 0")
        if self.family == "tabulated":
            k = np.asarray(self.knots, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if k.size < 2 or k.shape != v.shape or k[0] != 0.0 or k[-1] != 1.0 or np.any(np.diff(k) <= 0):
                raise InputError("tabulated distortion needs increasing knots from 0 to 1")
        f = self(_GRID)
        if abs(f[0]) > 1e-12 or abs(f[-1] - 1.0) > 1e-12 or np.any(np.diff(f) < -1e-12):
            raise InputError("distortion must satisfy f(0)=0, f(1)=1 and be nondecreasing")

    @classmethod
    def power(cls, p: float) -> "DistortionFunction":
        return cls("linear" if p == 1 else "power", p=float(p))

    @classmethod
    def linear(cls) -> "DistortionFunction":
        return cls("linear")

    @classmethod
    def tabulated(cls, knots, values) -> "DistortionFunction":
        return cls("tabulated", knots=tuple(map(float, knots)), values=tuple(map(float, values)))

    @classmethod
    def parse(cls, text: str) -> "DistortionFunction":
        """``"power:2"`` or ``"linear"``."""
        family, _, arg = text.partition(":")
        if family == "power":
            return cls.power(float(arg))
        if family == "linear":
            return cls.linear()
        raise InputError(f"cannot parse distortion {text!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "DistortionFunction":
        fam = d.get("family", "power")
        if fam == "tabulated":
            return cls.tabulated(d["knots"], d["values"])
        if fam == "linear":
            return cls.linear()
        return cls.power(float(d["p"]))

    def to_dict(self) -> dict:
        if self.family == "tabulated":
            return {"family": "tabulated", "knots": list(self.knots), "values": list(self.values)}
        return {"family": self.family, "p": self.p}

    def __call__(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.family == "linear":
            return u
        if self.family == "power":
            return u**self.p
        return np.interp(u, self.knots, self.values)

    def derivative(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.family == "linear":
            return np.ones_like(u)
        if self.family == "power":
            with np.errstate(divide="ignore"):
                return self.p * u ** (self.p - 1.0)
        k = np.asarray(self.knots)
        slopes = np.diff(self.values) / np.diff(k)
        seg = np.clip(np.searchsorted(k, u, side="left") - 1, 0, len(slopes) - 1)
        return slopes[seg]


# ---------------------------------------------------------------- quantile weights


@dataclass(frozen=True)
class QuantileWeight:
    """Nonnegative piecewise-polynomial weight phi on [0, 1].

    ``knots`` splits [0, 1]; ``pieces[k]`` is a polynomial in t used on
    [knots[k], knots[k+1]].
    """

    knots: tuple
    pieces: tuple

    def __post_init__(self):
        if len(self.knots) != len(self.pieces) + 1:
            raise InputError("need one polynomial per segment")
        if np.any(self(_GRID) < -1e-12):
            raise InputError("quantile weight must be nonnegative")

    @classmethod
    def constant(cls, c: float = 1.0) -> "QuantileWeight":
        return cls((0.0, 1.0), (Polynomial([float(c)]),))

    @classmethod
    def polynomial(cls, coeffs) -> "QuantileWeight":
        return cls((0.0, 1.0), (Polynomial(np.asarray(coeffs, dtype=float)),))

    @classmethod
    def tabulated(cls, knots, values) -> "QuantileWeight":
        k = np.asarray(knots, dtype=float)
        v = np.asarray(values, dtype=float)
        if k[0] != 0.0 or k[-1] != 1.0 or np.any(np.diff(k) <= 0):
            raise InputError("tabulated weight needs increasing knots from 0 to 1")
        pieces = []
        for a, b, va, vb in zip(k[:-1], k[1:], v[:-1], v[1:]):
            slope = (vb - va) / (b - a)
            pieces.append(Polynomial([va - slope * a, slope]))
        return cls(tuple(k), tuple(pieces))

    @classmethod
    def from_distortion(cls, f: DistortionFunction) -> "QuantileWeight":
        """phi(t) = f'(1 - t), the weight that turns a quantile integral into f's Choquet value."""
        if f.family == "linear":
            return cls.constant(1.0)
        if f.family == "power":
            p = f.p
            if p != int(p):
                raise InputError("only integer powers have polynomial weights")
            # p (1 - t)^(p-1)
            return cls((0.0, 1.0), (p * Polynomial([1.0, -1.0]) ** int(p - 1),))
        k = 1.0 - np.asarray(f.knots)[::-1]
        slopes = (np.diff(f.values) / np.diff(f.knots))[::-1]
        return cls(tuple(k), tuple(Polynomial([s]) for s in slopes))

    @classmethod
    def from_dict(cls, d: dict) -> "QuantileWeight":
        fam = d.get("family", "constant")
        if fam == "constant":
            return cls.constant(float(d.get("value", 1.0)))
        if fam == "polynomial":
            return cls.polynomial(d["coefficients"])
        if fam == "tabulated":
            return cls.tabulated(d["knots"], d["values"])
        raise InputError(f"unknown weight family {fam!r}")

    def to_dict(self) -> dict:
        return {"knots": list(self.knots), "pieces": [p.coef.tolist() for p in self.pieces]}

    def _segment(self, t):
        return np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, len(self.pieces) - 1)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        seg = self._segment(t)
        out = np.empty_like(t)
        for k, poly in enumerate(self.pieces):
            mask = seg == k
            out[mask] = poly(t[mask])
        return out

    def integral(self, a: float, b: float) -> float:
        """Exact integral of phi over [a, b]."""
        total = 0.0
        for k, poly in enumerate(self.pieces):
            lo = max(a, self.knots[k])
            hi = min(b, self.knots[k + 1])
            if hi > lo:
                anti = poly.integ()
                total += anti(hi) - anti(lo)
        return float(total)


@dataclass(frozen=True)
class YaariSpec:
    alphas: tuple
    phis: tuple

    def __post_init__(self):
        if len(self.alphas) != len(self.phis) or not self.alphas:
            raise InputError("need one weight function per positive alpha")
        if any(a <= 0 for a in self.alphas):
            raise InputError("alphas must be positive")

    @property
    def dim(self) -> int:
        return len(self.alphas)


@dataclass(frozen=True, eq=False)
class MultiRDUSpec:
    """Weight map u -> phi(u) tabulated on a reference support.

    ``family`` is ``"constant"``, ``"affine"`` (phi(u) = -alpha u + u0) or
    ``"tabulated"``; the affine parameters are kept when claimed.
    """

    reference: ReferenceMeasure
    weight_map: np.ndarray
    family: str = "tabulated"
    alpha: float | None = None
    u0: np.ndarray | None = None

    def __post_init__(self):
        wm = np.array(self.weight_map, dtype=float)
        if wm.ndim == 1:
            wm = wm[:, None]
        if wm.shape != (self.reference.m, self.reference.dim):
            raise InputError("weight map must have one R^d value per reference point")
        if not np.all(np.isfinite(wm)):
            raise InputError("weight map must be finite")
        if self.family == "affine" and (self.alpha is None or self.alpha <= 0):
            raise InputError("affine weight map claims alpha > 0")
        wm.setflags(write=False)
        object.__setattr__(self, "weight_map", wm)

    @classmethod
    def affine(cls, ref: ReferenceMeasure, alpha: float, u0) -> "MultiRDUSpec":
        u0 = np.broadcast_to(np.asarray(u0, dtype=float), (ref.dim,)).copy()
        return cls(ref, -alpha * ref.points + u0, "affine", float(alpha), u0)

    @classmethod
    def constant(cls, ref: ReferenceMeasure, c) -> "MultiRDUSpec":
        c = np.broadcast_to(np.asarray(c, dtype=float), (ref.dim,))
        return cls(ref, np.tile(c, (ref.m, 1)), "constant")

    @classmethod
    def from_function(cls, ref: ReferenceMeasure, fn) -> "MultiRDUSpec":
        return cls(ref, np.asarray(fn(ref.points), dtype=float), "tabulated")

    def mean_weight(self) -> np.ndarray:
        return self.reference.weights @ self.weight_map


# ---------------------------------------------------------------- evaluations


def _sorted_atoms(F: DiscreteDistribution):
    if F.dim != 1:
        raise InputError("univariate distribution required")
    return quantile_cells(F)


def rank_weights(F: DiscreteDistribution, f: DistortionFunction) -> np.ndarray:
    """Decision weights f(P(X >= x_k)) - f(P(X > x_k)) on F's distinct sorted atoms."""
    atoms, cdf = _sorted_atoms(F)
    upper = np.clip(1.0 - np.concatenate([[0.0], cdf[:-1]]), 0.0, 1.0)  # P(X >= x_k)
    strict = np.clip(1.0 - cdf, 0.0, 1.0)  # P(X > x_k)
    strict[-1] = 0.0
    return f(upper) - f(strict)


def eval_rdu_1d(F: DiscreteDistribution, f: DistortionFunction) -> float:
    """Choquet value x_(1) + sum_k (x_(k) - x_(k-1)) f(P(X >= x_(k)))."""
    atoms, cdf = _sorted_atoms(F)
    upper = np.clip(1.0 - cdf[:-1], 0.0, 1.0)
    return float(atoms[0] + np.sum(np.diff(atoms) * f(upper)))


def eval_yaari_indep(F: DiscreteDistribution, spec: YaariSpec) -> float:
    """sum_i alpha_i int_0^1 phi_i(t) Q_{X_i}(t) dt, exact for piecewise-constant quantiles."""
    if F.dim != spec.dim:
        raise InputError("dimension mismatch with Yaari spec")
    total = 0.0
    for i, (a, phi) in enumerate(zip(spec.alphas, spec.phis)):
        atoms, cdf = quantile_cells(F.marginal(i))
        lo = np.concatenate([[0.0], cdf[:-1]])
        total += a * sum(x * phi.integral(l, min(h, 1.0)) for x, l, h in zip(atoms, lo, cdf))
    return float(total)


def eval_multi_rdu(X: DiscreteDistribution, ref: ReferenceMeasure, spec: MultiRDUSpec) -> float:
    """E[Q_X(U) . phi(U)] over the max-correlation pairing with the reference."""
    if ref is not spec.reference and (ref.m != spec.reference.m or not np.array_equal(ref.points, spec.reference.points)):
        raise InputError("spec is tabulated on a different reference")
    if X.dim != ref.dim:
        raise InputError(f"dimension mismatch: X has d={X.dim}, reference d={ref.dim}")
    qm = mu_quantile(X, ref)
    return float(np.sum(qm.w * np.einsum("ij,ij->i", qm.x, spec.weight_map[qm.ref_index])))


# ---------------------------------------------------------------- local utility tables


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function of one variable with outer slopes."""

    knots: np.ndarray
    values: np.ndarray
    left_slope: float
    right_slope: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.knots, self.values)
        below = x < self.knots[0]
        above = x > self.knots[-1]
        if below.any():
            out = np.where(below, self.values[0] + self.left_slope * (x - self.knots[0]), out)
        if above.any():
            with np.errstate(invalid="ignore"):
                out = np.where(above, self.values[-1] + self.right_slope * (x - self.knots[-1]), out)
        return out

    def shifted(self, c: float) -> "PiecewiseLinear":
        return PiecewiseLinear(self.knots, self.values + c, self.left_slope, self.right_slope)


@dataclass(frozen=True, eq=False)
class LocalUtilityTable:
    """x -> U(x; F) tabulated on ``grid`` and normalized so sum_F w U = Phi(F)."""

    grid: np.ndarray
    values: np.ndarray
    base: DiscreteDistribution
    normalization: float
    evaluate: Callable | None = field(default=None, repr=False)

    def __call__(self, x):
        if self.evaluate is None:
            raise ValueError("table has no evaluator off the grid")
        return self.evaluate(np.asarray(x, dtype=float))

    @property
    def dim(self) -> int:
        return self.grid.shape[1]

    def to_dict(self) -> dict:
        return {"grid": self.grid.tolist(), "values": self.values.tolist(), "normalization": self.normalization}

    def to_csv(self) -> str:
        head = [f"x{i + 1}" for i in range(self.dim)] + ["U"]
        rows = [",".join(head)]
        for g, v in zip(self.grid, self.values):
            rows.append(",".join(repr(float(t)) for t in (*g, v)))
        return "\n".join(rows) + "\n"


def _default_axis(atoms: np.ndarray) -> np.ndarray:
    span = float(atoms[-1] - atoms[0])
    pad = 0.5 * max(span, 1.0)
    return np.concatenate([[atoms[0] - pad], atoms, [atoms[-1] + pad]])


def _piecewise_from_slopes(atoms, slopes_between, left, right) -> PiecewiseLinear:
    vals = np.concatenate([[0.0], np.cumsum(np.diff(atoms) * slopes_between)])
    return PiecewiseLinear(atoms, vals, float(left), float(right))


def _rdu_piecewise(F: DiscreteDistribution, f: DistortionFunction) -> PiecewiseLinear:
    atoms, cdf = _sorted_atoms(F)
    between = f.derivative(1.0 - cdf[:-1])  # slope f'(1 - F(z)) on (x_k, x_{k+1})
    return _piecewise_from_slopes(atoms, between, f.derivative(1.0), f.derivative(0.0))


def local_utility_rdu_1d(F: DiscreteDistribution, f: DistortionFunction, grid=None) -> LocalUtilityTable:
    """U(x; F) = int^x f'(1 - F(z)) dz, anchored so that E_F[U] = Phi(F)."""
    pl = _rdu_piecewise(F, f)
    phi = eval_rdu_1d(F, f)
    c = phi - float(F.weights @ pl(F.points[:, 0]))
    pl = pl.shifted(c)
    g = _default_axis(pl.knots) if grid is None else np.asarray(grid, dtype=float).reshape(-1)
    return LocalUtilityTable(g[:, None], pl(g), F, c, evaluate=lambda x: pl(np.asarray(x).reshape(-1)))


def _yaari_pieces(F: DiscreteDistribution, spec: YaariSpec) -> list[PiecewiseLinear]:
    pieces = []
    for i, (a, phi) in enumerate(zip(spec.alphas, spec.phis)):
        Fi = F.marginal(i)
        atoms, cdf = quantile_cells(Fi)
        pl = _piecewise_from_slopes(atoms, a * phi(cdf[:-1]), a * phi(np.array(0.0)), a * phi(np.array(1.0)))
        # per-coordinate anchor: E[U_i(X_i)] = alpha_i int phi_i Q_i
        target = eval_yaari_indep(Fi, YaariSpec((a,), (phi,)))
        pieces.append(pl.shifted(target - float(Fi.weights @ pl(Fi.points[:, 0]))))
    return pieces


def local_utility_yaari(F: DiscreteDistribution, spec: YaariSpec, axes=None) -> LocalUtilityTable:
    """U(x; F) = sum_i alpha_i int^{x_i} phi_i(F_i(z)) dz on a product grid."""
    if F.dim != spec.dim:
        raise InputError("dimension mismatch with Yaari spec")
    pieces = _yaari_pieces(F, spec)
    if axes is None:
        axes = [_default_axis(p.knots) for p in pieces]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([g.reshape(-1) for g in mesh], axis=1)

    def evaluate(x):
        x = np.atleast_2d(x)
        return sum(p(x[:, i]) for i, p in enumerate(pieces))

    return LocalUtilityTable(grid, evaluate(grid), F, float(sum(p.values[0] for p in pieces)), evaluate)


def estimate_local_utility(functional: Functional, F: DiscreteDistribution, x, t0: float = 1e-4) -> float:
    """(Phi((1-t) F + t delta_x) - Phi(F)) / t + Phi(F) at t = t0."""
    base = functional(F)
    return (functional(mix_with_dirac(F, x, t0)) - base) / t0 + base


def tabulate_local_utility(functional: Functional, F: DiscreteDistribution, grid, t0: float = 1e-4) -> LocalUtilityTable:
    """Finite-difference local utility of a black-box functional on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    base = functional(F)

    def evaluate(x):
        x = np.atleast_2d(x)
        if x.shape[1] != F.dim:
            x = x.reshape(-1, F.dim)
        return np.array([(functional(mix_with_dirac(F, xi, t0)) - base) / t0 + base for xi in x])

    return LocalUtilityTable(grid, evaluate(grid), F, 0.0, evaluate)


# ---------------------------------------------------------------- functional objects


@dataclass(frozen=True)
class Expectation:
    """Phi(F) = <E_F X, w>; local utility is the linear map x -> <x, w>."""

    w: tuple | None = None

    def _w(self, d):
        return np.ones(d) if self.w is None else np.asarray(self.w, dtype=float)

    def __call__(self, F: DiscreteDistribution) -> float:
        return float(F.mean() @ self._w(F.dim))

    def local_utility(self, F: DiscreteDistribution, grid=None) -> LocalUtilityTable:
        w = self._w(F.dim)
        if grid is None:
            axes = [_default_axis(np.unique(F.points[:, i])) for i in range(F.dim)]
            mesh = np.meshgrid(*axes, indexing="ij")
            grid = np.stack([g.reshape(-1) for g in mesh], axis=1)
        grid = np.atleast_2d(np.asarray(grid, dtype=float))
        return LocalUtilityTable(grid, grid @ w, F, 0.0, lambda x: np.atleast_2d(x) @ w)

    def directional_derivative(self, F: DiscreteDistribution, shift) -> float:
        shift = np.asarray(shift, dtype=float).reshape(F.n, -1)
        return float(F.weights @ (shift @ self._w(F.dim)))


@dataclass(frozen=True)
class RankDependentUtility:
    """Univariate rank-dependent utility Phi(F) = int f(1 - F(x)) dx."""

    distortion: DistortionFunction

    def __call__(self, F: DiscreteDistribution) -> float:
        return eval_rdu_1d(F, self.distortion)

    def local_utility(self, F: DiscreteDistribution, grid=None) -> LocalUtilityTable:
        return local_utility_rdu_1d(F, self.distortion, grid)

    def directional_derivative(self, F: DiscreteDistribution, shift) -> float:
        """d/de Phi(X + e s(X)) at 0+ for a shift s nondecreasing in x (given per atom)."""
        shift = np.asarray(shift, dtype=float).reshape(-1)
        x = F.points[:, 0]
        order = np.lexsort((shift, x))
        w = F.weights[order]
        above = np.clip(1.0 - np.cumsum(w), 0.0, 1.0)
        f = self.distortion
        atom_w = f(np.clip(above + w, 0.0, 1.0)) - f(above)
        return float(atom_w @ shift[order])


@dataclass(frozen=True)
class YaariIndependent:
    spec: YaariSpec

    def __call__(self, F: DiscreteDistribution) -> float:
        return eval_yaari_indep(F, self.spec)

    def local_utility(self, F: DiscreteDistribution, axes=None) -> LocalUtilityTable:
        return local_utility_yaari(F, self.spec, axes)


@dataclass(frozen=True, eq=False)
class MultivariateRDU:
    """Phi(X) = E[Q_X(U) . phi(U)] for the mu-quantile of X."""

    spec: MultiRDUSpec

    @property
    def reference(self) -> ReferenceMeasure:
        return self.spec.reference

    def __call__(self, X: DiscreteDistribution) -> float:
        return eval_multi_rdu(X, self.spec.reference, self.spec)


# ---------------------------------------------------------------- concavity / pessimism


def _axis_midpoints(axis: np.ndarray) -> np.ndarray:
    """mid[a, b] = index of (axis[a] + axis[b]) / 2 in axis, or -1."""
    s = axis.size
    mids = 0.5 * (axis[:, None] + axis[None, :])
    idx = np.searchsorted(axis, mids)
    idx = np.clip(idx, 0, s - 1)
    scale = max(1.0, float(np.max(np.abs(axis))))
    hit = np.abs(axis[idx] - mids) <= 1e-12 * scale
    return np.where(hit, idx, -1)


def is_concave(
    table: LocalUtilityTable,
    tol: float = 1e-9,
    samples: int = 1000,
    seed: int = 0,
) -> OrderVerdict:
    """Concavity of a tabulated local utility.

    d = 1: each grid value must lie within ``tol`` above the chord through its
    neighbours, which stays well conditioned when knots nearly coincide.
    d >= 2: midpoint concavity over every grid pair whose midpoint is on the
    grid, plus ``samples`` random pairs evaluated through the table's
    evaluator when it has one.
    """
    grid, vals = np.asarray(table.grid, dtype=float), np.asarray(table.values, dtype=float)
    d = grid.shape[1]
    tols = {"concavity": tol}
    if d == 1:
        order = np.argsort(grid[:, 0])
        x, u = grid[order, 0], vals[order]
        if np.unique(x).size < 3:
            raise InputError("concavity check needs at least 3 grid points")
        x, idx = np.unique(x, return_index=True)
        u = u[idx]
        lam = (x[1:-1] - x[:-2]) / (x[2:] - x[:-2])
        gaps = (1 - lam) * u[:-2] + lam * u[2:] - u[1:-1]  # chord minus value
        bad = np.flatnonzero(gaps > tol)
        if bad.size:
            k = int(bad[np.argmax(gaps[bad])])
            cert = {"violating_triple": x[k : k + 3], "values": u[k : k + 3], "chord_gap": float(gaps[k])}
            return OrderVerdict(Relation.CONCAVE, Holds.FALSE, cert, tols)
        return OrderVerdict(Relation.CONCAVE, Holds.TRUE, {"checked_triples": int(gaps.size)}, tols)

    axes = [np.unique(grid[:, i]) for i in range(d)]
    if any(a.size < 3 for a in axes):
        raise InputError("concavity check needs at least 3 grid points per axis")
    pos = np.stack([np.searchsorted(a, grid[:, i]) for i, a in enumerate(axes)], axis=1)
    flat = np.ravel_multi_index(pos.T, [a.size for a in axes])
    lookup = np.full(int(np.prod([a.size for a in axes])), -1)
    lookup[flat] = np.arange(len(grid))
    mids = [_axis_midpoints(a) for a in axes]
    n = len(grid)
    I, J = np.triu_indices(n, k=1)
    mid_pos = np.stack([mids[k][pos[I, k], pos[J, k]] for k in range(d)], axis=1)
    ok = np.all(mid_pos >= 0, axis=1)
    I, J, mid_pos = I[ok], J[ok], mid_pos[ok]
    M = lookup[np.ravel_multi_index(mid_pos.T, [a.size for a in axes])]
    keep = M >= 0
    I, J, M = I[keep], J[keep], M[keep]
    gaps = 0.5 * (vals[I] + vals[J]) - vals[M]
    checked = {"grid_pairs": int(I.size)}
    if gaps.size and gaps.max() > tol:
        k = int(np.argmax(gaps))
        cert = {"violating_triple": [grid[I[k]], grid[M[k]], grid[J[k]]], "midpoint_gap": float(gaps[k]), "checked": checked}
        return OrderVerdict(Relation.CONCAVE, Holds.FALSE, cert, tols)
    if table.evaluate is not None and samples > 0:
        rng = np.random.default_rng(seed)
        a = rng.integers(0, n, size=samples)
        b = rng.integers(0, n, size=samples)
        mid_vals = np.asarray(table(0.5 * (grid[a] + grid[b]))).reshape(-1)
        sgaps = 0.5 * (vals[a] + vals[b]) - mid_vals
        checked.update(random_pairs=samples, seed=seed)
        if sgaps.max() > tol:
            k = int(np.argmax(sgaps))
            cert = {
                "violating_triple": [grid[a[k]], 0.5 * (grid[a[k]] + grid[b[k]]), grid[b[k]]],
                "midpoint_gap": float(sgaps[k]),
                "checked": checked,
            }
            return OrderVerdict(Relation.CONCAVE, Holds.FALSE, cert, tols)
    return OrderVerdict(Relation.CONCAVE, Holds.TRUE, {"checked": checked}, tols)


def is_pessimistic(f: DistortionFunction, tol: float = 1e-12) -> OrderVerdict:
    """f(u) <= u on a 1001-point grid."""
    excess = f(_GRID) - _GRID
    k = int(np.argmax(excess))
    if excess[k] > tol:
        return OrderVerdict(Relation.PESSIMISTIC, Holds.FALSE, {"u": float(_GRID[k]), "f_u": float(f(_GRID[k]))}, {"grid": tol})
    return OrderVerdict(Relation.PESSIMISTIC, Holds.TRUE, {"max_excess": float(excess[k])}, {"grid": tol})


# ---------------------------------------------------------------- aversion tests


@dataclass(frozen=True, eq=False)
class TestDirection:
    """Nondecreasing direction delta tabulated on the atoms of its paired F."""

    __test__ = False  # not a pytest class

    F: DiscreteDistribution
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != self.F.n:
            raise InputError("direction needs one value per atom")
        x = self.F.points[:, 0]
        order = np.lexsort((v, x))
        xs, vs = x[order], v[order]
        if np.any((np.diff(xs) > 0) & (np.diff(vs) < -1e-12)) or np.any((np.diff(xs) == 0) & (np.diff(vs) != 0)):
            raise InputError("direction must be a nondecreasing function of x")
        if abs(float(self.F.weights @ v)) > 1e-10:
            raise InputError("direction must integrate to zero against F")
        object.__setattr__(self, "values", v)

    @classmethod
    def indicator(cls, F: DiscreteDistribution, x: float) -> "TestDirection":
        """delta(y) = 1{y > x} - (1 - F(x))."""
        above = (F.points[:, 0] > x).astype(float)
        return cls(F, above - F.weights @ above, label=f"1{{y > {x:g}}} - (1 - F({x:g}))")


def _directional(functional, F, shift, h):
    if hasattr(functional, "directional_derivative"):
        return float(functional.directional_derivative(F, shift))
    shift = np.asarray(shift, dtype=float).reshape(F.n, -1)
    moved = DiscreteDistribution(F.points + h * shift, F.weights)
    return (functional(moved) - functional(F)) / h


def mmpir_aversion_test_1d(
    functional: Functional,
    F: DiscreteDistribution,
    directions: Sequence[TestDirection] | None = None,
    tol: float = 1e-9,
    h: float = 1e-6,
) -> OrderVerdict:
    """int U'(x; F) delta(x) dF(x) <= 0 for every supplied nondecreasing centered delta.

    The integral is the derivative of Phi along X + e delta(X), which is what
    the local-utility slope weighs; it is exact for functionals exposing
    ``directional_derivative`` and a forward difference otherwise.
    """
    if F.dim != 1:
        raise InputError("univariate distribution required")
    if directions is None:
        directions = [TestDirection.indicator(F, x) for x in np.unique(F.points[:, 0])]
    integrals = np.array([_directional(functional, F, dlt.values, h) for dlt in directions])
    tols = {"integral": tol, "step": h}
    k = int(np.argmax(integrals))
    if integrals[k] > tol:
        cert = {"direction": directions[k].label, "values": directions[k].values, "integral": float(integrals[k])}
        return OrderVerdict(Relation.MMPIR_AVERSE, Holds.FALSE, cert, tols)
    return OrderVerdict(Relation.MMPIR_AVERSE, Holds.TRUE, {"integrals": integrals}, tols)


@dataclass(frozen=True, eq=False)
class ConvexPotential:
    """Convex V on R^d: ``quadratic`` (0.5 u'Au + b'u) or ``max-affine`` (max_l g_l'u + c_l)."""

    family: str
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    slopes: np.ndarray | None = None
    intercepts: np.ndarray | None = None

    def __post_init__(self):
        if self.family == "quadratic":
            A = np.atleast_2d(np.asarray(self.A, dtype=float))
            if not np.allclose(A, A.T, atol=1e-12) or np.linalg.eigvalsh(A).min() < -1e-12:
                raise InputError("quadratic potential needs a symmetric PSD matrix")
            b = np.zeros(A.shape[0]) if self.b is None else np.asarray(self.b, dtype=float)
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "b", b)
        elif self.family == "max-affine":
            object.__setattr__(self, "slopes", np.atleast_2d(np.asarray(self.slopes, dtype=float)))
            object.__setattr__(self, "intercepts", np.asarray(self.intercepts, dtype=float).reshape(-1))
        else:
            raise InputError(f"unknown potential family {self.family!r}")

    @classmethod
    def quadratic(cls, A, b=None) -> "ConvexPotential":
        return cls("quadratic", A=A, b=b)

    @classmethod
    def max_affine(cls, slopes, intercepts) -> "ConvexPotential":
        return cls("max-affine", slopes=slopes, intercepts=intercepts)

    def __call__(self, u):
        u = np.atleast_2d(u)
        if self.family == "quadratic":
            return 0.5 * np.einsum("ij,jk,ik->i", u, self.A, u) + u @ self.b
        return (u @ self.slopes.T + self.intercepts).max(axis=1)

    def gradient(self, u) -> np.ndarray:
        u = np.atleast_2d(u)
        if self.family == "quadratic":
            return u @ self.A + self.b
        return self.slopes[np.argmax(u @ self.slopes.T + self.intercepts, axis=1)]

    def centered(self, ref: ReferenceMeasure) -> "ConvexPotential":
        """Subtract a linear term so that E_mu[grad V(U)] = 0."""
        m = ref.weights @ self.gradient(ref.points)
        if self.family == "quadratic":
            return ConvexPotential.quadratic(self.A, self.b - m)
        return ConvexPotential.max_affine(self.slopes - m, self.intercepts)

    def mean_gradient(self, ref: ReferenceMeasure) -> np.ndarray:
        return ref.weights @ self.gradient(ref.points)


def random_spd(d: int, rng, scale: float = 1.0, floor: float = 0.1) -> np.ndarray:
    B = rng.normal(size=(d, d))
    return scale * (B @ B.T / d) + floor * np.eye(d)


def random_centered_quadratics(ref: ReferenceMeasure, count: int, seed: int = 0) -> list[ConvexPotential]:
    rng = np.random.default_rng(seed)
    return [ConvexPotential.quadratic(random_spd(ref.dim, rng)).centered(ref) for _ in range(count)]


def local_utility_gradient(functional, F, x, t0: float = 1e-4, h: float = 1e-4) -> np.ndarray:
    """Central differences of the estimated local utility at x."""
    x = np.asarray(x, dtype=float).reshape(-1)
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (estimate_local_utility(functional, F, x + e, t0) - estimate_local_utility(functional, F, x - e, t0)) / (2 * h)
    return g


def mu_mmpir_aversion_test(
    functional: Functional,
    X: DiscreteDistribution,
    ref: ReferenceMeasure,
    potentials: Sequence[ConvexPotential],
    tol: float = 1e-6,
    t0: float = 1e-4,
    h: float = 1e-4,
) -> OrderVerdict:
    """E_mu[grad V(U) . grad U(Q_X(U); F_X)] <= tol for every centered convex V.

    The local-utility gradient is taken by central differences of
    :func:`estimate_local_utility` at each quantile point Q_X(u).
    """
    for V in potentials:
        if np.max(np.abs(V.mean_gradient(ref))) > 1e-10:
            raise InputError("potential is not centered: E_mu[grad V(U)] != 0")
    qm = mu_quantile(X, ref)
    Q = qm.at_reference()
    grads = np.array([local_utility_gradient(functional, X, q, t0, h) for q in Q])
    integrals = np.array([float(ref.weights @ np.einsum("ij,ij->i", V.gradient(ref.points), grads)) for V in potentials])
    tols = {"integral": tol, "t0": t0, "h": h}
    k = int(np.argmax(integrals)) if len(integrals) else 0
    if len(integrals) and integrals[k] > tol:
        V = potentials[k]
        cert = {
            "potential_index": k,
            "potential_family": V.family,
            "integral": float(integrals[k]),
            "violating_indices": np.flatnonzero(integrals > tol).tolist(),
        }
        if V.family == "quadratic":
            cert.update(A=V.A, b=V.b)
        return OrderVerdict(Relation.MU_MMPIR_AVERSE, Holds.FALSE, cert, tols)
    return OrderVerdict(Relation.MU_MMPIR_AVERSE, Holds.TRUE, {"integrals": integrals}, tols)


def risk_aversion_probe(
    functional: Functional,
    F: DiscreteDistribution,
    F_star: DiscreteDistribution,
    alphas: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
    tol: float = 1e-9,
) -> OrderVerdict:
    """Phi(aF + (1-a) delta_{mean F*}) >= Phi(aF + (1-a) F*) for every supplied a."""
    if F.dim != F_star.dim:
        raise InputError("dimension mismatch")
    point = dirac(F_star.mean())
    gaps = []
    for a in alphas:
        sure = functional(mixture([F, point], [a, 1.0 - a]))
        risky = functional(mixture([F, F_star], [a, 1.0 - a]))
        gaps.append(risky - sure)
    gaps = np.array(gaps)
    k = int(np.argmax(gaps))
    tols = {"inequality": tol}
    if gaps[k] > tol:
        return OrderVerdict(Relation.RISK_AVERSE, Holds.FALSE, {"alpha": float(alphas[k]), "excess": float(gaps[k])}, tols)
    return OrderVerdict(Relation.RISK_AVERSE, Holds.TRUE, {"excess": gaps}, tols)


def weak_risk_aversion_multi_rdu(spec: MultiRDUSpec, test_set: Sequence[DiscreteDistribution], tol: float = 1e-9) -> OrderVerdict:
    """Phi(Z) <= Phi(delta_{E Z}) for every Z in the test set."""
    ref = spec.reference
    excess = []
    for Z in test_set:
        sure = float(Z.mean() @ spec.mean_weight())
        excess.append(eval_multi_rdu(Z, ref, spec) - sure)
    excess = np.array(excess)
    tols = {"inequality": tol}
    if excess.size and excess.max() > tol:
        k = int(np.argmax(excess))
        cert = {
            "witness_index": k,
            "witness": test_set[k],
            "excess": float(excess[k]),
            "violating_indices": np.flatnonzero(excess > tol).tolist(),
        }
        return OrderVerdict(Relation.WEAK_RISK_AVERSE, Holds.FALSE, cert, tols)
    return OrderVerdict(Relation.WEAK_RISK_AVERSE, Holds.TRUE, {"excess": excess}, tols)


def kernel_test_vectors(spec: MultiRDUSpec, base: Sequence[DiscreteDistribution]) -> list[DiscreteDistribution]:
    """Shift each Z0 by a constant so that Phi(Z) = 0 exactly.

    A constant is comonotone with everything, so Phi(Z0 - c e) = Phi(Z0) - c <e, E phi>.
    """
    m = spec.mean_weight()
    if np.linalg.norm(m) == 0:
        raise InputError("spec has E[phi(U)] = 0; constant shifts cannot reach its kernel")
    e = m / (m @ m)
    return [Z0.shift(-eval_multi_rdu(Z0, spec.reference, spec) * e) for Z0 in base]


def more_risk_averse_multi_rdu(
    spec_a: MultiRDUSpec,
    spec_b: MultiRDUSpec,
    test_set: Sequence[DiscreteDistribution],
    tol: float = 1e-9,
) -> OrderVerdict:
    """B is more risk averse than A: Phi_A(Z) = 0 implies Phi_B(Z) <= 0 on the test set."""
    if spec_a.reference.m != spec_b.reference.m or not np.array_equal(spec_a.reference.points, spec_b.reference.points):
        raise InputError("specs must share a reference")
    used, worst, witness = 0, -np.inf, None
    for k, Z in enumerate(test_set):
        if abs(eval_multi_rdu(Z, spec_a.reference, spec_a)) > tol:
            continue
        used += 1
        vb = eval_multi_rdu(Z, spec_b.reference, spec_b)
        if vb > worst:
            worst, witness = vb, k
    tols = {"kernel": tol, "inequality": tol}
    cert = {"kernel_vectors": used, "max_phi_b": float(worst) if used else None}
    if used and worst > tol:
        cert.update(witness_index=witness, witness=test_set[witness])
        return OrderVerdict(Relation.MORE_RISK_AVERSE, Holds.FALSE, cert, tols)
    return OrderVerdict(Relation.MORE_RISK_AVERSE, Holds.TRUE if used else Holds.UNDETERMINED, cert, tols)


def is_mpir_averse_multi_rdu(spec: MultiRDUSpec, tol: float = 1e-8) -> OrderVerdict:
    """Is phi(u) = -alpha u + u0 with alpha > 0 (least-squares fit, max residual <= tol)?"""
    U, P = spec.reference.points, spec.weight_map
    m, d = U.shape
    # unknowns: alpha, u0 (d); rows: P[k, j] = -alpha U[k, j] + u0[j]
    A = np.zeros((m * d, 1 + d))
    A[:, 0] = -U.reshape(-1)
    A[:, 1:] = np.tile(np.eye(d), (m, 1))
    sol, *_ = np.linalg.lstsq(A, P.reshape(-1), rcond=None)
    alpha, u0 = float(sol[0]), sol[1:]
    residual = float(np.max(np.abs(A @ sol - P.reshape(-1))))
    cert = {"alpha": alpha, "u0": u0, "max_residual": residual}
    ok = residual <= tol and alpha > 0
    return OrderVerdict(Relation.MPIR_AVERSE, Holds.of(ok), cert, {"residual": tol})


def variance_potential(ref: ReferenceMeasure) -> ConvexPotential:
    """V(u) = |u|^2 / 2 - <E U, u>, whose gradient is U - E U."""
    d = ref.dim
    return ConvexPotential.quadratic(np.eye(d), -(ref.weights @ ref.points))


def standard_potentials(ref: ReferenceMeasure, count: int = 50, seed: int = 0) -> list[ConvexPotential]:
    """Random centered quadratics followed by the variance potential."""
    return random_centered_quadratics(ref, count, seed) + [variance_potential(ref)]


def standard_test_set(ref: ReferenceMeasure, count: int = 50, n: int = 8, seed: int = 0) -> list[DiscreteDistribution]:
    """Gradient images Z = grad V(U) of random quadratics, random point clouds and Z = U - E U."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        if k % 2 == 0:
            A = random_spd(ref.dim, rng)
            out.append(DiscreteDistribution(ref.points @ A + rng.normal(size=ref.dim), ref.weights))
        else:
            w = rng.dirichlet(np.ones(n))
            out.append(DiscreteDistribution(rng.normal(size=(n, ref.dim)), w))
    out.append(DiscreteDistribution(ref.points - ref.weights @ ref.points, ref.weights))
    return out
