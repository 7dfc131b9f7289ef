"""Univariate quantiles, mu-quantile maps and multivariate comonotonicity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cyclic import CyclePolicy, check_cyclic_monotone
from .dist import DiscreteDistribution, InputError, ReferenceMeasure, quantile_cells
from .transport import Coupling, solve_ot
from .verdict import Holds, OrderVerdict, Relation


def quantile_1d(dist: DiscreteDistribution, t: float) -> float:
    """Q(t) = inf{x : F(x) > t} for t in [0, 1)."""
    if dist.dim != 1:
        raise InputError("quantile_1d needs a univariate distribution")
    if not 0.0 <= t < 1.0:
        raise InputError(f"t must lie in [0, 1), got {t}")
    atoms, cdf = quantile_cells(dist)
    k = int(np.searchsorted(cdf, t, side="right"))
    return float(atoms[min(k, len(atoms) - 1)])


@dataclass(frozen=True, eq=False)
class QuantileMap:
    """Max-correlation pairing of a reference measure with a distribution.

    ``u``, ``x`` and ``w`` list the positive-mass cells of the optimal
    coupling; ``ref_index`` and ``atom_index`` say where each cell came from.
    """

    reference: ReferenceMeasure
    dist: DiscreteDistribution
    u: np.ndarray
    x: np.ndarray
    w: np.ndarray
    ref_index: np.ndarray
    atom_index: np.ndarray
    coupling: Coupling
    value: float

    def at_reference(self) -> np.ndarray:
        """Q(u_k) for every reference point (conditional mean if mass splits)."""
        m, d = self.reference.m, self.dist.dim
        out = np.zeros((m, d))
        np.add.at(out, self.ref_index, self.w[:, None] * self.x)
        return out / self.reference.weights[:, None]

    def is_deterministic(self) -> bool:
        return len(np.unique(self.ref_index)) == len(self.ref_index)

    def correlation(self) -> float:
        return float(np.sum(self.w * np.einsum("ij,ij->i", self.u, self.x)))

    def to_dict(self) -> dict:
        return {
            "reference": self.reference.to_dict(),
            "pairs": [
                {"u": ui.tolist(), "x": xi.tolist(), "w": float(wi)} for ui, xi, wi in zip(self.u, self.x, self.w)
            ],
        }

    def to_csv(self) -> str:
        d = self.dist.dim
        head = [f"u{i + 1}" for i in range(d)] + [f"x{i + 1}" for i in range(d)] + ["w"]
        lines = [",".join(head)]
        for ui, xi, wi in zip(self.u, self.x, self.w):
            lines.append(",".join(repr(float(v)) for v in (*ui, *xi, wi)))
        return "\n".join(lines) + "\n"


def mu_quantile(dist: DiscreteDistribution, ref: ReferenceMeasure) -> QuantileMap:
    if dist.dim != ref.dim:
        raise InputError(f"dimension mismatch: dist has d={dist.dim}, reference d={ref.dim}")
    res = solve_ot(ref.base, dist, "max-correlation")
    mat = res.coupling.matrix
    k, i = np.nonzero(mat > 1e-14)
    return QuantileMap(
        reference=ref,
        dist=dist,
        u=ref.points[k],
        x=dist.points[i],
        w=mat[k, i],
        ref_index=k,
        atom_index=i,
        coupling=res.coupling,
        value=res.value,
    )


def _check_arrangement(X: DiscreteDistribution, Y: DiscreteDistribution) -> None:
    if X.dim != Y.dim:
        raise InputError(f"dimension mismatch: {X.dim} vs {Y.dim}")
    if X.n != Y.n or not np.allclose(X.weights, Y.weights, rtol=0, atol=1e-12):
        raise InputError("X and Y must be given on a common arrangement (same atoms order and weights)")


def arrangement_sum(X: DiscreteDistribution, Z: DiscreteDistribution) -> DiscreteDistribution:
    """Law of X + Z when both are given on the same arrangement of states."""
    _check_arrangement(X, Z)
    return DiscreteDistribution(X.points + Z.points, X.weights)


def _discordant_pair(x: np.ndarray, y: np.ndarray):
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    bad = np.argwhere(dx * dy < 0)
    if len(bad):
        i, j = bad[0]
        return [int(i), int(j)]
    return None


def is_mu_comonotonic(
    X: DiscreteDistribution,
    Y: DiscreteDistribution,
    ref: ReferenceMeasure,
    tol: float | None = None,
) -> OrderVerdict:
    """Is there one arrangement U of ``ref`` putting X and Y both in quantile position?

    X and Y are states of a common arrangement (atom i of X and atom i of Y
    occur together). Any coupling optimal for X + Y attains the sum of the two
    separate optima exactly when a common optimal coupling exists, so the test
    compares three transport values and returns that coupling as witness.
    """
    _check_arrangement(X, Y)
    if X.dim != ref.dim:
        raise InputError("dimension mismatch with reference")
    vx = solve_ot(ref.base, X).value
    vy = solve_ot(ref.base, Y).value
    joint = solve_ot(ref.base, DiscreteDistribution(X.points + Y.points, X.weights))
    scale = 1.0 + abs(vx) + abs(vy)
    tol = 1e-9 * scale if tol is None else tol
    gap = vx + vy - joint.value
    cert = {"value_X": vx, "value_Y": vy, "value_joint": joint.value, "gap": gap}
    if gap <= tol:
        cert["arrangement"] = joint.coupling
        return OrderVerdict(Relation.MU_COMONOTONE, Holds.TRUE, cert, {"value_gap": tol})
    cert["quantile_coupling_X"] = solve_ot(ref.base, X).coupling
    cert["quantile_coupling_Y"] = solve_ot(ref.base, Y).coupling
    if X.dim == 1:
        cert["discordant_pair"] = _discordant_pair(X.points[:, 0], Y.points[:, 0])
    return OrderVerdict(Relation.MU_COMONOTONE, Holds.FALSE, cert, {"value_gap": tol})


def is_c_comonotonic(pairs, y=None, policy: CyclePolicy | None = None) -> OrderVerdict:
    """Is the observed assignment x_i -> y_i cyclically monotone?

    ``pairs`` is either a sequence of ``(x_i, y_i, w_i)`` records or, when
    ``y`` is given, the array of x points.
    """
    if y is None:
        if len(pairs) == 0:
            raise InputError("empty input")
        x = np.array([np.atleast_1d(p[0]) for p in pairs], dtype=float)
        y = np.array([np.atleast_1d(p[1]) for p in pairs], dtype=float)
    else:
        x = np.atleast_2d(np.asarray(pairs, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if x.shape[0] == 1 and x.shape[1] > 1 and y.shape == x.shape:
            x, y = x.T, y.T
    if x.size == 0:
        raise InputError("empty input")
    if x.shape != y.shape:
        raise InputError("x and y pairs must have equal shapes")
    policy = policy or CyclePolicy()
    res = check_cyclic_monotone(x, y, policy)
    return OrderVerdict(Relation.C_COMONOTONE, res.holds, res.certificate(), {"cycle": policy.tol})
