"""Stochastic-order verdicts: dominance, convex order, dispersion orders."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cyclic import CyclePolicy, check_cyclic_monotone
from .dist import (
    DiscreteDistribution,
    InputError,
    ReferenceMeasure,
    law_distance,
    merged_breakpoints,
    quantile_cells,
    quantile_on_cells,
)
from .quantile import is_mu_comonotonic, mu_quantile
from .transport import dominance_coupling, martingale_coupling
from .verdict import Holds, OrderVerdict, Relation

MEAN_TOL = 1e-9
MONO_TOL = 1e-10


def _same_dim(X, Y):
    if X.dim != Y.dim:
        raise InputError(f"dimension mismatch: {X.dim} vs {Y.dim}")


def stochastic_dominance(F: DiscreteDistribution, G: DiscreteDistribution) -> OrderVerdict:
    """F >=_SD G, decided by a coupling supported on the componentwise order."""
    return dominance_coupling(F, G)


def _mean_gap(F, G):
    return float(np.max(np.abs(F.mean() - G.mean())))


def is_mpir(F: DiscreteDistribution, G: DiscreteDistribution, tol_mean: float = MEAN_TOL) -> OrderVerdict:
    """G is a mean preserving increase in risk of F (martingale coupling from F to G)."""
    _same_dim(F, G)
    gap = _mean_gap(F, G)
    tols = {"mean": tol_mean, "martingale": 1e-9, "marginal": 1e-9}
    if gap > tol_mean:
        # an affine function is concave; this one separates the means
        direction = G.mean() - F.mean()
        cert = {
            "mean_F": F.mean(),
            "mean_G": G.mean(),
            "separating_function": {
                "kind": "affine g(z) = <c, z>",
                "c": direction,
                "integral_F": float(direction @ F.mean()),
                "integral_G": float(direction @ G.mean()),
            },
        }
        return OrderVerdict(Relation.MPIR, Holds.FALSE, cert, tols)
    verdict = martingale_coupling(F, G)
    verdict.tolerances = tols
    return verdict


def _bl_grid(X, Y):
    xa, ca = quantile_cells(X)
    ya, cy = quantile_cells(Y)
    breaks = merged_breakpoints(ca, cy)
    return breaks, quantile_on_cells(xa, ca, breaks), quantile_on_cells(ya, cy, breaks)


def is_bl_less_dispersed_1d(
    X: DiscreteDistribution,
    Y: DiscreteDistribution,
    mean_preserving: bool = False,
    tol: float = MONO_TOL,
    tol_mean: float = MEAN_TOL,
) -> OrderVerdict:
    """X is Bickel-Lehmann less dispersed than Y: Q_Y - Q_X nondecreasing on (0, 1).

    Both quantiles are piecewise constant; they are compared on the common
    refinement of their cumulative-probability breakpoints.
    """
    if X.dim != 1 or Y.dim != 1:
        raise InputError("Bickel-Lehmann dispersion here needs univariate laws")
    relation = Relation.MMPIR if mean_preserving else Relation.BL
    tols = {"monotonicity": tol, "mean": tol_mean}
    breaks, qx, qy = _bl_grid(X, Y)
    diff = qy - qx
    steps = np.diff(diff)
    cert = {"breakpoints": breaks, "difference": diff}
    if mean_preserving and _mean_gap(X, Y) > tol_mean:
        cert.update(mean_X=X.mean(), mean_Y=Y.mean())
        return OrderVerdict(relation, Holds.FALSE, cert, tols)
    if steps.size and steps.min() < -tol:
        k = int(np.argmin(steps))
        cert["violation"] = {"cells": [k, k + 1], "drop": float(steps[k])}
        return OrderVerdict(relation, Holds.FALSE, cert, tols)
    return OrderVerdict(relation, Holds.TRUE, cert, tols)


def quantile_difference(X, Y, ref: ReferenceMeasure):
    qx, qy = mu_quantile(X, ref), mu_quantile(Y, ref)
    return qx, qy, qy.at_reference() - qx.at_reference()


def is_mu_bl(
    X: DiscreteDistribution,
    Y: DiscreteDistribution,
    ref: ReferenceMeasure,
    mean_preserving: bool = False,
    cycle_policy: CyclePolicy | None = None,
    tol_mean: float = MEAN_TOL,
) -> OrderVerdict:
    """X is mu-Bickel-Lehmann less dispersed than Y.

    D(u) = Q_Y(u) - Q_X(u) on the reference support must be cyclically
    monotone, i.e. the trace of the gradient of a convex function of u.
    """
    _same_dim(X, Y)
    if ref.dim != X.dim:
        raise InputError("reference dimension does not match the distributions")
    policy = cycle_policy or CyclePolicy()
    relation = Relation.MU_MMPIR if mean_preserving else Relation.MU_BL
    tols = {"cycle": policy.tol, "mean": tol_mean}
    qx, qy, D = quantile_difference(X, Y, ref)
    cert = {
        "difference": D,
        "deterministic_quantiles": qx.is_deterministic() and qy.is_deterministic(),
        "cycle_policy": policy,
    }
    if mean_preserving and _mean_gap(X, Y) > tol_mean:
        cert.update(mean_X=X.mean(), mean_Y=Y.mean())
        return OrderVerdict(relation, Holds.FALSE, cert, tols)
    res = check_cyclic_monotone(ref.points, D, policy)
    cert.update(res.certificate())
    return OrderVerdict(relation, res.holds, cert, tols)


def lm_decompose(
    X: DiscreteDistribution,
    Y: DiscreteDistribution,
    ref: ReferenceMeasure | None = None,
    cycle_policy: CyclePolicy | None = None,
) -> tuple[DiscreteDistribution | None, OrderVerdict]:
    """Split Y =_d X + Z with Z comonotone with X, when X is less dispersed.

    Z is returned on a common arrangement with X; that arrangement of X is in
    ``verdict.certificate["base"]``. Without ``ref`` the univariate quantile
    functions are used directly.
    """
    _same_dim(X, Y)
    if ref is None:
        if X.dim != 1:
            raise InputError("a reference measure is required for d > 1")
        verdict = is_bl_less_dispersed_1d(X, Y)
        breaks, qx, qy = _bl_grid(X, Y)
        cell_w = np.diff(breaks)
        base = DiscreteDistribution(qx[:, None], cell_w / cell_w.sum())
        Z = DiscreteDistribution((qy - qx)[:, None], base.weights)
    else:
        verdict = is_mu_bl(X, Y, ref, cycle_policy=cycle_policy)
        qx, qy, D = quantile_difference(X, Y, ref)
        base = DiscreteDistribution(qx.at_reference(), ref.weights)
        Z = DiscreteDistribution(D, ref.weights)
    if not verdict:
        return None, verdict
    total = DiscreteDistribution(base.points + Z.points, base.weights)
    verdict.certificate["base"] = base
    verdict.certificate["sum_law_distance"] = law_distance(total, Y)
    if ref is not None:
        verdict.certificate["comonotone_with_base"] = bool(is_mu_comonotonic(base, Z, ref))
    return Z, verdict


@dataclass(frozen=True)
class FusionStep:
    subset: tuple[int, ...]
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "subset", tuple(int(i) for i in self.subset))
        if not self.subset:
            raise InputError("fusion subset must be nonempty")
        if not 0.0 <= self.beta <= 1.0:
            raise InputError("fusion beta must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "FusionStep":
        return cls(tuple(d["indices"]), float(d["beta"]))

    def to_dict(self) -> dict:
        return {"indices": list(self.subset), "beta": self.beta}


def elementary_fusion(P: DiscreteDistribution, step: FusionStep) -> DiscreteDistribution:
    """Keep a fraction beta of the mass on A and move the rest to A's conditional mean."""
    idx = np.array(sorted(set(step.subset)))
    if idx.min() < 0 or idx.max() >= P.n:
        raise InputError("fusion subset index out of range")
    mass = float(P.weights[idx].sum())
    if mass <= 0:
        raise InputError("fusion subset has null mass")
    mu_A = P.weights[idx] @ P.points[idx] / mass
    if step.beta == 1.0:
        return P
    w = P.weights.copy()
    w[idx] *= step.beta
    pts = np.vstack([P.points, mu_A[None, :]])
    w = np.append(w, (1.0 - step.beta) * mass)
    keep = w > 0
    return DiscreteDistribution(pts[keep], w[keep] / w[keep].sum())


def fuse(P: DiscreteDistribution, steps: Sequence[FusionStep]) -> DiscreteDistribution:
    for s in steps:
        P = elementary_fusion(P, s)
    return P


def strong_dispersive_check(
    X: DiscreteDistribution,
    Y: DiscreteDistribution,
    ref: ReferenceMeasure | None = None,
    tol: float = 1e-10,
    cycle_policy: CyclePolicy | None = None,
) -> OrderVerdict:
    """Sufficient test for Y dominating X in the strong dispersive order.

    Builds phi(x) = x + Q_Z(Q_X^{-1}(x)) from the dispersion decomposition and
    checks that it expands every pairwise distance. When the construction is
    unavailable or phi fails to expand, the verdict is undetermined.
    """
    Z, dec = lm_decompose(X, Y, ref, cycle_policy)
    tols = {"expansion": tol}
    if Z is None:
        return OrderVerdict(Relation.STRONG_DISPERSIVE, Holds.UNDETERMINED, {"decomposition": dec}, tols)
    base = dec.certificate["base"].points
    image = base + Z.points
    dx = np.linalg.norm(base[:, None, :] - base[None, :, :], axis=2)
    dphi = np.linalg.norm(image[:, None, :] - image[None, :, :], axis=2)
    # one base point may be split over several cells; phi is then not a map
    well_defined = bool(np.all(dphi[dx == 0] <= tol))
    shortfall = dx - dphi
    i, j = np.unravel_index(np.argmax(shortfall), shortfall.shape)
    cert = {
        "map": {"x": base, "phi_x": image},
        "map_well_defined": well_defined,
        "worst_pair": [int(i), int(j)],
        "worst_shortfall": float(shortfall[i, j]),
    }
    ok = well_defined and shortfall[i, j] <= tol
    return OrderVerdict(Relation.STRONG_DISPERSIVE, Holds.TRUE if ok else Holds.UNDETERMINED, cert, tols)
