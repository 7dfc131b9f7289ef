"""Exact discrete optimal transport and martingale couplings.

Every problem here is a small linear program solved to a vertex with the
HiGHS dual simplex. Infeasible feasibility problems are answered with a
Farkas certificate, re-expressed as a test function on the supports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .dist import DiscreteDistribution, InputError
from .verdict import Holds, OrderVerdict, Relation

MARGINAL_TOL = 1e-9
MARTINGALE_TOL = 1e-9
SLACKNESS_TOL = 1e-7
_ZERO = 1e-14

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def _check_dims(F: DiscreteDistribution, G: DiscreteDistribution) -> None:
    if F.dim != G.dim:
        raise InputError(f"dimension mismatch: {F.dim} vs {G.dim}")


@dataclass(frozen=True, eq=False)
class Coupling:
    source: DiscreteDistribution
    target: DiscreteDistribution
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        mat[np.abs(mat) < _ZERO] = 0.0
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def marginal_errors(self) -> tuple[float, float]:
        rows = np.max(np.abs(self.matrix.sum(axis=1) - self.source.weights))
        cols = np.max(np.abs(self.matrix.sum(axis=0) - self.target.weights))
        return float(rows), float(cols)

    def is_valid(self, tol: float = MARGINAL_TOL) -> bool:
        r, c = self.marginal_errors()
        return bool(r <= tol and c <= tol and np.all(self.matrix >= -tol))

    def martingale_residual(self) -> float:
        """max_i |sum_j pi_ij (y_j - x_i)| over rows and coordinates."""
        y, x = self.target.points, self.source.points
        res = self.matrix @ y - self.matrix.sum(axis=1)[:, None] * x
        return float(np.max(np.abs(res)))

    def is_permutation(self) -> bool:
        return bool(np.all((self.matrix > _ZERO).sum(axis=1) == 1) and self.source.n == self.target.n)

    def support(self, tol: float = 1e-12) -> list[tuple[int, int]]:
        return [tuple(map(int, ij)) for ij in np.argwhere(self.matrix > tol)]

    def to_dict(self) -> dict:
        return {
            "shape": list(self.matrix.shape),
            "matrix": self.matrix.reshape(-1).tolist(),
            "source": self.source.to_dict(),
            "target": self.target.to_dict(),
        }


@dataclass(frozen=True)
class DualPotentials:
    source_potential: np.ndarray
    target_potential: np.ndarray

    def to_dict(self) -> dict:
        return {"source": self.source_potential.tolist(), "target": self.target_potential.tolist()}


@dataclass(frozen=True)
class OTResult:
    coupling: Coupling
    potentials: DualPotentials
    value: float
    dual_value: float
    objective: str

    def __iter__(self):
        return iter((self.coupling, self.potentials, self.value))


def _marginal_rows(n: int, m: int, drop_last_col: bool = True):
    """Sparse equality rows for row sums (n) and column sums (m, or m-1)."""
    idx = np.arange(n * m)
    rows = sp.csr_matrix((np.ones(n * m), (idx // m, idx)), shape=(n, n * m))
    ncols = m - 1 if drop_last_col else m
    keep = (idx % m) < ncols
    cols = sp.csr_matrix((np.ones(keep.sum()), ((idx % m)[keep], idx[keep])), shape=(ncols, n * m))
    return sp.vstack([rows, cols]).tocsr()


def _solve(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, bounds=(0, None)):
    return linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs-ds",
        options=_HIGHS_OPTIONS,
    )


def cost_matrix(source: DiscreteDistribution, target: DiscreteDistribution, objective: str) -> np.ndarray:
    x, y = source.points, target.points
    if objective == "max-correlation":
        return x @ y.T
    if objective == "min-squared-distance":
        return ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)
    if objective == "min-distance":
        return np.sqrt(((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2))
    raise ValueError(f"unknown objective {objective!r}")


def solve_ot(
    source: DiscreteDistribution,
    target: DiscreteDistribution,
    objective: str = "max-correlation",
) -> OTResult:
    """Exact optimal coupling between two discrete distributions.

    ``max-correlation`` maximizes sum pi_ij <x_i, y_j>; the two squared-distance
    forms minimize. Potentials satisfy a_i + b_j >= c_ij (maximization) or
    a_i + b_j <= c_ij (minimization), with equality on the support.
    """
    _check_dims(source, target)
    n, m = source.n, target.n
    C = cost_matrix(source, target, objective)
    sign = -1.0 if objective == "max-correlation" else 1.0
    A = _marginal_rows(n, m)
    b = np.concatenate([source.weights, target.weights[:-1]])
    res = _solve(sign * C.reshape(-1), A_eq=A, b_eq=b)
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    mat = np.clip(res.x.reshape(n, m), 0.0, None)
    duals = sign * np.asarray(res.eqlin.marginals)
    a = duals[:n]
    bpot = np.append(duals[n:], 0.0)
    coupling = Coupling(source, target, mat)
    value = float((coupling.matrix * C).sum())
    dual_value = float(source.weights @ a + target.weights @ bpot)
    return OTResult(coupling, DualPotentials(a, bpot), value, dual_value, objective)


def wasserstein1(F: DiscreteDistribution, G: DiscreteDistribution) -> float:
    """1-Wasserstein distance with Euclidean ground cost, solved exactly."""
    return max(0.0, solve_ot(F, G, "min-distance").value)


def barycentric_map(coupling: Coupling) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairs (x_i, E[Y | X = x_i]) for every source atom with positive mass."""
    out = []
    for i, w in enumerate(coupling.source.weights):
        if w > 0:
            out.append((coupling.source.points[i], coupling.matrix[i] @ coupling.target.points / w))
    return out


def barycentric_targets(coupling: Coupling) -> np.ndarray:
    """Conditional target mean for every source atom, as an (n, d) array."""
    w = coupling.matrix.sum(axis=1)
    safe = np.where(w > 0, w, 1.0)
    return (coupling.matrix @ coupling.target.points) / safe[:, None]


# ---------------------------------------------------------------- feasibility


def _polish(x0: np.ndarray, A, b: np.ndarray, tol: float) -> np.ndarray:
    """Least-norm correction on the support so that A x = b to machine precision."""
    support = np.flatnonzero(x0 > _ZERO)
    if support.size == 0:
        return x0
    A_s = A[:, support].toarray() if sp.issparse(A) else A[:, support]
    r = b - A_s @ x0[support]
    if np.max(np.abs(r), initial=0.0) <= 1e-15:
        return x0
    delta = np.linalg.lstsq(A_s, r, rcond=None)[0]
    x = x0.copy()
    x[support] += delta
    if np.any(x < -tol):
        return x0
    return np.clip(x, 0.0, None)


def _martingale_system(F: DiscreteDistribution, G: DiscreteDistribution):
    n, m, d = F.n, G.n, F.dim
    A_marg = _marginal_rows(n, m, drop_last_col=False)
    # row i, coordinate k: sum_j pi_ij (y_jk - x_ik) = 0
    diff = G.points[None, :, :] - F.points[:, None, :]  # (n, m, d)
    rows = np.repeat(np.arange(n)[:, None], m, axis=1)  # (n, m)
    data, ri, ci = [], [], []
    for k in range(d):
        data.append(diff[:, :, k].reshape(-1))
        ri.append((rows * d + k).reshape(-1))
        ci.append(np.arange(n * m))
    A_mart = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))), shape=(n * d, n * m)
    )
    A = sp.vstack([A_marg, A_mart]).tocsr()
    b = np.concatenate([F.weights, G.weights, np.zeros(n * d)])
    return A, b


def _concave_certificate(F: DiscreteDistribution, G: DiscreteDistribution) -> dict | None:
    """Farkas alternative to martingale feasibility.

    Finds a, b, h with a_i + b_j + h_i.(y_j - x_i) >= 0 and p.a + q.b < 0. Then
    g(z) = min_i a_i + h_i.(z - x_i) is concave with int g dG > int g dF.
    """
    n, m, d = F.n, G.n, F.dim
    nv = n + m + n * d
    diff = G.points[None, :, :] - F.points[:, None, :]
    ii, jj = np.divmod(np.arange(n * m), m)
    r = np.arange(n * m)
    rows = np.concatenate([r, r, np.repeat(r, d)])
    cols = np.concatenate([ii, n + jj, (n + m + ii[:, None] * d + np.arange(d)[None, :]).reshape(-1)])
    data = np.concatenate([-np.ones(2 * n * m), -diff.reshape(-1)])
    A_ub = sp.csr_matrix((data, (rows, cols)), shape=(n * m, nv))
    c = np.concatenate([F.weights, G.weights, np.zeros(n * d)])
    bounds = [(-1.0, 1.0)] * (n + m) + [(None, None)] * (n * d)
    res = _solve(c, A_ub=A_ub, b_ub=np.zeros(n * m), bounds=bounds)
    if res.status != 0 or res.fun >= -MARTINGALE_TOL:
        return None
    a = res.x[:n]
    h = res.x[n + m :].reshape(n, d)

    def g(z):
        z = np.atleast_2d(z)
        return np.min(a[None, :] + ((z[:, None, :] - F.points[None, :, :]) * h[None]).sum(axis=2), axis=1)

    int_F = float(F.weights @ g(F.points))
    int_G = float(G.weights @ g(G.points))
    if int_G - int_F <= MARTINGALE_TOL:
        return None
    return {
        "kind": "concave test function g(z) = min_i a_i + h_i.(z - x_i)",
        "anchors": F.points,
        "intercepts": a,
        "slopes": h,
        "integral_F": int_F,
        "integral_G": int_G,
        "gap": int_G - int_F,
    }


def martingale_coupling(F: DiscreteDistribution, G: DiscreteDistribution) -> OrderVerdict:
    """Decide whether some coupling (X, Y) of (F, G) has E[Y | X] = X."""
    _check_dims(F, G)
    A, b = _martingale_system(F, G)
    res = _solve(np.zeros(F.n * G.n), A_eq=A, b_eq=b)
    tols = {"marginal": MARGINAL_TOL, "martingale": MARTINGALE_TOL}
    if res.status == 0:
        x = _polish(np.clip(res.x, 0.0, None), A, b, MARGINAL_TOL)
        coupling = Coupling(F, G, x.reshape(F.n, G.n))
        residual = coupling.martingale_residual()
        if coupling.is_valid() and residual <= MARTINGALE_TOL:
            return OrderVerdict(
                Relation.MPIR,
                Holds.TRUE,
                {"coupling": coupling, "martingale_residual": residual},
                tols,
            )
    cert = _concave_certificate(F, G)
    if cert is not None:
        return OrderVerdict(Relation.MPIR, Holds.FALSE, {"separating_function": cert}, tols)
    return OrderVerdict(Relation.MPIR, Holds.UNDETERMINED, {"lp_status": int(res.status)}, tols)


def dominance_coupling(F: DiscreteDistribution, G: DiscreteDistribution) -> OrderVerdict:
    """Decide F >=_SD G: a coupling supported on {(x, y): x >= y componentwise}."""
    _check_dims(F, G)
    n, m = F.n, G.n
    allowed = np.all(F.points[:, None, :] >= G.points[None, :, :], axis=2).reshape(-1)
    A = _marginal_rows(n, m, drop_last_col=False)
    b = np.concatenate([F.weights, G.weights])
    bounds = [(0.0, None) if ok else (0.0, 0.0) for ok in allowed]
    res = _solve(np.zeros(n * m), A_eq=A, b_eq=b, bounds=bounds)
    tols = {"marginal": MARGINAL_TOL}
    if res.status == 0:
        x = _polish(np.clip(res.x, 0.0, None) * allowed, A[:, :], b, MARGINAL_TOL) * allowed
        coupling = Coupling(F, G, x.reshape(n, m))
        if coupling.is_valid():
            return OrderVerdict(Relation.SD, Holds.TRUE, {"coupling": coupling}, tols)
    # Farkas: a_i + b_j >= 0 on allowed cells and p.a + q.b < 0
    pairs = np.flatnonzero(allowed)
    A_ub = sp.csr_matrix(
        (-np.ones(2 * pairs.size), (np.repeat(np.arange(pairs.size), 2), np.ravel(np.column_stack([pairs // m, n + pairs % m])))),
        shape=(pairs.size, n + m),
    )
    res2 = _solve(
        np.concatenate([F.weights, G.weights]),
        A_ub=A_ub if pairs.size else None,
        b_ub=np.zeros(pairs.size) if pairs.size else None,
        bounds=[(-1.0, 1.0)] * (n + m),
    )
    if res2.status == 0 and res2.fun < -MARGINAL_TOL:
        a, bb = res2.x[:n], res2.x[n:]
        floor = float(np.min(a))

        def g(z):
            z = np.atleast_2d(z)
            below = np.all(G.points[None, :, :] <= z[:, None, :], axis=2)
            cand = np.where(below, -bb[None, :], -np.inf)
            return np.maximum(cand.max(axis=1), floor)

        int_F = float(F.weights @ g(F.points))
        int_G = float(G.weights @ g(G.points))
        cert = {
            "kind": "nondecreasing test function g(z) = max(min a, max_{y_j <= z} -b_j)",
            "values_on_F": g(F.points),
            "values_on_G": g(G.points),
            "integral_F": int_F,
            "integral_G": int_G,
            "gap": int_G - int_F,
        }
        return OrderVerdict(Relation.SD, Holds.FALSE, {"separating_function": cert}, tols)
    return OrderVerdict(Relation.SD, Holds.UNDETERMINED, {"lp_status": int(res.status)}, tols)
