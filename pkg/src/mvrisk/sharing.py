"""Two-agent risk sharing: efficiency of allocations and full-insurance premia."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import bisect, linprog

from .cyclic import CyclePolicy
from .dist import DiscreteDistribution, InputError, ReferenceMeasure
from .orders import is_mu_bl
from .quantile import is_mu_comonotonic
from .transport import _HIGHS_OPTIONS, _marginal_rows, solve_ot
from .verdict import Holds, OrderVerdict, Relation

SUM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Allocation:
    """Total risk Y split state by state into parts X_A + X_B."""

    parts: tuple[DiscreteDistribution, DiscreteDistribution]
    total: DiscreteDistribution

    def __post_init__(self):
        if len(self.parts) != 2:
            raise InputError("exactly two parts are supported")
        a, b = self.parts
        y = self.total
        if not (a.n == b.n == y.n) or not (a.dim == b.dim == y.dim):
            raise InputError("parts and total must share one arrangement")
        if not (np.array_equal(a.weights, y.weights) and np.array_equal(b.weights, y.weights)):
            raise InputError("parts and total must carry the same state weights")
        gap = float(np.max(np.abs(a.points + b.points - y.points)))
        if gap > SUM_TOL:
            raise InputError(f"parts do not sum to the total (max gap {gap:.3g})")

    @classmethod
    def from_parts(cls, a, b, weights=None) -> "Allocation":
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim == 1:
            a, b = a[:, None], b[:, None]
        w = np.full(len(a), 1.0 / len(a)) if weights is None else np.asarray(weights, dtype=float)
        w = w / w.sum()
        return cls(
            (DiscreteDistribution(a, w), DiscreteDistribution(b, w)),
            DiscreteDistribution(a + b, w),
        )

    @property
    def dim(self) -> int:
        return self.total.dim

    def to_csv(self) -> str:
        d = self.dim
        head = [f"{c}{i + 1}" for c in "yab" for i in range(d)] + ["w"]
        lines = [",".join(head)]
        a, b = self.parts
        for y, xa, xb, w in zip(self.total.points, a.points, b.points, self.total.weights):
            lines.append(",".join(repr(float(v)) for v in (*y, *xa, *xb, w)))
        return "\n".join(lines) + "\n"


def parse_allocation_csv(text: str) -> Allocation:
    """Columns ``y1..yd, a1..ad, b1..bd, w`` (one state per row)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError("empty input", line=1) from None
    if len(header) < 4 or (len(header) - 1) % 3 or header[-1] != "w":
        raise InputError("header must be y1..yd,a1..ad,b1..bd,w", line=1)
    d = (len(header) - 1) // 3
    expected = [f"{c}{i + 1}" for c in "yab" for i in range(d)] + ["w"]
    if header != expected:
        raise InputError(f"header must be {','.join(expected)}", line=1)
    rows = []
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
        if vals[-1] < 0:
            raise InputError("negative weight", line=lineno)
        y, a, b = vals[:d], vals[d : 2 * d], vals[2 * d : 3 * d]
        if max(abs(ya - (xa + xb)) for ya, xa, xb in zip(y, a, b)) > SUM_TOL:
            raise InputError("parts do not sum to the total", line=lineno)
        rows.append(vals)
    if not rows:
        raise InputError("empty input", line=2)
    arr = np.array(rows)
    w = arr[:, -1]
    if w.sum() <= 0:
        raise InputError("degenerate weights")
    w = w / w.sum()
    a, b = arr[:, d : 2 * d], arr[:, 2 * d : 3 * d]
    return Allocation((DiscreteDistribution(a, w), DiscreteDistribution(b, w)), DiscreteDistribution(a + b, w))


def read_allocation_csv(path: str | Path) -> Allocation:
    return parse_allocation_csv(Path(path).read_text(encoding="utf-8"))


def _shared_optimal_coupling(ref: ReferenceMeasure, a: DiscreteDistribution, b: DiscreteDistribution, tol: float):
    """Best correlation with b among couplings of ref and the states that are optimal for a.

    Returns the gap between b's unconstrained optimum and this constrained one.
    """
    va = solve_ot(ref.base, a).value
    vb = solve_ot(ref.base, b).value
    m, n = ref.m, a.n
    ca = -(ref.points @ a.points.T).ravel()
    cb = -(ref.points @ b.points.T).ravel()
    A_eq = _marginal_rows(m, n)
    b_eq = np.concatenate([ref.weights, a.weights[:-1]])
    scale = 1.0 + abs(va)
    res = linprog(
        cb,
        A_ub=sp.csr_matrix(ca[None, :]),
        b_ub=[-va + tol * scale],
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs-ds",
        options=_HIGHS_OPTIONS,
    )
    if res.status != 0:
        return np.inf, None
    return vb - (-res.fun), res.x.reshape(m, n)


def pareto_check(
    allocation: Allocation,
    ref: ReferenceMeasure,
    cycle_policy: CyclePolicy | None = None,
    tol: float | None = None,
) -> OrderVerdict:
    """An allocation is efficient iff its two parts are mu-comonotonic.

    The verdict is cross-checked against the dispersion reformulation: X_A
    must be mu-BL less dispersed than Y, and the observed split must realize
    the decomposition, i.e. one coupling with the reference is optimal for
    X_A and for X_B at once (found by a constrained transport LP).
    """
    a, b = allocation.parts
    if a.dim != ref.dim:
        raise InputError("dimension mismatch with reference")
    como = is_mu_comonotonic(a, b, ref, tol)
    bl = is_mu_bl(a, allocation.total, ref, cycle_policy=cycle_policy)
    scale = 1.0 + abs(como.certificate["value_X"]) + abs(como.certificate["value_Y"])
    ltol = 1e-9 * scale if tol is None else tol
    gap, _ = _shared_optimal_coupling(ref, a, b, 1e-12)
    realized = gap <= ltol
    if bl.holds is Holds.UNDETERMINED:
        cross = Holds.UNDETERMINED
    else:
        cross = Holds.of(bool(bl) and realized)
    cert = {
        "comonotone": como.certificate,
        "cross_check": {
            "mu_bl": bl.holds,
            "mu_bl_certificate": {k: bl.certificate[k] for k in ("method", "violating_cycle", "cycle_slack") if k in bl.certificate},
            "split_realizes_decomposition": realized,
            "shared_coupling_gap": gap,
            "verdict": cross,
        },
        "agree": cross is como.holds,
    }
    return OrderVerdict(Relation.PARETO, como.holds, cert, {"value_gap": ltol, **bl.tolerances})


def _local_utility_fn(functional, F):
    if hasattr(functional, "local_utility"):
        table = functional.local_utility(F)
        return lambda x: float(np.asarray(table(np.asarray(x)[None, :])).reshape(-1)[0])
    from .functionals import estimate_local_utility

    return lambda x: estimate_local_utility(functional, F, x)


def insurance_premium(
    functional,
    F: DiscreteDistribution,
    direction=None,
    bracket: tuple[float, float] | None = None,
    xtol: float = 1e-13,
) -> float:
    """Scalar pi with U(E F - pi * direction; F) = Phi(F).

    The local utility is normalized so that its F-average is Phi(F).
    ``direction`` defaults to the (normalized) all-ones vector; the bracket
    defaults to plus or minus the spread of F along it.
    """
    d = F.dim
    e = np.ones(d) if direction is None else np.asarray(direction, dtype=float).reshape(-1)
    if e.size != d or np.linalg.norm(e) == 0:
        raise InputError("direction must be a nonzero vector of the distribution's dimension")
    e = e / np.linalg.norm(e)
    if bracket is None:
        proj = F.points @ e
        r = float(proj.max() - proj.min()) or 1.0
        bracket = (-r, r)
    lo, hi = map(float, bracket)
    U = _local_utility_fn(functional, F)
    mu = F.mean()
    target = float(functional(F))

    def g(pi):
        return U(mu - pi * e) - target

    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if not (np.isfinite(g_lo) and np.isfinite(g_hi)) or np.sign(g_lo) == np.sign(g_hi):
        raise InputError("premium outside bracket")
    return float(bisect(g, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400))
