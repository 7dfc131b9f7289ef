"""Cyclic monotonicity of finite point-to-vector assignments.

A finite assignment u_i -> v_i is the graph of a subgradient of a convex
function iff every cycle i_0 -> i_1 -> ... -> i_0 has nonnegative slack

    sum_k <v_{i_k}, u_{i_k} - u_{i_{k+1}}>.

Short cycles are scanned exhaustively on small supports, longer ones are
sampled, and a shortest-path closure over the complete graph (Floyd-Warshall
on the step slacks) settles the question exactly when it is affordable. The
closure also returns a convex potential when no negative cycle exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .verdict import Holds


@dataclass(frozen=True)
class CyclePolicy:
    """How hard to look for a violating cycle.

    ``exhaustive_max_m`` bounds the support size for the exhaustive scan of
    cycles of length <= ``exhaustive_length``; above it, ``samples`` random
    cycles of length 2..``sample_length`` are drawn. ``exact_max_m`` bounds the
    support size for the O(m^3) shortest-path closure; set it to 0 to disable.
    """

    exhaustive_max_m: int = 40
    exhaustive_length: int = 3
    samples: int = 10_000
    sample_length: int = 5
    exact_max_m: int = 400
    seed: int = 0
    tol: float = 1e-10

    @classmethod
    def parse(cls, text: str, **kw) -> "CyclePolicy":
        """``"R:L"`` as used on the command line."""
        r, _, ell = text.partition(":")
        return cls(samples=int(r), sample_length=int(ell or 5), **kw)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CycleResult:
    holds: Holds
    cycle: list[int] | None = None
    slack: float | None = None
    potential: np.ndarray | None = None
    method: str = ""
    checked: dict | None = None

    def certificate(self) -> dict:
        out = {"method": self.method, "checked": self.checked or {}}
        if self.cycle is not None:
            out["violating_cycle"] = self.cycle
            out["cycle_slack"] = self.slack
        if self.potential is not None:
            out["convex_potential_values"] = self.potential
        return out


def step_slacks(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """W[i, j] = <v_i, u_i - u_j>, the slack contributed by the step i -> j."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if u.shape[0] != v.shape[0]:
        raise ValueError("u and v must have the same number of rows")
    if u.shape[0] == 1 and u.shape[1] != v.shape[1]:
        u, v = u.T, v.T
    return (v * u).sum(axis=1)[:, None] - v @ u.T


def cycle_slack(W: np.ndarray, cycle) -> float:
    c = list(cycle)
    return float(sum(W[a, b] for a, b in zip(c, c[1:] + c[:1])))


def _scale(u, v) -> float:
    spread = np.max(np.abs(u - u.mean(axis=0))) if len(u) else 0.0
    return max(1.0, float(np.max(np.abs(v), initial=0.0)) * max(spread, 1.0))


def _short_cycles(W: np.ndarray, tol: float):
    m = W.shape[0]
    two = W + W.T
    i, j = np.unravel_index(np.argmin(two), two.shape)
    if two[i, j] < -tol:
        return [int(i), int(j)], float(two[i, j])
    if m >= 3:
        # three-cycles i -> j -> k -> i, one slab at a time to bound memory
        best, arg = np.inf, None
        for i in range(m):
            s = W[i, :, None] + W + W[:, i][None, :]
            k = np.unravel_index(np.argmin(s), s.shape)
            if s[k] < best:
                best, arg = s[k], (i, int(k[0]), int(k[1]))
        if best < -tol:
            return list(arg), float(best)
    return None, None


def _sampled_cycles(W: np.ndarray, samples: int, max_len: int, rng, tol: float):
    m = W.shape[0]
    if m < 2 or samples <= 0:
        return None, None
    lengths = rng.integers(2, max(2, max_len) + 1, size=samples)
    best, arg = np.inf, None
    for L in np.unique(lengths):
        count = int(np.sum(lengths == L))
        idx = np.stack([rng.permutation(m)[:L] for _ in range(count)]) if L <= m else None
        if idx is None:
            continue
        s = W[idx, np.roll(idx, -1, axis=1)].sum(axis=1)
        k = int(np.argmin(s))
        if s[k] < best:
            best, arg = float(s[k]), [int(t) for t in idx[k]]
    if best < -tol:
        return arg, best
    return None, None


def _negative_cycle_closure(W: np.ndarray, tol: float):
    """Floyd-Warshall on step slacks. Returns (cycle, None) or (None, potential)."""
    m = W.shape[0]
    D = W.copy()
    np.fill_diagonal(D, 0.0)
    for k in range(m):
        D = np.minimum(D, D[:, k : k + 1] + D[k : k + 1, :])
        if np.diag(D).min() < -tol:
            return _bellman_ford_cycle(W, tol), None
    # V(u_j) = -min_i dist(i, j) satisfies V(u_j) >= V(u_i) + <v_i, u_j - u_i>
    return None, -np.minimum(D.min(axis=0), 0.0)


def _bellman_ford_cycle(W: np.ndarray, tol: float) -> list[int] | None:
    """Extract a negative cycle from the predecessor graph of Bellman-Ford."""
    m = W.shape[0]
    dist = np.zeros(m)
    pred = np.full(m, -1)
    eps = tol / (m + 1)
    last = None
    for _ in range(m + 1):
        cand = dist[:, None] + W
        np.fill_diagonal(cand, np.inf)
        best = cand.argmin(axis=0)
        val = cand[best, np.arange(m)]
        upd = val < dist - eps
        if not upd.any():
            return None
        dist = np.where(upd, val, dist)
        pred = np.where(upd, best, pred)
        last = int(np.flatnonzero(upd)[0])
    node = last
    for _ in range(m):
        node = int(pred[node])
    cycle, cur = [node], int(pred[node])
    while cur != node:
        cycle.append(cur)
        cur = int(pred[cur])
    return cycle[::-1]


def check_cyclic_monotone(u, v, policy: CyclePolicy | None = None) -> CycleResult:
    """Decide whether u_i -> v_i is cyclically monotone under ``policy``."""
    policy = policy or CyclePolicy()
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim == 1:
        u, v = u[:, None], v[:, None]
    m = u.shape[0]
    W = step_slacks(u, v)
    tol = policy.tol * _scale(u, v)
    checked = {}
    exhaustive = m <= policy.exhaustive_max_m
    if exhaustive:
        cyc, s = _short_cycles(W, tol)
        checked["short_cycles_exhaustive"] = policy.exhaustive_length
        if cyc is not None:
            return CycleResult(Holds.FALSE, cyc, s, method="short-cycle scan", checked=checked)
    else:
        rng = np.random.default_rng(policy.seed)
        cyc, s = _sampled_cycles(W, policy.samples, policy.sample_length, rng, tol)
        checked["sampled_cycles"] = policy.samples
        checked["sample_length"] = policy.sample_length
        checked["seed"] = policy.seed
        if cyc is not None:
            return CycleResult(Holds.FALSE, cyc, s, method="sampled cycles", checked=checked)
    if m <= policy.exact_max_m:
        cyc, potential = _negative_cycle_closure(W, tol)
        checked["shortest_path_closure"] = True
        if cyc is not None and cycle_slack(W, cyc) < -tol:
            return CycleResult(Holds.FALSE, cyc, cycle_slack(W, cyc), method="shortest-path closure", checked=checked)
        if potential is not None:
            return CycleResult(Holds.TRUE, potential=potential, method="shortest-path closure", checked=checked)
        return CycleResult(Holds.UNDETERMINED, method="shortest-path closure", checked=checked)
    if exhaustive:
        return CycleResult(Holds.TRUE, method="short-cycle scan", checked=checked)
    return CycleResult(Holds.UNDETERMINED, method="sampled cycles", checked=checked)
