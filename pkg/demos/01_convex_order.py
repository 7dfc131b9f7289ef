"""Convex order on discrete laws: martingale couplings, fusions and dominance.

Spreading each atom of F with conditional-mean-zero noise gives a G that is a
mean-preserving increase in risk of F. The martingale coupling is the
certificate; shifting G's mean breaks it and a concave separating function is
returned instead. Fusing atoms goes the other way.
"""

import numpy as np

from mvrisk import DiscreteDistribution, FusionStep, fuse, is_mpir, stochastic_dominance, uniform

rng = np.random.default_rng(0)

# F on three points in the plane, G from F by splitting every atom in two
F = uniform([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
offsets = rng.normal(size=(3, 2))
G = DiscreteDistribution(np.vstack([F.points + offsets, F.points - offsets]), np.full(6, 1 / 6))

v = is_mpir(F, G)
print("F <= G in convex order:", v.holds.value)
print("martingale residual:", f"{v.certificate['martingale_residual']:.1e}")
print("coupling (rows: atoms of F, cols: atoms of G):")
print(np.round(v.certificate["coupling"].matrix, 4))

# A small mean shift makes the arrangement infeasible
w = is_mpir(F, G.shift([1e-3, 0.0]))
print("\nafter shifting G by 1e-3:", w.holds.value, "| reason:", w.certificate.get("reason", "mean mismatch"))

# Fusing atoms of P reduces risk, so P is an MPIR of the fused law
P = uniform([[-2.0], [-1.0], [1.0], [2.0]])
Q = fuse(P, [FusionStep((1, 2), 0.0), FusionStep((0, 2), 0.0)])
print("\nfused law:", Q.points.ravel(), Q.weights)
print("fused <= P in convex order:", is_mpir(Q, P).holds.value)
print("P <= fused in convex order:", is_mpir(P, Q).holds.value)

# Componentwise dominance after a positive shift
print("\nF.shift(+1) dominates F:", stochastic_dominance(F.shift([1.0, 1.0]), F).holds.value)
