"""Vector quantiles and dispersion on a reference grid.

The quantile of a law relative to a reference measure is its maximal
correlation pairing. One law is less dispersed than another when the
difference of their quantiles is itself cyclically monotone, that is a
gradient of a convex function of the reference point.
"""

import numpy as np

from mvrisk import DiscreteDistribution, is_bl_less_dispersed_1d, is_mu_bl, lm_decompose, mu_quantile, reference_measure
from mvrisk.quantile import arrangement_sum

ref = reference_measure("grid", 16, 2)
U = ref.points

# Gradients of two convex quadratics evaluated at U
A = np.array([[2.0, 0.5], [0.5, 1.0]])
B = np.array([[1.0, 0.2], [0.2, 0.5]])
X = DiscreteDistribution(U @ A, ref.weights)
Z = DiscreteDistribution((U - U.mean(axis=0)) @ B, ref.weights)
Y = arrangement_sum(X, Z)

q = mu_quantile(Y, ref)
print("quantile of Y is deterministic:", q.is_deterministic(), "| correlation:", round(q.correlation(), 6))

v = is_mu_bl(X, Y, ref, mean_preserving=True)
print("X less dispersed than X + Z:", v.holds.value, "via", v.certificate["method"])

# A rotation added to the quantile is not a gradient
rot = np.stack([U[:, 1], -U[:, 0]], axis=1)
w = is_mu_bl(DiscreteDistribution(3 * U, ref.weights), DiscreteDistribution(3 * U + rot, ref.weights), ref)
print("rotated law:", w.holds.value, "| cycle", w.certificate["violating_cycle"], "slack", w.certificate["cycle_slack"])

# In one dimension the decomposition Y = X + Z can be read off the quantiles
x = DiscreteDistribution([[0.0], [1.0], [3.0]], [0.2, 0.5, 0.3])
y = DiscreteDistribution([[-1.0], [1.0], [5.0]], [0.2, 0.5, 0.3])
print("\n1-D dispersion:", is_bl_less_dispersed_1d(x, y).holds.value)
z, _ = lm_decompose(x, y)
print("recovered Z:", z.points.ravel(), z.weights)
