"""Risk attitudes of rank-dependent functionals through their local utilities.

A square distortion gives a concave local utility at every law, hence
aversion to mean-preserving increases in risk. A square-root distortion does
not. The local utility can also be recovered from the functional alone by
mixing in a small point mass.
"""

import numpy as np

from mvrisk import (
    DistortionFunction,
    MultiRDUSpec,
    RankDependentUtility,
    estimate_local_utility,
    is_concave,
    is_mpir_averse_multi_rdu,
    is_pessimistic,
    mmpir_aversion_test_1d,
    reference_measure,
    uniform,
    weak_risk_aversion_multi_rdu,
)
from mvrisk.functionals import standard_test_set

F = uniform([[0.0], [0.5], [1.0]])
for p in (0.5, 2.0):
    f = DistortionFunction.power(p)
    R = RankDependentUtility(f)
    table = R.local_utility(F)
    print(f"f(t) = t^{p}: value={R(F):.6f}, pessimistic={is_pessimistic(f).holds.value}, "
          f"concave local utility={is_concave(table).holds.value}, MMPIR averse={mmpir_aversion_test_1d(R, F).holds.value}")

# Point-mass estimator against the closed form
R = RankDependentUtility(DistortionFunction.power(2))
exact = R.local_utility(F)
for t0 in (1e-2, 1e-3, 1e-4):
    gap = max(abs(estimate_local_utility(R, F, [x], t0) - exact([x])[0]) for x in np.linspace(-0.5, 1.5, 9))
    print(f"t0={t0:.0e}: sup gap {gap:.2e}")

# Multivariate: phi(u) = -u + u0 is risk averse, phi(u) = u is not
ref = reference_measure("grid", 16, 2)
tests = standard_test_set(ref, 20, seed=1)
for name, spec in [("-u + u0", MultiRDUSpec.affine(ref, 1.0, [1.0, 1.0])), ("u", MultiRDUSpec.from_function(ref, lambda u: u))]:
    print(f"phi = {name}: weakly risk averse={weak_risk_aversion_multi_rdu(spec, tests).holds.value}, "
          f"MPIR averse={is_mpir_averse_multi_rdu(spec).holds.value}")
