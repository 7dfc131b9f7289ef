"""Multivariate risk orders, mu-quantiles and rank-dependent functionals on discrete data."""

from .cyclic import CyclePolicy, check_cyclic_monotone
from .dist import (
    DiscreteDistribution,
    InputError,
    ReferenceMeasure,
    dirac,
    from_samples,
    mixture,
    read_csv,
    reference_measure,
    uniform,
)
from .functionals import (
    ConvexPotential,
    DistortionFunction,
    Expectation,
    LocalUtilityTable,
    MultiRDUSpec,
    MultivariateRDU,
    QuantileWeight,
    RankDependentUtility,
    TestDirection,
    YaariIndependent,
    YaariSpec,
    estimate_local_utility,
    eval_multi_rdu,
    eval_rdu_1d,
    eval_yaari_indep,
    is_concave,
    is_mpir_averse_multi_rdu,
    is_pessimistic,
    local_utility_rdu_1d,
    local_utility_yaari,
    mmpir_aversion_test_1d,
    more_risk_averse_multi_rdu,
    mu_mmpir_aversion_test,
    risk_aversion_probe,
    weak_risk_aversion_multi_rdu,
)
from .orders import (
    FusionStep,
    elementary_fusion,
    fuse,
    is_bl_less_dispersed_1d,
    is_mpir,
    is_mu_bl,
    lm_decompose,
    stochastic_dominance,
    strong_dispersive_check,
)
from .quantile import QuantileMap, is_c_comonotonic, is_mu_comonotonic, mu_quantile, quantile_1d
from .sharing import Allocation, insurance_premium, pareto_check
from .transport import Coupling, OTResult, martingale_coupling, solve_ot, wasserstein1
from .verdict import Holds, OrderVerdict, Relation

__version__ = "0.1.0"
