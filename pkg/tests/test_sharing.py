import numpy as np
import pytest

from mvrisk.dist import DiscreteDistribution, InputError, reference_measure, uniform
from mvrisk.functionals import DistortionFunction, Expectation, RankDependentUtility, local_utility_rdu_1d
from mvrisk.sharing import Allocation, insurance_premium, parse_allocation_csv, pareto_check
from mvrisk.verdict import Holds, Relation

from _gen import random_dist

REF4 = reference_measure("grid", 4, 1)
Y4 = np.array([1.0, 2.0, 3.0, 4.0])


class TestAllocation:
    def test_parts_must_sum(self):
        w = np.full(2, 0.5)
        a = DiscreteDistribution([[0.0], [1.0]], w)
        with pytest.raises(InputError, match="sum"):
            Allocation((a, a), DiscreteDistribution([[0.0], [1.0]], w))

    def test_csv_round_trip(self):
        al = Allocation.from_parts([[1, 0], [2, 1]], [[0, 0], [1, -1]])
        back = parse_allocation_csv(al.to_csv())
        np.testing.assert_allclose(back.total.points, al.total.points)
        np.testing.assert_allclose(back.parts[1].points, al.parts[1].points)

    @pytest.mark.parametrize(
        "text, line",
        [
            ("y1,a1,b1,w\n1,1,0,1\n2,1,0,1\n", 3),
            ("y1,a1,w\n1,1,1\n", 1),
            ("y1,a1,b1,w\n1,1,0\n", 2),
            ("y1,a1,b1,w\n1,1,0,-1\n", 2),
        ],
    )
    def test_csv_errors(self, text, line):
        with pytest.raises(InputError) as info:
            parse_allocation_csv(text)
        assert info.value.line == line


class TestPareto:
    def test_proportional(self):
        v = pareto_check(Allocation.from_parts(Y4 / 2, Y4 / 2), REF4)
        assert v.holds is Holds.TRUE and v.relation is Relation.PARETO
        assert v.certificate["agree"]

    def test_monotone_split(self):
        a = np.minimum(Y4, 2.5)
        v = pareto_check(Allocation.from_parts(a, Y4 - a), REF4)
        assert v.holds is Holds.TRUE and v.certificate["agree"]

    def test_below_median_split(self):
        a = Y4 * (Y4 < np.median(Y4))
        v = pareto_check(Allocation.from_parts(a, Y4 - a), REF4)
        assert v.holds is Holds.FALSE and v.certificate["agree"]
        i, j = v.certificate["comonotone"]["discordant_pair"]
        assert (a[i] - a[j]) * ((Y4 - a)[i] - (Y4 - a)[j]) < 0

    def test_law_level_dispersion_is_not_enough(self):
        # X_A is BL-less dispersed than Y as a law, yet this split is not comonotone
        a = np.array([1.0, 2.0, 0.0, 0.0])
        v = pareto_check(Allocation.from_parts(a, Y4 - a), REF4)
        assert v.holds is Holds.FALSE
        assert v.certificate["cross_check"]["mu_bl"] is Holds.TRUE
        assert not v.certificate["cross_check"]["split_realizes_decomposition"]
        assert v.certificate["agree"]

    def test_random_2d(self):
        rng = np.random.default_rng(0)
        ref = reference_measure("grid", 16, 2)
        U = ref.points
        for k in range(10):
            perm = rng.permutation(16)
            if k % 2:
                a, b = U @ np.diag(rng.uniform(0.5, 2, 2)), U @ np.diag(rng.uniform(0.5, 2, 2))
            else:
                a, b = rng.normal(size=(16, 2)), rng.normal(size=(16, 2))
            v = pareto_check(Allocation.from_parts(a[perm], b[perm]), ref)
            assert v.certificate["agree"]
            assert v.holds is (Holds.TRUE if k % 2 else Holds.FALSE)


class TestPremium:
    def test_expectation_zero(self):
        rng = np.random.default_rng(1)
        for d in (1, 2):
            F = random_dist(rng, 5, d)
            assert insurance_premium(Expectation(), F) == pytest.approx(0.0, abs=1e-10)

    def test_three_point(self):
        pi = insurance_premium(RankDependentUtility(DistortionFunction.power(2)), uniform([[0], [0.5], [1]]))
        assert pi == pytest.approx(1 / 12, abs=1e-9)

    def test_closed_form_equation(self):
        F = uniform([[0], [0.5], [1]])
        f = DistortionFunction.power(2)
        pi = insurance_premium(RankDependentUtility(f), F)
        U = local_utility_rdu_1d(F, f)
        assert U([0.5 - pi])[0] == pytest.approx(5 / 18, abs=1e-10)

    def test_two_point_is_zero(self):
        pi = insurance_premium(RankDependentUtility(DistortionFunction.power(2)), uniform([[0], [1]]))
        assert pi == pytest.approx(0.0, abs=1e-10)

    def test_nonnegative_and_monotone_in_pessimism(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            F = random_dist(rng, 6)
            pis = [insurance_premium(RankDependentUtility(DistortionFunction.power(p)), F) for p in (1, 2, 3)]
            assert min(pis) >= -1e-10
            assert pis[0] <= pis[1] + 1e-10 <= pis[2] + 2e-10

    def test_no_root(self):
        with pytest.raises(InputError, match="premium outside bracket"):
            insurance_premium(RankDependentUtility(DistortionFunction.power(2)), uniform([[0], [0.5], [1]]), bracket=(0.2, 0.3))

    def test_black_box_functional(self):
        f = DistortionFunction.power(2)
        F = uniform([[0], [0.5], [1]])
        pi = insurance_premium(lambda D: RankDependentUtility(f)(D), F)
        assert pi == pytest.approx(1 / 12, abs=1e-3)

    def test_direction_validation(self):
        with pytest.raises(InputError):
            insurance_premium(Expectation(), random_dist(np.random.default_rng(3), 3, 2), direction=[0, 0])
