import numpy as np
import pytest

from mvrisk.cyclic import CyclePolicy, check_cyclic_monotone, cycle_slack, step_slacks
from mvrisk.functionals import random_spd
from mvrisk.verdict import Holds

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])  # (u1, u2) -> (u2, -u1)


def triangle():
    u = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return u, u @ ROT.T


def potential_is_supporting(u, v, V, tol=1e-9):
    # V(u_j) >= V(u_i) + <v_i, u_j - u_i> for all i, j
    lhs = V[None, :] - V[:, None] - (v[:, None, :] * (u[None, :, :] - u[:, None, :])).sum(axis=2)
    return lhs.min() >= -tol


class TestSlacks:
    def test_rotation_triangle(self):
        u, v = triangle()
        W = step_slacks(u, v)
        assert cycle_slack(W, [0, 1, 2]) + cycle_slack(W, [0, 2, 1]) == pytest.approx(0.0)
        assert min(cycle_slack(W, [0, 1, 2]), cycle_slack(W, [0, 2, 1])) == pytest.approx(-1.0)

    def test_two_cycle_is_monotonicity(self):
        u = np.array([[0.0], [1.0]])
        v = np.array([[1.0], [0.0]])
        assert cycle_slack(step_slacks(u, v), [0, 1]) == pytest.approx(-1.0)


class TestCheck:
    def test_identity(self):
        u = np.random.default_rng(0).normal(size=(20, 2))
        res = check_cyclic_monotone(u, u)
        assert res.holds is Holds.TRUE
        assert potential_is_supporting(u, u, res.potential)

    def test_rotation_rejected_by_short_scan(self):
        u, v = triangle()
        res = check_cyclic_monotone(u, v)
        assert res.holds is Holds.FALSE
        assert res.slack == pytest.approx(-1.0)
        assert cycle_slack(step_slacks(u, v), res.cycle) == pytest.approx(-1.0)

    @pytest.mark.parametrize("m", [16, 64, 150])
    def test_gradient_of_quadratic(self, m):
        rng = np.random.default_rng(m)
        u = rng.uniform(size=(m, 2))
        v = u @ random_spd(2, rng) + 0.3
        res = check_cyclic_monotone(u, v)
        assert res.holds is Holds.TRUE
        assert potential_is_supporting(u, v, res.potential)

    def test_long_cycle_found_by_closure(self):
        # small rotation on many points: short cycles are almost flat
        rng = np.random.default_rng(1)
        u = rng.uniform(size=(80, 2))
        v = u @ (0.05 * ROT).T
        res = check_cyclic_monotone(u, v, CyclePolicy(samples=50))
        assert res.holds is Holds.FALSE
        assert cycle_slack(step_slacks(u, v), res.cycle) < 0

    def test_undetermined_without_exact_closure(self):
        rng = np.random.default_rng(2)
        u = rng.uniform(size=(60, 2))
        v = u @ random_spd(2, rng)
        res = check_cyclic_monotone(u, v, CyclePolicy(samples=200, exact_max_m=0))
        assert res.holds is Holds.UNDETERMINED
        assert res.checked["sampled_cycles"] == 200

    def test_sampled_finds_gross_violation(self):
        rng = np.random.default_rng(3)
        u = rng.uniform(size=(60, 1))
        res = check_cyclic_monotone(u, -u, CyclePolicy(exact_max_m=0))
        assert res.holds is Holds.FALSE
        assert res.method == "sampled cycles"

    def test_univariate_monotone(self):
        x = np.sort(np.random.default_rng(4).normal(size=30))
        assert check_cyclic_monotone(x, np.cumsum(np.abs(x))).holds is Holds.TRUE

    def test_policy_parse(self):
        p = CyclePolicy.parse("10000:5", seed=3)
        assert (p.samples, p.sample_length, p.seed) == (10000, 5, 3)

    def test_certificate_keys(self):
        res = check_cyclic_monotone(*triangle())
        cert = res.certificate()
        assert cert["violating_cycle"] == res.cycle and cert["cycle_slack"] == res.slack
