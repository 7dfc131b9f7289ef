import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvrisk.dist import InputError, dirac, from_samples, uniform
from mvrisk.transport import (
    Coupling,
    barycentric_map,
    barycentric_targets,
    cost_matrix,
    dominance_coupling,
    martingale_coupling,
    solve_ot,
    wasserstein1,
)
from mvrisk.verdict import Holds


def brute_force_assignment(C, maximize=True):
    """Best permutation by enumeration (equal-weight, equal-size supports)."""
    n = C.shape[0]
    vals = [sum(C[i, p[i]] for i in range(n)) / n for p in itertools.permutations(range(n))]
    return max(vals) if maximize else min(vals)


class TestSolveOT:
    def test_self_coupling(self):
        F = uniform([[0], [1]])
        res = solve_ot(F, F)
        assert res.value == pytest.approx(0.5)
        np.testing.assert_allclose(res.coupling.matrix, np.diag([0.5, 0.5]))

    def test_two_point_pairing(self):
        F = uniform([[0, 0], [1, 1]])
        G = uniform([[1, 0], [0, 2]])
        res = solve_ot(F, G)
        assert res.value == pytest.approx(1.0)
        np.testing.assert_allclose(res.coupling.matrix, [[0.5, 0], [0, 0.5]])

    def test_self_squared_distance_is_zero(self):
        F = from_samples(np.random.default_rng(0).normal(size=(7, 3)))
        assert solve_ot(F, F, "min-squared-distance").value == pytest.approx(0.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError, match="dimension"):
            solve_ot(dirac([0]), dirac([0, 0]))

    def test_unknown_objective(self):
        with pytest.raises(ValueError):
            cost_matrix(dirac([0]), dirac([0]), "max-entropy")

    def test_against_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            F = uniform(rng.normal(size=(5, 2)))
            G = uniform(rng.normal(size=(5, 2)))
            C = cost_matrix(F, G, "max-correlation")
            assert solve_ot(F, G).value == pytest.approx(brute_force_assignment(C), abs=1e-10)

    def test_duality_and_slackness(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            F = from_samples(rng.normal(size=(6, 2)), rng.uniform(0.1, 1, 6))
            G = from_samples(rng.normal(size=(8, 2)), rng.uniform(0.1, 1, 8))
            res = solve_ot(F, G)
            assert res.value == pytest.approx(res.dual_value, abs=1e-7)
            C = cost_matrix(F, G, "max-correlation")
            S = res.potentials.source_potential[:, None] + res.potentials.target_potential[None, :] - C
            assert S.min() >= -1e-7
            assert np.all(np.abs(S[res.coupling.matrix > 1e-9]) <= 1e-7)
            assert res.coupling.is_valid()

    def test_sorted_matching_in_1d(self):
        rng = np.random.default_rng(2)
        x, y = rng.normal(size=9), rng.normal(size=9)
        res = solve_ot(uniform(x[:, None]), uniform(y[:, None]))
        pairs = sorted((x[i], y[j]) for i, j in res.coupling.support())
        np.testing.assert_allclose([p[1] for p in pairs], np.sort(y))

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        F = uniform(rng.integers(0, 3, size=(8, 2)).astype(float))
        a, b = solve_ot(F, F), solve_ot(F, F)
        np.testing.assert_array_equal(a.coupling.matrix, b.coupling.matrix)

    def test_unpacks_as_triple(self):
        coupling, potentials, value = solve_ot(dirac([1]), dirac([2]))
        assert value == pytest.approx(2.0)
        assert isinstance(coupling, Coupling)


class TestWasserstein:
    def test_examples(self):
        assert wasserstein1(dirac([0]), dirac([1])) == pytest.approx(1.0)
        F = uniform([[0], [1]])
        assert wasserstein1(F, F) == pytest.approx(0.0, abs=1e-12)
        assert wasserstein1(F, uniform([[-1], [2]])) == pytest.approx(1.0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_triangle_and_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        F, G, H = (from_samples(rng.normal(size=(rng.integers(1, 6), 2))) for _ in range(3))
        assert wasserstein1(F, G) == pytest.approx(wasserstein1(G, F), abs=1e-9)
        assert wasserstein1(F, H) <= wasserstein1(F, G) + wasserstein1(G, H) + 1e-9


class TestMartingaleCoupling:
    def test_feasible_kernel(self):
        v = martingale_coupling(uniform([[0], [1]]), uniform([[-1], [2]]))
        assert v.holds is Holds.TRUE
        kernel = v.certificate["coupling"].matrix / 0.5
        np.testing.assert_allclose(kernel, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-9)
        assert v.certificate["martingale_residual"] <= 1e-9

    def test_dirac_source(self):
        G = from_samples([[-1.0], [0.5], [2.5]], [1, 2, 1])
        v = martingale_coupling(dirac(G.mean()), G)
        assert v.holds is Holds.TRUE

    def test_infeasible_with_concave_certificate(self):
        F, G = uniform([[-1], [2]]), uniform([[0], [1]])
        v = martingale_coupling(F, G)
        assert v.holds is Holds.FALSE
        cert = v.certificate["separating_function"]
        assert cert["integral_G"] > cert["integral_F"]
        # re-evaluate the concave function offline from its pieces
        a, h, x = cert["intercepts"], cert["slopes"], cert["anchors"]

        def g(z):
            return min(a[i] + h[i] @ (z - x[i]) for i in range(len(a)))

        assert G.weights @ [g(z) for z in G.points] > F.weights @ [g(z) for z in F.points]

    def test_feasible_implies_equal_means(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            F = from_samples(rng.normal(size=(4, 2)))
            G = from_samples(rng.normal(size=(6, 2)))
            v = martingale_coupling(F, G)
            if v:
                np.testing.assert_allclose(F.mean(), G.mean(), atol=1e-9)


class TestBarycentricMap:
    def test_permutation(self):
        F, G = uniform([[0], [1]]), uniform([[5], [3]])
        c = solve_ot(F, G).coupling
        got = {float(x[0]): float(y[0]) for x, y in barycentric_map(c)}
        assert got == {0.0: 3.0, 1.0: 5.0}

    def test_product_coupling(self):
        F, G = uniform([[0], [1], [2]]), uniform([[1], [4]])
        c = Coupling(F, G, np.outer(F.weights, G.weights))
        np.testing.assert_allclose(barycentric_targets(c), np.full((3, 1), 2.5))

    def test_martingale_reproduces_source(self):
        F = uniform([[0], [1]])
        c = martingale_coupling(F, uniform([[-1], [2]])).certificate["coupling"]
        np.testing.assert_allclose(barycentric_targets(c), F.points, atol=1e-9)


class TestDominance:
    def test_shifted_law_dominates(self):
        F = uniform([[0, 1], [2, 3]])
        assert dominance_coupling(F.shift([1, 1]), F).holds is Holds.TRUE

    def test_incomparable(self):
        v = dominance_coupling(dirac([1, 1]), uniform([[0, 0], [2, 0]]))
        assert v.holds is Holds.FALSE
        cert = v.certificate["separating_function"]
        assert cert["integral_G"] > cert["integral_F"]
