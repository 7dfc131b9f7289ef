import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvrisk.dist import (
    DiscreteDistribution,
    InputError,
    as_reference,
    dirac,
    from_samples,
    law_distance,
    mix_with_dirac,
    mixture,
    parse_csv,
    reference_measure,
    to_csv,
    uniform,
)


class TestFromSamples:
    def test_uniform_default(self):
        F = from_samples([[0], [1]])
        np.testing.assert_array_equal(F.weights, [0.5, 0.5])
        assert F.n == 2 and F.dim == 1

    def test_weights_normalized(self):
        F = from_samples([[0, 0], [1, 2]], weights=[2, 2])
        np.testing.assert_array_equal(F.weights, [0.5, 0.5])

    def test_degenerate_weights(self):
        with pytest.raises(InputError, match="degenerate weights"):
            from_samples([[1]], weights=[0])

    def test_negative_weight(self):
        with pytest.raises(InputError, match="negative weight"):
            from_samples([[1], [2]], weights=[1, -1])

    def test_empty(self):
        with pytest.raises(InputError, match="empty input"):
            from_samples([])

    def test_non_finite(self):
        with pytest.raises(InputError, match="non-finite"):
            from_samples([[np.nan]])

    def test_duplicates_are_kept(self):
        F = from_samples([[1], [1], [2]])
        assert F.n == 3
        assert F.canonical().n == 2

    def test_points_are_read_only(self):
        F = uniform([[0], [1]])
        with pytest.raises(ValueError):
            F.points[0, 0] = 5.0

    def test_weights_must_sum_to_one(self):
        with pytest.raises(InputError):
            DiscreteDistribution([[0], [1]], [0.5, 0.6])


class TestMean:
    def test_examples(self):
        np.testing.assert_allclose(uniform([[0], [1]]).mean(), [0.5])
        np.testing.assert_allclose(uniform([[0, 0], [2, 4]]).mean(), [1, 2])
        np.testing.assert_allclose(dirac([3]).mean(), [3])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.data())
    def test_weighted_arithmetic_mean(self, xs, data):
        ws = data.draw(st.lists(st.floats(0.01, 10), min_size=len(xs), max_size=len(xs)))
        F = from_samples(np.array(xs)[:, None], ws)
        expected = np.dot(xs, ws) / np.sum(ws)
        assert abs(F.mean()[0] - expected) <= 1e-12 * max(1.0, np.max(np.abs(xs)))


class TestMixture:
    def test_idempotent(self):
        F = uniform([[0], [1], [3]])
        M = mixture([F, F], [0.5, 0.5]).canonical()
        np.testing.assert_allclose(M.points, F.canonical().points)
        np.testing.assert_allclose(M.weights, F.canonical().weights)

    def test_two_diracs(self):
        M = mixture([dirac([0]), dirac([1])], [0.25, 0.75])
        np.testing.assert_allclose(M.points.ravel(), [0, 1])
        np.testing.assert_allclose(M.weights, [0.25, 0.75])

    def test_with_dirac(self):
        M = mixture([uniform([[0], [1]]), dirac([0.5])], [0.5, 0.5]).canonical()
        np.testing.assert_allclose(M.points.ravel(), [0, 0.5, 1])
        np.testing.assert_allclose(M.weights, [0.25, 0.5, 0.25])

    def test_dimension_mismatch(self):
        with pytest.raises(InputError, match="dimension"):
            mixture([dirac([0]), dirac([0, 1])], [0.5, 0.5])

    def test_bad_coefficients(self):
        with pytest.raises(InputError):
            mixture([dirac([0]), dirac([1])], [0.5, 0.6])

    def test_mean_is_linear(self):
        rng = np.random.default_rng(4)
        Fs = [from_samples(rng.normal(size=(5, 2))) for _ in range(3)]
        lam = rng.dirichlet(np.ones(3))
        expected = sum(l * F.mean() for l, F in zip(lam, Fs))
        np.testing.assert_allclose(mixture(Fs, lam).mean(), expected, atol=1e-12)

    def test_mix_with_dirac(self):
        M = mix_with_dirac(uniform([[0], [1]]), [2], 0.2)
        np.testing.assert_allclose(M.weights, [0.4, 0.4, 0.2])


class TestReferenceMeasure:
    def test_short_kind_names(self):
        assert reference_measure("sobol", 8, 2).kind is reference_measure("low-discrepancy", 8, 2).kind
        assert reference_measure("iid", 8, 2, seed=1).kind.value == "iid-uniform"

    def test_grid_1d(self):
        ref = reference_measure("grid", 4, 1)
        np.testing.assert_allclose(ref.points.ravel(), [0.125, 0.375, 0.625, 0.875])
        np.testing.assert_allclose(ref.weights, 0.25)

    def test_grid_2d(self):
        ref = reference_measure("grid", 4, 2)
        got = {tuple(p) for p in ref.points}
        assert got == {(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)}

    @pytest.mark.parametrize("kind", ["grid", "low-discrepancy", "iid-uniform"])
    def test_determinism_and_range(self, kind):
        m = 16
        a = reference_measure(kind, m, 2, seed=1)
        b = reference_measure(kind, m, 2, seed=1)
        np.testing.assert_array_equal(a.points, b.points)
        assert a.m == m and np.all((a.points >= 0) & (a.points <= 1))
        np.testing.assert_allclose(a.weights, 1 / m)

    def test_zero_size(self):
        with pytest.raises(InputError):
            reference_measure("grid", 0, 1)

    def test_grid_needs_perfect_power(self):
        with pytest.raises(InputError):
            reference_measure("grid", 5, 2)

    def test_as_reference(self):
        ref = as_reference([[0, 0], [1, 0], [0, 1]])
        assert ref.m == 3 and ref.dim == 2


class TestCsv:
    def test_round_trip(self):
        F = from_samples([[0.1, 2], [3, -4.5]], [1, 3])
        G = parse_csv(to_csv(F))
        np.testing.assert_array_equal(G.points, F.points)
        np.testing.assert_allclose(G.weights, F.weights)

    def test_unweighted(self):
        F = parse_csv("x1\n0\n1\n")
        np.testing.assert_allclose(F.weights, [0.5, 0.5])

    @pytest.mark.parametrize(
        "text, line",
        [
            ("x1,w\n0,1\n1,-1\n", 3),
            ("x1\n0\nabc\n", 3),
            ("x1,x2\n0,1\n2\n", 3),
            ("y1\n0\n", 1),
            ("x1\n", 2),
            ("x1\nnan\n", 2),
        ],
    )
    def test_errors_carry_line(self, text, line):
        with pytest.raises(InputError) as info:
            parse_csv(text)
        assert info.value.line == line


class TestLawDistance:
    def test_univariate_quantile_gap(self):
        assert law_distance(uniform([[0], [1]]), uniform([[1], [0]])) == 0.0
        assert law_distance(uniform([[0], [1]]), uniform([[0], [2]])) == pytest.approx(1.0)

    def test_multivariate(self):
        F = uniform([[0, 0], [1, 1]])
        assert law_distance(F, F.shift([1, 0])) == pytest.approx(1.0)
