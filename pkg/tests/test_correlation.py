import numpy as np
import pytest

from citymorph import chatterjee, correlation_matrix, pearson
from citymorph.correlation import ConstantInputError
from _oracles import chatterjee_oracle, pearson_oracle


class TestPearson:
    def test_exact_linear(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)

    def test_exact_antilinear(self):
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_computed(self):
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_constant_input(self):
        with pytest.raises(ConstantInputError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_symmetry_and_affine_invariance(self, rng):
        for _ in range(20):
            x = rng.random(15)
            y = rng.random(15)
            r = pearson(x, y)
            assert pearson(y, x) == pytest.approx(r)
            a, b = float(rng.random() * 5 + 0.1), float(rng.random() * 10 - 5)
            assert pearson(a * x + b, y) == pytest.approx(r)
            assert pearson(-a * x + b, y) == pytest.approx(-r)

    def test_matches_oracle(self, rng):
        for _ in range(20):
            x = rng.random(12)
            y = rng.random(12)
            assert pearson(x, y) == pytest.approx(pearson_oracle(list(x), list(y)), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            pearson([1, 2], [1, 2, 3])


class TestChatterjee:
    def test_identity_five_points(self):
        assert chatterjee([1, 2, 3, 4, 5], [1, 2, 3, 4, 5]) == pytest.approx(0.5)

    def test_decreasing_five_points(self):
        assert chatterjee([1, 2, 3, 4, 5], [5, 4, 3, 2, 1]) == pytest.approx(0.5)

    def test_two_points(self):
        assert chatterjee([1, 2], [7, 3]) == 0.0

    def test_monotone_closed_form(self, rng):
        for n in (2, 5, 10, 100):
            x = np.sort(rng.random(n) * 10)
            x += np.arange(n) * 1e-6  # guarantee no ties
            y = np.exp(x)  # strictly increasing function
            assert chatterjee(x, y) == 1.0 - 3.0 / (n + 1)

    def test_asymmetric_by_design(self, rng):
        x = np.linspace(-3, 3, 41)
        y = x**2  # y is a function of x but not conversely
        assert chatterjee(x, y) > 0.7
        assert chatterjee(y, x) < chatterjee(x, y)

    def test_matches_rank_oracle_tie_free(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 50))
            x = rng.permutation(n).astype(float)
            y = rng.permutation(n).astype(float)
            assert chatterjee(x, y) == chatterjee_oracle(list(x), list(y))

    def test_tie_breaking_is_seeded(self, rng):
        x = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 3.0] * 4)
        y = rng.random(len(x))
        assert chatterjee(x, y, seed=5) == chatterjee(x, y, seed=5)


class TestCorrelationMatrix:
    def test_perfect_dependency_cell(self, rng):
        ca = rng.random(30) * 100
        columns = {"CA": ca, "ND": 2 * ca}
        matrix = correlation_matrix(columns, method="pearson")
        assert matrix.cell("CA", "ND") == pytest.approx(1.0)

    def test_pearson_matrix_symmetric_unit_diagonal(self, rng):
        columns = {name: rng.random(25) for name in ("CA", "NP", "LPI", "ND")}
        matrix = correlation_matrix(columns, method="pearson")
        assert np.allclose(matrix.values, matrix.values.T)
        assert np.allclose(np.diag(matrix.values), 1.0)

    def test_chatterjee_matrix_not_symmetric(self, rng):
        x = np.linspace(-2, 2, 40)
        columns = {"A": x, "B": x**2}
        matrix = correlation_matrix(columns, method="chatterjee", seed=3)
        assert matrix.cell("A", "B") != pytest.approx(matrix.cell("B", "A"))

    def test_constant_column_becomes_missing_cell(self, rng):
        columns = {"A": rng.random(10), "B": np.ones(10)}
        matrix = correlation_matrix(columns, method="pearson")
        assert np.isnan(matrix.cell("A", "B"))
        assert matrix.cell("A", "A") == 1.0

    def test_long_rows_cover_all_pairs(self, rng):
        columns = {name: rng.random(8) for name in ("A", "B", "C")}
        matrix = correlation_matrix(columns)
        rows = matrix.to_long_rows()
        assert len(rows) == 9
        assert {(a, b) for a, b, _, _ in rows} == {(a, b) for a in "ABC" for b in "ABC"}

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="method"):
            correlation_matrix({"A": np.arange(4.0)}, method="kendall")
