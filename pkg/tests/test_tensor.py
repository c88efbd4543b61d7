import numpy as np
import pytest

from gkverify.errors import DimensionError, EvaluationDomainError, TensorIndexError
from gkverify.tensor import (
    TensorComponents,
    TensorField,
    contract,
    kronecker,
    lower_index,
    raise_index,
    split_sym_antisym,
)


def standard_structure() -> np.ndarray:
    F = np.zeros((4, 4))
    F[0, 1], F[1, 0], F[2, 3], F[3, 2] = -1.0, 1.0, -1.0, 1.0
    return F


class TestContract:
    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_trace_of_kronecker(self, n):
        assert float(contract(kronecker(n), 0, 1).data) == n

    def test_zero_tensor(self):
        t = TensorComponents(3, 1, 2, np.zeros((3, 3, 3)))
        result = contract(t, 0, 2)
        assert (result.upper, result.lower) == (0, 1)
        np.testing.assert_array_equal(result.data, np.zeros(3))

    def test_diagonal_trace(self):
        t = TensorComponents(3, 1, 1, np.diag([1.0, 2.0, 3.0]))
        assert float(contract(t, 0, 1).data) == 6.0

    def test_connection_trace_uses_last_slot(self, rng):
        data = rng.normal(size=(3, 3, 3))
        result = contract(TensorComponents(3, 1, 2, data), 0, 2)
        np.testing.assert_allclose(result.data, np.einsum("aia->i", data))

    def test_slot_kinds_mismatched(self):
        t = TensorComponents(3, 0, 2, np.eye(3))
        with pytest.raises(TensorIndexError, match="slot kinds mismatched"):
            contract(t, 0, 1)

    def test_slot_out_of_range(self):
        with pytest.raises(TensorIndexError):
            contract(kronecker(3), 0, 2)


class TestSplit:
    def test_arithmetic_example(self):
        t = TensorComponents(2, 0, 2, np.array([[1.0, 4.0], [2.0, 3.0]]))
        sym, antisym = split_sym_antisym(t, 0, 1)
        np.testing.assert_array_equal(sym.data, [[1.0, 3.0], [3.0, 3.0]])
        np.testing.assert_array_equal(antisym.data, [[0.0, 1.0], [-1.0, 0.0]])

    def test_symmetric_input(self, rng):
        a = rng.normal(size=(4, 4))
        _, antisym = split_sym_antisym(TensorComponents(4, 0, 2, a + a.T), 0, 1)
        assert antisym.max_abs() == 0.0

    def test_antisymmetric_input(self, rng):
        a = rng.normal(size=(4, 4))
        sym, _ = split_sym_antisym(TensorComponents(4, 0, 2, a - a.T), 0, 1)
        assert sym.max_abs() == 0.0

    def test_parts_are_exactly_symmetric_and_antisymmetric(self, rng):
        t = TensorComponents(3, 1, 2, rng.normal(size=(3, 3, 3)) * 10.0 ** rng.integers(-8, 8, size=(3, 3, 3)))
        sym, antisym = split_sym_antisym(t, 1, 2)
        np.testing.assert_array_equal(sym.data, np.swapaxes(sym.data, 1, 2))
        np.testing.assert_array_equal(antisym.data, -np.swapaxes(antisym.data, 1, 2))

    def test_reconstruction_within_two_eps(self, rng):
        eps = np.finfo(float).eps
        for _ in range(20):
            t = TensorComponents(3, 1, 2, rng.normal(size=(3, 3, 3)) * 10.0 ** rng.integers(-8, 8, size=(3, 3, 3)))
            sym, antisym = split_sym_antisym(t, 1, 2)
            bound = 2.0 * eps * np.maximum(np.abs(t.data), np.abs(np.swapaxes(t.data, 1, 2)))
            assert np.all(np.abs((sym + antisym).data - t.data) <= bound)

    def test_reconstruction_is_exact_on_dyadic_values(self, rng):
        t = TensorComponents(4, 0, 2, rng.integers(-64, 64, size=(4, 4)) / 8.0)
        sym, antisym = split_sym_antisym(t, 0, 1)
        np.testing.assert_array_equal((sym + antisym).data, t.data)

    def test_mismatched_slot_kinds(self):
        with pytest.raises(TensorIndexError):
            split_sym_antisym(kronecker(3), 0, 1)


class TestRaiseLower:
    def test_lower_vector(self):
        v = TensorComponents(2, 1, 0, np.array([1.0, 0.0]))
        lowered = lower_index(v, 0, np.diag([2.0, 3.0]))
        assert (lowered.upper, lowered.lower) == (0, 1)
        np.testing.assert_array_equal(lowered.data, [2.0, 0.0])

    def test_structure_with_identity_metric(self):
        F = standard_structure()
        lowered = lower_index(TensorComponents(4, 1, 1, F), 0, np.eye(4)).data
        np.testing.assert_array_equal(lowered, F)
        np.testing.assert_array_equal(lowered, -lowered.T)

    def test_raise_undoes_lower(self, rng):
        g = np.diag([1.0, 2.0, 3.0, 4.0])
        t = TensorComponents(4, 1, 1, rng.normal(size=(4, 4)))
        lowered = lower_index(t, 0, g)
        back = raise_index(lowered, 0, np.linalg.inv(g))
        np.testing.assert_allclose(back.data, t.data, atol=1e-14)

    def test_lower_needs_upper_slot(self):
        with pytest.raises(TensorIndexError):
            lower_index(TensorComponents(2, 0, 2, np.eye(2)), 0, np.eye(2))

    def test_raise_needs_lower_slot(self):
        with pytest.raises(TensorIndexError):
            raise_index(TensorComponents(2, 2, 0, np.eye(2)), 0, np.eye(2))


class TestComponents:
    def test_shape_checked(self):
        with pytest.raises(DimensionError):
            TensorComponents(3, 1, 1, np.zeros((3, 2)))

    def test_entries_finite(self):
        with pytest.raises(EvaluationDomainError):
            TensorComponents(2, 0, 1, np.array([1.0, np.nan]))

    def test_valence_mismatch(self):
        with pytest.raises(TensorIndexError):
            kronecker(3) + TensorComponents(3, 0, 2, np.eye(3))


class TestTensorField:
    def test_missing_components_are_zero(self):
        field = TensorField.from_texts(3, 0, 2, {(0, 1): "x1*x2", (2, 2): "1"})
        values = field.evaluate((2.0, 3.0, 0.0)).data
        expected = np.zeros((3, 3))
        expected[0, 1], expected[2, 2] = 6.0, 1.0
        np.testing.assert_array_equal(values, expected)

    def test_partials_carry_trailing_axis(self):
        field = TensorField.from_texts(2, 1, 1, {(0, 1): "x1^2*x2"})
        values, partials = field.values_and_partials((2.0, 3.0))
        assert partials.shape == (2, 2, 2)
        assert values[0, 1] == 12.0
        np.testing.assert_array_equal(partials[0, 1], [12.0, 4.0])
        assert np.count_nonzero(partials) == 2

    def test_constant_field(self):
        assert TensorField.from_texts(2, 0, 1, {(0,): "3"}).is_constant
        assert not TensorField.from_texts(2, 0, 1, {(0,): "x2"}).is_constant

    def test_texts_keep_source(self):
        field = TensorField.from_texts(2, 0, 1, {(1,): "sin(x1)"})
        assert field.texts() == {(1,): "sin(x1)"}
