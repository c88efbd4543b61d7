"""Dense point-wise tensor components and fields.

Components are stored as numpy arrays of shape ``(N,) * (p + q)`` with the
``p`` upper indices first. Raising and lowering always go through the
symmetric part of the metric and its inverse.
"""
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .errors import DimensionError, EvaluationDomainError, TensorIndexError
from .exprdsl import constant, parse_expression


@dataclass(frozen=True, eq=False)
class TensorComponents:
    dimension: int
    upper: int
    lower: int
    data: np.ndarray

    def __post_init__(self):
        expected = (self.dimension,) * (self.upper + self.lower)
        if self.data.shape != expected:
            raise DimensionError(f"components have shape {self.data.shape}, expected {expected}")
        if not np.all(np.isfinite(self.data)):
            raise EvaluationDomainError("non-finite tensor component")

    @property
    def rank(self) -> int:
        return self.upper + self.lower

    def __add__(self, other: "TensorComponents") -> "TensorComponents":
        _check_same_valence(self, other)
        return TensorComponents(self.dimension, self.upper, self.lower, self.data + other.data)

    def __sub__(self, other: "TensorComponents") -> "TensorComponents":
        _check_same_valence(self, other)
        return TensorComponents(self.dimension, self.upper, self.lower, self.data - other.data)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0


def _check_same_valence(a: TensorComponents, b: TensorComponents) -> None:
    if (a.dimension, a.upper, a.lower) != (b.dimension, b.upper, b.lower):
        raise TensorIndexError(
            f"valence mismatch: ({a.upper},{a.lower}) in N={a.dimension} "
            f"vs ({b.upper},{b.lower}) in N={b.dimension}"
        )


def kronecker(dimension: int) -> TensorComponents:
    return TensorComponents(dimension, 1, 1, np.eye(dimension))


def _check_axis(t: TensorComponents, axis: int) -> None:
    if not 0 <= axis < t.rank:
        raise TensorIndexError(f"slot {axis} out of range for valence ({t.upper},{t.lower})")


def _is_upper(t: TensorComponents, axis: int) -> bool:
    return axis < t.upper


def contract(t: TensorComponents, upper_slot: int, lower_slot: int) -> TensorComponents:
    """Sum over an upper/lower slot pair; slots are 0-based axes."""
    _check_axis(t, upper_slot)
    _check_axis(t, lower_slot)
    if not (_is_upper(t, upper_slot) and not _is_upper(t, lower_slot)):
        raise TensorIndexError(
            f"slot kinds mismatched: contraction needs an upper and a lower slot, got {upper_slot} and {lower_slot}"
        )
    data = np.trace(t.data, axis1=upper_slot, axis2=lower_slot)
    return TensorComponents(t.dimension, t.upper - 1, t.lower - 1, np.asarray(data))


def split_sym_antisym(
    t: TensorComponents, slot_a: int, slot_b: int
) -> Tuple[TensorComponents, TensorComponents]:
    _check_axis(t, slot_a)
    _check_axis(t, slot_b)
    if slot_a == slot_b or _is_upper(t, slot_a) != _is_upper(t, slot_b):
        raise TensorIndexError(f"slots {slot_a} and {slot_b} must be distinct and of the same kind")
    swapped = np.swapaxes(t.data, slot_a, slot_b)
    # sym is exactly symmetric and antisym exactly antisymmetric; their sum
    # matches t to within 2 eps of max(|t|, |t swapped|)
    sym = 0.5 * (t.data + swapped)
    antisym = 0.5 * (t.data - swapped)
    return (
        TensorComponents(t.dimension, t.upper, t.lower, sym),
        TensorComponents(t.dimension, t.upper, t.lower, antisym),
    )


def lower_index(t: TensorComponents, slot: int, g_sym: np.ndarray) -> TensorComponents:
    """Lower an upper slot with g_sym; the new index becomes the first lower slot."""
    _check_axis(t, slot)
    if not _is_upper(t, slot):
        raise TensorIndexError(f"slot {slot} is not an upper slot")
    moved = np.moveaxis(t.data, slot, 0)
    lowered = np.tensordot(g_sym, moved, axes=([1], [0]))
    # the new index sits at axis 0; place it right after the remaining upper slots
    data = np.moveaxis(lowered, 0, t.upper - 1)
    return TensorComponents(t.dimension, t.upper - 1, t.lower + 1, data)


def raise_index(t: TensorComponents, slot: int, g_sym_inverse: np.ndarray) -> TensorComponents:
    """Raise a lower slot with the inverse of g_sym; the new index becomes the last upper slot."""
    _check_axis(t, slot)
    if _is_upper(t, slot):
        raise TensorIndexError(f"slot {slot} is not a lower slot")
    moved = np.moveaxis(t.data, slot, 0)
    raised = np.tensordot(g_sym_inverse, moved, axes=([1], [0]))
    data = np.moveaxis(raised, 0, t.upper)
    return TensorComponents(t.dimension, t.upper + 1, t.lower - 1, data)


class TensorField:
    """One ExpressionTree per component, laid out like TensorComponents."""

    def __init__(self, dimension: int, upper: int, lower: int, components: np.ndarray):
        expected = (dimension,) * (upper + lower)
        if components.shape != expected:
            raise DimensionError(f"field has shape {components.shape}, expected {expected}")
        self.dimension = dimension
        self.upper = upper
        self.lower = lower
        self.components = components
        self._active = [
            (index, expr) for index, expr in np.ndenumerate(components) if not expr.is_zero
        ]

    @classmethod
    def zeros(cls, dimension: int, upper: int, lower: int) -> "TensorField":
        shape = (dimension,) * (upper + lower)
        components = np.empty(shape, dtype=object)
        for index in np.ndindex(*shape):
            components[index] = constant(0.0, dimension)
        return cls(dimension, upper, lower, components)

    @classmethod
    def from_texts(
        cls, dimension: int, upper: int, lower: int, texts: Dict[Tuple[int, ...], str]
    ) -> "TensorField":
        """Build a field from 0-based index tuples; missing components are 0."""
        field = cls.zeros(dimension, upper, lower)
        components = field.components
        for index, text in texts.items():
            components[index] = parse_expression(text, dimension)
        return cls(dimension, upper, lower, components)

    @property
    def rank(self) -> int:
        return self.upper + self.lower

    @property
    def is_constant(self) -> bool:
        return all(expr.is_constant for _, expr in self._active)

    def evaluate(self, point: Sequence[float]) -> TensorComponents:
        data = np.zeros((self.dimension,) * self.rank)
        for index, expr in self._active:
            data[index] = expr.eval(point)
        return TensorComponents(self.dimension, self.upper, self.lower, data)

    def values_and_partials(self, point: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        """Component values and partials; the partials carry ∂/∂x^m as a trailing axis."""
        shape = (self.dimension,) * self.rank
        values = np.zeros(shape)
        partials = np.zeros(shape + (self.dimension,))
        for index, expr in self._active:
            values[index], partials[index] = expr.eval_with_gradient(point)
        return values, partials

    def texts(self) -> Dict[Tuple[int, ...], str]:
        return {index: str(expr) for index, expr in self._active}

    def map_components(self, fn) -> "TensorField":
        components = np.empty(self.components.shape, dtype=object)
        for index, expr in np.ndenumerate(self.components):
            components[index] = fn(index, expr)
        return TensorField(self.dimension, self.upper, self.lower, components)
