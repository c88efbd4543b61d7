"""The four kinds of covariant derivative over a non-symmetric connection.

Each tensor slot contributes one connection term. The kind decides, slot by
slot, whether the differentiation index m sits last (TRAILING: upper
``Γ^i_pm``, lower ``Γ^p_jm``) or first (LEADING: upper ``Γ^i_mp``, lower
``Γ^p_mj``) in that term:

    kind 1: every slot TRAILING
    kind 2: every slot LEADING
    kind 3: upper TRAILING, lower LEADING
    kind 4: upper LEADING, lower TRAILING

For purely covariant rank-2 tensors kinds 3 and 4 mix the two lower slots
instead: kind 3 is (TRAILING, LEADING), kind 4 is (LEADING, TRAILING).
The differentiation index is always appended as the last lower slot.
"""
from enum import Enum, IntEnum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .space import ConnectionAt, Space
from .tensor import TensorComponents, TensorField


class CovKind(IntEnum):
    FIRST = 1
    SECOND = 2
    THIRD = 3
    FOURTH = 4


class Orientation(Enum):
    TRAILING = "trailing"
    LEADING = "leading"


T, L = Orientation.TRAILING, Orientation.LEADING

ALL_KINDS = (CovKind.FIRST, CovKind.SECOND, CovKind.THIRD, CovKind.FOURTH)


def slot_orientations(kind: CovKind, upper: int, lower: int) -> Tuple[List[Orientation], List[Orientation]]:
    kind = CovKind(kind)
    if kind == CovKind.FIRST:
        return [T] * upper, [T] * lower
    if kind == CovKind.SECOND:
        return [L] * upper, [L] * lower
    if upper == 0 and lower == 2:
        return [], ([T, L] if kind == CovKind.THIRD else [L, T])
    if kind == CovKind.THIRD:
        return [T] * upper, [L] * lower
    return [L] * upper, [T] * lower


def covariant_derivative(
    values: np.ndarray,
    partials: np.ndarray,
    gamma: np.ndarray,
    upper: int,
    orientations: Tuple[Sequence[Orientation], Sequence[Orientation]],
) -> np.ndarray:
    """∇_m t from component values, their partials and Γ^i_jk, per-slot oriented."""
    upper_orient, lower_orient = orientations
    result = np.array(partials, dtype=float, copy=True)
    for slot in range(values.ndim):
        moved = np.moveaxis(values, slot, 0)
        if slot < upper:
            # + Γ^i_pm t^p  or  + Γ^i_mp t^p
            spec = "ipm,p...->i...m" if upper_orient[slot] is T else "imp,p...->i...m"
            sign = 1.0
        else:
            # - Γ^p_jm t_p  or  - Γ^p_mj t_p
            spec = "pjm,p...->j...m" if lower_orient[slot - upper] is T else "pmj,p...->j...m"
            sign = -1.0
        term = np.einsum(spec, gamma, moved)
        result += sign * np.moveaxis(term, 0, slot)
    return result


def partial_of_field(t: TensorField, point: Sequence[float]) -> TensorComponents:
    _, partials = t.values_and_partials(point)
    return TensorComponents(t.dimension, t.upper, t.lower + 1, partials)


def cov_deriv(
    t: TensorField,
    space: Space,
    kind: CovKind,
    point: Sequence[float],
    connection: Optional[ConnectionAt] = None,
) -> TensorComponents:
    connection = connection or space.connection_at(point)
    values, partials = t.values_and_partials(point)
    data = covariant_derivative(
        values, partials, connection.gamma, t.upper, slot_orientations(kind, t.upper, t.lower)
    )
    return TensorComponents(t.dimension, t.upper, t.lower + 1, data)


def sym_cov_deriv(
    t: TensorField,
    space: Space,
    point: Sequence[float],
    connection: Optional[ConnectionAt] = None,
) -> TensorComponents:
    """The (;) derivative: only the symmetric connection part, so orientation is moot."""
    connection = connection or space.connection_at(point)
    values, partials = t.values_and_partials(point)
    data = covariant_derivative(
        values, partials, connection.gamma_sym, t.upper, slot_orientations(CovKind.FIRST, t.upper, t.lower)
    )
    return TensorComponents(t.dimension, t.upper, t.lower + 1, data)
