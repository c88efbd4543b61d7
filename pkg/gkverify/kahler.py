"""Generalized Kähler spaces of the first kind.

A space with structure F passes when, at every sampled point,

    F^h_p F^p_i = -δ^h_i
    g_(pq) F^p_i F^q_j = g_(ij),  g^ij = g^pq F^i_p F^j_q
    F^h_i|j = 0 in the kind-1 derivative
    F^h_i;j = 0 in the symmetric-part derivative

and then the remaining kinds follow: kind 2 vanishes, kinds 3 and 4
equal twice the structure contracted with the torsion.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .covderiv import ALL_KINDS, CovKind, covariant_derivative, slot_orientations
from .errors import DefinitionError
from .report import PREMISES_FAIL, Residual
from .sampling import map_points
from .space import ConnectionAt, MetricAt, Space
from .tensor import TensorComponents, contract, lower_index, raise_index

DEFAULT_TOLERANCE = 1e-9


@dataclass
class _PointData:
    metric: MetricAt
    connection: ConnectionAt
    F: np.ndarray
    derivs: dict  # CovKind -> F^h_i|j, plus "sym" -> F^h_i;j


@dataclass
class KahlerReport:
    residuals: List[Residual] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.residuals if r.counts)

    def by_name(self, name: str) -> Residual:
        for residual in self.residuals:
            if residual.name == name:
                return residual
        raise KeyError(name)


def _max(values) -> float:
    return float(max(values)) if len(values) else 0.0


class KahlerVerifier:
    def __init__(self, space: Space, tolerance: float = DEFAULT_TOLERANCE, workers: int = 1):
        if space.structure is None:
            raise DefinitionError(f"space {space.name!r} has no structure field F")
        self.space = space
        self.tolerance = tolerance
        self.workers = workers
        self.logger = logging.getLogger(__name__)

    def _at(self, point: np.ndarray) -> _PointData:
        metric = self.space.metric_at(point)
        connection = self.space.connection_at(point)
        F, dF = self.space.structure.values_and_partials(point)
        derivs = {
            kind: covariant_derivative(F, dF, connection.gamma, 1, slot_orientations(kind, 1, 1))
            for kind in ALL_KINDS
        }
        derivs["sym"] = covariant_derivative(
            F, dF, connection.gamma_sym, 1, slot_orientations(CovKind.FIRST, 1, 1)
        )
        return _PointData(metric, connection, F, derivs)

    def _collect(self, points: Sequence[np.ndarray]) -> List[_PointData]:
        self.logger.debug(f"Evaluating structure of {self.space.name!r} at {len(points)} points")
        return map_points(self._at, points, self.workers)

    def _structure_algebra(self, data: List[_PointData]) -> List[Residual]:
        n = self.space.dimension
        eye = np.eye(n)
        eq8, eq9, eq9_raised, anti_lower, anti_upper = [], [], [], [], []
        for d in data:
            F, gs, gi = d.F, d.metric.g_sym, d.metric.g_sym_inverse
            eq8.append(np.max(np.abs(F @ F + eye)))
            eq9.append(np.max(np.abs(F.T @ gs @ F - gs)))
            eq9_raised.append(np.max(np.abs(gi - F @ gi @ F.T)))
            f = TensorComponents(n, 1, 1, F)
            lowered = lower_index(f, 0, gs).data
            raised = raise_index(f, 1, gi).data
            anti_lower.append(np.max(np.abs(lowered + lowered.T)))
            anti_upper.append(np.max(np.abs(raised + raised.T)))
        tol = self.tolerance
        return [
            Residual("almost complex structure", "Eq (8)", _max(eq8), tol),
            Residual("metric compatibility (lower)", "Eq (9)", _max(eq9), tol),
            Residual("metric compatibility (raised)", "Eq (9)", _max(eq9_raised), tol),
            Residual("F_ij antisymmetry", "Eqs (8)-(9)", _max(anti_lower), tol, informational=True),
            Residual("F^ij antisymmetry", "Eqs (8)-(9)", _max(anti_upper), tol, informational=True),
        ]

    def _cov_constancy(self, data: List[_PointData]) -> List[Residual]:
        tol = self.tolerance
        return [
            Residual(
                "kind-1 constancy", "Eq (10)", _max([np.max(np.abs(d.derivs[CovKind.FIRST])) for d in data]), tol
            ),
            Residual(
                "symmetric-part constancy", "Eq (11)", _max([np.max(np.abs(d.derivs["sym"])) for d in data]), tol
            ),
        ]

    def _theorem_1_2(self, data: List[_PointData], premises: List[Residual]) -> List[Residual]:
        tol = self.tolerance
        kind2, kind3, kind4, kind_sum = [], [], [], []
        for d in data:
            torsion = d.connection.torsion
            kind2.append(np.max(np.abs(d.derivs[CovKind.SECOND])))
            # F^h_i|3 j - 2 F^h_p Γv^p_ij
            kind3.append(np.max(np.abs(d.derivs[CovKind.THIRD] - 2.0 * np.einsum("hp,pij->hij", d.F, torsion))))
            # F^h_i|4 j - 2 F^p_i Γv^h_jp
            kind4.append(np.max(np.abs(d.derivs[CovKind.FOURTH] - 2.0 * np.einsum("pi,hjp->hij", d.F, torsion))))
            sym2 = 2.0 * d.derivs["sym"]
            kind_sum.append(
                max(
                    np.max(np.abs(d.derivs[CovKind.FIRST] + d.derivs[CovKind.SECOND] - sym2)),
                    np.max(np.abs(d.derivs[CovKind.THIRD] + d.derivs[CovKind.FOURTH] - sym2)),
                )
            )
        results = [
            Residual("kind-2 derivative vanishes", "Eq (12)", _max(kind2), tol),
            Residual("kind-3 torsion relation", "Eq (12)", _max(kind3), tol),
            Residual("kind-4 torsion relation", "Eq (12)", _max(kind4), tol),
        ]
        failing = [p.label for p in premises if not p.passed]
        if failing:
            for residual in results:
                residual.status = PREMISES_FAIL
                residual.notes.append(f"premises fail: {', '.join(dict.fromkeys(failing))}")
            self.logger.info(f"Kind-2..4 relations gated: premises fail at {failing}")
        results.append(
            Residual("kind-sum identity for F", "Eq (7)", _max(kind_sum), tol, informational=True)
        )
        return results

    def _trace_identities(self, data: List[_PointData]) -> List[Residual]:
        n = self.space.dimension
        torsion_trace, f_trace = [], []
        for d in data:
            t = contract(TensorComponents(n, 1, 2, d.connection.torsion), 0, 2)
            torsion_trace.append(t.max_abs())
            f_trace.append(abs(float(contract(TensorComponents(n, 1, 1, d.F), 0, 1).data)))
        tol = self.tolerance
        return [
            Residual("torsion trace", "Eq (16)", _max(torsion_trace), tol, informational=True),
            Residual("structure trace", "Eq (16)", _max(f_trace), tol, informational=True),
        ]

    def check_structure_algebra(self, points: Sequence[np.ndarray]) -> List[Residual]:
        return self._structure_algebra(self._collect(points))

    def check_cov_constancy(self, points: Sequence[np.ndarray]) -> List[Residual]:
        return self._cov_constancy(self._collect(points))

    def verify_theorem_1_2(self, points: Sequence[np.ndarray]) -> List[Residual]:
        data = self._collect(points)
        premises = self._structure_algebra(data)[:3] + self._cov_constancy(data)
        return self._theorem_1_2(data, premises)

    def check_trace_identities(self, points: Sequence[np.ndarray]) -> List[Residual]:
        return self._trace_identities(self._collect(points))

    def run(self, points: Sequence[np.ndarray]) -> KahlerReport:
        data = self._collect(points)
        algebra = self._structure_algebra(data)
        constancy = self._cov_constancy(data)
        premises = [r for r in algebra + constancy if not r.informational]
        report = KahlerReport(algebra + constancy + self._theorem_1_2(data, premises) + self._trace_identities(data))
        self.logger.info(
            f"Kähler suite for {self.space.name!r}: {'pass' if report.passed else 'fail'} at {len(points)} points"
        )
        return report
