"""Geodesic mappings between two spaces sharing one chart.

The deformation tensor P = Γ̄ - Γ of a geodesic mapping has the form

    P^i_jk = δ^i_j ψ_k + δ^i_k ψ_j + ξ^i_jk,    ξ^i_jk = -ξ^i_kj,

with ψ_i = (Γ̄^α_iα - Γ^α_iα) / (N + 1). The condition systems checked
here are what that substitution gives for each kind of covariant derivative
of the target metric ḡ and structure F̄, evaluated in the source connection.

ξ slot patterns per kind (first/second lower slot of ḡ in the (a) terms,
upper/lower slot of F̄ in the (b) terms; ``ik`` = differentiation index
trailing, ``ki`` = leading):

    kind   (a) ξ^α_?? ḡ_αj   (a) ξ^α_?? ḡ_iα   (b) ξ^h_?? F̄^p_i   (b) ξ^p_?? F̄^h_p
    1      ik                jk                pk                 ik
    2      ki                kj                kp                 ki
    3      ik                kj                pk                 ki
    4      ki                jk                kp                 ik

The (a) verdict uses the middle ψ term in the order the substitution
produces, ψ_i ḡ_kj. The transposed reading ψ_i ḡ_jk is evaluated as well and
only shows up as a note on the record; it never decides pass or fail. The
same holds for the kind-4 equitorsion (a) system, which is decided with the
symmetric part ḡ_(jk) and notes the non-symmetric reading.

A pair file holds ``[source]`` and ``[target]`` space blocks and an optional
``[mapping]`` block::

    [mapping]
    direction = backward     # or forward (default)
    psi[1] = "0.3"
    xi[1][2][3] = "x4"

forward: the target connection is the source connection deformed by (ψ, ξ),
with the ``[target]`` metric and structure as overlay. backward: the source
connection is the target connection deformed by (-ψ, -ξ).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .covderiv import ALL_KINDS, CovKind, Orientation, covariant_derivative, slot_orientations
from .errors import DefinitionError, ExpressionSyntaxError, MappingError
from .exprdsl import ExpressionTree, Unary
from .report import GATE_FAIL, Residual
from .sampling import map_points, sample_points
from .space import (
    SINGULAR_DET,
    Assignment,
    ConnectionAt,
    Deformation,
    MetricAt,
    Space,
    build_space,
    read_assignments,
)
from .tensor import TensorComponents, TensorField, contract, kronecker, split_sym_antisym

DEFAULT_TOLERANCE = 1e-9
TRIVIAL_PSI = 1e-12
ANTISYMMETRY_TOLERANCE = 1e-12

THEOREM_LABELS = {1: "Eq (18)", 2: "Eq (20)", 3: "Thm 2.5", 4: "Thm 2.6"}
EQUITORSION_LABELS = {1: "§2.1 kind 1", 2: "§2.1 kind 2", 3: "§2.1 kind 3", 4: "§2.1 kind 4"}

logger = logging.getLogger(__name__)


@dataclass
class MappingSpec:
    psi: TensorField
    xi: TensorField
    direction: str = "forward"


class MappingPair:
    def __init__(self, source: Space, target: Space, mapping: Optional[MappingSpec] = None):
        if source.dimension != target.dimension:
            raise MappingError(
                f"dimension mismatch: source N={source.dimension}, target N={target.dimension}"
            )
        self.source = source
        self.target = target
        self.mapping = mapping

    @property
    def dimension(self) -> int:
        return self.source.dimension

    def __repr__(self) -> str:
        return f"MappingPair({self.source.name!r} -> {self.target.name!r})"


@dataclass(frozen=True)
class MappingData:
    P: np.ndarray
    psi: np.ndarray
    xi: np.ndarray


def deformation_tensor(pair: MappingPair, point: Sequence[float]) -> np.ndarray:
    return pair.target.connection_at(point).gamma - pair.source.connection_at(point).gamma


def _extract(P: np.ndarray) -> MappingData:
    n = P.shape[0]
    trace = contract(TensorComponents(n, 1, 2, P), 0, 2).data  # P^α_iα
    _, xi = split_sym_antisym(TensorComponents(n, 1, 2, P), 1, 2)
    return MappingData(P=P, psi=trace / (n + 1), xi=xi.data)


def extract_psi_xi(pair: MappingPair, point: Sequence[float]) -> MappingData:
    return _extract(deformation_tensor(pair, point))


def geodesic_form(psi: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """δ^i_j ψ_k + δ^i_k ψ_j + ξ^i_jk."""
    delta = kronecker(psi.shape[0]).data
    return np.einsum("ij,k->ijk", delta, psi) + np.einsum("ik,j->ijk", delta, psi) + xi


def negate_field(t: TensorField) -> TensorField:
    return t.map_components(
        lambda index, expr: expr if expr.is_zero else ExpressionTree(Unary("neg", expr.root), expr.dimension)
    )


def build_mapped_connection(
    space: Space,
    psi_field: TensorField,
    xi_field: TensorField,
    overlay: Optional[Space] = None,
    name: Optional[str] = None,
    check_points: int = 10,
) -> Space:
    """A new explicit-connection space with Γ̄ = Γ + ψδ + δψ + ξ.

    Metric, structure, domain and exclusions come from ``overlay`` when given,
    otherwise the domain of ``space`` is kept and no metric is attached.
    """
    n = space.dimension
    if (psi_field.dimension, psi_field.upper, psi_field.lower) != (n, 0, 1):
        raise MappingError(f"psi must be a covector field in dimension {n}")
    if (xi_field.dimension, xi_field.upper, xi_field.lower) != (n, 1, 2):
        raise MappingError(f"xi must be a (1,2) field in dimension {n}")
    if overlay is not None and overlay.dimension != n:
        raise MappingError(f"overlay has dimension {overlay.dimension}, expected {n}")

    count = 1 if xi_field.is_constant else check_points
    points = sample_points(n, space.domain, count, seed=0, excludes=space.excludes)
    for point in points:
        xi = xi_field.evaluate(point).data
        asym = float(np.max(np.abs(xi + np.swapaxes(xi, 1, 2))))
        if asym > ANTISYMMETRY_TOLERANCE:
            raise MappingError(
                f"xi is not antisymmetric in its lower slots (|xi + xi^T| = {asym:.3e} at {list(point)})"
            )
        trace = float(np.max(np.abs(np.einsum("aia->i", xi))))
        if trace > ANTISYMMETRY_TOLERANCE:
            logger.warning(
                f"xi has nonzero trace {trace:.3e} at {list(point)}; psi will not round-trip"
            )
            break

    source = overlay if overlay is not None else space
    return Space(
        n,
        metric=overlay.metric if overlay is not None else None,
        name=name or f"{space.name} deformed by (psi, xi)",
        structure=overlay.structure if overlay is not None else None,
        deformation=Deformation(space, psi_field, xi_field),
        domain=source.domain,
        excludes=source.exclude_texts,
    )


def _mapping_fields(items: Sequence[Assignment], dimension: int, origin: str) -> MappingSpec:
    psi_texts: Dict[Tuple[int, ...], str] = {}
    xi_texts: Dict[Tuple[int, ...], str] = {}
    direction = "forward"
    for item in items:
        where = f"{origin}:{item.line}"
        if item.key == "direction" and not item.indices:
            if item.value not in ("forward", "backward"):
                raise DefinitionError(f"{where}: direction must be forward or backward")
            direction = item.value
            continue
        target, rank = {"psi": (psi_texts, 1), "xi": (xi_texts, 3)}.get(item.key, (None, 0))
        if target is None:
            raise DefinitionError(f"{where}: unknown mapping key {item.key!r}")
        if len(item.indices) != rank or not all(1 <= i <= dimension for i in item.indices):
            raise DefinitionError(f"{where}: bad component {item.label} for dimension {dimension}")
        index = tuple(i - 1 for i in item.indices)
        if index in target:
            raise DefinitionError(f"{where}: duplicate component {item.label}")
        target[index] = item.value
    try:
        psi = TensorField.from_texts(dimension, 0, 1, psi_texts)
        xi = TensorField.from_texts(dimension, 1, 2, xi_texts)
    except ExpressionSyntaxError as e:
        raise DefinitionError(f"{origin}: [mapping]: {e}")
    return MappingSpec(psi, xi, direction)


def load_pair(definition_text: str, origin: str = "<pair>") -> MappingPair:
    blocks: Dict[str, List[Assignment]] = {"source": [], "target": [], "mapping": []}
    for item in read_assignments(definition_text, origin):
        if item.section not in blocks:
            raise DefinitionError(
                f"{origin}:{item.line}: assignment outside [source], [target] or [mapping]"
            )
        blocks[item.section].append(item)

    source = build_space(blocks["source"], f"{origin}[source]") if blocks["source"] else None
    target = build_space(blocks["target"], f"{origin}[target]") if blocks["target"] else None
    if not blocks["mapping"]:
        if source is None or target is None:
            raise DefinitionError(f"{origin}: a pair needs [source] and [target] blocks")
        return MappingPair(source, target)

    anchor = source or target
    if anchor is None:
        raise DefinitionError(f"{origin}: [mapping] needs a [source] or [target] block")
    spec = _mapping_fields(blocks["mapping"], anchor.dimension, f"{origin}[mapping]")
    try:
        if spec.direction == "forward":
            if source is None:
                raise DefinitionError(f"{origin}: forward mapping needs a [source] block")
            target = build_mapped_connection(source, spec.psi, spec.xi, overlay=target)
        else:
            if target is None:
                raise DefinitionError(f"{origin}: backward mapping needs a [target] block")
            source = build_mapped_connection(
                target, negate_field(spec.psi), negate_field(spec.xi), overlay=source,
                name=f"{target.name} deformed by (-psi, -xi)",
            )
    except MappingError as e:
        raise DefinitionError(f"{origin}: {e}")
    return MappingPair(source, target, spec)


def render_pair(
    mapping: MappingSpec,
    source_text: Optional[str] = None,
    target_text: Optional[str] = None,
) -> str:
    """Pair-file text: the given space blocks followed by the mapping block."""
    lines = ["# generated by gk-verify build-pair"]
    for section, text in (("source", source_text), ("target", target_text)):
        if text:
            lines += [f"[{section}]", text.strip(), ""]
    lines += ["[mapping]", f"direction = {mapping.direction}"]
    for (i,), text in sorted(mapping.psi.texts().items()):
        lines.append(f'psi[{i + 1}] = "{text}"')
    for (i, j, k), text in sorted(mapping.xi.texts().items()):
        lines.append(f'xi[{i + 1}][{j + 1}][{k + 1}] = "{text}"')
    return "\n".join(lines) + "\n"


def _pattern(slot: str, orientation: Orientation) -> str:
    return f"{slot}k" if orientation is Orientation.TRAILING else f"k{slot}"


def _flip(orientation: Orientation) -> Orientation:
    return Orientation.LEADING if orientation is Orientation.TRAILING else Orientation.TRAILING


def _psi_terms(psi: np.ndarray, g: np.ndarray, printed: bool = False) -> np.ndarray:
    """2ψ_k g_ij + ψ_i g_kj + ψ_j g_ik; ``printed`` reads the middle term as ψ_i g_jk."""
    middle = np.einsum("i,jk->ijk", psi, g) if printed else np.einsum("i,kj->ijk", psi, g)
    return 2.0 * np.einsum("k,ij->ijk", psi, g) + middle + np.einsum("j,ik->ijk", psi, g)


def _structure_psi_terms(psi: np.ndarray, F: np.ndarray) -> np.ndarray:
    """F̄^h_k ψ_i - δ^h_k F̄^α_i ψ_α, indexed [h, i, k]."""
    delta = kronecker(psi.shape[0]).data
    return np.einsum("hk,i->hik", F, psi) - np.einsum("hk,a,ai->hik", delta, psi, F)


@dataclass
class _MapPoint:
    source: ConnectionAt
    target: ConnectionAt
    metric: MetricAt
    F: np.ndarray
    dF: np.ndarray
    data: MappingData


@dataclass
class TheoremResult:
    kind: CovKind
    residual_a: Residual
    residual_b: Residual
    side_conditions: List[Residual] = field(default_factory=list)
    trivial: bool = False


def _max(values) -> float:
    return float(max(values)) if len(values) else 0.0


class MappingVerifier:
    def __init__(self, pair: MappingPair, tolerance: float = DEFAULT_TOLERANCE, workers: int = 1):
        self.pair = pair
        self.tolerance = tolerance
        self.workers = workers
        self.logger = logging.getLogger(__name__)

    def _require_target_fields(self) -> None:
        target = self.pair.target
        if target.metric is None:
            raise MappingError(f"target {target.name!r} has no metric ḡ")
        if target.structure is None:
            raise MappingError(f"target {target.name!r} has no structure F̄")

    def _at(self, point: np.ndarray) -> _MapPoint:
        source = self.pair.source.connection_at(point)
        target = self.pair.target.connection_at(point)
        metric = self.pair.target.metric_at(point)
        F, dF = self.pair.target.structure.values_and_partials(point)
        return _MapPoint(source, target, metric, F, dF, _extract(target.gamma - source.gamma))

    def _collect(self, points: Sequence[np.ndarray]) -> List[_MapPoint]:
        self._require_target_fields()
        return map_points(self._at, points, self.workers)

    def _data(self, points: Sequence[np.ndarray]) -> List[MappingData]:
        return map_points(lambda p: extract_psi_xi(self.pair, p), points, self.workers)

    def _trivial(self, data: Sequence[MappingData]) -> bool:
        return _max([np.max(np.abs(d.psi)) for d in data]) < TRIVIAL_PSI

    def check_geodesic_form(self, points: Sequence[np.ndarray]) -> List[Residual]:
        data = self._data(points)
        tol = self.tolerance
        form = _max([np.max(np.abs(d.P - geodesic_form(d.psi, d.xi))) for d in data])
        xi_trace = _max([np.max(np.abs(np.einsum("aia->i", d.xi))) for d in data])
        residual = Residual("geodesic deformation form", "Eq (14)", form, tol)
        if self._trivial(data):
            residual.notes.append("trivial mapping: psi = 0")
        return [
            residual,
            Residual("xi trace", "Eq (16)", xi_trace, tol, informational=True),
        ]

    def check_equitorsion(self, points: Sequence[np.ndarray]) -> Residual:
        def torsion_gap(point: np.ndarray) -> float:
            source = self.pair.source.connection_at(point).torsion
            target = self.pair.target.connection_at(point).torsion
            return float(np.max(np.abs(target - source)))

        gap = _max(map_points(torsion_gap, points, self.workers))
        return Residual("equal torsion", "Eq (25)", gap, self.tolerance)

    def check_side_conditions(self, points: Sequence[np.ndarray]) -> List[Residual]:
        return self._side_conditions(self._collect(points))

    def _side_conditions(self, data: List[_MapPoint]) -> List[Residual]:
        eye = np.eye(self.pair.dimension)
        dets, compat, square = [], [], []
        for d in data:
            gs, F = d.metric.g_sym, d.F
            dets.append(abs(d.metric.det))
            # F̄^α_i ḡ_(αj) + F̄^α_j ḡ_(αi)
            mixed = F.T @ gs
            compat.append(np.max(np.abs(mixed + mixed.T)))
            square.append(np.max(np.abs(F @ F + eye)))
        tol = self.tolerance
        return [
            Residual("det of target symmetric metric", "Eq (19)", min(dets) if dets else 0.0, SINGULAR_DET, lower_bound=True),
            Residual("target structure compatibility", "Eq (19)", _max(compat), tol),
            Residual("target structure squares to -1", "Eq (19)", _max(square), tol),
        ]

    def _theorem_at(self, d: _MapPoint, kind: CovKind, transpose_xi: bool) -> Tuple[float, float, float]:
        g, dg = d.metric.g, d.metric.g_partials
        psi, xi = d.data.psi, d.data.xi
        lower = slot_orientations(kind, 0, 2)
        lhs_a = covariant_derivative(g, dg, d.source.gamma, 0, lower)
        ga_partials = 0.5 * (dg - np.swapaxes(dg, 0, 1))
        target_a = covariant_derivative(d.metric.g_antisym, ga_partials, d.target.gamma, 0, lower)
        first, second = lower[1]
        if transpose_xi:
            first = _flip(first)
        xi_a = np.einsum(f"a{_pattern('i', first)},aj->ijk", xi, g) + np.einsum(
            f"a{_pattern('j', second)},ia->ijk", xi, g
        )
        res_a = np.max(np.abs(lhs_a - (target_a + _psi_terms(psi, g) + xi_a)))
        res_a_printed = np.max(np.abs(lhs_a - (target_a + _psi_terms(psi, g, printed=True) + xi_a)))

        mixed = slot_orientations(kind, 1, 1)
        up, low = mixed[0][0], mixed[1][0]
        if transpose_xi:
            up = _flip(up)
        lhs_b = covariant_derivative(d.F, d.dF, d.source.gamma, 1, mixed)
        if kind in (CovKind.FIRST, CovKind.SECOND):
            target_b = np.zeros_like(lhs_b)
        else:
            target_b = covariant_derivative(d.F, d.dF, d.target.gamma, 1, mixed)
        up_pattern = "pk" if up is Orientation.TRAILING else "kp"
        xi_b = -np.einsum(f"h{up_pattern},pi->hik", xi, d.F) + np.einsum(
            f"p{_pattern('i', low)},hp->hik", xi, d.F
        )
        res_b = np.max(np.abs(lhs_b - (target_b + _structure_psi_terms(psi, d.F) + xi_b)))
        return float(res_a), float(res_a_printed), float(res_b)

    def _theorem(self, data: List[_MapPoint], kind: CovKind, transpose_xi: bool = False) -> TheoremResult:
        kind = CovKind(kind)
        values = [self._theorem_at(d, kind, transpose_xi) for d in data]
        res_a = _max([v[0] for v in values])
        res_a_printed = _max([v[1] for v in values])
        res_b = _max([v[2] for v in values])
        label = THEOREM_LABELS[int(kind)]
        residual_a = Residual(f"kind-{int(kind)} metric condition (a)", f"{label} (a)", res_a, self.tolerance)
        residual_b = Residual(f"kind-{int(kind)} structure condition (b)", f"{label} (b)", res_b, self.tolerance)
        if abs(res_a_printed - res_a) > self.tolerance:
            residual_a.notes.append(f"with ψ_i ḡ_jk read as printed: residual {res_a_printed:.3e}")
        if kind in (CovKind.THIRD, CovKind.FOURTH):
            residual_a.notes.append("mixed slot orientation used for the (0,2) derivative")
        if transpose_xi:
            residual_a.notes.append("debug: first xi term slot order transposed")
            residual_b.notes.append("debug: first xi term slot order transposed")
        trivial = self._trivial([d.data for d in data])
        if trivial:
            for residual in (residual_a, residual_b):
                residual.notes.append("trivial mapping: psi = 0")
        return TheoremResult(kind, residual_a, residual_b, self._side_conditions(data), trivial)

    def check_mapping_theorem(
        self, kind: CovKind, points: Sequence[np.ndarray], transpose_xi: bool = False
    ) -> TheoremResult:
        return self._theorem(self._collect(points), kind, transpose_xi)

    def _equitorsion_theorem(self, data: List[_MapPoint], kind: CovKind, gate: Residual) -> TheoremResult:
        kind = CovKind(kind)
        label = EQUITORSION_LABELS[int(kind)]
        residual_a = Residual(f"equitorsion kind-{int(kind)} (a)", f"{label} (a)", None, self.tolerance)
        residual_b = Residual(f"equitorsion kind-{int(kind)} (b)", f"{label} (b)", None, self.tolerance)
        if gate.value is None or gate.value > gate.tolerance:
            for residual in (residual_a, residual_b):
                residual.status = GATE_FAIL
                residual.notes.append(f"not equitorsion: torsion gap {gate.value:.3e}")
            return TheoremResult(kind, residual_a, residual_b)

        res_a, res_a_printed, res_b = [], [], []
        lower = slot_orientations(kind, 0, 2)
        mixed = slot_orientations(kind, 1, 1)
        for d in data:
            gs, psi = d.metric.g_sym, d.data.psi
            dgs = 0.5 * (d.metric.g_partials + np.swapaxes(d.metric.g_partials, 0, 1))
            lhs_a = covariant_derivative(gs, dgs, d.source.gamma, 0, lower)
            res_a.append(np.max(np.abs(lhs_a - _psi_terms(psi, gs))))
            if kind == CovKind.FOURTH:
                printed = (
                    2.0 * np.einsum("k,ij->ijk", psi, gs)
                    + np.einsum("i,jk->ijk", psi, d.metric.g)
                    + np.einsum("j,ik->ijk", psi, gs)
                )
                res_a_printed.append(np.max(np.abs(lhs_a - printed)))
            lhs_b = covariant_derivative(d.F, d.dF, d.source.gamma, 1, mixed)
            rhs_b = _structure_psi_terms(psi, d.F)
            if kind in (CovKind.THIRD, CovKind.FOURTH):
                rhs_b = rhs_b + covariant_derivative(d.F, d.dF, d.target.gamma, 1, mixed)
            res_b.append(np.max(np.abs(lhs_b - rhs_b)))

        residual_a.value = _max(res_a)
        residual_b.value = _max(res_b)
        if res_a_printed and abs(_max(res_a_printed) - residual_a.value) > self.tolerance:
            residual_a.notes.append(
                f"with non-underlined ψ_i ḡ_jk as printed: residual {_max(res_a_printed):.3e}"
            )
        trivial = self._trivial([d.data for d in data])
        if trivial:
            for residual in (residual_a, residual_b):
                residual.notes.append("trivial mapping: psi = 0")
        return TheoremResult(kind, residual_a, residual_b, trivial=trivial)

    def check_equitorsion_theorem(self, kind: CovKind, points: Sequence[np.ndarray]) -> TheoremResult:
        gate = self.check_equitorsion(points)
        return self._equitorsion_theorem(self._collect(points), kind, gate)

    def run(
        self, points: Sequence[np.ndarray], kinds: Sequence[CovKind] = ALL_KINDS, transpose_xi: bool = False
    ) -> List[Residual]:
        """The full mapping suite: geodesic form, side conditions, theorems, equitorsion."""
        residuals = self.check_geodesic_form(points)
        data = self._collect(points)
        residuals += self._side_conditions(data)
        for kind in kinds:
            result = self._theorem(data, kind, transpose_xi)
            residuals += [result.residual_a, result.residual_b]
        gate = self.check_equitorsion(points)
        gate.informational = True
        residuals.append(gate)
        for kind in kinds:
            result = self._equitorsion_theorem(data, kind, gate)
            residuals += [result.residual_a, result.residual_b]
        self.logger.info(
            f"Mapping suite for {self.pair!r}: {sum(1 for r in residuals if r.counts and not r.passed)} failing checks"
        )
        return residuals
