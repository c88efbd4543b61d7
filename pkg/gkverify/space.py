"""Generalized Riemannian spaces: definition files, metric split and connection.

A space definition is a flat key/value text file::

    # comment
    name = "flat GK1"
    dimension = 4
    domain = [-1, 1]
    exclude = "x1^2 - 0.01"
    g[1][1] = "1"
    g[1][2] = "x3"
    F[1][2] = "-1"
    connection[1][2][2] = "x1"

Indices are 1-based. Unspecified off-diagonal ``g`` components and all
unspecified ``F``/``connection`` components are 0; a missing diagonal ``g``
component is an error. Any ``connection`` key switches the space to
explicit-connection mode.
"""
import logging
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DefinitionError,
    DimensionError,
    ExpressionSyntaxError,
    SingularMetricError,
)
from .exprdsl import parse_expression
from .tensor import TensorComponents, TensorField, split_sym_antisym

SINGULAR_DET = 1e-12
DEFAULT_DOMAIN = (-1.0, 1.0)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Assignment:
    section: Optional[str]
    key: str
    indices: Tuple[int, ...]
    value: str
    line: int

    @property
    def label(self) -> str:
        return self.key + "".join(f"[{i}]" for i in self.indices)


_SECTION_RE = re.compile(r"^\s*\[\s*(?P<name>[A-Za-z_]\w*)\s*\]\s*(?:#.*)?$")
_ASSIGN_RE = re.compile(
    r"^\s*(?P<key>[A-Za-z_]\w*)(?P<indices>(?:\[\s*\d+\s*\])*)\s*=\s*(?P<value>.*?)\s*$"
)
_INDEX_RE = re.compile(r"\[\s*(\d+)\s*\]")


def _strip_value(raw: str, origin: str, line: int) -> str:
    if raw.startswith('"'):
        end = raw.find('"', 1)
        if end < 0:
            raise DefinitionError(f"{origin}:{line}: unterminated string")
        rest = raw[end + 1:].strip()
        if rest and not rest.startswith("#"):
            raise DefinitionError(f"{origin}:{line}: unexpected text after string: {rest!r}")
        return raw[1:end]
    value = raw.split("#", 1)[0].strip()
    if not value:
        raise DefinitionError(f"{origin}:{line}: missing value")
    return value


def read_assignments(text: str, origin: str = "<definition>") -> List[Assignment]:
    """Tokenize a definition file into assignments, tracking ``[section]`` headers."""
    assignments = []
    section = None
    for number, raw_line in enumerate(text.splitlines(), start=1):
        stripped = raw_line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        match = _SECTION_RE.match(raw_line)
        if match:
            section = match.group("name")
            continue
        match = _ASSIGN_RE.match(raw_line)
        if not match:
            raise DefinitionError(f"{origin}:{number}: cannot parse line: {stripped!r}")
        indices = tuple(int(i) for i in _INDEX_RE.findall(match.group("indices")))
        value = _strip_value(match.group("value"), origin, number)
        assignments.append(Assignment(section, match.group("key"), indices, value, number))
    return assignments


def parse_domain(value: str, origin: str, line: int) -> Tuple[float, float]:
    match = re.fullmatch(r"\[\s*([^,\]]+)\s*,\s*([^\]]+)\s*\]", value)
    try:
        if not match:
            raise ValueError(value)
        lo, hi = float(match.group(1)), float(match.group(2))
    except ValueError:
        raise DefinitionError(f"{origin}:{line}: domain must look like [lo, hi], got {value!r}")
    if not lo < hi:
        raise DefinitionError(f"{origin}:{line}: empty domain [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class MetricAt:
    g: np.ndarray
    g_partials: np.ndarray  # [i, j, k] = ∂g_ij / ∂x^k
    g_sym: np.ndarray
    g_antisym: np.ndarray
    g_sym_inverse: np.ndarray
    det: float


@dataclass(frozen=True)
class ConnectionAt:
    gamma: np.ndarray  # [i, j, k] = Γ^i_jk
    gamma_sym: np.ndarray
    torsion: np.ndarray
    gamma_first: Optional[np.ndarray] = None  # [i, j, k] = Γ_i.jk, metric-derived spaces only


@dataclass(frozen=True)
class Deformation:
    """Γ̄ = Γ(base) + ψ⊗δ + δ⊗ψ + ξ, evaluated point-wise."""

    base: "Space"
    psi: TensorField
    xi: TensorField


class Space:
    def __init__(
        self,
        dimension: int,
        metric: Optional[TensorField] = None,
        name: str = "",
        structure: Optional[TensorField] = None,
        connection: Optional[TensorField] = None,
        deformation: Optional[Deformation] = None,
        domain: Tuple[float, float] = DEFAULT_DOMAIN,
        excludes: Sequence[str] = (),
    ):
        if dimension < 2:
            raise DimensionError(f"dimension must be at least 2, got {dimension}")
        for label, fld, valence in (
            ("metric", metric, (0, 2)),
            ("structure", structure, (1, 1)),
            ("connection", connection, (1, 2)),
        ):
            if fld is not None and (fld.dimension, fld.upper, fld.lower) != (dimension,) + valence:
                raise DimensionError(f"{label} field must have valence {valence} in dimension {dimension}")
        if metric is None and connection is None and deformation is None:
            raise DefinitionError("a space needs a metric or an explicit connection")
        self.dimension = dimension
        self.metric = metric
        self.name = name
        self.structure = structure
        self.connection = connection
        self.deformation = deformation
        self.domain = domain
        self.excludes = [parse_expression(text, dimension) for text in excludes]
        self.exclude_texts = list(excludes)

    @property
    def has_explicit_connection(self) -> bool:
        return self.connection is not None or self.deformation is not None

    def __repr__(self) -> str:
        mode = "explicit" if self.has_explicit_connection else "metric"
        return f"Space(name={self.name!r}, N={self.dimension}, connection={mode})"

    def metric_at(self, point: Sequence[float]) -> MetricAt:
        if self.metric is None:
            raise DefinitionError(f"space {self.name!r} has no metric")
        g, dg = self.metric.values_and_partials(point)
        sym, antisym = split_sym_antisym(TensorComponents(self.dimension, 0, 2, g), 0, 1)
        det = float(np.linalg.det(sym.data))
        if abs(det) < SINGULAR_DET:
            raise SingularMetricError(
                f"symmetric metric part is singular at {list(point)} (det = {det:.3e})"
            )
        return MetricAt(
            g=g,
            g_partials=dg,
            g_sym=sym.data,
            g_antisym=antisym.data,
            g_sym_inverse=np.linalg.inv(sym.data),
            det=det,
        )

    def connection_at(self, point: Sequence[float]) -> ConnectionAt:
        gamma_first = None
        if self.deformation is not None:
            gamma = self.deformation.base.connection_at(point).gamma + deformation_at(
                self.deformation, point
            )
        elif self.connection is not None:
            gamma = self.connection.evaluate(point).data
        else:
            metric = self.metric_at(point)
            dg = metric.g_partials
            gamma_first = 0.5 * (
                np.einsum("jik->ijk", dg) - np.einsum("jki->ijk", dg) + np.einsum("ikj->ijk", dg)
            )
            gamma = np.einsum("ip,pjk->ijk", metric.g_sym_inverse, gamma_first)
        sym, torsion = split_sym_antisym(TensorComponents(self.dimension, 1, 2, gamma), 1, 2)
        return ConnectionAt(gamma=gamma, gamma_sym=sym.data, torsion=torsion.data, gamma_first=gamma_first)


def deformation_at(deformation: Deformation, point: Sequence[float]) -> np.ndarray:
    n = deformation.base.dimension
    psi = deformation.psi.evaluate(point).data
    xi = deformation.xi.evaluate(point).data
    delta = np.eye(n)
    # P^i_jk = ψ_j δ^i_k + ψ_k δ^i_j + ξ^i_jk
    return np.einsum("j,ik->ijk", psi, delta) + np.einsum("k,ij->ijk", psi, delta) + xi


_SPACE_KEYS = {"name", "dimension", "domain", "exclude", "g", "F", "connection"}
_FIELD_RANKS = {"g": 2, "F": 2, "connection": 3}


def build_space(assignments: Sequence[Assignment], origin: str = "<definition>") -> Space:
    """Build a Space from the assignments of one definition block."""
    scalars: Dict[str, Assignment] = {}
    excludes: List[str] = []
    components: Dict[str, Dict[Tuple[int, ...], Assignment]] = {"g": {}, "F": {}, "connection": {}}

    for item in assignments:
        where = f"{origin}:{item.line}"
        if item.key not in _SPACE_KEYS:
            raise DefinitionError(f"{where}: unknown key {item.key!r}")
        if item.key in _FIELD_RANKS:
            if len(item.indices) != _FIELD_RANKS[item.key]:
                raise DefinitionError(
                    f"{where}: {item.key} needs {_FIELD_RANKS[item.key]} indices, got {item.label}"
                )
            if item.indices in components[item.key]:
                raise DefinitionError(f"{where}: duplicate component {item.label}")
            components[item.key][item.indices] = item
        elif item.indices:
            raise DefinitionError(f"{where}: {item.key} takes no indices")
        elif item.key == "exclude":
            excludes.append(item.value)
        else:
            if item.key in scalars:
                raise DefinitionError(f"{where}: duplicate key {item.key!r}")
            scalars[item.key] = item

    if "dimension" not in scalars:
        raise DefinitionError(f"{origin}: missing `dimension`")
    try:
        dimension = int(scalars["dimension"].value)
    except ValueError:
        raise DefinitionError(f"{origin}:{scalars['dimension'].line}: dimension must be an integer")
    if dimension < 2:
        raise DefinitionError(f"{origin}: dimension must be at least 2, got {dimension}")

    def field_from(key: str, upper: int, lower: int) -> Optional[TensorField]:
        entries = components[key]
        if not entries:
            return None
        texts = {}
        for indices, item in entries.items():
            if not all(1 <= i <= dimension for i in indices):
                raise DefinitionError(
                    f"{origin}:{item.line}: component {item.label} outside 1..{dimension}"
                )
            zero_based = tuple(i - 1 for i in indices)
            try:
                texts[zero_based] = parse_expression(item.value, dimension)
            except ExpressionSyntaxError as e:
                raise DefinitionError(f"{origin}:{item.line}: {item.label}: {e}")
        fld = TensorField.zeros(dimension, upper, lower)
        for index, expr in texts.items():
            fld.components[index] = expr
        return TensorField(dimension, upper, lower, fld.components)

    metric = field_from("g", 0, 2)
    if metric is not None:
        missing = [i + 1 for i in range(dimension) if (i + 1, i + 1) not in components["g"]]
        if missing:
            raise DefinitionError(
                f"{origin}: diagonal metric components g[i][i] missing for i = {missing}"
            )

    domain = DEFAULT_DOMAIN
    if "domain" in scalars:
        domain = parse_domain(scalars["domain"].value, origin, scalars["domain"].line)

    name = scalars["name"].value if "name" in scalars else origin
    structure = field_from("F", 1, 1)
    connection = field_from("connection", 1, 2)
    try:
        space = Space(
            dimension,
            metric=metric,
            name=name,
            structure=structure,
            connection=connection,
            domain=domain,
            excludes=excludes,
        )
    except ExpressionSyntaxError as e:
        raise DefinitionError(f"{origin}: exclude predicate: {e}")
    except DefinitionError as e:
        raise DefinitionError(f"{origin}: {e}")
    logger.debug(f"Loaded space {space!r} from {origin}")
    return space


def load_space(definition_text: str, origin: str = "<definition>") -> Space:
    assignments = read_assignments(definition_text, origin)
    sections = {item.section for item in assignments}
    if sections != {None} and assignments:
        raise DefinitionError(f"{origin}: a space definition has no [section] headers")
    return build_space(assignments, origin)
