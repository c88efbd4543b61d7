"""Geodesic integration and the geodesics-to-geodesics test for a mapping pair.

Geodesics solve x''^i + Γ^i_(jk) x'^j x'^k = 0 with the symmetric connection
part; the torsion drops out of the contraction with x'^j x'^k.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import EvaluationDomainError, GeodesicError, SingularMetricError
from .geomap import MappingPair
from .report import Residual
from .sampling import map_points, sample_points
from .space import Space

DEFECT_FLOOR = 1e-12
TORSION_INVARIANCE_TOLERANCE = 1e-12
DEFAULT_SPEED = 0.5


@dataclass
class GeodesicCurve:
    times: np.ndarray  # (steps + 1,)
    positions: np.ndarray  # (steps + 1, N)
    velocities: np.ndarray  # (steps + 1, N)
    space: Space

    def __len__(self) -> int:
        return len(self.times)


def _acceleration(space: Space, x: np.ndarray, v: np.ndarray, full: bool) -> np.ndarray:
    connection = space.connection_at(x)
    gamma = connection.gamma if full else connection.gamma_sym
    return -np.einsum("ijk,j,k->i", gamma, v, v)


def integrate_geodesic(
    space: Space,
    x0: Sequence[float],
    v0: Sequence[float],
    steps: int,
    h: float,
    use_full_connection: bool = False,
) -> GeodesicCurve:
    """Fixed-step classical RK4 on the first-order system (x, v)."""
    if h <= 0:
        raise GeodesicError(f"step must be positive, got {h}")
    if steps < 1:
        raise GeodesicError(f"steps must be at least 1, got {steps}")
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    if x.shape != (space.dimension,) or v.shape != (space.dimension,):
        raise GeodesicError(f"initial point and velocity must have {space.dimension} components")

    def accel(xs: np.ndarray, vs: np.ndarray) -> np.ndarray:
        return _acceleration(space, xs, vs, use_full_connection)

    positions = np.empty((steps + 1, space.dimension))
    velocities = np.empty((steps + 1, space.dimension))
    positions[0], velocities[0] = x, v
    for n in range(steps):
        try:
            k1x, k1v = v, accel(x, v)
            k2x, k2v = v + 0.5 * h * k1v, accel(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
            k3x, k3v = v + 0.5 * h * k2v, accel(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
            k4x, k4v = v + h * k3v, accel(x + h * k3x, v + h * k3v)
        except (EvaluationDomainError, SingularMetricError) as e:
            raise GeodesicError(f"trajectory left the evaluable domain at step {n}, x = {list(x)}: {e}")
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise GeodesicError(f"non-finite state at step {n + 1}")
        positions[n + 1], velocities[n + 1] = x, v
    times = h * np.arange(steps + 1)
    return GeodesicCurve(times, positions, velocities, space)


def collinearity_defect(r: np.ndarray, v: np.ndarray) -> float:
    """|r⊥| / |r| with r⊥ the part of r orthogonal to v; 0 when r is negligible."""
    speed2 = float(v @ v)
    if speed2 == 0.0:
        raise GeodesicError("zero velocity along the curve")
    norm = float(np.linalg.norm(r))
    if norm <= DEFECT_FLOOR * max(1.0, speed2):
        return 0.0
    perpendicular = r - (float(r @ v) / speed2) * v
    return float(np.linalg.norm(perpendicular)) / norm


def mapping_geodesic_residual(pair: MappingPair, curve: GeodesicCurve) -> np.ndarray:
    """Defect series of a source geodesic read in the target connection."""
    defects = np.empty(len(curve))
    for n, (x, v) in enumerate(zip(curve.positions, curve.velocities)):
        source = pair.source.connection_at(x).gamma_sym
        target = pair.target.connection_at(x).gamma_sym
        # x'' + Γ̄_(jk) x'^j x'^k with x'' = -Γ_(jk) x'^j x'^k
        r = np.einsum("ijk,j,k->i", target - source, v, v)
        defects[n] = collinearity_defect(r, v)
    return defects


@dataclass
class CurveResult:
    x0: np.ndarray
    v0: np.ndarray
    max_defect: float
    torsion_drift: float


class GeodesicTester:
    """Integrates random source geodesics and measures how far the target bends them."""

    def __init__(self, pair: MappingPair, config: Optional[Dict] = None, workers: int = 1):
        settings = dict(config or {})
        self.pair = pair
        self.curves = int(settings.get("curves", 10))
        self.steps = int(settings.get("steps", 1000))
        self.step = float(settings.get("step", 1e-3))
        self.defect_tolerance = float(settings.get("defect_tolerance", 1e-8))
        self.speed = float(settings.get("speed", DEFAULT_SPEED))
        self.workers = workers
        self.logger = logging.getLogger(__name__)

    def initial_conditions(self, seed: int) -> List[np.ndarray]:
        source = self.pair.source
        starts = sample_points(source.dimension, source.domain, self.curves, seed, source.excludes)
        rng = np.random.default_rng(seed + 1)
        conditions = []
        for x0 in starts:
            direction = rng.normal(size=source.dimension)
            v0 = self.speed * direction / np.linalg.norm(direction)
            conditions.append(np.concatenate([x0, v0]))
        return conditions

    def _run_one(self, state: np.ndarray) -> CurveResult:
        n = self.pair.dimension
        x0, v0 = state[:n], state[n:]
        curve = integrate_geodesic(self.pair.source, x0, v0, self.steps, self.step)
        full = integrate_geodesic(self.pair.source, x0, v0, self.steps, self.step, use_full_connection=True)
        defects = mapping_geodesic_residual(self.pair, curve)
        drift = float(np.max(np.abs(full.positions - curve.positions)))
        self.logger.debug(f"Geodesic from {list(x0)}: max defect {defects.max():.3e}")
        return CurveResult(x0, v0, float(defects.max()), drift)

    def run(self, seed: int = 0) -> List[CurveResult]:
        results = map_points(self._run_one, self.initial_conditions(seed), self.workers)
        self.logger.info(
            f"Integrated {len(results)} geodesics of {self.steps} steps (h = {self.step:g})"
        )
        return results

    def residuals(self, results: Sequence[CurveResult]) -> List[Residual]:
        worst = max((r.max_defect for r in results), default=0.0)
        drift = max((r.torsion_drift for r in results), default=0.0)
        defect = Residual("geodesic collinearity defect", "Def 2.1", worst, self.defect_tolerance)
        defect.notes.append(f"{len(results)} curves, {self.steps} RK4 steps of h = {self.step:g}")
        return [
            defect,
            Residual(
                "torsion invariance of trajectories",
                "Def 2.1",
                drift,
                TORSION_INVARIANCE_TOLERANCE,
                informational=True,
            ),
        ]
