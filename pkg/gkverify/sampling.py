"""Sample points from a space's domain box and fan work out over them."""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar

import numpy as np

from .errors import DefinitionError, EvaluationDomainError
from .exprdsl import ExpressionTree

logger = logging.getLogger(__name__)

R = TypeVar("R")

MAX_DRAWS_PER_POINT = 100


def _excluded(point: np.ndarray, excludes: Sequence[ExpressionTree]) -> bool:
    for predicate in excludes:
        try:
            if predicate.eval(point) <= 0.0:
                return True
        except EvaluationDomainError:
            return True
    return False


def sample_points(
    dimension: int,
    domain: Tuple[float, float],
    count: int,
    seed: int,
    excludes: Sequence[ExpressionTree] = (),
) -> List[np.ndarray]:
    """Uniform draws from [lo, hi]^N, rejecting points where an exclude predicate is <= 0."""
    rng = np.random.default_rng(seed)
    lo, hi = domain
    points: List[np.ndarray] = []
    draws = 0
    while len(points) < count:
        if draws >= MAX_DRAWS_PER_POINT * max(count, 1):
            raise DefinitionError(
                f"exclude predicates reject almost all of [{lo}, {hi}]^{dimension} "
                f"({len(points)} of {count} points after {draws} draws)"
            )
        point = rng.uniform(lo, hi, size=dimension)
        draws += 1
        if not _excluded(point, excludes):
            points.append(point)
    if draws > count:
        logger.debug(f"Sampling rejected {draws - count} of {draws} draws")
    return points


def map_points(fn: Callable[[np.ndarray], R], points: Sequence[np.ndarray], workers: int = 1) -> List[R]:
    """Apply fn to every point, concurrently when workers > 1; results keep input order."""
    if workers <= 1 or len(points) <= 1:
        return [fn(point) for point in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, points))
