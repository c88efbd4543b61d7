import numpy as np
import pytest

from gkverify.errors import DefinitionError
from gkverify.exprdsl import parse_expression
from gkverify.sampling import map_points, sample_points


def test_points_in_box_and_reproducible():
    first = sample_points(3, (-0.5, 2.0), 20, seed=4)
    second = sample_points(3, (-0.5, 2.0), 20, seed=4)
    assert len(first) == 20
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)
        assert a.shape == (3,)
        assert np.all((a >= -0.5) & (a <= 2.0))


def test_different_seeds_differ():
    assert not np.array_equal(sample_points(2, (0, 1), 1, 0)[0], sample_points(2, (0, 1), 1, 1)[0])


def test_excludes_reject_points():
    excludes = [parse_expression("x1", 2)]
    points = sample_points(2, (-1.0, 1.0), 30, seed=0, excludes=excludes)
    assert all(p[0] > 0 for p in points)


def test_exclude_domain_error_rejects():
    excludes = [parse_expression("sqrt(x1)", 2)]
    points = sample_points(2, (-1.0, 1.0), 10, seed=0, excludes=excludes)
    assert all(p[0] > 0 for p in points)


def test_gives_up_when_everything_is_excluded():
    with pytest.raises(DefinitionError, match="reject"):
        sample_points(2, (-1.0, 1.0), 5, seed=0, excludes=[parse_expression("-1", 2)])


@pytest.mark.parametrize("workers", [1, 4])
def test_map_points_keeps_order(workers):
    points = [np.array([float(i)]) for i in range(25)]
    assert map_points(lambda p: float(p[0]) * 2, points, workers) == [2.0 * i for i in range(25)]
