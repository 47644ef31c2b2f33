import numpy as np
import pytest
from pydantic import ValidationError

from setid.core import Direction, ParameterError, SphereGrid


def test_dim_one():
    grid = SphereGrid(dim=1)
    np.testing.assert_array_equal(grid.directions, [[1.0], [-1.0]])
    assert len(grid) == 2


@pytest.mark.parametrize("dim,size", [(2, 8), (2, 256), (3, 100), (5, 64)])
def test_unit_norm(dim, size):
    grid = SphereGrid(dim=dim, size=size)
    np.testing.assert_allclose(np.linalg.norm(grid.directions, axis=1), 1.0)
    assert grid.directions.shape[1] == dim
    assert len(grid) >= size


def test_default_sizes():
    assert SphereGrid(dim=2).size == 256
    assert SphereGrid(dim=3).size == 2048
    assert SphereGrid(dim=4).size == 1024


def test_axes_included():
    grid = SphereGrid(dim=3, size=50)
    for index in range(3):
        for sign in (1.0, -1.0):
            row = grid.axis_index(index, sign)
            np.testing.assert_allclose(
                grid.directions[row], Direction.axis(3, index, sign).vector
            )
    with pytest.raises(ParameterError):
        grid.axis_index(3)


def test_circle_has_no_duplicates():
    grid = SphereGrid(dim=2, size=8)
    assert len(grid) == 8
    assert len(np.unique(np.round(grid.directions, 12), axis=0)) == 8


def test_deterministic():
    a = SphereGrid(dim=4, size=32)
    b = SphereGrid(dim=4, size=32)
    np.testing.assert_array_equal(a.directions, b.directions)


def test_explicit_directions():
    grid = SphereGrid(dim=2, directions=[[2.0, 0.0], [0.0, -3.0]])
    np.testing.assert_allclose(grid.directions, [[1.0, 0.0], [0.0, -1.0]])
    assert grid.size == 2
    assert all(isinstance(d, Direction) for d in grid)


def test_invalid():
    with pytest.raises(ValidationError):
        SphereGrid(dim=2, size=1)
    with pytest.raises(ValidationError):
        SphereGrid(dim=0)
