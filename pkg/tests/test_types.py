import numpy as np
import pytest
from pydantic import ValidationError

from setid.core import Direction, IntervalSet, ParameterError, ThetaBox


def test_direction_unit_norm():
    d = Direction(vector=[0.0, 1.0])
    assert d.dim == 2
    with pytest.raises(ValidationError):
        Direction(vector=[1.0, 1.0])


def test_direction_from_vector():
    d = Direction.from_vector([3.0, 4.0])
    np.testing.assert_allclose(d.vector, [0.6, 0.8])
    with pytest.raises(ParameterError):
        Direction.from_vector([0.0, 0.0])


def test_direction_axis():
    np.testing.assert_array_equal(Direction.axis(3, 1, -1).vector, [0.0, -1.0, 0.0])


def test_box_validation():
    with pytest.raises(ValidationError):
        ThetaBox(lower=[0.0, 1.0], upper=[1.0, 1.0])
    with pytest.raises(ValidationError):
        ThetaBox(lower=[0.0], upper=[1.0, 1.0])


def test_box_sampling(stream):
    box = ThetaBox.cube(3, -2.0, 2.0)
    draws = box.sample_uniform(stream.generator, 500)
    assert draws.shape == (500, 3)
    assert box.contains(draws)
    np.testing.assert_array_equal(box.center, np.zeros(3))


def test_interval_envelope_contraction():
    interval = IntervalSet(lo=0.35, hi=0.65)
    outer = interval.envelope(0.05)
    assert outer.lo == pytest.approx(0.30)
    assert outer.hi == pytest.approx(0.70)
    assert interval.contraction(0.2).is_empty
    inner = interval.contraction(0.1)
    assert inner.lo == pytest.approx(0.45)
    assert inner.hi == pytest.approx(0.55)
    assert interval.envelope(0.0) == interval


def test_interval_contains():
    outer = IntervalSet(lo=0.0, hi=1.0)
    assert outer.contains(IntervalSet(lo=0.2, hi=0.3))
    assert outer.contains(IntervalSet.empty())
    assert not IntervalSet.empty().contains(outer)
    assert outer.contains(1.0)
    assert not outer.contains(1.1)


def test_interval_validation():
    with pytest.raises(ValidationError):
        IntervalSet(lo=1.0, hi=0.0)
    with pytest.raises(ValidationError):
        IntervalSet(lo=1.0)
    with pytest.raises(ParameterError):
        IntervalSet(lo=0.0, hi=1.0).envelope(-0.1)


def test_interval_support():
    interval = IntervalSet(lo=-1.0, hi=2.0)
    assert interval.support(1.0) == 2.0
    assert interval.support(-1.0) == 1.0
    assert IntervalSet.empty().support(1.0) == -np.inf
