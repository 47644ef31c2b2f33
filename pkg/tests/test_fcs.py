import math

import numpy as np
import pytest
from pydantic import ValidationError

from setid.core import IntervalSet, ParameterError, RngStream, ThetaBox
from setid.fcs import (
    CriterionConfig,
    accepted_interval,
    bootstrap_critical_value,
    criterion,
    draw_lattice,
    extend_interval,
    fcs_row,
    project_fcs,
)
from setid.models import IntervalMeanModel, IntervalRegressionModel


@pytest.fixture
def data(missing, stream):
    return missing.simulate_dgp(stream.child(0), 500)


def test_config():
    cfg = CriterionConfig()
    assert cfg.B_boot == 100
    assert cfg.slack(100) == pytest.approx(math.log(100))
    assert CriterionConfig(t_n=2.0).slack(100) == 2.0
    np.testing.assert_array_equal(cfg.weight_vector(3), np.ones(3))
    with pytest.raises(ParameterError):
        CriterionConfig(weights=[1.0]).weight_vector(2)
    with pytest.raises(ValidationError):
        CriterionConfig(B_boot=10)
    with pytest.raises(ValidationError):
        CriterionConfig(sup_method="grid")


def test_criterion_zero_on_set(missing):
    phi = missing.true_phi()
    cfg = CriterionConfig()
    assert criterion(missing, np.array([0.5]), phi, cfg) == 0.0
    assert criterion(missing, np.array([0.9]), phi, cfg) == pytest.approx(0.0625)
    values = criterion(missing, np.array([[0.1], [0.5], [0.9]]), phi, cfg)
    np.testing.assert_allclose(values, [0.0625, 0.0, 0.0625])
    weighted = CriterionConfig(weights=[2.0, 1.0])
    assert criterion(missing, np.array([0.1]), phi, weighted) == pytest.approx(0.125)


def test_criterion_vector_theta():
    model = IntervalRegressionModel(box=ThetaBox.cube(2, -2.0, 2.0))
    phi = model.true_phi()
    assert criterion(model, np.array([1.0, 1.0]), phi, CriterionConfig()) == 0.0
    # theta_1 = 2 exceeds the upper bound 5/3 by 1/3, scaled by phi_2 = 3
    assert criterion(model, np.array([2.0, 1.0]), phi, CriterionConfig()) == pytest.approx(1.0)


def test_accepted_interval(missing):
    lattice = np.linspace(0.0, 1.0, 101)[:, None]
    interval = accepted_interval(missing, lattice, missing.true_phi(), 100, 1e-6, CriterionConfig())
    assert interval.lo == pytest.approx(0.35)
    assert interval.hi == pytest.approx(0.65)
    assert accepted_interval(
        missing, np.array([[0.0], [1.0]]), missing.true_phi(), 100, 1e-6, CriterionConfig()
    ).is_empty


def test_critical_value_deterministic(missing, data, stream):
    cfg = CriterionConfig(B_boot=50, M=30)
    a = bootstrap_critical_value(missing, data, cfg, 0.1, stream.child(1))
    b = bootstrap_critical_value(missing, data, cfg, 0.1, stream.child(1))
    assert a == b
    c_tau, fallback, size = a
    assert c_tau >= 0
    assert not fallback
    assert size == 30


def test_optimized_sup_dominates_lattice(missing, data, stream):
    lattice = missing.box.sample_uniform(stream.child(2).generator, 30)
    c_opt, _, _ = bootstrap_critical_value(
        missing, data, CriterionConfig(B_boot=50), 0.1, stream.child(1), lattice=lattice
    )
    c_lat, _, _ = bootstrap_critical_value(
        missing,
        data,
        CriterionConfig(B_boot=50, sup_method="lattice"),
        0.1,
        stream.child(1),
        lattice=lattice,
    )
    assert c_opt >= c_lat


def test_critical_value_fallback(missing, data, stream):
    cfg = CriterionConfig(B_boot=50, t_n=1e-9, sup_method="lattice")
    lattice = np.array([[0.0], [1.0]])
    c_tau, fallback, size = bootstrap_critical_value(
        missing, data, cfg, 0.1, stream, lattice=lattice
    )
    assert fallback
    assert size == 0
    assert np.isfinite(c_tau)


def test_critical_value_tau(missing, data, stream):
    with pytest.raises(ParameterError):
        bootstrap_critical_value(missing, data, CriterionConfig(B_boot=50), 1.0, stream)


def test_project_fcs(missing, data, stream):
    cfg = CriterionConfig(B_boot=50, M=50)
    result = project_fcs(missing, data, cfg, 0.1, stream.child(1))
    assert not result.is_empty
    assert result.interval.lo < 0.5 < result.interval.hi
    assert result.accepted > 0
    assert result.estimated_set_size > 0
    assert result.M == 50
    assert result.sup_method == "optimize"
    row = fcs_row(result, 0.1, data.n)
    assert row["kind"] == "fcs"
    assert row["level"] == pytest.approx(0.9)
    assert np.isnan(row["lo_inner"])
    assert row["lo_outer"] == result.interval.lo


def test_project_fcs_coordinate(missing, data, stream):
    with pytest.raises(ParameterError):
        project_fcs(missing, data, CriterionConfig(B_boot=50, coordinate=1), 0.1, stream)


def test_lattice_lies_in_estimated_set(stream):
    model = IntervalRegressionModel()
    data = model.simulate_dgp(stream.child(0), 500)
    phi_hat = model.estimate_phi(data)
    lattice, source = draw_lattice(model, phi_hat, CriterionConfig(M=50), stream.child(1))
    assert source == "estimate"
    assert lattice.shape == (50, 10)
    np.testing.assert_allclose(criterion(model, lattice, phi_hat, CriterionConfig()), 0.0, atol=1e-12)
    # uniform draws from the box almost never land in a set of volume share (5/12)^10
    box_lattice, box_source = draw_lattice(
        model, phi_hat, CriterionConfig(M=50, lattice="box"), stream.child(1)
    )
    assert box_source == "box"
    assert model.box.contains(box_lattice)


def test_lattice_falls_back_to_box(stream):
    model = IntervalMeanModel()
    lattice, source = draw_lattice(model, model.phi([1.0, 0.0]), CriterionConfig(M=20), stream)
    assert source == "box"
    assert lattice.shape == (20, 1)


def test_extend_interval_reaches_level_set(missing):
    # sqrt(n) (theta - 0.65)^2 <= c gives theta <= 0.65 + sqrt(c / sqrt(n))
    cfg = CriterionConfig()
    start = np.array([[0.5]])
    interval = extend_interval(
        missing, IntervalSet(lo=0.5, hi=0.5), start, missing.true_phi(), 100, 1.0, cfg
    )
    assert interval.hi == pytest.approx(0.65 + np.sqrt(0.1), abs=1e-6)
    assert interval.lo == pytest.approx(0.35 - np.sqrt(0.1), abs=1e-6)


def test_optimized_projection_contains_lattice_range(missing, data, stream):
    exact = project_fcs(missing, data, CriterionConfig(B_boot=50), 0.1, stream.child(1))
    coarse = project_fcs(
        missing, data, CriterionConfig(B_boot=50, projection="lattice"), 0.1, stream.child(1)
    )
    assert exact.critical_value == coarse.critical_value
    assert exact.interval.lo <= coarse.interval.lo
    assert exact.interval.hi >= coarse.interval.hi
    assert coarse.projection == "lattice"


def test_project_fcs_regression_nonempty():
    model = IntervalRegressionModel()
    stream = RngStream(seed=31)
    data = model.simulate_dgp(stream.child(0), 500)
    cfg = CriterionConfig(B_boot=50, M=50, sup_method="lattice")
    result = project_fcs(model, data, cfg, 0.1, stream.child(1))
    assert not result.fallback
    assert result.lattice == "estimate"
    assert result.estimated_set_size == 50
    assert result.accepted > 0
    assert result.interval.lo <= 0.15
    assert result.interval.hi >= 1.5
