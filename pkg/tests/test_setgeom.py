import numpy as np
import pytest

from setid.core import (
    DomainError,
    IntervalSet,
    NumericError,
    ParameterError,
    SolveStatus,
    SphereGrid,
    ThetaBox,
    bvm_support_variance,
    contraction,
    envelope,
    hausdorff_interval,
    hausdorff_via_support,
    hj_support,
    linearization_coeffs,
    support_solve,
)
from setid.core.setgeom import hj_feasible_interval, kkt_residuals
from setid.models import HJModel, IntervalMeanModel, MissingDataModel


@pytest.fixture
def hj_box():
    return ThetaBox(lower=[0.0, 0.0], upper=[1.4, 6.0])


def test_hausdorff_interval():
    assert hausdorff_interval(IntervalSet(lo=0.0, hi=1.0), IntervalSet(lo=0.25, hi=1.5)) == 0.5
    assert hausdorff_interval(IntervalSet(lo=0.0, hi=1.0), IntervalSet(lo=0.0, hi=1.0)) == 0.0
    with pytest.raises(DomainError):
        hausdorff_interval(IntervalSet(lo=0.0, hi=1.0), IntervalSet.empty())


def test_envelope_contraction_wrappers():
    interval = IntervalSet(lo=0.35, hi=0.65)
    assert envelope(interval, 0.05).lo == pytest.approx(0.30)
    assert contraction(interval, 0.2).is_empty


def test_hausdorff_via_support(missing):
    grid = SphereGrid(dim=1)
    d = hausdorff_via_support(missing, missing.true_phi(), missing.phi([0.6, 0.5]), grid)
    assert d == pytest.approx(0.05)
    model = IntervalMeanModel()
    with pytest.raises(DomainError):
        hausdorff_via_support(model, model.phi([0.0, 1.0]), model.phi([1.0, 0.0]), grid)


def test_solver_interval(missing):
    result = support_solve(missing, missing.true_phi(), [1.0])
    assert result.value == pytest.approx(0.65, abs=1e-7)
    assert result.status == SolveStatus.CONVERGED
    assert result.active_set == [1]
    assert result.maximizer[0] == pytest.approx(0.65, abs=1e-7)
    np.testing.assert_allclose(result.multipliers, [0.0, 1.0], atol=1e-6)


def test_solver_boundary():
    model = IntervalMeanModel(box=ThetaBox.cube(1, -0.5, 0.5))
    result = support_solve(model, model.phi([0.0, 1.0]), [1.0])
    assert result.value == pytest.approx(0.5, abs=1e-7)
    assert result.status == SolveStatus.BOUNDARY


def test_solver_kkt(missing):
    phi = missing.phi([0.6, 0.3])
    result = support_solve(missing, phi, [-1.0])
    residuals = kkt_residuals(missing, phi, [-1.0], result)
    assert residuals["stationarity"] < 1e-6
    assert residuals["slackness"] < 1e-6
    assert residuals["primal"] <= 1e-9


def test_solver_arguments(missing):
    with pytest.raises(ParameterError):
        support_solve(missing, missing.true_phi(), [1.0, 0.0])
    with pytest.raises(ParameterError):
        support_solve(missing, missing.true_phi(), [1.0], tol=0.0)


def test_linearization_missing_data(missing):
    phi = missing.true_phi()
    np.testing.assert_allclose(linearization_coeffs(missing, phi, [1.0]), [-0.5, 0.7], atol=1e-6)
    np.testing.assert_allclose(linearization_coeffs(missing, phi, [-1.0]), [-0.5, -0.7], atol=1e-6)
    assert bvm_support_variance(missing, phi, [1.0]) == pytest.approx(0.2275, rel=1e-5)


def test_linearization_interval_mean():
    model = IntervalMeanModel()
    np.testing.assert_allclose(
        linearization_coeffs(model, model.phi([0.0, 1.0]), [1.0]), [0.0, 1.0], atol=1e-6
    )


def test_hj_feasible_interval(hj_box):
    interval = hj_feasible_interval([1.0, 1.0, 1.5], hj_box)
    assert interval.lo == 0.0
    assert interval.hi == pytest.approx(1.4)
    narrow = hj_feasible_interval([4.0, 2.0, 6.5], hj_box)
    assert narrow.lo == pytest.approx((2.0 - np.sqrt(2.0)) / 4)
    assert narrow.hi == pytest.approx((2.0 + np.sqrt(2.0)) / 4)
    assert hj_feasible_interval([1.0, 0.0, 10.0], hj_box).is_empty
    with pytest.raises(ParameterError):
        hj_feasible_interval([0.0, 1.0, 1.0], hj_box)


def test_hj_support_vectorised(hj_box):
    phi = np.array([4.0, 2.0, 2.0])
    dirs = SphereGrid(dim=2, size=32).directions
    batch = hj_support(phi, dirs, hj_box)
    single = np.array([hj_support(phi, nu, hj_box) for nu in dirs])
    np.testing.assert_allclose(batch, single)
    assert isinstance(hj_support(phi, dirs[0], hj_box), float)


def test_hj_support_matches_solver():
    model = HJModel()
    phi = model.phi([4.0, 2.0, 2.0])
    for nu in SphereGrid(dim=2, size=24).directions:
        assert model.closed_support(phi, nu) == pytest.approx(
            support_solve(model, phi, nu).value, abs=1e-6
        )


def test_hj_support_empty(hj_box):
    out = hj_support([1.0, 0.0, 10.0], np.eye(2), hj_box)
    assert np.all(out == -np.inf)


def test_solver_reports_certified_multipliers(missing):
    result = support_solve(missing, missing.true_phi(), [1.0])
    assert result.has_multipliers
    assert result.slackness < 1e-5
    uncertified = result.model_copy(update={"multipliers": None})
    with pytest.raises(NumericError):
        kkt_residuals(missing, missing.true_phi(), [1.0], uncertified)


def test_empty_solve_has_no_multipliers():
    model = IntervalMeanModel()
    result = support_solve(model, model.phi([1.0, 0.0]), [1.0])
    assert result.status == SolveStatus.INFEASIBLE
    assert not result.has_multipliers


def test_hj_phi_must_be_admissible():
    model = HJModel()
    with pytest.raises(ParameterError):
        model.phi([1.0, 2.0, 1.0])
    assert model.phi([4.0, 2.0, 1.0]).values[2] == 1.0


def test_linearization_raises_where_not_differentiable():
    # sigma^2_phi(mu) = (2 mu - 1)^2 touches sigma^2 = 0 at mu = 1/2
    model = HJModel()
    phi = model.phi([4.0, 2.0, 1.0])
    with pytest.raises(NumericError):
        linearization_coeffs(model, phi, [0.0, -1.0])


def test_linearization_hj_smooth_direction():
    model = HJModel()
    phi = model.phi([4.0, 2.0, 2.0])
    nu = np.array([0.6, -0.8])
    coeffs = linearization_coeffs(model, phi, nu)
    # maximizer mu* = 1/2 + 0.6 / (2 * 0.8 * 4), S = 0.6 mu* - 0.8 sigma^2_phi(mu*)
    mu = 0.5 + 0.6 / 6.4
    np.testing.assert_allclose(coeffs, -0.8 * np.array([mu**2, -2 * mu, 1.0]), atol=1e-5)
    h = 1e-4 * np.array([1.0, -1.0, 2.0])
    fd = model.support(model.phi(phi.values + h), nu) - model.support(phi, nu)
    assert fd == pytest.approx(coeffs @ h, abs=1e-7)
