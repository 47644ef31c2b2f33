import numpy as np
import pytest

from setid.core import (
    DomainError,
    ParameterError,
    PosteriorDraws,
    Sided,
    SphereGrid,
    ThetaBox,
)
from setid.core.setgeom import hj_feasible_interval
from setid.credible import (
    CredibleBand,
    band_row,
    band_to_intervals,
    bcs_for_identified_set,
    bcs_for_theta,
    hj_band_boundary,
    hj_set_boundary,
    hj_support_arcs,
    identified_interval,
    j_statistic,
    j_statistics,
    project_band,
    project_marginal_set,
    sample_theta_posterior,
)
from setid.models import HJModel, IntervalMeanModel, IntervalRegressionModel


@pytest.fixture
def grid():
    return SphereGrid(dim=1)


def band(model, phi, q, n=100, level=0.95):
    return CredibleBand(phi_hat=model.phi(phi), q=q, n=n, level=level)


def test_j_statistic(missing, grid):
    phi_hat = missing.true_phi()
    phi = missing.phi([0.6, 0.5])
    assert j_statistic(missing, phi_hat, phi_hat, 100, grid) == 0.0
    assert j_statistic(missing, phi, phi_hat, 100, grid) == pytest.approx(0.5)
    assert j_statistic(missing, phi, phi_hat, 100, grid, Sided.UPPER) == pytest.approx(0.5)
    assert j_statistic(missing, phi, phi_hat, 100, grid, Sided.LOWER) == pytest.approx(-0.5)


def test_j_statistic_empty_sets(grid):
    model = IntervalMeanModel()
    phi_hat = model.phi([0.0, 1.0])
    assert j_statistic(model, model.phi([1.0, 0.0]), phi_hat, 100, grid) == np.inf
    with pytest.raises(DomainError):
        j_statistic(model, phi_hat, model.phi([1.0, 0.0]), 100, grid)


def test_j_statistics_counts_empty(grid):
    model = IntervalMeanModel()
    rows = np.tile([0.0, 1.0], (10, 1))
    rows[3] = [1.0, 0.0]
    draws = PosteriorDraws(model_type=model.model_type, draws=rows)
    values, excluded = j_statistics(model, draws, model.phi([0.0, 1.0]), 100, grid)
    assert excluded == 1
    assert values[3] == np.inf
    assert np.all(values[np.arange(10) != 3] == 0.0)


def test_band_radius_and_intervals(missing):
    b = band(missing, [0.7, 0.5], 1.0)
    assert b.radius == pytest.approx(0.1)
    inner, outer = band_to_intervals(b, missing)
    assert inner.lo == pytest.approx(0.45)
    assert inner.hi == pytest.approx(0.55)
    assert outer.lo == pytest.approx(0.25)
    assert outer.hi == pytest.approx(0.75)
    inner, outer = band_to_intervals(band(missing, [0.7, 0.5], 2.0), missing)
    assert inner.is_empty
    assert outer.length == pytest.approx(0.7)


def test_band_to_intervals_crossed_bounds():
    model = IntervalMeanModel(extended_support=True)
    inner, outer = band_to_intervals(band(model, [0.6, 0.4], 3.0), model)
    assert inner.is_empty
    assert outer.lo == pytest.approx(0.3)
    assert outer.hi == pytest.approx(0.7)
    with pytest.raises(DomainError):
        band_to_intervals(band(IntervalMeanModel(), [0.6, 0.4], 3.0), IntervalMeanModel())


def test_band_row(missing):
    row = band_row(band(missing, [0.7, 0.5], 2.0), missing)
    assert row["kind"] == "two_sided"
    assert np.isnan(row["lo_inner"]) and np.isnan(row["hi_inner"])
    assert row["lo_outer"] == pytest.approx(0.15)
    assert row["excluded_draws"] == 0


def test_bcs_sandwich(missing, stream):
    data = missing.simulate_dgp(stream.child(0), 500)
    draws = missing.sample_posterior(stream.child(1), data, 500)
    phi_hat = missing.posterior_point_estimate(draws)
    result = bcs_for_identified_set(missing, draws, phi_hat, 500, 0.95, SphereGrid(dim=1))
    assert result.q > 0
    assert result.B == 500
    inner, outer = band_to_intervals(result, missing)
    estimate = identified_interval(missing, phi_hat)
    assert estimate.contains(inner)
    assert outer.contains(estimate)


def test_bcs_quantile_is_nondecreasing_in_level(missing, stream):
    data = missing.simulate_dgp(stream.child(0), 300)
    draws = missing.sample_posterior(stream.child(1), data, 400)
    phi_hat = missing.posterior_point_estimate(draws)
    qs = [
        bcs_for_identified_set(missing, draws, phi_hat, 300, level, SphereGrid(dim=1)).q
        for level in (0.5, 0.8, 0.9, 0.95, 0.99)
    ]
    assert np.all(np.diff(qs) >= 0)


def test_bcs_constant_draws(missing, grid):
    rows = np.tile([0.7, 0.5], (60, 1))
    draws = PosteriorDraws(model_type=missing.model_type, draws=rows)
    result = bcs_for_identified_set(missing, draws, missing.true_phi(), 100, 0.9, grid)
    assert result.q == 0.0


def test_bcs_lower_sided_q_not_negative(missing, grid):
    rows = np.tile([0.6, 0.5], (60, 1))
    draws = PosteriorDraws(model_type=missing.model_type, draws=rows)
    result = bcs_for_identified_set(
        missing, draws, missing.true_phi(), 100, 0.9, grid, Sided.LOWER
    )
    assert result.q == 0.0
    assert result.kind == Sided.LOWER


def test_bcs_arguments(missing, grid):
    draws = PosteriorDraws(model_type=missing.model_type, draws=np.tile([0.7, 0.5], (10, 1)))
    with pytest.raises(ParameterError):
        bcs_for_identified_set(missing, draws, missing.true_phi(), 100, 0.9, grid)
    with pytest.raises(ParameterError):
        bcs_for_identified_set(missing, draws, missing.true_phi(), 100, 1.0, grid, min_draws=1)


def test_bcs_empty_draws(grid):
    model = IntervalMeanModel()
    rows = np.tile([0.0, 1.0], (100, 1))
    rows[0] = [1.0, 0.0]
    draws = PosteriorDraws(model_type=model.model_type, draws=rows)
    result = bcs_for_identified_set(model, draws, model.phi([0.0, 1.0]), 100, 0.95, grid)
    assert result.excluded == 1
    assert np.isfinite(result.q)
    rows[1] = [1.0, 0.0]
    draws = PosteriorDraws(model_type=model.model_type, draws=rows)
    with pytest.raises(DomainError):
        bcs_for_identified_set(model, draws, model.phi([0.0, 1.0]), 100, 0.95, grid)


def test_identified_interval(missing):
    interval = identified_interval(missing, missing.true_phi())
    assert interval.lo == pytest.approx(0.35)
    assert interval.hi == pytest.approx(0.65)
    model = IntervalMeanModel()
    assert identified_interval(model, model.phi([1.0, 0.0])).is_empty
    with pytest.raises(ParameterError):
        identified_interval(HJModel(), HJModel().phi([4.0, 2.0, 2.0]))


def test_bcs_for_theta():
    result = bcs_for_theta(np.arange(1, 101), 0.9)
    assert result.lo == 5.0
    assert result.hi == 95.0
    assert result.as_interval().length == 90.0
    with pytest.raises(ParameterError):
        bcs_for_theta(np.arange(10), 0.0)


def test_sample_theta_posterior(missing, stream):
    data = missing.simulate_dgp(stream.child(0), 200)
    draws = missing.sample_posterior(stream.child(1), data, 100)
    thetas, skipped = sample_theta_posterior(missing, stream.child(2), draws)
    assert thetas.shape == (100, 1)
    assert skipped == 0
    for theta, row in zip(thetas, draws.draws):
        interval = missing.identified_interval(row)
        assert interval.contains(float(theta[0]), tol=1e-12)


def test_sample_theta_posterior_skips_empty(stream):
    model = IntervalMeanModel()
    rows = np.tile([0.0, 1.0], (5, 1))
    rows[2] = [1.0, 0.0]
    draws = PosteriorDraws(model_type=model.model_type, draws=rows)
    thetas, skipped = sample_theta_posterior(model, stream, draws)
    assert skipped == 1
    assert thetas.shape == (4, 1)
    with pytest.raises(DomainError):
        sample_theta_posterior(
            model, stream, PosteriorDraws(model_type=model.model_type, draws=[[1.0, 0.0]])
        )


def test_projection():
    model = IntervalRegressionModel(box=ThetaBox.cube(3, -2.0, 2.0))
    phi = model.true_phi()
    marginal = project_marginal_set(model, phi, 1)
    assert marginal.lo == pytest.approx(0.0, abs=1e-12)
    assert marginal.hi == pytest.approx(5.0 / 3.0)
    outer = project_band(CredibleBand(phi_hat=phi, q=1.0, n=100, level=0.9), model, 1)
    assert outer.lo == pytest.approx(-0.1)
    assert outer.hi == pytest.approx(5.0 / 3.0 + 0.1)
    with pytest.raises(ParameterError):
        project_marginal_set(model, phi, 3)


def test_band_row_projects_for_vector_theta():
    model = IntervalRegressionModel(box=ThetaBox.cube(2, -2.0, 2.0))
    row = band_row(CredibleBand(phi_hat=model.true_phi(), q=1.0, n=100, level=0.9), model)
    assert row["lo_inner"] == pytest.approx(0.1)
    assert row["hi_outer"] == pytest.approx(5.0 / 3.0 + 0.1)


def distance_to_set(model, phi, points, size=8192):
    """max_nu (nu . x - S(nu)) over a fine circle, the distance from x outside the set."""
    angles = np.linspace(-np.pi, np.pi, size, endpoint=False)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    support = model.support_batch(phi, dirs)
    return np.max(points @ dirs.T - support[None, :], axis=1)


def test_hj_set_boundary():
    model = HJModel()
    phi = model.phi([4.0, 2.0, 2.0])
    boundary = hj_set_boundary(model, phi, mu_grid=50)
    assert list(boundary.columns) == ["mu", "sigma2", "edge", "below_zero"]
    assert len(boundary) == 53
    lower = boundary[boundary.edge == "lower"]
    np.testing.assert_allclose(lower["sigma2"], (2 * lower["mu"] - 1) ** 2 + 1)
    np.testing.assert_allclose(boundary[boundary.edge == "upper"]["sigma2"], 6.0)
    np.testing.assert_allclose(boundary.iloc[0][["mu", "sigma2"]], boundary.iloc[-1][["mu", "sigma2"]])
    assert not boundary["below_zero"].any()
    with pytest.raises(DomainError):
        hj_set_boundary(model, model.phi([1.0, 0.0, 10.0]))


def test_hj_set_boundary_clipped_at_zero():
    model = HJModel()
    # sigma^2_phi(mu) = (mu - 1)^2 - 0.5 dips below zero
    phi = np.array([1.0, 1.0, 0.5])
    boundary = hj_set_boundary(model, phi, mu_grid=200)
    assert boundary["sigma2"].min() == 0.0
    assert not boundary["below_zero"].any()
    points = boundary[["mu", "sigma2"]].to_numpy()
    assert np.all(np.abs(distance_to_set(model, phi, points)) <= 1e-4)


def test_hj_band_boundary_at_distance_r():
    model = HJModel()
    phi = model.phi([20.0, 14.0, 10.0])
    band = CredibleBand(phi_hat=phi, q=2.0, n=100, level=0.95)
    assert band.radius == pytest.approx(0.2)
    outer = hj_band_boundary(band, model, 400)
    assert list(outer.columns) == ["mu", "sigma2", "below_zero"]
    points = outer[["mu", "sigma2"]].to_numpy()
    np.testing.assert_allclose(points[0], points[-1])
    distance = distance_to_set(model, phi, points)
    assert np.all(distance <= 0.2 + 1e-9)
    assert np.all(distance >= 0.2 - 1e-4)
    assert outer["sigma2"].max() == pytest.approx(6.2)
    # the parabola bottoms out at (0.7, 0.2), so the offset reaches sigma^2 = 0
    assert outer["sigma2"].min() == pytest.approx(0.0, abs=1e-9)
    interval = hj_feasible_interval(phi.values, model.box)
    assert outer["mu"].min() == pytest.approx(interval.lo - 0.2, abs=1e-3)
    assert outer["mu"].max() == pytest.approx(interval.hi + 0.2, abs=1e-3)


def test_hj_band_boundary_flags_negative_variance():
    model = HJModel()
    phi = model.phi([4.0, 2.0, 1.0])
    outer = hj_band_boundary(CredibleBand(phi_hat=phi, q=1.0, n=100, level=0.9), model)
    assert outer["below_zero"].any()
    assert outer["sigma2"].min() == pytest.approx(-0.1)


def test_hj_support_arcs():
    arcs = hj_support_arcs(11)
    assert arcs.shape == (22, 2)
    np.testing.assert_allclose(np.linalg.norm(arcs, axis=1), 1.0)
    assert np.all(arcs[:11, 0] >= 0)
    assert np.all(arcs[11:, 0] <= 0)
