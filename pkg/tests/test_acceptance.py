"""Monte Carlo checks at the design points of the reported studies.

These take minutes, run them with ``pytest --run-slow``.

"""

import numpy as np
import pytest

from setid.core import (
    RngStream,
    Sided,
    SphereGrid,
    ThetaBox,
    bvm_support_variance,
    hausdorff_interval,
    linearization_coeffs,
    std_normal_quantile,
    support_solve,
)
from setid.credible import (
    bcs_for_identified_set,
    bcs_for_theta,
    identified_interval,
    project_marginal_set,
    sample_theta_posterior,
)
from setid.experiments import (
    CoverageConfig,
    HJConfig,
    ProjectionConfig,
    TimingConfig,
    TimingPoint,
    UniformityConfig,
    run_missing_data_coverage,
    run_uniformity_study,
)
from setid.fcs import CriterionConfig, project_fcs
from setid.models import (
    GaussianIntervalModel,
    HJModel,
    IntervalMeanModel,
    IntervalRegressionModel,
    MissingDataModel,
    hj_phi,
)

SLOW = pytest.mark.skipif(
    "not config.getoption('--run-slow')", reason="Only run when --run-slow is given"
)


def models():
    hj = HJModel()
    hj = hj.model_copy(update={"loadings": hj.draw_loadings(RngStream(seed=9))})
    return [
        IntervalMeanModel(),
        MissingDataModel(),
        IntervalRegressionModel(box=ThetaBox.cube(2, -2.0, 2.0)),
        hj,
    ]


def symmetric(gen, size):
    e = gen.uniform(-1, 1, (size, size))
    return (e + e.T) / 2


def perturbed_phi(model, gen, scale=0.02):
    """phi near the truth and, for HJ, the return moments it was computed from.

    HJ phi is perturbed through (m, Sigma) so that it stays admissible.

    """
    if isinstance(model, HJModel):
        m, cov = model.true_moments()
        m = m + scale * gen.uniform(-1, 1, m.size)
        cov = cov + scale * symmetric(gen, m.size)
        return model.phi(hj_phi(m, cov)), (m, cov)
    base = model.true_phi().values
    return model.phi(base + scale * gen.uniform(-1, 1, base.size)), None


def neighbour_phi(model, phi0, moments, gen, size):
    if moments is None:
        return model.phi(phi0.values + random_direction(gen, model.d_phi) * size)
    m, cov = moments
    dcov = symmetric(gen, m.size)
    dcov /= np.linalg.norm(dcov)
    return model.phi(hj_phi(m + size * random_direction(gen, m.size), cov + size * dcov))


def random_direction(gen, dim):
    nu = gen.standard_normal(dim)
    return nu / np.linalg.norm(nu)


@SLOW
@pytest.mark.parametrize(
    "alpha,beta,lo,hi", [(1.0, 1.0, 0.92, 0.97), (0.1, 0.1, 0.92, 0.98), (2.0, 2.0, 0.926, 0.986)]
)
def test_missing_data_coverage(alpha, beta, lo, hi):
    cfg = CoverageConfig(
        seed=20190801, n=[500], priors=[(alpha, beta)], B=1000, replications=500, threads=4
    )
    coverage = run_missing_data_coverage(cfg).frequency("covered_two_sided")
    assert lo <= coverage <= hi


@SLOW
def test_uniformity_missing_data():
    cfg = UniformityConfig(
        seed=1, model=MissingDataModel(), n=100, deltas=[0.0], B=1000, replications=500, threads=4
    )
    report = run_uniformity_study(cfg)
    assert 0.93 <= report.frequency("covered_upper") <= 0.975
    assert report.frequency("inner_empty") >= 0.99


@SLOW
def test_uniformity_gaussian():
    cfg = UniformityConfig(seed=2, n=100, deltas=[0.01], B=1000, replications=500, threads=4)
    assert 0.93 <= run_uniformity_study(cfg).frequency("covered_upper") <= 0.98


def test_projection_truth():
    model = IntervalRegressionModel()
    interval = project_marginal_set(model, model.true_phi(), 0)
    assert abs(interval.lo) <= 1e-9
    assert abs(interval.hi - 5.0 / 3.0) <= 1e-9


@SLOW
def test_projection_endpoints():
    summary = ProjectionConfig(seed=20190801, n=[500], threads=4)()["projection_summary"]
    assert summary.set_lo.iloc[0] == pytest.approx(-0.174, abs=0.06)
    assert summary.set_hi.iloc[0] == pytest.approx(1.844, abs=0.06)


@SLOW
def test_gaussian_quantile_identity():
    n = 100
    model = GaussianIntervalModel()
    stream = RngStream(seed=5)
    data = model.simulate_dgp(stream.child(0), n)
    draws = model.sample_posterior(stream.child(1), data, 100_000)
    phi_hat = model.posterior_point_estimate(draws)
    band = bcs_for_identified_set(model, draws, phi_hat, n, 0.95, SphereGrid(dim=1), Sided.UPPER)
    expected = np.sqrt(n / (1.0 + n)) * std_normal_quantile(np.sqrt(0.95))
    assert band.q == pytest.approx(expected, abs=0.02)


@SLOW
@pytest.mark.parametrize("model", models(), ids=lambda m: m.model_type)
def test_linearization_remainder(model):
    gen = RngStream(seed=11).generator
    for _ in range(100):
        phi0, moments = perturbed_phi(model, gen)
        nu = random_direction(gen, model.dim)
        coeffs = linearization_coeffs(model, phi0, nu)
        s0 = model.support(phi0, nu)
        for size in (1e-2, 1e-3):
            phi1 = neighbour_phi(model, phi0, moments, gen, size)
            h = phi1.values - phi0.values
            step = np.linalg.norm(h)
            assert abs(model.support(phi1, nu) - s0 - coeffs @ h) <= 1e-3 * step + 5 * step**2


@SLOW
def test_bvm_variance():
    n = 2000
    model = MissingDataModel()
    stream = RngStream(seed=13)
    data = model.simulate_dgp(stream.child(0), n)
    draws = model.sample_posterior(stream.child(1), data, 20_000)
    s = np.array([model.closed_support(row, [1.0]) for row in draws.draws])
    expected = bvm_support_variance(model, model.true_phi(), [1.0])
    assert np.var(np.sqrt(n) * s) == pytest.approx(expected, rel=0.15)


@SLOW
@pytest.mark.parametrize("model", models(), ids=lambda m: m.model_type)
def test_solver_matches_closed_forms(model):
    gen = RngStream(seed=17).generator
    for _ in range(100):
        phi = perturbed_phi(model, gen)[0]
        nu = random_direction(gen, model.dim)
        assert support_solve(model, phi, nu).value == pytest.approx(
            model.closed_support(phi, nu), abs=1e-6
        )


@SLOW
def test_hj_solver_matches_grid():
    model = models()[3]
    gen = RngStream(seed=19).generator
    mu = np.linspace(0.0, model.mu_bar, 20001)
    for _ in range(20):
        phi = perturbed_phi(model, gen)[0]
        nu = random_direction(gen, 2)
        lower = np.clip(model.sigma2(phi, mu), 0.0, None)
        feasible = lower <= model.sigma2_bar
        edge = lower if nu[1] < 0 else np.full(mu.shape, model.sigma2_bar)
        oracle = np.max((nu[0] * mu + nu[1] * edge)[feasible])
        assert support_solve(model, phi, nu).value == pytest.approx(oracle, abs=1e-3)


@SLOW
def test_posterior_consistency_rate():
    model = MissingDataModel()
    truth = identified_interval(model, model.true_phi())

    def median_distance(n):
        distances = []
        for r in range(50):
            stream = RngStream(seed=23, stream_id=r)
            data = model.simulate_dgp(stream.child(0), n)
            draws = model.sample_posterior(stream.child(1), data, 200)
            estimate = identified_interval(model, model.posterior_point_estimate(draws))
            distances.append(hausdorff_interval(estimate, truth))
        return np.median(distances)

    assert 1.4 <= median_distance(500) / median_distance(2000) <= 2.8


@SLOW
def test_timing_ratio():
    cfg = TimingConfig(points=[TimingPoint(n=500, B=100, K=100, M=50)], replications=3)
    tables = cfg()
    rows, summary = tables["timing_rows"], tables["timing_summary"]
    assert (rows.fcs_accepted > 0).all()
    assert not rows.fcs_fallback.any()
    assert summary.ratio.iloc[0] >= 10


@SLOW
def test_fcs_contains_theta_interval():
    model = MissingDataModel()
    tau, n = 0.1, 500
    contained = []
    for r in range(50):
        stream = RngStream(seed=31, stream_id=r)
        data = model.simulate_dgp(stream.child(0), n)
        draws = model.sample_posterior(stream.child(1), data, 1000)
        thetas, _ = sample_theta_posterior(model, stream.child(2), draws)
        theta_bcs = bcs_for_theta(thetas[:, 0], 1.0 - tau)
        fcs = project_fcs(model, data, CriterionConfig(), tau, stream.child(3)).interval
        contained.append(fcs.lo <= theta_bcs.lo and fcs.hi >= theta_bcs.hi)
    assert np.mean(contained) >= 0.9


@SLOW
def test_fcs_projection_coverage():
    cfg = ProjectionConfig(
        seed=20190801, n=[500], replications=50, threads=4, fcs=CriterionConfig(M=50)
    )
    coverage = cfg()["projection_coverage"]
    fcs = coverage[coverage.kind == "fcs"]
    assert fcs.coverage.iloc[0] >= 0.85


@SLOW
def test_hj_outer_boundary_coverage():
    tables = HJConfig(seed=29, replications=50, threads=4)()
    assert tables["hj_coverage"].covered.mean() >= 0.9
    support = tables["hj_support"]
    top = support[(support.nu1.abs() < 1e-12) & (support.nu2 == 1.0)]
    assert np.all(top.s_hat == 6.0)
    assert np.all(top.s_true == 6.0)
