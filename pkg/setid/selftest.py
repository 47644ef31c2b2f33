"""Quick invariant checks, run by ``setid selftest``."""
import logging
from typing import Callable

import numpy as np

from setid.core.errors import CheckError
from setid.core.grid import SphereGrid
from setid.core.samplekit import (
    EmpiricalSample,
    RngStream,
    draw_dirichlet,
    empirical_quantile,
    std_normal_cdf,
    std_normal_quantile,
)
from setid.core.setgeom import hausdorff_interval, support_solve
from setid.core.types import IntervalSet, SetidBaseModel, Sided
from setid.credible import band_to_intervals, bcs_for_identified_set, identified_interval
from setid.fcs import CriterionConfig, criterion
from setid.models import HJModel, IntervalMeanModel, IntervalRegressionModel, MissingDataModel


logger = logging.getLogger(__name__)

SEED = 20190801


def _require(condition, message: str):
    if not condition:
        raise CheckError(message)


class CheckResult(SetidBaseModel):
    name: str
    passed: bool
    detail: str = ""


def check_dirichlet_simplex() -> str:
    stream = RngStream(seed=SEED)
    for i in range(100):
        w = draw_dirichlet(stream.child(i), np.ones(20))
        _require(np.all(w >= 0) and abs(w.sum() - 1.0) < 1e-12, f"draw {i} off the simplex")
    return "100 draws on the simplex"


def check_normal_inverse() -> str:
    p = np.concatenate([[1e-8, 1 - 1e-8], np.linspace(0.001, 0.999, 999)])
    err = float(np.max(np.abs(std_normal_cdf(std_normal_quantile(p)) - p)))
    _require(err < 1e-12, f"max error {err:.3g}")
    return f"max error {err:.3g}"


def check_quantile_monotone() -> str:
    sample = EmpiricalSample(values=RngStream(seed=SEED).generator.standard_normal(1000))
    qs = [empirical_quantile(sample, p) for p in np.linspace(0.01, 0.99, 99)]
    _require(np.all(np.diff(qs) >= 0), "quantile decreases in p")
    return "nondecreasing on 99 levels"


def check_closed_support() -> str:
    gen = RngStream(seed=SEED).generator
    worst = 0.0
    models = [IntervalMeanModel(), MissingDataModel(), IntervalRegressionModel.model_validate(
        {"box": {"lower": [-2.0, -2.0], "upper": [2.0, 2.0]}}
    )]
    for model in models:
        phi = model.true_phi()
        for nu in SphereGrid(dim=model.dim, size=16).directions:
            closed = model.closed_support(phi, nu)
            solved = support_solve(model, phi, nu).value
            worst = max(worst, abs(closed - solved))
    hj = HJModel()
    phi = hj.true_phi(hj.draw_loadings(RngStream(seed=SEED)))
    for nu in gen.standard_normal((16, 2)):
        nu = nu / np.linalg.norm(nu)
        worst = max(worst, abs(hj.closed_support(phi, nu) - support_solve(hj, phi, nu).value))
    _require(worst < 1e-6, f"largest gap {worst:.3g}")
    return f"largest gap {worst:.3g}"


def check_band_sandwich() -> str:
    model = MissingDataModel()
    stream = RngStream(seed=SEED)
    data = model.simulate_dgp(stream.child(0), 200)
    draws = model.sample_posterior(stream.child(1), data, 200)
    phi_hat = model.posterior_point_estimate(draws, model.default_estimate())
    band = bcs_for_identified_set(model, draws, phi_hat, 200, 0.95, SphereGrid(dim=1), Sided.TWO_SIDED)
    inner, outer = band_to_intervals(band, model)
    estimate = identified_interval(model, phi_hat)
    _require(estimate.contains(inner) and outer.contains(estimate), "band does not sandwich the estimate")
    return f"inner {inner}, estimate {estimate}, outer {outer}"


def check_hausdorff() -> str:
    d = hausdorff_interval(IntervalSet(lo=0.0, hi=1.0), IntervalSet(lo=0.25, hi=1.5))
    _require(abs(d - 0.5) < 1e-15, f"got {d}")
    return "d_H([0, 1], [0.25, 1.5]) = 0.5"


def check_criterion_zero_set() -> str:
    model = MissingDataModel()
    phi = model.true_phi()
    cfg = CriterionConfig()
    inside = criterion(model, np.array([0.5]), phi, cfg)
    outside = criterion(model, np.array([0.9]), phi, cfg)
    _require(inside == 0.0 and outside > 0.0, f"Q(0.5)={inside}, Q(0.9)={outside}")
    return "zero inside, positive outside"


CHECKS: dict[str, Callable[[], str]] = {
    "dirichlet_simplex": check_dirichlet_simplex,
    "normal_inverse": check_normal_inverse,
    "quantile_monotone": check_quantile_monotone,
    "closed_support": check_closed_support,
    "band_sandwich": check_band_sandwich,
    "hausdorff": check_hausdorff,
    "criterion_zero_set": check_criterion_zero_set,
}


def run_selftest() -> list[CheckResult]:
    results = []
    for name, check in CHECKS.items():
        try:
            detail = check()
            results.append(CheckResult(name=name, passed=True, detail=detail))
        except CheckError as err:
            logger.error(f"selftest {name} failed: {err}")
            results.append(CheckResult(name=name, passed=False, detail=str(err)))
    return results
