"""Bayesian credible sets for the identified set and for theta.

The band for Theta(phi) is the pair

    Theta(phi_hat)^{-q/sqrt(n)}  and  Theta(phi_hat)^{+q/sqrt(n)}

where q is a posterior quantile of the statistic

    J(phi) = sqrt(n) sup_nu |S_phi(nu) - S_phi_hat(nu)|

(or its one-sided versions), and the sup runs over a SphereGrid.

"""
import logging
import math
from typing import Callable, Optional

import numpy as np
import pandas as pd
from pydantic import Field, model_validator

from setid.core.dpposterior import PosteriorDraws
from setid.core.errors import DomainError, ParameterError
from setid.core.grid import SphereGrid
from setid.core.samplekit import EmpiricalSample, RngStream, empirical_quantile
from setid.core.setgeom import hj_feasible_interval, hj_support_points
from setid.core.types import IntervalSet, PhiVector, SetidBaseModel, Sided
from setid.models.base import ModelSpec
from setid.models.hj import HJModel


logger = logging.getLogger(__name__)

MIN_DRAWS = 50
MAX_EXCLUDED_FRACTION = 0.01


class CredibleBand(SetidBaseModel):
    """Contraction/envelope pair Theta(phi_hat)^{-+q/sqrt(n)}."""

    phi_hat: PhiVector = Field(description="Centre of the band")
    q: float = Field(description="Posterior quantile of J", ge=0)
    n: int = Field(description="Sample size", ge=1)
    level: float = Field(description="Credible level 1 - tau", gt=0, lt=1)
    kind: Sided = Field(Sided.TWO_SIDED, description="Sidedness of J")
    B: int = Field(0, description="Number of posterior draws behind q", ge=0)
    excluded: int = Field(0, description="Draws with an empty identified set", ge=0)

    @property
    def radius(self) -> float:
        """Offset q / sqrt(n)."""
        return self.q / math.sqrt(self.n)

    def __str__(self):
        return (
            f"CredibleBand({self.kind.value}, level={self.level:g}, q={self.q:.6g}, "
            f"n={self.n}, excluded={self.excluded}/{self.B})"
        )


class ThetaCredibleInterval(SetidBaseModel):
    """Equal-tailed credible interval for one coordinate of theta."""

    lo: float = Field(description="Lower end")
    hi: float = Field(description="Upper end")
    level: float = Field(description="Credible level 1 - tau", gt=0, lt=1)

    @model_validator(mode="after")
    def validate_ends(self) -> "ThetaCredibleInterval":
        if self.lo > self.hi:
            raise ValueError(f"lo={self.lo} must not exceed hi={self.hi}")
        return self

    def as_interval(self) -> IntervalSet:
        return IntervalSet(lo=self.lo, hi=self.hi)


def _gap(s_phi: np.ndarray, s_hat: np.ndarray, sided: Sided) -> float:
    diff = s_phi - s_hat
    if sided == Sided.TWO_SIDED:
        return float(np.max(np.abs(diff)))
    elif sided == Sided.UPPER:
        return float(np.max(diff))
    return float(np.max(-diff))


def j_statistic(
    model: ModelSpec,
    phi,
    phi_hat,
    n: int,
    grid: SphereGrid,
    sided: Sided = Sided.TWO_SIDED,
) -> float:
    """sqrt(n) times the largest support-function gap over the grid.

    Returns ``+inf`` when Theta(phi) is empty.

    Raises
    ------
    DomainError
        When Theta(phi_hat) is empty.

    """
    s_hat = model.support_batch(phi_hat, grid.directions)
    if not np.all(np.isfinite(s_hat)):
        raise DomainError(f"Theta(phi_hat) is empty at {phi_hat}")
    s_phi = model.support_batch(phi, grid.directions)
    if not np.all(np.isfinite(s_phi)):
        return np.inf
    return math.sqrt(n) * _gap(s_phi, s_hat, Sided(sided))


def j_statistics(
    model: ModelSpec,
    draws: PosteriorDraws,
    phi_hat,
    n: int,
    grid: SphereGrid,
    sided: Sided = Sided.TWO_SIDED,
) -> tuple[np.ndarray, int]:
    """J at every posterior draw and the number of draws with an empty set."""
    s_hat = model.support_batch(phi_hat, grid.directions)
    if not np.all(np.isfinite(s_hat)):
        raise DomainError(f"Theta(phi_hat) is empty at {phi_hat}")
    sided = Sided(sided)
    values = np.empty(draws.B)
    for i, row in enumerate(draws.draws):
        s_phi = model.support_batch(row, grid.directions)
        values[i] = math.sqrt(n) * _gap(s_phi, s_hat, sided) if np.all(np.isfinite(s_phi)) else np.inf
    return values, int(np.sum(np.isinf(values)))


def bcs_for_identified_set(
    model: ModelSpec,
    draws: PosteriorDraws,
    phi_hat,
    n: int,
    level: float,
    grid: SphereGrid,
    sided: Sided = Sided.TWO_SIDED,
    min_draws: int = MIN_DRAWS,
    max_excluded_fraction: float = MAX_EXCLUDED_FRACTION,
) -> CredibleBand:
    """Credible band whose q is the level quantile of the posterior draws of J.

    Draws with an empty identified set enter with ``J = +inf``.

    Raises
    ------
    ParameterError
        When fewer than ``min_draws`` draws are given or level is not in (0, 1).
    DomainError
        When more than ``max_excluded_fraction`` of the draws have an empty set.

    """
    if not 0 < level < 1:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    if draws.B < min_draws:
        raise ParameterError(f"{draws.B} posterior draws, at least {min_draws} are required")
    values, excluded = j_statistics(model, draws, phi_hat, n, grid, sided)
    if excluded > max_excluded_fraction * draws.B:
        raise DomainError(
            f"{excluded} of {draws.B} posterior draws have an empty identified set, "
            f"more than the allowed fraction {max_excluded_fraction}"
        )
    if excluded:
        logger.warning(f"{excluded} of {draws.B} posterior draws have an empty identified set")
    q = empirical_quantile(EmpiricalSample(values=values), level)
    if not isinstance(phi_hat, PhiVector):
        phi_hat = model.phi(phi_hat)
    return CredibleBand(
        phi_hat=phi_hat,
        q=max(q, 0.0),
        n=n,
        level=level,
        kind=Sided(sided),
        B=draws.B,
        excluded=excluded,
    )


def identified_interval(model: ModelSpec, phi) -> IntervalSet:
    """Theta(phi) for a scalar theta, empty when the set is empty."""
    if model.dim != 1:
        raise ParameterError(f"{model.model_type} has a {model.dim}-d theta")
    if model.is_empty(phi):
        return IntervalSet.empty()
    hi = model.support(phi, np.array([1.0]))
    lo = -model.support(phi, np.array([-1.0]))
    return IntervalSet(lo=lo, hi=max(hi, lo))


def band_to_intervals(band: CredibleBand, model: ModelSpec) -> tuple[IntervalSet, IntervalSet]:
    """Inner and outer sets of a band for a scalar theta.

    Returns
    -------
    inner: IntervalSet
        Contraction of Theta(phi_hat) by q / sqrt(n), possibly empty.
    outer: IntervalSet
        Envelope of Theta(phi_hat) by q / sqrt(n), possibly empty when the model
        evaluates the support formulas on an empty Theta(phi_hat).

    Both sets are read off the support values ``[-S(-1) -+ r, S(1) +- r]``.

    """
    if model.dim != 1:
        raise ParameterError("band_to_intervals needs a scalar theta, use hj_band_boundary")
    hi = model.support(band.phi_hat, np.array([1.0]))
    lo = -model.support(band.phi_hat, np.array([-1.0]))
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise DomainError(f"Theta(phi_hat) is empty at {band.phi_hat}")
    r = band.radius
    return _interval_or_empty(lo + r, hi - r), _interval_or_empty(lo - r, hi + r)


def _interval_or_empty(lo: float, hi: float) -> IntervalSet:
    return IntervalSet(lo=lo, hi=hi) if lo <= hi else IntervalSet.empty()


def band_row(band: CredibleBand, model: ModelSpec, coordinate: int = 0) -> dict:
    """Band as a CSV row, intervals are projections on one coordinate when d > 1."""
    if model.dim == 1:
        inner, outer = band_to_intervals(band, model)
    else:
        estimate = project_marginal_set(model, band.phi_hat, coordinate)
        inner, outer = estimate.contraction(band.radius), estimate.envelope(band.radius)
    return dict(
        kind=band.kind.value,
        level=band.level,
        q=band.q,
        n=band.n,
        lo_inner=np.nan if inner.is_empty else inner.lo,
        hi_inner=np.nan if inner.is_empty else inner.hi,
        lo_outer=np.nan if outer.is_empty else outer.lo,
        hi_outer=np.nan if outer.is_empty else outer.hi,
        excluded_draws=band.excluded,
    )


def bcs_for_theta(theta_draws, level: float) -> ThetaCredibleInterval:
    """Equal-tailed interval from the tau/2 and 1 - tau/2 sample quantiles."""
    if not 0 < level < 1:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    sample = EmpiricalSample(values=np.asarray(theta_draws, dtype=float).ravel())
    tau = 1.0 - level
    lo = empirical_quantile(sample, tau / 2)
    hi = empirical_quantile(sample, 1 - tau / 2)
    return ThetaCredibleInterval(lo=lo, hi=hi, level=level)


def sample_theta_posterior(
    model: ModelSpec,
    stream: RngStream,
    draws: PosteriorDraws,
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple[np.ndarray, int]:
    """One theta from pi(theta | phi) per posterior draw of phi.

    Draw ``i`` uses ``stream.child(i)``. Draws of phi with an empty identified
    set are skipped and counted.

    Returns
    -------
    theta: np.ndarray
        Array of shape (B - skipped, d).
    skipped: int
        Number of posterior draws of phi with an empty set.

    """
    thetas, skipped = [], 0
    for i, row in enumerate(draws.draws):
        if model.is_empty(row):
            skipped += 1
            continue
        thetas.append(model.sample_theta(stream.child(i), row, 1, density)[0])
    if skipped:
        logger.warning(f"{skipped} posterior draws of phi have an empty identified set")
    if not thetas:
        raise DomainError("every posterior draw of phi has an empty identified set")
    return np.vstack(thetas), skipped


def project_marginal_set(model: ModelSpec, phi, coordinate: int = 0) -> IntervalSet:
    """Projection of Theta(phi) on one coordinate, [-S(-e_j), S(e_j)]."""
    if not 0 <= coordinate < model.dim:
        raise ParameterError(f"coordinate {coordinate} outside dimension {model.dim}")
    e = np.zeros(model.dim)
    e[coordinate] = 1.0
    hi = model.support(phi, e)
    lo = -model.support(phi, -e)
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise DomainError(f"identified set is empty at {phi}")
    return IntervalSet(lo=lo, hi=max(hi, lo))


def project_band(band: CredibleBand, model: ModelSpec, coordinate: int = 0) -> IntervalSet:
    """Projection of the outer set, [-S_hat(-e) - q/sqrt(n), S_hat(e) + q/sqrt(n)]."""
    return project_marginal_set(model, band.phi_hat, coordinate).envelope(band.radius)


def hj_set_boundary(model: HJModel, phi, mu_grid: int = 200) -> pd.DataFrame:
    """Closed boundary of Theta(phi) as a polyline.

    The lower edge ``sigma^2 = max(sigma^2_phi(mu), 0)`` runs over ``mu_grid``
    feasible mu from left to right, the top edge ``sigma^2 = sigma_bar^2``
    back, and the last row repeats the first.

    """
    values = model.check_phi(phi)
    interval = hj_feasible_interval(values, model.box)
    if interval.is_empty:
        raise DomainError(f"identified set is empty at {phi}")
    mu = np.linspace(interval.lo, interval.hi, mu_grid)
    lower = np.clip(model.sigma2(values, mu), model.box.lower[1], None)
    top = model.sigma2_bar
    out_mu = np.concatenate([mu, [interval.hi, interval.lo, mu[0]]])
    out_s2 = np.concatenate([lower, [top, top, lower[0]]])
    edge = ["lower"] * mu_grid + ["upper", "upper", "lower"]
    return pd.DataFrame({"mu": out_mu, "sigma2": out_s2, "edge": edge, "below_zero": out_s2 < 0})


def hj_boundary_directions(model: HJModel, phi, n_points: int = 400) -> np.ndarray:
    """Unit directions ordered by angle.

    A uniform circle of ``n_points`` directions plus the outward normals of the
    parabola at evenly spaced feasible mu where it lies above sigma^2 = 0.

    """
    values = model.check_phi(phi)
    angles = np.linspace(-np.pi, np.pi, n_points, endpoint=False)
    interval = hj_feasible_interval(values, model.box)
    if not interval.is_empty:
        p1, p2, _ = values
        mu = np.linspace(interval.lo, interval.hi, n_points // 2)
        mu = mu[model.sigma2(values, mu) > model.box.lower[1]]
        angles = np.concatenate([angles, np.arctan2(-1.0, 2 * p1 * mu - 2 * p2)])
    angles = np.unique(angles)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def hj_band_boundary(band: CredibleBand, model: HJModel, n_points: int = 400) -> pd.DataFrame:
    """Closed boundary of the outer set Theta(phi_hat)^{q/sqrt(n)}.

    The envelope of a convex set by r is traced by ``x(nu) + r nu`` over unit
    directions nu, with x(nu) a maximizer of ``nu . theta`` over Theta(phi_hat).
    Every point is at distance r from Theta(phi_hat): the parabola and the
    edges are offset along their normals and the corners become circular
    arcs. Points that fall below sigma^2 = 0 are kept and flagged.

    """
    values = model.check_phi(band.phi_hat)
    dirs = hj_boundary_directions(model, values, n_points)
    support, points = hj_support_points(values, dirs, model.box)
    if not np.all(np.isfinite(support)):
        raise DomainError(f"identified set is empty at {band.phi_hat}")
    outer = points + band.radius * dirs
    outer = np.vstack([outer, outer[:1]])
    return pd.DataFrame({"mu": outer[:, 0], "sigma2": outer[:, 1], "below_zero": outer[:, 1] < 0})


def hj_support_arcs(n_points: int = 101) -> np.ndarray:
    """Directions on the two arcs nu_1 = +-sqrt(1 - nu_2^2), nu_2 in [-1, 1].

    Returns an (2 n_points, 2) array, the arc with nu_1 >= 0 first.

    """
    nu2_pos = np.linspace(0.0, 1.0, n_points)
    nu2_neg = np.linspace(-1.0, 0.0, n_points)
    right = np.column_stack([np.sqrt(1.0 - nu2_pos**2), nu2_pos])
    left = np.column_stack([-np.sqrt(1.0 - nu2_neg**2), nu2_neg])
    return np.vstack([right, left])
