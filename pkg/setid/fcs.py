"""Criterion-function confidence sets with bootstrap critical values.

The criterion is

    Q_n(theta) = sum_j w_j max(Psi_j(theta, phi_hat), 0)^2

with phi_hat the sample-mean estimate. The critical value is the 1 - tau
quantile over bootstrap resamples of the recentred statistic

    sup_{theta in E_n} sqrt(n) sum_j w_j max(Psi_j(theta, phi*) - Psi_j(theta, phi_hat), 0)^2

over the estimated set ``E_n = {theta: sqrt(n) Q_n(theta) <= t_n}``. The
confidence set for a coordinate of theta is the range of that coordinate over
``{theta: sqrt(n) Q_n(theta) <= c}``, found from a lattice of M uniform draws
and, by default, refined with SLSQP.

"""
import logging
import math
from typing import Literal, Optional

import numpy as np
from pydantic import Field
from scipy.optimize import minimize

from setid.core.dpposterior import DataMatrix
from setid.core.errors import DomainError, NumericError, ParameterError
from setid.core.samplekit import EmpiricalSample, RngStream, empirical_quantile
from setid.core.types import IntervalSet, SetidBaseModel
from setid.models.base import ModelSpec


logger = logging.getLogger(__name__)

MAX_RESAMPLE_TRIES = 100
LEVEL_TOL = 1e-8


class CriterionConfig(SetidBaseModel):
    """Settings of the criterion-function confidence set."""

    weights: Optional[list[float]] = Field(
        default=None, description="Weights w_j of the moments, all ones when None"
    )
    B_boot: int = Field(100, description="Number of bootstrap resamples", ge=50)
    t_n: Optional[float] = Field(
        default=None, description="Slack of the estimated set, log(n) when None", gt=0
    )
    M: int = Field(50, description="Number of uniform draws from Theta", ge=1)
    sup_method: Literal["optimize", "lattice"] = Field(
        "optimize",
        description=(
            "Sup over the estimated set by SLSQP started from the lattice, or by the "
            "max over the lattice only"
        ),
    )
    n_starts: int = Field(3, description="Lattice points used as SLSQP starts", ge=1)
    coordinate: int = Field(0, description="Coordinate of theta to project on", ge=0)
    lattice: Literal["estimate", "box"] = Field(
        "estimate",
        description=(
            "Draw the M lattice points uniformly from Theta(phi_hat), or uniformly "
            "from the whole box Theta"
        ),
    )
    projection: Literal["optimize", "lattice"] = Field(
        "optimize",
        description=(
            "Extend the accepted lattice range by SLSQP over sqrt(n) Q_n <= c_tau, "
            "or report the accepted lattice range only"
        ),
    )

    def slack(self, n: int) -> float:
        return self.t_n if self.t_n is not None else math.log(n)

    def weight_vector(self, k: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(k)
        if len(self.weights) != k:
            raise ParameterError(f"{len(self.weights)} weights given for {k} moments")
        return np.asarray(self.weights, dtype=float)


class FcsResult(SetidBaseModel):
    """Projected confidence interval with its diagnostics."""

    interval: IntervalSet = Field(description="[L, U], empty when nothing is accepted")
    critical_value: float = Field(description="Bootstrap critical value c_tau")
    accepted: int = Field(description="Lattice points with sqrt(n) Q_n <= c_tau")
    M: int = Field(description="Lattice size")
    estimated_set_size: int = Field(description="Lattice points in the estimated set")
    fallback: bool = Field(
        description="Estimated set was empty and the sup ran over all of Theta"
    )
    sup_method: str = Field(description="How the bootstrap sup was computed")
    lattice: str = Field("estimate", description="Where the lattice was drawn, estimate or box")
    projection: str = Field("optimize", description="How the interval was projected")

    @property
    def is_empty(self) -> bool:
        return self.interval.is_empty


def criterion(model: ModelSpec, theta, phi_hat, cfg: CriterionConfig) -> np.ndarray:
    """Q_n at one theta (returns a float) or at each row of theta."""
    theta = np.asarray(theta, dtype=float)
    psi = np.atleast_2d(model.psi(np.atleast_2d(theta), phi_hat))
    w = cfg.weight_vector(model.k)
    out = np.maximum(psi, 0.0) ** 2 @ w
    return float(out[0]) if theta.ndim == 1 else out


def _resample_phi(model: ModelSpec, data: DataMatrix, stream: RngStream):
    """Plug-in phi of a bootstrap resample, redrawn if the estimate is undefined."""
    gen = stream.generator
    for _ in range(MAX_RESAMPLE_TRIES):
        idx = gen.integers(0, data.n, data.n)
        try:
            return model.estimate_phi(DataMatrix(rows=data.rows[idx], columns=data.columns))
        except (NumericError, np.linalg.LinAlgError) as err:
            logger.debug(f"bootstrap resample rejected: {err}")
    raise NumericError(f"{MAX_RESAMPLE_TRIES} bootstrap resamples in a row gave no estimate")


def _level_constraint(model: ModelSpec, phi_hat, n: int, cfg: CriterionConfig, level: float) -> dict:
    """SLSQP inequality ``level - sqrt(n) Q_n(theta) >= 0`` with its gradient."""
    rootn = math.sqrt(n)
    w = cfg.weight_vector(model.k)

    def fun(theta):
        psi = model.psi(theta, phi_hat)
        return level - rootn * (np.maximum(psi, 0.0) ** 2 @ w)

    def jac(theta):
        psi = model.psi(theta, phi_hat)
        grad = model.grad_theta_psi(theta, phi_hat)
        return -rootn * (2 * w * np.maximum(psi, 0.0)) @ grad

    return {"type": "ineq", "fun": fun, "jac": jac}


class _Bootstrap:
    """Recentred bootstrap statistic and its sup over the estimated set."""

    def __init__(self, model: ModelSpec, phi_hat, n: int, cfg: CriterionConfig):
        self.model = model
        self.phi_hat = phi_hat
        self.rootn = math.sqrt(n)
        self.w = cfg.weight_vector(model.k)
        self.cfg = cfg
        self.constraint = _level_constraint(model, phi_hat, n, cfg, cfg.slack(n))

    def statistic(self, theta, phi_star) -> np.ndarray:
        diff = self.model.psi(theta, phi_star) - self.model.psi(theta, self.phi_hat)
        return self.rootn * (np.maximum(diff, 0.0) ** 2 @ self.w)

    def _objective(self, theta, phi_star):
        diff = self.model.psi(theta, phi_star) - self.model.psi(theta, self.phi_hat)
        pos = np.maximum(diff, 0.0)
        grad_diff = self.model.grad_theta_psi(theta, phi_star) - self.model.grad_theta_psi(
            theta, self.phi_hat
        )
        value = self.rootn * (pos**2 @ self.w)
        grad = self.rootn * (2 * self.w * pos) @ grad_diff
        return -value, -grad

    def sup(self, points: np.ndarray, phi_star, constrained: bool) -> float:
        lattice = self.statistic(points, phi_star)
        best = float(np.max(lattice))
        if self.cfg.sup_method == "lattice":
            return best
        box = self.model.box
        bounds = list(zip(box.lower, box.upper))
        constraints = [self.constraint] if constrained else []
        starts = points[np.argsort(lattice)[::-1][: self.cfg.n_starts]]
        for x0 in starts:
            res = minimize(
                self._objective,
                x0,
                args=(phi_star,),
                jac=True,
                method="SLSQP",
                bounds=bounds,
                constraints=constraints,
                options={"maxiter": 100, "ftol": 1e-10},
            )
            theta = np.clip(res.x, box.lower, box.upper)
            if constrained and self.constraint["fun"](theta) < -LEVEL_TOL:
                continue
            best = max(best, float(self.statistic(theta, phi_star)))
        return best


def draw_lattice(
    model: ModelSpec, phi_hat, cfg: CriterionConfig, stream: RngStream
) -> tuple[np.ndarray, str]:
    """M lattice points and where they were drawn from, ``estimate`` or ``box``.

    Draws from Theta(phi_hat) lie in the estimated set, whose share of the box
    volume can be tiny in higher dimensions. When Theta(phi_hat) is empty the
    lattice falls back to uniform draws from the box.

    """
    if cfg.lattice == "estimate":
        try:
            return model.sample_theta(stream, phi_hat, cfg.M), "estimate"
        except DomainError as err:
            logger.warning(f"lattice drawn from the box, Theta(phi_hat) gave no draw: {err}")
    return model.box.sample_uniform(stream.generator, cfg.M), "box"


def bootstrap_critical_value(
    model: ModelSpec,
    data: DataMatrix,
    cfg: CriterionConfig,
    tau: float,
    stream: RngStream,
    lattice: Optional[np.ndarray] = None,
) -> tuple[float, bool, int]:
    """Bootstrap critical value c_tau.

    Parameters
    ----------
    model: ModelSpec
        Model providing Psi and the plug-in estimate of phi.
    data: DataMatrix
        Observations.
    cfg: CriterionConfig
        Criterion settings.
    tau: float
        One minus the confidence level.
    stream: RngStream
        Resample ``b`` uses ``stream.child(b)``.
    lattice: np.ndarray, optional
        (M, d) points of Theta, drawn by ``draw_lattice`` from ``stream`` when not given.

    Returns
    -------
    c_tau: float
        The 1 - tau bootstrap quantile.
    fallback: bool
        True when the estimated set had no lattice point and the sup ran over Theta.
    size: int
        Number of lattice points in the estimated set.

    """
    if not 0 < tau < 1:
        raise ParameterError(f"tau must lie in (0, 1), got {tau}")
    n = data.n
    phi_hat = model.estimate_phi(data)
    if lattice is None:
        lattice, _ = draw_lattice(model, phi_hat, cfg, stream)
    qn = criterion(model, lattice, phi_hat, cfg)
    inside = math.sqrt(n) * qn <= cfg.slack(n)
    fallback = not np.any(inside)
    if fallback:
        logger.warning("estimated set has no lattice point, taking the sup over Theta")
        points = lattice
    else:
        points = lattice[inside]
    boot = _Bootstrap(model, phi_hat, n, cfg)
    stats = np.empty(cfg.B_boot)
    for b in range(cfg.B_boot):
        phi_star = _resample_phi(model, data, stream.child(b))
        stats[b] = boot.sup(points, phi_star, constrained=not fallback)
    c_tau = empirical_quantile(EmpiricalSample(values=stats), 1.0 - tau)
    return c_tau, fallback, int(inside.sum())


def accepted_mask(model: ModelSpec, lattice, phi_hat, n: int, c: float, cfg: CriterionConfig) -> np.ndarray:
    """Lattice rows with sqrt(n) Q_n <= c."""
    return math.sqrt(n) * criterion(model, np.atleast_2d(lattice), phi_hat, cfg) <= c


def accepted_interval(model: ModelSpec, lattice, phi_hat, n: int, c: float, cfg: CriterionConfig) -> IntervalSet:
    """Range of the projected coordinate over lattice points with sqrt(n) Q_n <= c."""
    accepted = accepted_mask(model, lattice, phi_hat, n, c, cfg)
    if not np.any(accepted):
        return IntervalSet.empty()
    coords = np.atleast_2d(lattice)[accepted, cfg.coordinate]
    return IntervalSet(lo=float(coords.min()), hi=float(coords.max()))


def extend_interval(
    model: ModelSpec,
    interval: IntervalSet,
    starts: np.ndarray,
    phi_hat,
    n: int,
    c: float,
    cfg: CriterionConfig,
) -> IntervalSet:
    """Push the ends of ``interval`` out to the min and max of theta_j over sqrt(n) Q_n <= c.

    SLSQP runs from the accepted lattice points with the smallest and the
    largest coordinate. The interval never shrinks.

    """
    j = cfg.coordinate
    box = model.box
    bounds = list(zip(box.lower, box.upper))
    constraint = _level_constraint(model, phi_hat, n, cfg, c)
    lo, hi = interval.lo, interval.hi
    for sign in (1.0, -1.0):
        grad = np.zeros(model.dim)
        grad[j] = -sign

        def objective(theta, grad=grad, sign=sign):
            return -sign * theta[j], grad

        order = np.argsort(sign * starts[:, j])[::-1][: cfg.n_starts]
        for x0 in starts[order]:
            res = minimize(
                objective,
                x0,
                jac=True,
                method="SLSQP",
                bounds=bounds,
                constraints=[constraint],
                options={"maxiter": 200, "ftol": 1e-12},
            )
            theta = np.clip(res.x, box.lower, box.upper)
            if constraint["fun"](theta) < -LEVEL_TOL:
                continue
            if sign > 0:
                hi = max(hi, float(theta[j]))
            else:
                lo = min(lo, float(theta[j]))
    return IntervalSet(lo=lo, hi=hi)


def project_fcs(
    model: ModelSpec,
    data: DataMatrix,
    cfg: CriterionConfig,
    tau: float,
    stream: RngStream,
) -> FcsResult:
    """Confidence interval [L, U] for one coordinate of theta.

    The M lattice points come from ``stream.child(0)`` and serve both as the
    lattice of the estimated set and as the candidates for acceptance. The
    bootstrap uses ``stream.child(1)``. With ``projection="optimize"`` the
    accepted range is extended to the exact range of the confidence set.

    """
    if cfg.coordinate >= model.dim:
        raise ParameterError(f"coordinate {cfg.coordinate} outside dimension {model.dim}")
    phi_hat = model.estimate_phi(data)
    lattice, source = draw_lattice(model, phi_hat, cfg, stream.child(0))
    c_tau, fallback, size = bootstrap_critical_value(
        model, data, cfg, tau, stream.child(1), lattice=lattice
    )
    accepted = accepted_mask(model, lattice, phi_hat, data.n, c_tau, cfg)
    interval = accepted_interval(model, lattice, phi_hat, data.n, c_tau, cfg)
    if interval.is_empty:
        logger.warning(f"no lattice point accepted at c_tau={c_tau:.6g}")
    elif cfg.projection == "optimize":
        interval = extend_interval(
            model, interval, lattice[accepted], phi_hat, data.n, c_tau, cfg
        )
    return FcsResult(
        interval=interval,
        critical_value=c_tau,
        accepted=int(accepted.sum()),
        M=cfg.M,
        estimated_set_size=size,
        fallback=fallback,
        sup_method=cfg.sup_method,
        lattice=source,
        projection=cfg.projection,
    )


def fcs_row(result: FcsResult, tau: float, n: int) -> dict:
    """Result in the CSV row layout of credible bands, with kind ``fcs``."""
    interval = result.interval
    return dict(
        kind="fcs",
        level=1.0 - tau,
        q=result.critical_value,
        n=n,
        lo_inner=np.nan,
        hi_inner=np.nan,
        lo_outer=np.nan if interval.is_empty else interval.lo,
        hi_outer=np.nan if interval.is_empty else interval.hi,
        excluded_draws=0,
        accepted=result.accepted,
        fallback=result.fallback,
        sup_method=result.sup_method,
        lattice=result.lattice,
        projection=result.projection,
    )
