"""Support functions of convex moment-inequality sets and interval geometry.

The generic solver computes

.. math::

    S_{\\phi}(\\nu) = \\sup\\{\\nu^T \\theta : \\Psi(\\theta, \\phi) \\le 0,
    A(\\phi) \\theta = b(\\phi), \\theta \\in \\Theta\\}

with a two phase logarithmic barrier method. Affine equalities are removed by
writing :math:`\\theta = \\theta_0 + Z y` with :math:`Z` an orthonormal basis of
the null space of :math:`A`, the box :math:`\\Theta` enters the barrier as
``2 d`` linear constraints, and every centering step is a damped Newton
iteration, which stays inside the domain for the linear and convex quadratic
constraints of the worked models.

"""
import logging
from typing import TYPE_CHECKING, Optional, Union

import numpy as np
from pydantic import Field
from pydantic_numpy.typing import Np1DArray
from scipy.linalg import null_space

from setid.core.errors import DomainError, NumericError, ParameterError
from setid.core.types import (
    Direction,
    IntervalSet,
    PhiVector,
    SetidBaseModel,
    SolveStatus,
    ThetaBox,
)

if TYPE_CHECKING:
    from setid.core.grid import SphereGrid
    from setid.models.base import ModelSpec


logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
FEASIBILITY_TOL = 1e-10
ACTIVE_TOL = 1e-6
SLACKNESS_TOL = 1e-5
RANK_TOL = 1e-8
NEWTON_TOL = 1e-10
MAX_NEWTON = 500
MAX_STAGES = 40
BARRIER_FACTOR = 10.0


class SupportSolveResult(SetidBaseModel):
    """Value, maximizer and Lagrange multipliers of a support-function program."""

    value: float = Field(description="Support value, -inf when the set is empty")
    maximizer: Optional[Np1DArray] = Field(
        default=None, description="Point of the support set, None when empty"
    )
    multipliers: Optional[Np1DArray] = Field(
        default=None, description="Multipliers of the inequalities Psi, None when not certified"
    )
    eq_multipliers: Optional[Np1DArray] = Field(
        default=None, description="Multipliers of the equalities"
    )
    lower_multipliers: Optional[Np1DArray] = Field(
        default=None, description="Multipliers of theta >= lower"
    )
    upper_multipliers: Optional[Np1DArray] = Field(
        default=None, description="Multipliers of theta <= upper"
    )
    slackness: float = Field(np.inf, description="max |lambda_i G_i| over all constraints")
    active_set: list[int] = Field(description="Indices i with Psi_i(theta*) = 0")
    status: SolveStatus = Field(description="Outcome of the solve")
    iterations: int = Field(0, description="Total Newton iterations")
    gap: float = Field(0.0, description="Duality gap bound at termination")

    @property
    def is_feasible(self) -> bool:
        return self.status != SolveStatus.INFEASIBLE

    @property
    def has_multipliers(self) -> bool:
        return self.multipliers is not None

    def __repr__(self):
        return (
            f"{self.__class__.__name__}(value={self.value:.8g}, "
            f"status={self.status.value}, active={self.active_set})"
        )


class _Program:
    """Constraints G(theta) <= 0 of a support program in null-space coordinates."""

    def __init__(self, model: "ModelSpec", phi: PhiVector):
        self.model = model
        self.phi = phi
        self.box: ThetaBox = model.box
        self.d = self.box.dim
        self.k = model.k
        eq = model.equalities(phi)
        center = self.box.center
        if eq is None:
            self.A = np.zeros((0, self.d))
            self.b = np.zeros(0)
            self.theta0 = center
            self.Z = np.eye(self.d)
        else:
            self.A, self.b = (np.atleast_2d(eq[0]), np.atleast_1d(eq[1]))
            correction = np.linalg.lstsq(self.A, self.b - self.A @ center, rcond=None)[0]
            self.theta0 = center + correction
            self.Z = null_space(self.A)
        self.m = self.k + 2 * self.d

    @property
    def equality_residual(self) -> float:
        if self.A.shape[0] == 0:
            return 0.0
        return float(np.max(np.abs(self.A @ self.theta0 - self.b)))

    def theta(self, y: np.ndarray) -> np.ndarray:
        return self.theta0 + self.Z @ y

    def values(self, theta: np.ndarray) -> np.ndarray:
        psi = np.atleast_1d(self.model.psi(theta, self.phi))
        return np.concatenate([psi, self.box.lower - theta, theta - self.box.upper])

    def jacobian(self, theta: np.ndarray) -> np.ndarray:
        eye = np.eye(self.d)
        return np.vstack([self.model.grad_theta_psi(theta, self.phi), -eye, eye])

    def weighted_hessian(self, theta: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """sum_i weights_i d2 Psi_i / dtheta2 over the model constraints."""
        hess = self.model.hess_theta_psi(theta, self.phi)
        return np.einsum("i,ijk->jk", weights[: self.k], hess)


def _newton(gradient_hessian, feasible, x: np.ndarray, label: str) -> tuple[np.ndarray, int]:
    """Damped Newton centering of a self-concordant barrier objective."""
    for it in range(MAX_NEWTON):
        g, H = gradient_hessian(x)
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(H, g, rcond=None)[0]
        decrement = float(-g @ step)
        if decrement / 2 <= NEWTON_TOL:
            return x, it
        lam = np.sqrt(max(decrement, 0.0))
        s = 1.0 / (1.0 + lam) if lam > 0.25 else 1.0
        while not feasible(x + s * step):
            s *= 0.5
            if s < 1e-16:
                if decrement < 1e-6:
                    return x, it
                raise NumericError(
                    f"{label}: line search failed to stay feasible "
                    f"(newton decrement {decrement:.3e})"
                )
        x = x + s * step
    raise NumericError(
        f"{label}: Newton centering did not converge in {MAX_NEWTON} iterations "
        f"(newton decrement {decrement:.3e})"
    )


def _phase_one(prog: _Program) -> tuple[np.ndarray, float, float, int]:
    """Minimise s subject to G(theta0 + Z y) <= s.

    Returns the final theta, max G at it, a lower bound on the optimal s and
    the number of Newton iterations.

    """
    nz = prog.Z.shape[1]
    theta = prog.theta0
    s0 = float(np.max(prog.values(theta))) + 1.0
    x = np.concatenate([np.zeros(nz), [s0]])
    iterations = 0
    t = 1.0

    for stage in range(MAX_STAGES):

        def gradient_hessian(x, t=t):
            theta = prog.theta(x[:nz])
            r = x[-1] - prog.values(theta)
            Jz = prog.jacobian(theta) @ prog.Z
            u = np.hstack([Jz, -np.ones((prog.m, 1))])
            g = u.T @ (1.0 / r)
            g[-1] += t
            H = (u / r[:, None] ** 2).T @ u
            H[:nz, :nz] += prog.Z.T @ prog.weighted_hessian(theta, 1.0 / r) @ prog.Z
            return g, H

        def feasible(x):
            return bool(np.all(x[-1] - prog.values(prog.theta(x[:nz])) > 0))

        x, its = _newton(gradient_hessian, feasible, x, "phase one")
        iterations += its
        theta = prog.theta(x[:nz])
        gmax = float(np.max(prog.values(theta)))
        lower_bound = x[-1] - prog.m / t
        logger.debug(f"phase one stage {stage}: t={t:.1e}, max G={gmax:.3e}")
        if gmax < -FEASIBILITY_TOL or lower_bound > FEASIBILITY_TOL:
            return theta, gmax, lower_bound, iterations
        if prog.m / t < FEASIBILITY_TOL * 1e-2:
            return theta, gmax, lower_bound, iterations
        t *= BARRIER_FACTOR
    raise NumericError(f"phase one did not terminate in {MAX_STAGES} stages")


def _empty_result(prog: _Program, status: SolveStatus, value: float, theta=None, iterations=0):
    return SupportSolveResult(
        value=value,
        maximizer=theta,
        active_set=[] if theta is None else _active(prog, theta),
        status=status,
        iterations=iterations,
    )


def _active(prog: _Program, theta: np.ndarray) -> list[int]:
    psi = np.atleast_1d(prog.model.psi(theta, prog.phi))
    return [int(i) for i in np.flatnonzero(psi >= -ACTIVE_TOL)]


def support_solve(
    model: "ModelSpec", phi: PhiVector, nu: Union[Direction, np.ndarray], tol: float = DEFAULT_TOL
) -> SupportSolveResult:
    """Support value of Theta(phi) in direction nu by the barrier method.

    Parameters
    ----------
    model: ModelSpec
        Model providing Psi, its theta derivatives, the box and equalities.
    phi: PhiVector
        Point-identified parameter.
    nu: Direction
        Unit direction.
    tol: float
        Target duality gap, the returned value is within tol of the optimum.

    Returns
    -------
    result: SupportSolveResult
        ``status`` is ``infeasible`` with value ``-inf`` when Theta(phi) is empty
        and ``degenerate`` when it has no strictly feasible point.

    Raises
    ------
    NumericError
        When a centering step fails to converge.

    """
    model.check_phi(phi)
    nu = np.asarray(nu, dtype=float).ravel()
    if nu.size != model.box.dim:
        raise ParameterError(f"direction of size {nu.size} for theta of size {model.box.dim}")
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    prog = _Program(model, phi)
    if prog.equality_residual > FEASIBILITY_TOL:
        logger.debug("equality constraints are inconsistent")
        return _empty_result(prog, SolveStatus.INFEASIBLE, -np.inf)

    theta, gmax, lower_bound, iterations = _phase_one(prog)
    if lower_bound > FEASIBILITY_TOL:
        return _empty_result(prog, SolveStatus.INFEASIBLE, -np.inf, iterations=iterations)
    if gmax >= -FEASIBILITY_TOL:
        logger.debug(f"no strictly feasible point, max G={gmax:.3e}")
        return _empty_result(
            prog, SolveStatus.DEGENERATE, float(nu @ theta), theta, iterations
        )

    c = prog.Z.T @ nu
    y = prog.Z.T @ (theta - prog.theta0)
    t = 1.0
    for stage in range(MAX_STAGES):

        def gradient_hessian(y, t=t):
            theta = prog.theta(y)
            r = -prog.values(theta)
            Jz = prog.jacobian(theta) @ prog.Z
            g = -t * c + Jz.T @ (1.0 / r)
            H = (Jz / r[:, None] ** 2).T @ Jz
            H += prog.Z.T @ prog.weighted_hessian(theta, 1.0 / r) @ prog.Z
            return g, H

        def feasible(y):
            return bool(np.all(prog.values(prog.theta(y)) < 0))

        y, its = _newton(gradient_hessian, feasible, y, "phase two")
        iterations += its
        logger.debug(f"phase two stage {stage}: t={t:.1e}, value={nu @ prog.theta(y):.10g}")
        if prog.m / t <= tol:
            break
        t *= BARRIER_FACTOR
    else:
        raise NumericError(f"barrier continuation did not reach tol={tol}")

    theta = prog.theta(y)
    lam = 1.0 / (t * -prog.values(theta))
    psi_lam = lam[: prog.k]
    lower_lam = lam[prog.k : prog.k + prog.d]
    upper_lam = lam[prog.k + prog.d :]
    if prog.A.shape[0] > 0:
        residual = nu - prog.jacobian(theta).T @ lam
        eq_lam = np.linalg.lstsq(prog.A.T, residual, rcond=None)[0]
    else:
        eq_lam = np.zeros(0)
    on_box = np.max(np.concatenate([lower_lam, upper_lam])) > ACTIVE_TOL
    slackness = float(np.max(np.abs(lam * prog.values(theta))))
    certified = slackness < SLACKNESS_TOL
    if not certified:
        logger.warning(f"complementary slackness {slackness:.2e}, multipliers not reported")
    return SupportSolveResult(
        value=float(nu @ theta),
        maximizer=theta,
        multipliers=psi_lam if certified else None,
        eq_multipliers=eq_lam if certified else None,
        lower_multipliers=lower_lam if certified else None,
        upper_multipliers=upper_lam if certified else None,
        slackness=slackness,
        active_set=_active(prog, theta),
        status=SolveStatus.BOUNDARY if on_box else SolveStatus.CONVERGED,
        iterations=iterations,
        gap=prog.m / t,
    )


def active_gradients(model: "ModelSpec", phi: PhiVector, theta: np.ndarray) -> np.ndarray:
    """Gradients in theta of the constraints active at theta, one per row.

    Rows are the active Psi_i, the active box faces and the equalities.

    """
    theta = np.asarray(theta, dtype=float)
    psi = np.atleast_1d(model.psi(theta, phi))
    rows = [model.grad_theta_psi(theta, phi)[psi >= -ACTIVE_TOL]]
    eye = np.eye(model.box.dim)
    rows.append(-eye[theta - model.box.lower <= ACTIVE_TOL])
    rows.append(eye[model.box.upper - theta <= ACTIVE_TOL])
    eq = model.equalities(phi)
    if eq is not None:
        rows.append(np.atleast_2d(eq[0]))
    return np.vstack(rows)


def kkt_residuals(model: "ModelSpec", phi: PhiVector, nu, result: SupportSolveResult) -> dict:
    """Stationarity and complementary-slackness residuals of a solve."""
    if not result.has_multipliers:
        raise NumericError(f"no certified multipliers, slackness {result.slackness:.2e}")
    theta = result.maximizer
    nu = np.asarray(nu, dtype=float).ravel()
    grad = model.grad_theta_psi(theta, phi)
    stationarity = nu - grad.T @ result.multipliers
    stationarity += result.lower_multipliers - result.upper_multipliers
    eq = model.equalities(phi)
    if eq is not None:
        stationarity -= np.atleast_2d(eq[0]).T @ result.eq_multipliers
    psi = np.atleast_1d(model.psi(theta, phi))
    return dict(
        stationarity=float(np.linalg.norm(stationarity)),
        slackness=float(np.max(np.abs(result.multipliers * psi), initial=0.0)),
        primal=float(np.max(psi, initial=-np.inf)),
    )


def linearization_coeffs(model: "ModelSpec", phi0: PhiVector, nu) -> np.ndarray:
    """Derivative of S_phi(nu) in phi at phi0.

    By the envelope theorem this is ``-lambda^T d Psi / d phi`` evaluated at the
    maximizer, plus the equality term when the model has phi-dependent
    equalities.

    The multipliers, and with them the derivative, are unique only when the
    active constraint gradients are linearly independent. Where they are not,
    S is not differentiable in phi and a NumericError is raised. This happens
    for HJ at a phi with ``phi_1 phi_3 = phi_2^2`` in the direction
    ``(0, -1)``, where the parabola touches sigma^2 = 0.

    Examples
    --------
    Interval data with phi=(0, 1) and nu=+1 has S = phi_2, the derivative
    is ``array([0., 1.])``.

    """
    result = support_solve(model, phi0, nu)
    if result.status == SolveStatus.INFEASIBLE:
        raise DomainError(f"identified set is empty at {phi0}")
    if result.status == SolveStatus.DEGENERATE:
        raise DomainError(f"no strictly feasible point at {phi0}, multipliers undefined")
    if not result.has_multipliers:
        raise NumericError(f"no certified multipliers at {phi0}, slackness {result.slackness:.2e}")
    theta = result.maximizer
    rows = active_gradients(model, phi0, theta)
    if rows.shape[0] > model.box.dim or np.linalg.matrix_rank(rows, tol=RANK_TOL) < rows.shape[0]:
        raise NumericError(
            f"S is not differentiable at {phi0}: {rows.shape[0]} active constraints "
            f"with dependent gradients at theta={theta}"
        )
    coeffs = -result.multipliers @ model.grad_phi_psi(theta, phi0)
    if result.eq_multipliers.size:
        coeffs -= result.eq_multipliers @ model.grad_phi_equalities(theta, phi0)
    return coeffs


def bvm_support_variance(model: "ModelSpec", phi0: PhiVector, nu) -> float:
    """Asymptotic variance of sqrt(n) S_phi(nu): g I0^-1 g^T with g the linearization."""
    g = linearization_coeffs(model, phi0, nu)
    info = model.fisher_information(phi0)
    return float(g @ np.linalg.solve(info, g))


def hj_feasible_interval(phi, box: ThetaBox) -> IntervalSet:
    """Set of mu in [0, mu_bar] with sigma^2_phi(mu) <= sigma_bar^2."""
    p1, p2, p3 = np.asarray(phi, dtype=float)
    if p1 <= 0:
        raise ParameterError(f"phi_1 must be positive, got {p1}")
    mu_lo, mu_hi = box.lower[0], box.upper[0]
    disc = p2**2 - p1 * (p3 - box.upper[1])
    if disc < 0:
        return IntervalSet.empty()
    root = np.sqrt(disc)
    a = max(mu_lo, (p2 - root) / p1)
    b = min(mu_hi, (p2 + root) / p1)
    if a > b:
        return IntervalSet.empty()
    return IntervalSet(lo=float(a), hi=float(b))


def hj_support(phi, nu, box: ThetaBox):
    """Support function of the mean-variance set by boundary parametrization.

    The set is ``{(mu, s): mu in J, max(p(mu), 0) <= s <= sigma_bar^2}`` with
    ``p(mu) = phi_1 mu^2 - 2 phi_2 mu + phi_3`` and J the feasible mu interval.
    The objective is concave along the lower boundary, so its maximum is found
    among the ends of J, the stationary point of the parabola and the zeros of
    p, each paired with the lower and the upper edge.

    Parameters
    ----------
    phi: PhiVector or array
        ``(phi_1, phi_2, phi_3)`` with ``phi_1 > 0``.
    nu: Direction or array
        One direction, or an ``(N, 2)`` array of directions.
    box: ThetaBox
        ``[0, mu_bar] x [0, sigma_bar^2]``.

    Returns
    -------
    value: float or np.ndarray
        Support value(s), ``-inf`` when the set is empty.

    """
    scalar = np.asarray(nu).ndim == 1 or isinstance(nu, Direction)
    out, _ = hj_support_points(phi, nu, box)
    return float(out[0]) if scalar else out


def hj_support_points(phi, nu, box: ThetaBox) -> tuple[np.ndarray, np.ndarray]:
    """Support values and maximizers (mu, sigma^2) of the mean-variance set.

    Returns
    -------
    values: np.ndarray
        (N,) support values, ``-inf`` when the set is empty.
    points: np.ndarray
        (N, 2) maximizers, NaN when the set is empty. Along a flat edge one of
        its ends is returned.

    """
    p1, p2, p3 = np.asarray(phi, dtype=float)
    nus = np.atleast_2d(np.asarray(nu, dtype=float))
    J = hj_feasible_interval(phi, box)
    if J.is_empty:
        return np.full(nus.shape[0], -np.inf), np.full((nus.shape[0], 2), np.nan)
    a, b = J.lo, J.hi
    top = box.upper[1]

    def lower_edge(mu):
        return np.clip(p1 * mu**2 - 2 * p2 * mu + p3, box.lower[1], None)

    nu1, nu2 = nus[:, 0], nus[:, 1]
    safe = np.where(nu2 < 0, nu2, -1.0)
    stationary = np.clip(p2 / p1 - nu1 / (2 * safe * p1), a, b)
    fixed = [a, b]
    disc0 = p2**2 - p1 * p3
    if disc0 >= 0:
        fixed += [float(np.clip((p2 - r) / p1, a, b)) for r in (np.sqrt(disc0), -np.sqrt(disc0))]
    mus = np.column_stack([np.broadcast_to(f, nu1.shape) for f in fixed] + [stationary])
    cand_mu = np.hstack([mus, mus])
    cand_s2 = np.hstack([lower_edge(mus), np.full(mus.shape, top)])
    values = nu1[:, None] * cand_mu + nu2[:, None] * cand_s2
    best = np.argmax(values, axis=1)
    rows = np.arange(nus.shape[0])
    points = np.column_stack([cand_mu[rows, best], cand_s2[rows, best]])
    return values[rows, best], points


def envelope(interval: IntervalSet, eps: float) -> IntervalSet:
    return interval.envelope(eps)


def contraction(interval: IntervalSet, eps: float) -> IntervalSet:
    return interval.contraction(eps)


def hausdorff_interval(a: IntervalSet, b: IntervalSet) -> float:
    """Hausdorff distance between two nonempty intervals."""
    if a.is_empty or b.is_empty:
        raise DomainError("Hausdorff distance is undefined for an empty interval")
    return float(max(abs(a.lo - b.lo), abs(a.hi - b.hi)))


def hausdorff_via_support(
    model: "ModelSpec", phi_a: PhiVector, phi_b: PhiVector, grid: "SphereGrid"
) -> float:
    """Max over the grid of |S_a(nu) - S_b(nu)|, exact for intervals."""
    sa = model.support_batch(phi_a, grid.directions)
    sb = model.support_batch(phi_b, grid.directions)
    if np.any(~np.isfinite(sa)) or np.any(~np.isfinite(sb)):
        raise DomainError("Hausdorff distance is undefined for an empty identified set")
    return float(np.max(np.abs(sa - sb)))
