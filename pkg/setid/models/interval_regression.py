"""Linear regression with an interval-censored outcome and instruments.

With instruments Z, regressors x and outcome bounds ``y_L <= y <= y_U``, the
moment inequalities ``E[Z y_L] <= E[Z x^T] theta <= E[Z y_U]`` give

    Psi(theta, phi) = (phi_2 theta - phi_3, phi_1 - phi_2 theta)

with ``phi_1 = E[Z y_L]``, ``phi_2 = E[Z x^T]`` and ``phi_3 = E[Z y_U]``. phi is
laid out as ``(phi_1, vec(phi_2) row-major, phi_3)`` and data rows as
``(W1, vec(V), W2)`` with ``W1 = Z y_L``, ``V = Z x^T`` and ``W2 = Z y_U``.

"""
import logging
from typing import Literal

import numpy as np
from pydantic import Field, model_validator
from scipy.optimize import linprog

from setid.core.dpposterior import DataMatrix, DpConfig, PosteriorDraws, sample_phi_posterior
from setid.core.errors import DomainError, NumericError
from setid.core.samplekit import RngStream
from setid.core.types import ThetaBox
from setid.models.base import ModelSpec


logger = logging.getLogger(__name__)

COND_LIMIT = 1e10
MAX_THETA_ROUNDS = 1000


class IntervalRegressionModel(ModelSpec):
    """Interval-censored linear IV regression.

    The simulated design draws ``W1 ~ N(0, w1_var I)``, ``W2 ~ N(w2_mean, I)`` and
    ``V = v_scale I + E`` with i.i.d. ``N(0, v_noise_var)`` entries in E, so that
    ``phi_2 = v_scale I`` and the true identified set is the cube
    ``[0, w2_mean / v_scale]^d``.

    """

    model_type: Literal["interval_regression"] = Field(
        "interval_regression", description="Model type discriminator"
    )
    box: ThetaBox = Field(
        default_factory=lambda: ThetaBox.cube(10, -2.0, 2.0),
        description="Compact parameter space Theta",
    )
    w1_var: float = Field(0.5, description="Variance of each entry of W1", ge=0)
    w2_mean: float = Field(5.0, description="Mean of each entry of W2")
    v_scale: float = Field(3.0, description="Diagonal of E[V] = phi_2", gt=0)
    v_noise_var: float = Field(0.5, description="Variance of each noise entry of V", ge=0)
    dp: DpConfig = Field(default_factory=DpConfig, description="Dirichlet-process prior")

    @model_validator(mode="after")
    def validate_design(self) -> "IntervalRegressionModel":
        if self.w2_mean < 0:
            raise ValueError("w2_mean must be nonnegative so that E W1 <= E W2")
        return self

    @property
    def d_phi(self) -> int:
        return self.dim * (self.dim + 2)

    @property
    def k(self) -> int:
        return 2 * self.dim

    def split(self, phi):
        """(phi_1, phi_2, phi_3) from the flat layout."""
        values = self.check_phi(phi)
        d = self.dim
        return values[:d], values[d : d + d * d].reshape(d, d), values[d + d * d :]

    def _psi(self, theta, phi):
        d = self.dim
        p1, p2, p3 = phi[:d], phi[d : d + d * d].reshape(d, d), phi[d + d * d :]
        fitted = theta @ p2.T
        return np.hstack([fitted - p3, p1 - fitted])

    def grad_theta_psi(self, theta, phi):
        _, p2, _ = self.split(phi)
        return np.vstack([p2, -p2])

    def grad_phi_psi(self, theta, phi):
        d = self.dim
        theta = np.asarray(theta, dtype=float).ravel()
        # d(phi_2 theta)_i / d(phi_2)_{ij} = theta_j, row-major vec
        dfit = np.kron(np.eye(d), theta[None, :])
        eye, zero = np.eye(d), np.zeros((d, d))
        upper = np.hstack([zero, dfit, -eye])
        lower = np.hstack([eye, -dfit, zero])
        return np.vstack([upper, lower])

    def _inverse(self, p2: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(p2)) or np.linalg.cond(p2) > COND_LIMIT:
            raise NumericError("phi_2 is singular, the identified set is unbounded")
        return np.linalg.inv(p2)

    def closed_support(self, phi, nu) -> float:
        """Support value of the parallelotope ``phi_1 <= phi_2 theta <= phi_3`` cut by the box.

        When the parallelotope lies inside Theta this is ``w^T c + |w|^T r`` with
        ``w = phi_2^-T nu``, c and r the centre and radius. Otherwise the linear
        program over the intersection is solved.

        """
        return float(self.support_batch(phi, np.atleast_2d(np.asarray(nu, dtype=float)))[0])

    def _axis_extent(self, p1, p3, inv) -> tuple[np.ndarray, np.ndarray]:
        """Smallest and largest theta_j over the parallelotope."""
        centre, radius = inv @ (0.5 * (p1 + p3)), np.abs(inv) @ (0.5 * (p3 - p1))
        return centre - radius, centre + radius

    def inside_box(self, phi) -> bool:
        """Whether the parallelotope lies inside Theta, so the box constraints are slack."""
        p1, p2, p3 = self.split(phi)
        lo, hi = self._axis_extent(p1, p3, self._inverse(p2))
        return bool(np.all(lo >= self.box.lower) and np.all(hi <= self.box.upper))

    def _linprog_support(self, p1, p2, p3, nu) -> float:
        result = linprog(
            c=-np.asarray(nu, dtype=float),
            A_ub=np.vstack([p2, -p2]),
            b_ub=np.concatenate([p3, -p1]),
            bounds=list(zip(self.box.lower, self.box.upper)),
            method="highs",
        )
        if result.status == 2:
            return -np.inf
        if not result.success:
            raise NumericError(f"support linear program failed: {result.message}")
        return float(-result.fun)

    def support_batch(self, phi, directions):
        p1, p2, p3 = self.split(phi)
        directions = np.atleast_2d(directions)
        if np.any(p1 > p3):
            return np.full(directions.shape[0], -np.inf)
        inv = self._inverse(p2)
        lo, hi = self._axis_extent(p1, p3, inv)
        if np.all(lo >= self.box.lower) and np.all(hi <= self.box.upper):
            w = directions @ inv
            centre, radius = 0.5 * (p1 + p3), 0.5 * (p3 - p1)
            return w @ centre + np.abs(w) @ radius
        logger.debug("parallelotope leaves the box, solving linear programs")
        return np.array([self._linprog_support(p1, p2, p3, nu) for nu in directions])

    def is_empty(self, phi) -> bool:
        p1, p2, p3 = self.split(phi)
        if np.any(p1 > p3):
            return True
        if self.inside_box(phi):
            return False
        return self._linprog_support(p1, p2, p3, np.zeros(self.dim)) == -np.inf

    def true_phi(self):
        d = self.dim
        return self.phi(
            np.concatenate(
                [np.zeros(d), (self.v_scale * np.eye(d)).ravel(), np.full(d, self.w2_mean)]
            )
        )

    def phi_from_moments(self, moments):
        moments = np.asarray(moments, dtype=float)
        d = self.dim
        self._inverse(moments[d : d + d * d].reshape(d, d))
        return moments

    def simulate_dgp(self, stream: RngStream, n: int) -> DataMatrix:
        gen = stream.generator
        d = self.dim
        w1 = np.sqrt(self.w1_var) * gen.standard_normal((n, d))
        v = self.v_scale * np.eye(d).ravel() + np.sqrt(self.v_noise_var) * gen.standard_normal(
            (n, d * d)
        )
        w2 = self.w2_mean + gen.standard_normal((n, d))
        columns = (
            [f"w1_{i}" for i in range(d)]
            + [f"v_{i}_{j}" for i in range(d) for j in range(d)]
            + [f"w2_{i}" for i in range(d)]
        )
        return DataMatrix(rows=np.hstack([w1, v, w2]), columns=columns)

    def sample_posterior(self, stream, data, B) -> PosteriorDraws:
        return sample_phi_posterior(
            stream, data, self.dp, B, self.phi_from_moments, self.model_type
        )

    def sample_theta(self, stream, phi, size, density=None):
        """Uniform draws on Theta(phi) as the image of a uniform draw on [phi_1, phi_3].

        Draws falling outside the box are rejected.

        """
        if density is not None:
            return super().sample_theta(stream, phi, size, density)
        p1, p2, p3 = self.split(phi)
        if np.any(p1 > p3):
            raise DomainError("identified set is empty, phi_1 > phi_3")
        inv = self._inverse(p2)
        gen = stream.generator
        accepted, count = [], 0
        for _ in range(MAX_THETA_ROUNDS):
            u = p1 + (p3 - p1) * gen.random((size, self.dim))
            theta = u @ inv.T
            keep = np.all((theta >= self.box.lower) & (theta <= self.box.upper), axis=1)
            accepted.append(theta[keep])
            count += int(keep.sum())
            if count >= size:
                return np.vstack(accepted)[:size]
        raise DomainError("Theta(phi) does not intersect the box")
