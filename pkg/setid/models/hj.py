"""Mean-variance set of stochastic discount factors.

An SDF with mean mu and variance sigma^2 can price N assets with gross returns
of mean m and covariance Sigma only if

    sigma^2 >= sigma^2_phi(mu) = phi_1 mu^2 - 2 phi_2 mu + phi_3

with ``phi = (m' Sigma^-1 m, m' Sigma^-1 iota, iota' Sigma^-1 iota)``.
theta = (mu, sigma^2) lives in the box ``[0, mu_bar] x [0, sigma_bar^2]``.

"""
import logging
from typing import Literal, Optional

import numpy as np
from pydantic import Field, model_validator
from pydantic_numpy.typing import Np2DArray

from setid.core.dpposterior import DataMatrix, DpConfig, PosteriorDraws, sample_phi_posterior
from setid.core.errors import DomainError, NumericError, ParameterError
from setid.core.samplekit import RngStream
from setid.core.setgeom import hj_feasible_interval, hj_support
from setid.core.types import ThetaBox
from setid.models.base import ModelSpec


logger = logging.getLogger(__name__)

COND_LIMIT = 1e12


def hj_phi(m: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """phi from the mean and covariance of the returns."""
    m = np.asarray(m, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if np.linalg.cond(cov) > COND_LIMIT:
        raise NumericError("return covariance is singular")
    iota = np.ones_like(m)
    sol = np.linalg.solve(cov, np.column_stack([m, iota]))
    return np.array([m @ sol[:, 0], m @ sol[:, 1], iota @ sol[:, 1]])


class HJModel(ModelSpec):
    """Hansen-Jagannathan bound with a Dirichlet-process posterior for (m, Sigma).

    Returns follow the factor model ``R_t = Lambda f_t + u_t + r_mean iota`` with
    ``N x n_factors`` standard normal loadings drawn once per replication and
    factors and errors i.i.d. ``U[-noise_bound, noise_bound]``.

    """

    model_type: Literal["hj"] = Field("hj", description="Model type discriminator")
    box: ThetaBox = Field(
        default_factory=lambda: ThetaBox(lower=[0.0, 0.0], upper=[1.4, 6.0]),
        description="Compact parameter space [0, mu_bar] x [0, sigma_bar^2]",
    )
    n_assets: int = Field(5, description="Number of assets N", ge=1)
    n_factors: int = Field(2, description="Number of factors", ge=1)
    r_mean: float = Field(2.0, description="Mean gross return of every asset")
    noise_bound: float = Field(2.0, description="Half width of the uniform factors and errors", gt=0)
    loadings: Optional[Np2DArray] = Field(
        default=None, description="Fixed factor loadings, None to draw them per replication"
    )
    dp: DpConfig = Field(default_factory=DpConfig, description="Dirichlet-process prior")

    @model_validator(mode="after")
    def validate_box(self) -> "HJModel":
        if self.box.dim != 2:
            raise ValueError("theta = (mu, sigma^2) is 2-d")
        if self.box.lower[0] != 0 or self.box.lower[1] != 0:
            raise ValueError("the box must start at (0, 0)")
        if self.loadings is not None and self.loadings.shape != (self.n_assets, self.n_factors):
            raise ValueError(f"loadings must have shape ({self.n_assets}, {self.n_factors})")
        return self

    @property
    def mu_bar(self) -> float:
        return float(self.box.upper[0])

    @property
    def sigma2_bar(self) -> float:
        return float(self.box.upper[1])

    @property
    def d_phi(self) -> int:
        return 3

    @property
    def k(self) -> int:
        return 1

    def phi(self, values):
        """Tag raw values as an HJ phi, which must come from some (m, Sigma)."""
        tagged = super().phi(values)
        if not self.phi_is_admissible(tagged.values):
            raise ParameterError(
                f"phi={tagged.values} violates phi_1 > 0, phi_1 phi_3 >= phi_2^2"
            )
        return tagged

    def check_phi(self, phi):
        values = super().check_phi(phi)
        if values[0] <= 0:
            raise ParameterError(f"phi_1 must be positive, got {values[0]}")
        return values

    def sigma2(self, phi, mu):
        """Minimum SDF variance sigma^2_phi(mu)."""
        p1, p2, p3 = self.check_phi(phi)
        mu = np.asarray(mu, dtype=float)
        return p1 * mu**2 - 2 * p2 * mu + p3

    def _psi(self, theta, phi):
        mu, s2 = theta[:, 0], theta[:, 1]
        return (phi[0] * mu**2 - 2 * phi[1] * mu + phi[2] - s2)[:, None]

    def grad_theta_psi(self, theta, phi):
        p1, p2, _ = self.check_phi(phi)
        mu = float(np.asarray(theta, dtype=float).ravel()[0])
        return np.array([[2 * p1 * mu - 2 * p2, -1.0]])

    def hess_theta_psi(self, theta, phi):
        p1 = self.check_phi(phi)[0]
        return np.array([[[2 * p1, 0.0], [0.0, 0.0]]])

    def grad_phi_psi(self, theta, phi):
        self.check_phi(phi)
        mu = float(np.asarray(theta, dtype=float).ravel()[0])
        return np.array([[mu**2, -2 * mu, 1.0]])

    def closed_support(self, phi, nu) -> float:
        return hj_support(self.check_phi(phi), np.asarray(nu, dtype=float).ravel(), self.box)

    def support_batch(self, phi, directions):
        return hj_support(self.check_phi(phi), np.atleast_2d(directions), self.box)

    def is_empty(self, phi) -> bool:
        return hj_feasible_interval(self.check_phi(phi), self.box).is_empty

    def phi_is_admissible(self, phi) -> bool:
        """Cauchy-Schwarz for the Sigma^-1 inner product, phi_1 phi_3 >= phi_2^2."""
        p1, p2, p3 = np.asarray(phi, dtype=float)
        return bool(p1 > 0 and p1 * p3 - p2**2 >= -1e-10 * max(1.0, p1 * p3))

    def draw_loadings(self, stream: RngStream) -> np.ndarray:
        return stream.generator.standard_normal((self.n_assets, self.n_factors))

    def true_moments(self, loadings: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of the returns implied by the factor model."""
        loadings = self.loadings if loadings is None else loadings
        if loadings is None:
            raise DomainError("the true moments need the factor loadings")
        var = self.noise_bound**2 / 3.0
        cov = var * (loadings @ loadings.T + np.eye(self.n_assets))
        return np.full(self.n_assets, self.r_mean), cov

    def true_phi(self, loadings: Optional[np.ndarray] = None):
        return self.phi(hj_phi(*self.true_moments(loadings)))

    def phi_from_moments(self, moments):
        """Not defined, phi depends on the covariance of the returns too."""
        raise NotImplementedError("HJ phi depends on second moments, use estimate_phi")

    def estimate_phi(self, data: DataMatrix):
        cov = np.cov(data.rows, rowvar=False, ddof=0)
        return self.phi(hj_phi(data.column_means(), np.atleast_2d(cov)))

    def simulate_dgp(self, stream: RngStream, n: int, loadings: Optional[np.ndarray] = None) -> DataMatrix:
        gen = stream.generator
        loadings = self.loadings if loadings is None else loadings
        if loadings is None:
            raise DomainError("simulate_dgp needs loadings, set them or use draw_loadings")
        b = self.noise_bound
        f = gen.uniform(-b, b, (n, self.n_factors))
        u = gen.uniform(-b, b, (n, self.n_assets))
        rows = f @ loadings.T + u + self.r_mean
        return DataMatrix(rows=rows, columns=[f"r{i}" for i in range(self.n_assets)])

    def sample_posterior(self, stream, data, B) -> PosteriorDraws:
        return sample_phi_posterior(
            stream, data, self.dp, B, hj_phi, self.model_type, moments="mean_cov"
        )

    def sample_theta(self, stream, phi, size, density=None):
        """Hierarchical uniform prior: mu ~ U[0, mu_bar], then sigma^2 ~ U[sigma^2_phi(mu), sigma_bar^2].

        mu is drawn uniformly over the feasible part of [0, mu_bar], which is the
        same as redrawing mu until sigma^2_phi(mu) <= sigma_bar^2.

        """
        if density is not None:
            return super().sample_theta(stream, phi, size, density)
        values = self.check_phi(phi)
        J = hj_feasible_interval(values, self.box)
        if J.is_empty:
            raise DomainError(f"identified set is empty at phi={values}")
        gen = stream.generator
        mu = gen.uniform(J.lo, J.hi, size)
        lower = np.clip(self.sigma2(values, mu), 0.0, self.sigma2_bar)
        s2 = lower + (self.sigma2_bar - lower) * gen.random(size)
        return np.column_stack([mu, s2])
