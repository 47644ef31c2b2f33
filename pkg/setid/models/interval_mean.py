"""Mean of an interval-censored outcome.

The outcome Y is only known to lie in [Y1, Y2], so E Y is identified up to
``Theta(phi) = [phi_1, phi_2]`` with ``phi = (E Y1, E Y2)``.

"""
import logging
from typing import Literal

import numpy as np
from pydantic import Field, model_validator

from setid.core.dpposterior import DataMatrix, DpConfig, PosteriorDraws, sample_phi_posterior
from setid.core.samplekit import RngStream
from setid.core.types import ThetaBox
from setid.models.base import ModelSpec, PointEstimate


logger = logging.getLogger(__name__)


class IntervalMeanModel(ModelSpec):
    """Interval-censored mean with a Dirichlet-process posterior for phi.

    Data rows are ``(Y1, Y2)``. The simulated outcome has ``Y1 ~ N(phi0_1, 1)``
    and ``Y2 = Y1 + U[0, 2 (phi0_2 - phi0_1)]``.

    """

    model_type: Literal["interval_mean"] = Field(
        "interval_mean", description="Model type discriminator"
    )
    box: ThetaBox = Field(
        default_factory=lambda: ThetaBox.cube(1, -10.0, 10.0),
        description="Compact parameter space Theta",
    )
    phi0: tuple[float, float] = Field(
        (0.0, 1.0), description="True (E Y1, E Y2) of the data generating process"
    )
    dp: DpConfig = Field(default_factory=DpConfig, description="Dirichlet-process prior")
    extended_support: bool = Field(
        False,
        description=(
            "Evaluate S(1) = phi_2 and S(-1) = -phi_1 also when phi_1 > phi_2 instead of "
            "treating the set as empty"
        ),
    )

    @model_validator(mode="after")
    def validate_truth(self) -> "IntervalMeanModel":
        if self.box.dim != 1:
            raise ValueError("the interval-mean parameter is scalar, box must be 1-d")
        if self.phi0[0] > self.phi0[1]:
            raise ValueError(f"phi0 must satisfy E Y1 <= E Y2, got {self.phi0}")
        return self

    @property
    def d_phi(self) -> int:
        return 2

    @property
    def k(self) -> int:
        return 2

    def _psi(self, theta, phi):
        t = theta[:, 0]
        return np.column_stack([phi[0] - t, t - phi[1]])

    def grad_theta_psi(self, theta, phi):
        return np.array([[-1.0], [1.0]])

    def grad_phi_psi(self, theta, phi):
        return np.array([[1.0, 0.0], [0.0, -1.0]])

    def closed_support(self, phi, nu) -> float:
        """``S(1) = phi_2`` and ``S(-1) = -phi_1``, -inf when phi_1 > phi_2 unless extended."""
        lo, hi = self.check_phi(phi)
        if lo > hi and not self.extended_support:
            return -np.inf
        nu = float(np.asarray(nu, dtype=float).ravel()[0])
        return nu * hi if nu >= 0 else nu * lo

    def support_batch(self, phi, directions):
        lo, hi = self.check_phi(phi)
        nu = np.asarray(directions, dtype=float).reshape(-1)
        if lo > hi and not self.extended_support:
            return np.full(nu.shape, -np.inf)
        return np.where(nu >= 0, nu * hi, nu * lo)

    def is_empty(self, phi) -> bool:
        lo, hi = self.check_phi(phi)
        return bool(lo > hi)

    def true_phi(self):
        return self.phi(self.phi0)

    def phi_from_moments(self, moments):
        return np.asarray(moments, dtype=float)

    def simulate_dgp(self, stream: RngStream, n: int) -> DataMatrix:
        gen = stream.generator
        y1 = self.phi0[0] + gen.standard_normal(n)
        y2 = y1 + gen.uniform(0.0, 2.0 * (self.phi0[1] - self.phi0[0]), n)
        return DataMatrix(rows=np.column_stack([y1, y2]), columns=["y1", "y2"])

    def sample_posterior(self, stream, data, B) -> PosteriorDraws:
        return sample_phi_posterior(
            stream, data, self.dp, B, self.phi_from_moments, self.model_type
        )

    def sample_theta(self, stream, phi, size, density=None):
        if density is not None:
            return super().sample_theta(stream, phi, size, density)
        lo, hi = self.check_phi(phi)
        if lo > hi:
            return super().sample_theta(stream, phi, size)
        return stream.generator.uniform(lo, hi, (size, 1))


class GaussianIntervalModel(IntervalMeanModel):
    """Interval model with Gaussian bounds and conjugate normal priors.

    Data rows are ``(Y1, Y2)`` with independent ``Y_i ~ N(phi0_i, 1)`` and
    priors ``phi_i ~ N(0, 1)``, so that ``phi_i | D ~ N(n Ybar_i / (1 + n), 1 / (1 + n))``.

    """

    model_type: Literal["gaussian_interval"] = Field(
        "gaussian_interval", description="Model type discriminator"
    )
    phi0: tuple[float, float] = Field(
        (1.0, 1.0), description="True (E Y1, E Y2) of the data generating process"
    )
    extended_support: bool = Field(
        True, description="Evaluate the support formulas also when phi_1 > phi_2"
    )

    def simulate_dgp(self, stream: RngStream, n: int) -> DataMatrix:
        z = stream.generator.standard_normal((n, 2))
        return DataMatrix(rows=np.asarray(self.phi0) + z, columns=["y1", "y2"])

    def posterior_params(self, data: DataMatrix) -> tuple[np.ndarray, float]:
        """Posterior mean vector and common variance."""
        n = data.n
        return data.column_means() * n / (1.0 + n), 1.0 / (1.0 + n)

    def sample_posterior(self, stream, data, B) -> PosteriorDraws:
        mean, var = self.posterior_params(data)
        draws = mean + np.sqrt(var) * stream.generator.standard_normal((B, 2))
        return PosteriorDraws(
            model_type=self.model_type,
            draws=draws,
            seed=stream.seed,
            stream_key=stream.path + (stream.stream_id,),
            conjugate={"mean": list(mean), "var": [var, var]},
        )

    def posterior_point_estimate(self, draws, kind=PointEstimate.MODE):
        kind = PointEstimate(kind)
        if kind == PointEstimate.MODE and draws.conjugate is not None:
            return self.phi(draws.conjugate["mean"])
        return super().posterior_point_estimate(draws, PointEstimate.MEAN)

    def default_estimate(self) -> PointEstimate:
        return PointEstimate.MODE

    def fisher_information(self, phi):
        self.check_phi(phi)
        return np.eye(2)
