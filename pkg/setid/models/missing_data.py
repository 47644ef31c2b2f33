"""Mean of a binary outcome with data missing not at random.

With M the indicator that Y is observed, ``phi = (P(M=1), P(Y=1 | M=1))``
identifies ``theta = P(Y=1)`` up to

    Theta(phi) = [phi_1 phi_2, phi_1 phi_2 + 1 - phi_1].

"""
import logging
from typing import Literal

import numpy as np
from pydantic import Field, model_validator

from setid.core.dpposterior import DataMatrix, PosteriorDraws
from setid.core.errors import NumericError
from setid.core.samplekit import RngStream, draw_beta
from setid.core.types import IntervalSet, SetidBaseModel, ThetaBox
from setid.models.base import ModelSpec, PointEstimate


logger = logging.getLogger(__name__)


class BetaPrior(SetidBaseModel):
    """Independent Beta priors on phi_1 and phi_2."""

    alpha1: float = Field(1.0, description="First shape of the prior of phi_1", gt=0)
    beta1: float = Field(1.0, description="Second shape of the prior of phi_1", gt=0)
    alpha2: float = Field(1.0, description="First shape of the prior of phi_2", gt=0)
    beta2: float = Field(1.0, description="Second shape of the prior of phi_2", gt=0)

    @classmethod
    def symmetric(cls, alpha: float, beta: float) -> "BetaPrior":
        return cls(alpha1=alpha, beta1=beta, alpha2=alpha, beta2=beta)


def _beta_mode(a: float, b: float) -> float:
    """Mode of Beta(a, b), the mean when the mode is not unique or not interior."""
    if a >= 1 and b >= 1 and a + b > 2:
        return (a - 1) / (a + b - 2)
    logger.warning(f"Beta({a:g}, {b:g}) mode is undefined, using the mean")
    return a / (a + b)


class MissingDataModel(ModelSpec):
    """Missing-data model with conjugate Beta posteriors.

    Data rows are ``(M, M Y)``: the observation indicator and the outcome when
    observed, zero otherwise.

    """

    model_type: Literal["missing_data"] = Field(
        "missing_data", description="Model type discriminator"
    )
    box: ThetaBox = Field(
        default_factory=lambda: ThetaBox.cube(1, 0.0, 1.0),
        description="Compact parameter space Theta",
    )
    phi0: tuple[float, float] = Field(
        (0.7, 0.5), description="True (P(M=1), P(Y=1|M=1))"
    )
    prior: BetaPrior = Field(default_factory=BetaPrior, description="Beta priors of phi")

    @model_validator(mode="after")
    def validate_truth(self) -> "MissingDataModel":
        if self.box.dim != 1:
            raise ValueError("the missing-data parameter is scalar, box must be 1-d")
        if not all(0.0 <= p <= 1.0 for p in self.phi0):
            raise ValueError(f"phi0 components must lie in [0, 1], got {self.phi0}")
        return self

    @property
    def d_phi(self) -> int:
        return 2

    @property
    def k(self) -> int:
        return 2

    def _psi(self, theta, phi):
        t = theta[:, 0]
        prod = phi[0] * phi[1]
        return np.column_stack([prod - t, t - prod - 1.0 + phi[0]])

    def grad_theta_psi(self, theta, phi):
        return np.array([[-1.0], [1.0]])

    def grad_phi_psi(self, theta, phi):
        p1, p2 = self.check_phi(phi)
        return np.array([[p2, p1], [1.0 - p2, -p1]])

    def closed_support(self, phi, nu) -> float:
        p1, p2 = self.check_phi(phi)
        nu = float(np.asarray(nu, dtype=float).ravel()[0])
        return nu * (p1 * p2 + 1.0 - p1) if nu >= 0 else nu * p1 * p2

    def support_batch(self, phi, directions):
        p1, p2 = self.check_phi(phi)
        nu = np.asarray(directions, dtype=float).reshape(-1)
        return np.where(nu >= 0, nu * (p1 * p2 + 1.0 - p1), nu * p1 * p2)

    def is_empty(self, phi) -> bool:
        p1, _ = self.check_phi(phi)
        return bool(p1 > 1.0)

    def identified_interval(self, phi):
        """Theta(phi) as an interval."""
        p1, p2 = self.check_phi(phi)
        return IntervalSet(lo=p1 * p2, hi=p1 * p2 + 1.0 - p1)

    def true_phi(self):
        return self.phi(self.phi0)

    def phi_from_moments(self, moments):
        m, my = np.asarray(moments, dtype=float)
        if m <= 0:
            raise NumericError("no observed outcome, P(Y=1 | M=1) is not estimable")
        return np.array([m, my / m])

    def simulate_dgp(self, stream: RngStream, n: int) -> DataMatrix:
        gen = stream.generator
        m = (gen.random(n) < self.phi0[0]).astype(float)
        y = (gen.random(n) < self.phi0[1]).astype(float)
        return DataMatrix(rows=np.column_stack([m, m * y]), columns=["m", "my"])

    def posterior_shapes(self, data: DataMatrix) -> tuple[np.ndarray, np.ndarray]:
        """Beta posterior shapes (a1, a2) and (b1, b2).

        With no observed outcome the posterior of phi_2 is its prior.

        """
        n = data.n
        n1 = float(data.rows[:, 0].sum())
        n2 = float(data.rows[:, 1].sum())
        pr = self.prior
        a = np.array([pr.alpha1 + n1, pr.alpha2 + n2])
        b = np.array([pr.beta1 + n - n1, pr.beta2 + n1 - n2])
        return a, b

    def sample_posterior(self, stream, data, B) -> PosteriorDraws:
        a, b = self.posterior_shapes(data)
        draws = np.column_stack(
            [draw_beta(stream, a[0], b[0], size=B), draw_beta(stream, a[1], b[1], size=B)]
        )
        return PosteriorDraws(
            model_type=self.model_type,
            draws=draws,
            seed=stream.seed,
            stream_key=stream.path + (stream.stream_id,),
            conjugate={"a": list(a), "b": list(b)},
        )

    def posterior_point_estimate(self, draws, kind=PointEstimate.MODE):
        kind = PointEstimate(kind)
        if kind == PointEstimate.MODE and draws.conjugate is not None:
            a, b = draws.conjugate["a"], draws.conjugate["b"]
            return self.phi([_beta_mode(a[0], b[0]), _beta_mode(a[1], b[1])])
        return super().posterior_point_estimate(draws, PointEstimate.MEAN)

    def default_estimate(self) -> PointEstimate:
        return PointEstimate.MODE

    def fisher_information(self, phi):
        """Bernoulli information of (P(M=1), P(Y=1|M=1)) per observation."""
        p1, p2 = self.check_phi(phi)
        return np.diag([1.0 / (p1 * (1.0 - p1)), p1 / (p2 * (1.0 - p2))])

    def sample_theta(self, stream, phi, size, density=None):
        if density is not None:
            return super().sample_theta(stream, phi, size, density)
        interval = self.identified_interval(phi)
        return stream.generator.uniform(interval.lo, interval.hi, (size, 1))
