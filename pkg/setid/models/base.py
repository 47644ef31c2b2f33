"""Base class for moment-inequality models.

How to subclass
---------------

* Define a new ``model_type`` Literal for the subclass
* Set the default ``box`` and the truth fields used by ``simulate_dgp``
* Implement ``d_phi``, ``k``, ``_psi``, ``grad_theta_psi``, ``grad_phi_psi``,
  ``true_phi``, ``phi_from_moments``, ``simulate_dgp`` and ``sample_posterior``
* Override ``closed_support`` where the support function has a closed form,
  the generic barrier solver is used otherwise

"""
import logging
from abc import abstractmethod
from enum import Enum
from typing import Callable, Literal, Optional, Union

import numpy as np
from pydantic import ConfigDict, Field

from setid.core.dpposterior import DataMatrix, PosteriorDraws
from setid.core.errors import DomainError, ParameterError
from setid.core.samplekit import RngStream
from setid.core.setgeom import support_solve
from setid.core.types import (
    Direction,
    PhiVector,
    SetidBaseModel,
    SolveStatus,
    ThetaBox,
    ThetaPoint,
)


logger = logging.getLogger(__name__)

MAX_THETA_TRIES = 1000


class PointEstimate(str, Enum):
    """Point estimate of phi used as the centre of credible bands.

    Attributes
    ----------
    MODE: "mode"
        Closed-form posterior mode, conjugate models only.
    MEAN: "mean"
        Mean of the posterior draws.

    """

    MODE = "mode"
    MEAN = "mean"


class ModelSpec(SetidBaseModel):
    """Base class for models defined by Psi(theta, phi) <= 0 on a box.

    This class is not intended to be used directly, but to be subclassed by the
    worked models to implement the following common behaviour:

    * Batched evaluation of Psi over rows of theta
    * Support values from the closed form when available, the solver otherwise
    * Tag checks on every PhiVector and ThetaPoint passed in
    * Rejection sampling of theta given phi as the fallback prior of theta

    """

    model_type: Literal["base"] = Field(description="Model type discriminator")
    box: ThetaBox = Field(description="Compact parameter space Theta")
    model_config = ConfigDict(extra="forbid")

    @property
    def dim(self) -> int:
        """Dimension d of theta."""
        return self.box.dim

    @property
    @abstractmethod
    def d_phi(self) -> int:
        """Dimension of phi."""
        pass

    @property
    @abstractmethod
    def k(self) -> int:
        """Number of moment inequalities."""
        pass

    def phi(self, values) -> PhiVector:
        """Tag raw values as a phi of this model."""
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if values.size != self.d_phi:
            raise ParameterError(
                f"{self.model_type} expects phi of size {self.d_phi}, got {values.size}"
            )
        return PhiVector(model_type=self.model_type, values=values)

    def check_phi(self, phi: Union[PhiVector, np.ndarray]) -> np.ndarray:
        """Values of phi after checking that it belongs to this model."""
        if isinstance(phi, PhiVector) and phi.model_type != self.model_type:
            raise ParameterError(
                f"phi of model {phi.model_type} passed to model {self.model_type}"
            )
        values = np.asarray(phi, dtype=float).ravel()
        if values.size != self.d_phi:
            raise ParameterError(
                f"{self.model_type} expects phi of size {self.d_phi}, got {values.size}"
            )
        return values

    def _theta_array(self, theta: Union[ThetaPoint, np.ndarray]) -> np.ndarray:
        if isinstance(theta, ThetaPoint) and theta.model_type != self.model_type:
            raise ParameterError(
                f"theta of model {theta.model_type} passed to model {self.model_type}"
            )
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.dim:
            raise ParameterError(
                f"{self.model_type} expects theta of size {self.dim}, got {theta.shape[-1]}"
            )
        return theta

    @abstractmethod
    def _psi(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Psi for an (N, d) array of theta, returns (N, k)."""
        pass

    def psi(self, theta, phi) -> np.ndarray:
        """Moment inequalities Psi(theta, phi), (k,) for one theta, (N, k) for rows."""
        theta = self._theta_array(theta)
        values = self.check_phi(phi)
        out = self._psi(np.atleast_2d(theta), values)
        return out[0] if theta.ndim == 1 else out

    @abstractmethod
    def grad_theta_psi(self, theta, phi) -> np.ndarray:
        """k x d Jacobian of Psi in theta."""
        pass

    def hess_theta_psi(self, theta, phi) -> np.ndarray:
        """k x d x d Hessians of Psi in theta, zero for linear constraints."""
        return np.zeros((self.k, self.dim, self.dim))

    @abstractmethod
    def grad_phi_psi(self, theta, phi) -> np.ndarray:
        """k x d_phi Jacobian of Psi in phi."""
        pass

    def equalities(self, phi) -> Optional[tuple[np.ndarray, np.ndarray]]:
        """Affine equalities A theta = b, None when the model has none."""
        return None

    def grad_phi_equalities(self, theta, phi) -> np.ndarray:
        """Jacobian of A(phi) theta - b(phi) in phi."""
        eq = self.equalities(phi)
        k2 = 0 if eq is None else np.atleast_2d(eq[0]).shape[0]
        return np.zeros((k2, self.d_phi))

    def closed_support(self, phi, nu) -> float:
        """Closed-form support value, not available for the base model."""
        raise NotImplementedError(f"{self.model_type} has no closed-form support")

    @property
    def has_closed_support(self) -> bool:
        return type(self).closed_support is not ModelSpec.closed_support

    def support(self, phi, nu: Union[Direction, np.ndarray]) -> float:
        """Support value S_phi(nu), -inf when the identified set is empty."""
        if self.has_closed_support:
            return self.closed_support(phi, nu)
        return support_solve(self, phi, nu).value

    def support_batch(self, phi, directions: np.ndarray) -> np.ndarray:
        """Support values at each row of an (N, d) array of directions."""
        return np.array([self.support(phi, nu) for nu in np.atleast_2d(directions)])

    def is_empty(self, phi) -> bool:
        """Whether Theta(phi) is empty."""
        nu = Direction.axis(self.dim, 0).vector
        return support_solve(self, phi, nu).status == SolveStatus.INFEASIBLE

    @abstractmethod
    def true_phi(self) -> PhiVector:
        """phi at the truth of the data generating process."""
        pass

    @abstractmethod
    def phi_from_moments(self, moments) -> np.ndarray:
        """phi as a function of the column means of the data."""
        pass

    def estimate_phi(self, data: DataMatrix) -> PhiVector:
        """Plug-in estimate of phi from sample means."""
        return self.phi(self.phi_from_moments(data.column_means()))

    @abstractmethod
    def simulate_dgp(self, stream: RngStream, n: int) -> DataMatrix:
        """n i.i.d. observations from the data generating process."""
        pass

    @abstractmethod
    def sample_posterior(self, stream: RngStream, data: DataMatrix, B: int) -> PosteriorDraws:
        """B draws from the posterior of phi."""
        pass

    def posterior_point_estimate(
        self, draws: PosteriorDraws, kind: PointEstimate = PointEstimate.MEAN
    ) -> PhiVector:
        """Posterior mean of the draws, conjugate models also provide the mode."""
        if draws.model_type != self.model_type:
            raise ParameterError(
                f"draws of model {draws.model_type} passed to model {self.model_type}"
            )
        if PointEstimate(kind) == PointEstimate.MODE:
            logger.warning(f"{self.model_type} has no closed-form mode, using the mean")
        return draws.mean()

    def default_estimate(self) -> PointEstimate:
        """Point estimate used as the band centre unless configured otherwise."""
        return PointEstimate.MEAN

    def fisher_information(self, phi) -> np.ndarray:
        """Per-observation Fisher information of phi, conjugate models only."""
        raise DomainError(f"{self.model_type} has no parametric likelihood for phi")

    def sample_theta(
        self,
        stream: RngStream,
        phi,
        size: int,
        density: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ) -> np.ndarray:
        """Draws of theta from pi(theta | phi), proportional to g(theta) on Theta(phi).

        The fallback is rejection sampling from the box. ``density`` is the
        plug-in g with values in [0, 1], uniform when None.

        Returns
        -------
        theta: np.ndarray
            Array of shape (size, d).

        Raises
        ------
        DomainError
            When no draw is accepted, e.g. Theta(phi) is empty.

        """
        values = self.check_phi(phi)
        accepted = []
        count = 0
        for _ in range(MAX_THETA_TRIES):
            cand = self.box.sample_uniform(stream.generator, max(size, 64))
            keep = np.all(self._psi(cand, values) <= 0, axis=1)
            if density is not None:
                keep &= stream.generator.random(cand.shape[0]) <= density(cand)
            accepted.append(cand[keep])
            count += int(keep.sum())
            if count >= size:
                return np.vstack(accepted)[:size]
        raise DomainError(f"no theta accepted for phi={values}, the set may be empty")

    def __str__(self):
        return f"{self.__class__.__name__}(box={self.box})"
