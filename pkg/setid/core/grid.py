import logging
from typing import Literal, Optional

import numpy as np
from pydantic import Field, model_validator
from pydantic_numpy.typing import Np2DArray
from scipy.stats import norm, qmc

from setid.core.errors import ParameterError
from setid.core.types import Direction, SetidBaseModel


logger = logging.getLogger(__name__)

DEFAULT_SIZES = {1: 2, 2: 256, 3: 2048}
SOBOL_SEED = 20_190_801


class SphereGrid(SetidBaseModel):
    """Deterministic set of unit directions covering the sphere.

    The sup over directions in the J statistic and the Hausdorff distance is
    approximated by a max over this grid. The design is fixed for a given
    ``(dim, size)``:

    * ``dim=1``: exactly ``{+1, -1}``.
    * ``dim=2``: equally spaced angles.
    * ``dim=3``: Fibonacci spiral.
    * ``dim>3``: scrambled Sobol points with a fixed seed pushed through the
      normal quantile and normalised.

    The ``2 dim`` signed axis directions are always part of the grid so that
    coordinate projections are exact.

    Examples
    --------
    >>> SphereGrid(dim=1).directions
    array([[ 1.],
           [-1.]])

    """

    grid_type: Literal["sphere"] = Field(
        "sphere", description="Type of grid, must be 'sphere'"
    )
    dim: int = Field(description="Dimension of the ambient space", ge=1)
    size: Optional[int] = Field(
        default=None,
        description="Number of design directions, defaults to 2, 256, 2048 for dim 1, 2, 3",
    )
    directions: Optional[Np2DArray] = Field(
        default=None, description="The unit directions, one per row"
    )

    @model_validator(mode="after")
    def generate(self) -> "SphereGrid":
        """Generate the directions from dim and size."""
        if self.size is None:
            self.size = DEFAULT_SIZES.get(self.dim, 256 * self.dim)
        if self.directions is not None:
            logger.warning("directions provided explicitly, size is ignored")
            self.directions = self._normalise(np.atleast_2d(self.directions))
            self.size = self.directions.shape[0]
            return self
        if self.size < 2:
            raise ValueError(f"size must be at least 2, got {self.size}")
        self.directions = self._gen_directions()
        return self

    @staticmethod
    def _normalise(dirs: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(dirs, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("directions must be nonzero")
        return dirs / norms

    def _axes(self) -> np.ndarray:
        eye = np.eye(self.dim)
        return np.vstack([eye, -eye])

    def _gen_directions(self) -> np.ndarray:
        if self.dim == 1:
            return np.array([[1.0], [-1.0]])
        if self.dim == 2:
            angles = 2 * np.pi * np.arange(self.size) / self.size
            design = np.column_stack([np.cos(angles), np.sin(angles)])
        elif self.dim == 3:
            # Fibonacci sphere
            i = np.arange(self.size) + 0.5
            z = 1 - 2 * i / self.size
            r = np.sqrt(1 - z**2)
            phi = np.pi * (1 + np.sqrt(5)) * i
            design = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
        else:
            sampler = qmc.Sobol(d=self.dim, scramble=True, seed=SOBOL_SEED)
            u = sampler.random(self.size)
            u = np.clip(u, 1e-12, 1 - 1e-12)
            design = self._normalise(norm.ppf(u))
        design = np.vstack([self._axes(), design])
        # Drop design points that duplicate an axis
        _, keep = np.unique(np.round(design, 12) + 0.0, axis=0, return_index=True)
        return design[np.sort(keep)]

    def __len__(self):
        return self.directions.shape[0]

    def __iter__(self):
        for row in self.directions:
            yield Direction(vector=row)

    def axis_index(self, index: int, sign: float = 1.0) -> int:
        """Row of the signed axis direction ``sign * e_index``."""
        if not 0 <= index < self.dim:
            raise ParameterError(f"axis index {index} outside dimension {self.dim}")
        target = Direction.axis(self.dim, index, sign).vector
        return int(np.argmin(np.linalg.norm(self.directions - target, axis=1)))

    def __repr__(self):
        return f"{self.__class__.__name__}(dim={self.dim}, size={len(self)})"

    def __str__(self):
        return self.__repr__()
