"""Setid types."""
import logging
from enum import Enum
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_numpy.typing import Np1DArray

from setid.core.errors import ParameterError


logger = logging.getLogger(__name__)

UNIT_TOL = 1e-12


class SetidBaseModel(BaseModel):
    # The config below prevents https://github.com/pydantic/pydantic/discussions/7121
    model_config = ConfigDict(protected_namespaces=())


class Sided(str, Enum):
    """Sidedness of a credible band.

    Attributes
    ----------
    TWO_SIDED: "two_sided"
        Absolute support-function gap, brackets the set from inside and outside.
    UPPER: "upper"
        One-sided gap :math:`S_{\\phi} - S_{\\hat\\phi}`, outer set only.
    LOWER: "lower"
        One-sided gap :math:`S_{\\hat\\phi} - S_{\\phi}`, inner set only.

    """

    TWO_SIDED = "two_sided"
    UPPER = "upper"
    LOWER = "lower"


class SolveStatus(str, Enum):
    """Outcome of a support-function solve.

    Attributes
    ----------
    CONVERGED: "converged"
        Interior optimum, KKT residuals below tolerance.
    BOUNDARY: "boundary"
        Optimum lies on a face of the parameter box.
    DEGENERATE: "degenerate"
        Feasible set has no strictly feasible point (Slater fails), value taken
        at the phase-one optimum.
    INFEASIBLE: "infeasible"
        The identified set is empty.

    """

    CONVERGED = "converged"
    BOUNDARY = "boundary"
    DEGENERATE = "degenerate"
    INFEASIBLE = "infeasible"


class PhiVector(SetidBaseModel):
    """Point-identified parameter tagged with the model it belongs to."""

    model_type: str = Field(description="Tag of the model the vector belongs to")
    values: Np1DArray = Field(description="Model-specific layout of phi")

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"PhiVector(model_type={self.model_type}, values={self.values})"


class ThetaPoint(SetidBaseModel):
    """Structural parameter tagged with the model it belongs to."""

    model_type: str = Field(description="Tag of the model the point belongs to")
    values: Np1DArray = Field(description="Coordinates of theta")

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.values.size


class Direction(SetidBaseModel):
    """Unit vector on the sphere, argument of every support-function evaluation.

    Examples
    --------
    >>> Direction.from_vector([3.0, 4.0]).vector
    array([0.6, 0.8])

    """

    vector: Np1DArray = Field(description="Unit-norm direction")

    @field_validator("vector")
    @classmethod
    def validate_unit(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
            raise ValueError(f"direction must have unit norm, got {np.linalg.norm(v)}")
        return v

    @classmethod
    def from_vector(cls, v) -> "Direction":
        v = np.atleast_1d(np.asarray(v, dtype=float))
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ParameterError("cannot normalise a zero vector into a direction")
        return cls(vector=v / norm)

    @classmethod
    def axis(cls, dim: int, index: int, sign: float = 1.0) -> "Direction":
        v = np.zeros(dim)
        v[index] = np.sign(sign) or 1.0
        return cls(vector=v)

    @property
    def dim(self) -> int:
        return self.vector.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.vector, dtype=dtype)


class ThetaBox(SetidBaseModel):
    """Compact box Theta bounding the structural parameter."""

    lower: Np1DArray = Field(description="Lower bound of each coordinate")
    upper: Np1DArray = Field(description="Upper bound of each coordinate")

    @model_validator(mode="after")
    def validate_bounds(self) -> "ThetaBox":
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower and upper must have the same shape")
        if np.any(self.lower >= self.upper):
            raise ValueError("lower must be less than upper in every coordinate")
        return self

    @classmethod
    def cube(cls, dim: int, lo: float, hi: float) -> "ThetaBox":
        return cls(lower=np.full(dim, float(lo)), upper=np.full(dim, float(hi)))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, theta, tol: float = 0.0) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(
            np.all(theta >= self.lower - tol) and np.all(theta <= self.upper + tol)
        )

    def sample_uniform(self, generator: np.random.Generator, size: int) -> np.ndarray:
        """Uniform draws from the box, shape (size, dim)."""
        return self.lower + self.width * generator.random((size, self.dim))

    def __str__(self):
        return " x ".join(f"[{lo:g}, {hi:g}]" for lo, hi in zip(self.lower, self.upper))


class IntervalSet(SetidBaseModel):
    """Closed interval [lo, hi], possibly empty.

    Examples
    --------
    >>> IntervalSet(lo=0.35, hi=0.65).envelope(0.1)
    IntervalSet(lo=0.25, hi=0.75)
    >>> IntervalSet(lo=0.35, hi=0.65).contraction(0.2).is_empty
    True

    """

    lo: Optional[float] = Field(default=None, description="Lower end, None if empty")
    hi: Optional[float] = Field(default=None, description="Upper end, None if empty")

    @model_validator(mode="after")
    def validate_ends(self) -> "IntervalSet":
        if (self.lo is None) != (self.hi is None):
            raise ValueError("lo and hi must both be given or both be None (empty)")
        if self.lo is not None and self.lo > self.hi:
            raise ValueError(f"lo={self.lo} must not exceed hi={self.hi}")
        return self

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls()

    @property
    def is_empty(self) -> bool:
        return self.lo is None

    @property
    def length(self) -> float:
        return 0.0 if self.is_empty else self.hi - self.lo

    def envelope(self, eps: float) -> "IntervalSet":
        """Outward offset by eps."""
        if eps < 0:
            raise ParameterError(f"eps must be nonnegative, got {eps}")
        if self.is_empty:
            return self.empty()
        return IntervalSet(lo=self.lo - eps, hi=self.hi + eps)

    def contraction(self, eps: float) -> "IntervalSet":
        """Inward offset by eps, empty when the interval is shorter than 2 eps."""
        if eps < 0:
            raise ParameterError(f"eps must be nonnegative, got {eps}")
        if self.is_empty or self.hi - self.lo < 2 * eps:
            return self.empty()
        return IntervalSet(lo=self.lo + eps, hi=self.hi - eps)

    def contains(self, other: Union["IntervalSet", float], tol: float = 0.0) -> bool:
        if isinstance(other, IntervalSet):
            if other.is_empty:
                return True
            if self.is_empty:
                return False
            return self.lo - tol <= other.lo and other.hi <= self.hi + tol
        elif isinstance(other, (int, float, np.floating)):
            if self.is_empty:
                return False
            return self.lo - tol <= other <= self.hi + tol
        else:
            raise TypeError("other must be an IntervalSet or a real number")

    def support(self, nu: float) -> float:
        """Support function of the interval at a scalar direction."""
        if self.is_empty:
            return -np.inf
        return nu * self.hi if nu >= 0 else nu * self.lo

    def __repr__(self):
        if self.is_empty:
            return "IntervalSet(empty)"
        return f"IntervalSet(lo={self.lo:g}, hi={self.hi:g})"

    def __str__(self):
        return "[]" if self.is_empty else f"[{self.lo:g}, {self.hi:g}]"
