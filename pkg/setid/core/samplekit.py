"""Seeded random streams, the scalar distributions the samplers need, and
empirical quantiles.

Streams are derived from numpy ``SeedSequence`` spawn keys, so that stream
``(seed, path, stream_id)`` always yields the same draws regardless of which
thread consumes it.

"""
import logging
import math
from typing import Optional

import numpy as np
from pydantic import Field, PrivateAttr, field_validator
from pydantic_numpy.typing import Np1DArray
from scipy.special import ndtr, ndtri

from setid.core.errors import NumericError, ParameterError, StateError
from setid.core.types import SetidBaseModel


logger = logging.getLogger(__name__)

PSD_TOL = 1e-10


class RngStream(SetidBaseModel):
    """Deterministic, splittable random stream.

    Examples
    --------
    >>> a = RngStream(seed=7, stream_id=3)
    >>> b = RngStream(seed=7, stream_id=3)
    >>> a.generator.random() == b.generator.random()
    True

    """

    seed: int = Field(description="Master seed", ge=0)
    stream_id: int = Field(0, description="Stream index, one per replication", ge=0)
    path: tuple[int, ...] = Field(
        (), description="Stream ids of the ancestors of this stream"
    )
    _generator: Optional[np.random.Generator] = PrivateAttr(default=None)

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            sseq = np.random.SeedSequence(
                entropy=self.seed, spawn_key=self.path + (self.stream_id,)
            )
            self._generator = np.random.default_rng(sseq)
        return self._generator

    def child(self, stream_id: int) -> "RngStream":
        """Independent sub-stream, e.g. posterior draw b inside replication r."""
        return RngStream(
            seed=self.seed, stream_id=stream_id, path=self.path + (self.stream_id,)
        )

    def __str__(self):
        return f"RngStream(seed={self.seed}, key={self.path + (self.stream_id,)})"


def draw_gamma(stream: RngStream, shape, size=None) -> np.ndarray:
    """Standard Gamma variates (Marsaglia-Tsang, with boosting for shape < 1)."""
    shape = np.asarray(shape, dtype=float)
    if np.any(shape <= 0):
        raise ParameterError(f"gamma shape must be positive, got {shape}")
    return stream.generator.standard_gamma(shape, size=size)


def draw_beta(stream: RngStream, a: float, b: float, size=None):
    """Beta(a, b) variates as a ratio of two Gamma variates.

    Parameters
    ----------
    stream: RngStream
        Stream to draw from.
    a, b: float
        Positive shape parameters, small shapes such as 0.1 are supported.
    size: int, optional
        Number of draws, a scalar is returned when None.

    """
    if a <= 0 or b <= 0:
        raise ParameterError(f"beta shapes must be positive, got a={a}, b={b}")
    x = draw_gamma(stream, a, size=size)
    y = draw_gamma(stream, b, size=size)
    total = x + y
    # Both gammas underflow only for vanishing shapes, split the mass by the means
    out = np.where(total > 0, x / np.where(total > 0, total, 1.0), a / (a + b))
    return float(out) if size is None else out


def draw_dirichlet(stream: RngStream, alphas) -> np.ndarray:
    """Dirichlet(alphas) probability vector, normalised Gamma variates."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if alphas.size == 0:
        raise ParameterError("dirichlet parameter vector must not be empty")
    if np.any(alphas <= 0):
        raise ParameterError("dirichlet parameters must be positive")
    g = draw_gamma(stream, alphas)
    total = g.sum()
    if total <= 0:
        g = alphas.copy()
        total = g.sum()
    w = g / total
    # Close the simplex on the largest component
    w[np.argmax(w)] += 1.0 - w.sum()
    return w


def _sqrt_factor(cov: np.ndarray) -> np.ndarray:
    """Square-root factor L with L L^T = cov, Cholesky with an eigen fallback."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(cov)
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.min(w) < -PSD_TOL * scale:
        raise NumericError(f"covariance is not positive semi-definite, min eig {w.min()}")
    return v * np.sqrt(np.clip(w, 0.0, None))


def draw_mvnormal(stream: RngStream, mean, cov, size=None) -> np.ndarray:
    """Multivariate normal draw(s) with mean and PSD covariance."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (mean.size, mean.size):
        raise ParameterError(f"covariance shape {cov.shape} does not match mean {mean.size}")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise NumericError("covariance is not symmetric")
    factor = _sqrt_factor(cov)
    shape = (mean.size,) if size is None else (size, mean.size)
    z = stream.generator.standard_normal(shape)
    return mean + z @ factor.T


def std_normal_cdf(x):
    """Standard normal CDF."""
    return ndtr(x)


def std_normal_quantile(p):
    """Standard normal quantile, defined on the open unit interval."""
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0) | (p_arr >= 1)):
        raise ParameterError(f"normal quantile requires 0 < p < 1, got {p}")
    return ndtri(p)


class EmpiricalSample(SetidBaseModel):
    """Sorted Monte Carlo sample, e.g. the posterior draws of J(phi).

    Infinite values are kept (empty identified sets map to +inf), NaN is not.

    """

    values: Np1DArray = Field(description="Sample values, sorted ascending")

    @field_validator("values")
    @classmethod
    def finalize(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).ravel()
        if np.any(np.isnan(v)):
            raise ValueError("empirical sample must not contain NaN")
        return np.sort(v)

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self):
        return self.n


def empirical_quantile(sample: EmpiricalSample, p: float) -> float:
    """Upper-conservative quantile: the ceil(p n)-th order statistic.

    Examples
    --------
    >>> empirical_quantile(EmpiricalSample(values=[5, 1, 3, 2, 4]), 0.5)
    3.0

    """
    if sample.n == 0:
        raise StateError("empirical sample is empty")
    if not 0 < p < 1:
        raise ParameterError(f"quantile level must lie in (0, 1), got {p}")
    # Guard against p * n landing a hair above an integer
    k = math.ceil(p * sample.n - 1e-9)
    k = min(max(k, 1), sample.n)
    return float(sample.values[k - 1])
