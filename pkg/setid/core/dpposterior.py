"""Truncated stick-breaking sampler for the Dirichlet-process posterior.

Given i.i.d. rows :math:`D_{n,1}, \\ldots, D_{n,n}` and a prior
:math:`DP(\\nu_0, Q_0)`, a posterior draw of :math:`F` is the mixture

.. math::

    \\rho \\sum_i \\beta_i \\delta_{D_{n,i}} + (1 - \\rho) \\sum_{k=1}^K \\alpha_k \\delta_{\\xi_k}

with :math:`\\rho \\sim Beta(n, \\nu_0)`, :math:`\\beta \\sim Dir(1, \\ldots, 1)`,
stick-breaking weights :math:`\\alpha` renormalised over the first ``K``
sticks and atoms :math:`\\xi_k \\sim Q_0`. Moment functionals of ``F`` are
weighted sums over the ``n + K`` atoms.

"""
import logging
from functools import partial
from pathlib import Path
from typing import Annotated, Callable, Literal, Optional, Union

import numpy as np
import pandas as pd
from dask import compute, delayed
from pydantic import Field, field_validator, model_validator
from pydantic_numpy.typing import Np2DArray

from setid.core.errors import NumericError, ParameterError
from setid.core.samplekit import (
    RngStream,
    draw_beta,
    draw_dirichlet,
    draw_mvnormal,
)
from setid.core.types import PhiVector, SetidBaseModel


logger = logging.getLogger(__name__)

MAX_REDRAWS = 100


class DataMatrix(SetidBaseModel):
    """Observations, one row per unit."""

    rows: Np2DArray = Field(description="n x p matrix of observations")
    columns: Optional[list[str]] = Field(
        default=None, description="Column names, generated when not given"
    )

    @model_validator(mode="after")
    def validate_rows(self) -> "DataMatrix":
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if self.rows.shape[0] < 1:
            raise ValueError("data must have at least one row")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("data must not contain non-finite entries")
        if self.columns is None:
            self.columns = [f"x{i}" for i in range(self.p)]
        elif len(self.columns) != self.p:
            raise ValueError(
                f"{len(self.columns)} column names given for {self.p} columns"
            )
        return self

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    def column_means(self) -> np.ndarray:
        return self.rows.mean(axis=0)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "DataMatrix":
        """Read a CSV with a header row of column names."""
        df = pd.read_csv(path)
        return cls(rows=df.to_numpy(dtype=float), columns=[str(c) for c in df.columns])

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        pd.DataFrame(self.rows, columns=self.columns).to_csv(
            path, index=False, float_format="%.17g"
        )
        return path

    def __repr__(self):
        return f"{self.__class__.__name__}(n={self.n}, p={self.p})"


class NormalBase(SetidBaseModel):
    """Gaussian base measure N(mean, scale^2 I)."""

    base_type: Literal["normal"] = Field(
        "normal", description="Type of base measure, must be 'normal'"
    )
    mean: Union[float, list[float]] = Field(
        0.0, description="Mean, scalar or one value per data column"
    )
    scale: float = Field(1.0, description="Standard deviation of each coordinate", ge=0)

    def sample(self, stream: RngStream, size: int, p: int) -> np.ndarray:
        mean = np.broadcast_to(np.asarray(self.mean, dtype=float), (p,))
        return draw_mvnormal(stream, mean, self.scale**2 * np.eye(p), size=size)


class PointMassBase(SetidBaseModel):
    """Degenerate base measure at a fixed row."""

    base_type: Literal["point_mass"] = Field(
        "point_mass", description="Type of base measure, must be 'point_mass'"
    )
    value: Union[float, list[float]] = Field(description="Location of the point mass")

    def sample(self, stream: RngStream, size: int, p: int) -> np.ndarray:
        value = np.broadcast_to(np.asarray(self.value, dtype=float), (p,))
        return np.tile(value, (size, 1))


BASE_TYPES = Annotated[Union[NormalBase, PointMassBase], Field(discriminator="base_type")]


class DpConfig(SetidBaseModel):
    """Dirichlet-process prior settings."""

    nu0: float = Field(3.0, description="Concentration parameter", gt=0)
    truncation_K: int = Field(50, description="Number of stick-breaking atoms", ge=1)
    base: BASE_TYPES = Field(
        default_factory=NormalBase, description="Base measure Q0 of the prior"
    )
    threads: int = Field(1, description="Worker threads for the posterior draws", ge=1)

    def truncation_bound(self, n: int) -> float:
        """Bound n exp(-(K-1)/nu0) on the mass dropped by the truncation."""
        return n * np.exp(-(self.truncation_K - 1) / self.nu0)


class PosteriorDraws(SetidBaseModel):
    """Monte Carlo draws of phi with provenance."""

    model_type: str = Field(description="Tag of the model the draws belong to")
    draws: Np2DArray = Field(description="B x d_phi matrix, one draw per row")
    seed: Optional[int] = Field(default=None, description="Master seed of the stream")
    stream_key: tuple[int, ...] = Field(
        (), description="Spawn key of the stream the draws came from"
    )
    rejected: int = Field(0, description="Draws rejected by the transform and redrawn")
    conjugate: Optional[dict[str, list[float]]] = Field(
        default=None,
        description="Closed-form posterior parameters, set by conjugate samplers",
    )

    @field_validator("draws")
    @classmethod
    def validate_draws(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] < 1:
            raise ValueError("at least one posterior draw is required")
        return v

    @property
    def B(self) -> int:
        return self.draws.shape[0]

    def phi(self, i: int) -> PhiVector:
        return PhiVector(model_type=self.model_type, values=self.draws[i])

    def mean(self) -> PhiVector:
        return PhiVector(model_type=self.model_type, values=self.draws.mean(axis=0))

    def __len__(self):
        return self.B

    def __iter__(self):
        for i in range(self.B):
            yield self.phi(i)

    def __repr__(self):
        return (
            f"{self.__class__.__name__}(model_type={self.model_type}, "
            f"B={self.B}, rejected={self.rejected})"
        )


def stick_breaking_weights(stream: RngStream, nu0: float, K: int) -> np.ndarray:
    """Truncated stick-breaking weights, renormalised to sum to one.

    Parameters
    ----------
    stream: RngStream
        Stream to draw the sticks from.
    nu0: float
        Concentration, sticks are Beta(1, nu0).
    K: int
        Number of sticks.

    Returns
    -------
    alpha: np.ndarray
        ``alpha_k = v_k prod_{l<k} (1 - v_l)`` divided by its sum.

    """
    if K < 1:
        raise ParameterError(f"truncation K must be at least 1, got {K}")
    v = np.atleast_1d(draw_beta(stream, 1.0, nu0, size=K))
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - v)[:-1]])
    alpha = v * remaining
    total = alpha.sum()
    if total <= 0:
        return np.full(K, 1.0 / K)
    alpha = alpha / total
    alpha[np.argmax(alpha)] += 1.0 - alpha.sum()
    return alpha


def _mixture(stream: RngStream, data: DataMatrix, cfg: DpConfig):
    """Atoms and weights of one truncated posterior draw of F."""
    if cfg.truncation_K < 1:
        raise ParameterError("truncation K must be at least 1")
    rho = draw_beta(stream, float(data.n), cfg.nu0)
    beta = draw_dirichlet(stream, np.ones(data.n))
    alpha = stick_breaking_weights(stream, cfg.nu0, cfg.truncation_K)
    xi = cfg.base.sample(stream, cfg.truncation_K, data.p)
    atoms = np.vstack([data.rows, xi])
    weights = np.concatenate([rho * beta, (1.0 - rho) * alpha])
    return atoms, weights


def draw_dp_functional(stream: RngStream, data: DataMatrix, cfg: DpConfig) -> np.ndarray:
    """One posterior draw of the mean functional E_F[D]."""
    atoms, weights = _mixture(stream, data, cfg)
    return weights @ atoms


def draw_dp_second_moment(
    stream: RngStream, data: DataMatrix, cfg: DpConfig
) -> tuple[np.ndarray, np.ndarray]:
    """One joint posterior draw of the mean and covariance of F.

    Both moments come from the same mixture, and the covariance is formed from
    centred atoms so that it is symmetric positive semi-definite.

    """
    atoms, weights = _mixture(stream, data, cfg)
    m = weights @ atoms
    centred = atoms - m
    cov = (centred * weights[:, None]).T @ centred
    return m, 0.5 * (cov + cov.T)


def _draw_phi(
    stream: RngStream,
    data: DataMatrix,
    cfg: DpConfig,
    transform: Callable,
    moments: str,
    b: int,
) -> tuple[np.ndarray, int]:
    """Draw ``b`` of phi from ``stream.child(b)`` and the number of rejected attempts."""
    child = stream.child(b)
    for attempt in range(MAX_REDRAWS + 1):
        if moments == "mean":
            functional = (draw_dp_functional(child, data, cfg),)
        else:
            functional = draw_dp_second_moment(child, data, cfg)
        try:
            return np.asarray(transform(*functional), dtype=float), attempt
        except (NumericError, np.linalg.LinAlgError) as err:
            logger.warning(f"Posterior draw {b} rejected (attempt {attempt}): {err}")
    raise NumericError(
        f"posterior draw {b} rejected {MAX_REDRAWS + 1} times in a row, "
        f"the transform is not total on the support of the data and base"
    )


def sample_phi_posterior(
    stream: RngStream,
    data: DataMatrix,
    cfg: DpConfig,
    B: int,
    transform: Callable,
    model_type: str,
    moments: Literal["mean", "mean_cov"] = "mean",
    threads: Optional[int] = None,
) -> PosteriorDraws:
    """Sample B draws of phi = transform(functional of F).

    Draw ``b`` consumes ``stream.child(b)``, so the draws do not depend on the
    number of threads. A transform that raises :class:`NumericError` (or a
    numpy ``LinAlgError``) rejects the draw, which is redrawn from the same
    child stream up to ``MAX_REDRAWS`` times.

    Parameters
    ----------
    stream: RngStream
        Parent stream.
    data: DataMatrix
        Observations.
    cfg: DpConfig
        Prior settings.
    B: int
        Number of draws.
    transform: Callable
        Maps the mean vector (``moments="mean"``) or the pair ``(m, cov)``
        (``moments="mean_cov"``) to the phi layout of the model.
    model_type: str
        Tag of the model.
    moments: str
        Functional of F passed to the transform.
    threads: int, optional
        Worker threads for the draws, ``cfg.threads`` when None.

    """
    if B < 1:
        raise ParameterError(f"number of posterior draws must be positive, got {B}")
    threads = cfg.threads if threads is None else threads
    if threads < 1:
        raise ParameterError(f"threads must be positive, got {threads}")
    task = partial(_draw_phi, stream, data, cfg, transform, moments)
    if threads == 1:
        results = [task(b) for b in range(B)]
    else:
        futures = [delayed(task)(b) for b in range(B)]
        results = compute(*futures, traverse=False, scheduler="threads", num_workers=threads)
    return PosteriorDraws(
        model_type=model_type,
        draws=np.vstack([row for row, _ in results]),
        seed=stream.seed,
        stream_key=stream.path + (stream.stream_id,),
        rejected=sum(attempts for _, attempts in results),
    )
