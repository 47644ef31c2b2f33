"""Monte Carlo experiments and the run object that writes their reports.

Each experiment config is callable with the :class:`ExperimentRun` and returns
named tables, which the run writes to ``<output_dir>/<run_id>/<name>.csv``.
Replication ``r`` always draws from ``RngStream(seed, stream_id=r)`` so the
output does not depend on the number of threads.

"""
import logging
import os
import time
from abc import abstractmethod
from functools import partial
from pathlib import Path
from typing import Annotated, Callable, Literal, Optional, Union

import numpy as np
import pandas as pd
from dask import compute, delayed
from pydantic import Field, model_validator

from setid.core.errors import ConfigError
from setid.core.grid import SphereGrid
from setid.core.samplekit import RngStream
from setid.core.types import SetidBaseModel, Sided
from setid.credible import (
    band_row,
    band_to_intervals,
    bcs_for_identified_set,
    bcs_for_theta,
    hj_band_boundary,
    hj_set_boundary,
    hj_support_arcs,
    identified_interval,
    project_band,
    project_marginal_set,
    sample_theta_posterior,
)
from setid.fcs import CriterionConfig, FcsResult, fcs_row, project_fcs
from setid.models import (
    BetaPrior,
    GaussianIntervalModel,
    HJModel,
    IntervalRegressionModel,
    MissingDataModel,
)


logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6g"
EVENTS = ["covered_lower", "covered_upper", "covered_two_sided", "inner_empty"]
PRIOR_SHAPES = [(1.0, 1.0), (1.0, 0.1), (0.1, 1.0), (0.1, 0.1), (2.0, 2.0)]
DETAIL_TABLES = ("projection_bands", "hj_theta_draws", "hj_support", "hj_boundary")


def mc_standard_error(p, R: int):
    """Monte Carlo standard error sqrt(p (1 - p) / R) of a frequency."""
    p = np.asarray(p, dtype=float)
    return np.sqrt(p * (1.0 - p) / R)


def _replicate(task: Callable[[int], object], replications: int, threads: int) -> list:
    """Run ``task(r)`` for every replication on a dask thread pool, in order of r."""
    futures = [delayed(task)(r) for r in range(replications)]
    return list(compute(*futures, traverse=False, scheduler="threads", num_workers=threads))


class CoverageRow(SetidBaseModel):
    """Outcome of one replication of a coverage study."""

    setting: str = Field(description="Label of the design point, e.g. n=500,alpha=1,beta=1")
    replication: int = Field(description="Replication index r", ge=0)
    covered_lower: bool = Field(description="Inner set contained in Theta(phi_0)")
    covered_upper: bool = Field(description="Theta(phi_0) contained in the outer set")
    covered_two_sided: bool = Field(description="Both inclusions hold")
    inner_empty: bool = Field(description="Inner set is empty")
    q: float = Field(description="Posterior quantile of J")
    phi_hat: list[float] = Field(description="Centre of the band")
    wall_time: float = Field(0.0, description="Seconds spent on the replication")


class CoverageReport(SetidBaseModel):
    """Replication rows of a coverage study and their frequencies.

    The frequencies are the means of the boolean row columns per setting and
    come with the Monte Carlo standard error ``sqrt(p (1 - p) / R)``.

    """

    experiment: str = Field(description="Experiment that produced the rows")
    rows: list[CoverageRow] = Field(description="One row per setting and replication")

    @model_validator(mode="after")
    def validate_rows(self) -> "CoverageReport":
        if not self.rows:
            raise ValueError("a coverage report needs at least one row")
        return self

    def frame(self, timing: bool = False) -> pd.DataFrame:
        """Rows as a table, phi_hat split into phi_hat_0, phi_hat_1, ...

        wall_time is left out unless ``timing`` so that reruns are byte-identical.

        """
        records = []
        for row in self.rows:
            rec = row.model_dump(exclude={"phi_hat", "wall_time"})
            rec.update({f"phi_hat_{i}": v for i, v in enumerate(row.phi_hat)})
            if timing:
                rec["wall_time"] = row.wall_time
            records.append(rec)
        return pd.DataFrame.from_records(records)

    def summary(self) -> pd.DataFrame:
        """Frequencies and standard errors per setting."""
        df = self.frame()
        out = []
        for setting, group in df.groupby("setting", sort=False):
            R = len(group)
            rec = {"setting": setting, "R": R}
            for event in EVENTS:
                p = float(group[event].astype(float).mean())
                rec[event] = p
                rec[f"{event}_se"] = float(mc_standard_error(p, R))
            rec["q_mean"] = float(group["q"].mean())
            out.append(rec)
        return pd.DataFrame.from_records(out)

    def frequency(self, event: str, setting: Optional[str] = None) -> float:
        summary = self.summary()
        if setting is None:
            if len(summary) != 1:
                raise ValueError(f"report has {len(summary)} settings, name one")
            return float(summary[event].iloc[0])
        return float(summary.loc[summary.setting == setting, event].iloc[0])

    def to_csv(
        self, directory: Union[str, Path], stem: Optional[str] = None, timing: bool = False
    ) -> tuple[Path, Path]:
        """Write ``<stem>_rows.csv`` and ``<stem>_summary.csv``, with wall_time when ``timing``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = stem or self.experiment
        rows_path = directory / f"{stem}_rows.csv"
        summary_path = directory / f"{stem}_summary.csv"
        self.frame(timing).to_csv(rows_path, index=False, float_format=FLOAT_FORMAT)
        self.summary().to_csv(summary_path, index=False, float_format=FLOAT_FORMAT)
        return rows_path, summary_path

    @classmethod
    def from_csv(
        cls,
        rows_path: Union[str, Path],
        summary_path: Union[str, Path],
        experiment: str = "coverage",
    ) -> "CoverageReport":
        """Load a report and check the stored frequencies against the rows.

        Raises
        ------
        ConfigError
            When the stored summary disagrees with the means of the rows.

        """
        df = pd.read_csv(rows_path)
        phi_cols = sorted(
            (c for c in df.columns if c.startswith("phi_hat_")), key=lambda c: int(c.split("_")[-1])
        )
        rows = [
            CoverageRow(
                setting=str(rec["setting"]),
                replication=int(rec["replication"]),
                covered_lower=bool(rec["covered_lower"]),
                covered_upper=bool(rec["covered_upper"]),
                covered_two_sided=bool(rec["covered_two_sided"]),
                inner_empty=bool(rec["inner_empty"]),
                q=float(rec["q"]),
                phi_hat=[float(rec[c]) for c in phi_cols],
                wall_time=float(rec.get("wall_time", 0.0)),
            )
            for rec in df.to_dict(orient="records")
        ]
        report = cls(experiment=experiment, rows=rows)
        stored = pd.read_csv(summary_path)
        recomputed = report.summary()
        columns = EVENTS + ["R"]
        if list(stored.setting.astype(str)) != list(recomputed.setting) or not np.allclose(
            stored[columns].to_numpy(float), recomputed[columns].to_numpy(float), rtol=1e-5, atol=1e-6
        ):
            raise ConfigError(f"stored frequencies in {summary_path} do not match the rows")
        return report


class ExperimentConfig(SetidBaseModel):
    """Base class for experiment configs.

    Subclasses set an ``experiment`` Literal and implement ``run``, which returns
    named tables. Calling the config with the run object logs and returns them.

    """

    experiment: Literal["base"] = Field("base", description="Experiment discriminator")
    seed: int = Field(0, description="Master seed of the replication streams", ge=0)
    replications: int = Field(1, description="Number of Monte Carlo replications R", ge=1)
    threads: int = Field(1, description="Worker threads for the replications", ge=1)
    tau: float = Field(0.05, description="One minus the credible level", gt=0, lt=1)
    wall_time: bool = Field(
        False, description="Keep the wall time of each replication in the coverage rows"
    )

    @property
    def level(self) -> float:
        return 1.0 - self.tau

    def stream(self, replication: int) -> RngStream:
        return RngStream(seed=self.seed, stream_id=replication)

    @abstractmethod
    def run(self) -> dict[str, pd.DataFrame]:
        pass

    def __call__(self, runtime: Optional["ExperimentRun"] = None) -> dict[str, pd.DataFrame]:
        return self.run()


def _interval_replication(
    model, n: int, B: int, level: float, sided: Sided, grid: SphereGrid, stream: RngStream, setting: str, r: int
) -> CoverageRow:
    """One band for a scalar-theta model and its coverage of Theta(phi_0)."""
    start = time.perf_counter()
    data = model.simulate_dgp(stream.child(0), n)
    draws = model.sample_posterior(stream.child(1), data, B)
    phi_hat = model.posterior_point_estimate(draws, model.default_estimate())
    band = bcs_for_identified_set(model, draws, phi_hat, n, level, grid, sided)
    inner, outer = band_to_intervals(band, model)
    truth = identified_interval(model, model.true_phi())
    lower, upper = truth.contains(inner), outer.contains(truth)
    return CoverageRow(
        setting=setting,
        replication=r,
        covered_lower=lower,
        covered_upper=upper,
        covered_two_sided=lower and upper,
        inner_empty=inner.is_empty,
        q=band.q,
        phi_hat=list(band.phi_hat.values),
        wall_time=time.perf_counter() - start,
    )


class CoverageConfig(ExperimentConfig):
    """Coverage of the two-sided band in the missing-data model.

    Every pair in ``priors`` is used as ``alpha_1 = alpha_2 = alpha`` and
    ``beta_1 = beta_2 = beta``.

    """

    experiment: Literal["coverage"] = Field("coverage", description="Experiment discriminator")
    model: MissingDataModel = Field(
        default_factory=MissingDataModel, description="Missing-data model and its truth"
    )
    n: list[int] = Field([500], description="Sample sizes")
    priors: list[tuple[float, float]] = Field(
        [(1.0, 1.0)], description="(alpha, beta) shapes of the Beta priors"
    )
    B: int = Field(1000, description="Posterior draws per replication", ge=1)
    replications: int = Field(500, description="Number of Monte Carlo replications R", ge=1)
    sided: Sided = Field(Sided.TWO_SIDED, description="Sidedness of J")

    def settings(self) -> list[tuple[str, int, MissingDataModel]]:
        out = []
        for n in self.n:
            for alpha, beta in self.priors:
                model = self.model.model_copy(update={"prior": BetaPrior.symmetric(alpha, beta)})
                out.append((f"n={n},alpha={alpha:g},beta={beta:g}", n, model))
        return out

    def _replication(self, grid: SphereGrid, r: int) -> list[CoverageRow]:
        stream = self.stream(r)
        return [
            _interval_replication(model, n, self.B, self.level, self.sided, grid, stream, setting, r)
            for setting, n, model in self.settings()
        ]

    def run(self) -> dict[str, pd.DataFrame]:
        report = run_missing_data_coverage(self)
        return {"coverage_rows": report.frame(self.wall_time), "coverage_summary": report.summary()}


def run_missing_data_coverage(cfg: CoverageConfig) -> CoverageReport:
    """Frequencies with which the band covers the true identified interval."""
    grid = SphereGrid(dim=1)
    task = partial(cfg._replication, grid)
    rows = _replicate(task, cfg.replications, cfg.threads)
    return CoverageReport(experiment=cfg.experiment, rows=[row for rep in rows for row in rep])


class UniformityConfig(ExperimentConfig):
    """One-sided bands near point identification.

    The truth moves with the gap ``delta``: ``phi_0 = (1, 1 + delta)`` for the
    Gaussian interval model and ``phi_0 = (1 - delta, 0.5)`` for the
    missing-data model.

    """

    experiment: Literal["uniformity"] = Field("uniformity", description="Experiment discriminator")
    model: Annotated[
        Union[GaussianIntervalModel, MissingDataModel], Field(discriminator="model_type")
    ] = Field(default_factory=GaussianIntervalModel, description="Model of the study")
    n: int = Field(100, description="Sample size", ge=1)
    deltas: list[float] = Field([0.1, 0.05, 0.01, 0.0], description="Gaps to point identification")
    B: int = Field(1000, description="Posterior draws per replication", ge=1)
    replications: int = Field(500, description="Number of Monte Carlo replications R", ge=1)

    @model_validator(mode="after")
    def validate_deltas(self) -> "UniformityConfig":
        if any(d < 0 for d in self.deltas):
            raise ValueError(f"deltas must be nonnegative, got {self.deltas}")
        if isinstance(self.model, MissingDataModel) and any(d > 1 for d in self.deltas):
            raise ValueError("missing-data deltas must not exceed 1")
        return self

    def truth(self, delta: float):
        if isinstance(self.model, MissingDataModel):
            return self.model.model_copy(update={"phi0": (1.0 - delta, 0.5)})
        return self.model.model_copy(update={"phi0": (1.0, 1.0 + delta)})

    def _replication(self, grid: SphereGrid, r: int) -> list[CoverageRow]:
        stream = self.stream(r)
        return [
            _interval_replication(
                self.truth(delta), self.n, self.B, self.level, Sided.UPPER, grid, stream, f"delta={delta:g}", r
            )
            for delta in self.deltas
        ]

    def run(self) -> dict[str, pd.DataFrame]:
        report = run_uniformity_study(self)
        return {"uniformity_rows": report.frame(self.wall_time), "uniformity_summary": report.summary()}


def run_uniformity_study(cfg: UniformityConfig) -> CoverageReport:
    """Upper coverage and emptiness of the inner set for every gap delta."""
    grid = SphereGrid(dim=1)
    rows = _replicate(partial(cfg._replication, grid), cfg.replications, cfg.threads)
    return CoverageReport(experiment=cfg.experiment, rows=[row for rep in rows for row in rep])


def _axis_grid(dim: int, coordinate: int) -> SphereGrid:
    e = np.zeros(dim)
    e[coordinate] = 1.0
    return SphereGrid(dim=dim, directions=np.vstack([e, -e]))


class ProjectionConfig(ExperimentConfig):
    """Credible sets for one coordinate of the interval-regression parameter.

    With ``fcs`` set, every replication also projects the criterion-function
    confidence set, and the bands table holds one row per set in the CSV band
    layout with a ``covers_truth`` column.

    """

    experiment: Literal["projection"] = Field("projection", description="Experiment discriminator")
    model: IntervalRegressionModel = Field(
        default_factory=IntervalRegressionModel, description="Interval-regression model"
    )
    n: list[int] = Field([500, 1000], description="Sample sizes")
    K: list[int] = Field([50], description="Truncation levels of the Dirichlet process")
    B: list[int] = Field([100], description="Posterior draws per replication")
    replications: int = Field(50, description="Number of Monte Carlo replications R", ge=1)
    tau: float = Field(0.1, description="One minus the credible level", gt=0, lt=1)
    coordinate: int = Field(0, description="Coordinate of theta to project on", ge=0)
    fcs: Optional[CriterionConfig] = Field(
        default=None, description="Criterion-function set to project alongside, None to skip"
    )

    def settings(self) -> list[tuple[int, int, int]]:
        return [(n, K, B) for n in self.n for K in self.K for B in self.B]

    def with_truncation(self, K: int) -> IntervalRegressionModel:
        return self.model.model_copy(
            update={"dp": self.model.dp.model_copy(update={"truncation_K": K})}
        )

    def _replication(self, grid: SphereGrid, r: int) -> dict[str, list[dict]]:
        stream = self.stream(r)
        truth = project_marginal_set(self.model, self.model.true_phi(), self.coordinate)
        rows, bands = [], []
        for n, K, B in self.settings():
            setting = f"n={n},K={K},B={B}"
            model = self.with_truncation(K)
            data = model.simulate_dgp(stream.child(0), n)
            draws = model.sample_posterior(stream.child(1), data, B)
            phi_hat = draws.mean()
            band = bcs_for_identified_set(
                model, draws, phi_hat, n, self.level, grid, Sided.UPPER, min_draws=min(50, B)
            )
            projected = project_band(band, model, self.coordinate)
            thetas, skipped = sample_theta_posterior(model, stream.child(2), draws)
            theta_bcs = bcs_for_theta(thetas[:, self.coordinate], self.level)
            rows.append(
                dict(
                    setting=setting,
                    replication=r,
                    n=n,
                    K=K,
                    B=B,
                    q=band.q,
                    set_lo=projected.lo,
                    set_hi=projected.hi,
                    theta_lo=theta_bcs.lo,
                    theta_hi=theta_bcs.hi,
                    skipped_draws=skipped,
                )
            )
            records = [band_row(band, model, self.coordinate)]
            if self.fcs is not None:
                cfg = self.fcs.model_copy(update={"coordinate": self.coordinate})
                result = project_fcs(model, data, cfg, self.tau, stream.child(3))
                records.append(fcs_row(result, self.tau, n))
            for record in records:
                covers = record["lo_outer"] <= truth.lo and record["hi_outer"] >= truth.hi
                bands.append(dict(setting=setting, replication=r, **record, covers_truth=bool(covers)))
        return dict(rows=rows, bands=bands)

    def run(self) -> dict[str, pd.DataFrame]:
        rows, bands = run_projection_study(self)
        return {
            "projection_rows": rows,
            "projection_bands": bands,
            "projection_summary": summarise_projection(rows),
            "projection_coverage": summarise_bands(bands),
        }


def run_projection_study(cfg: ProjectionConfig) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Set and theta credible intervals for one coordinate, one row per setting and replication.

    Returns
    -------
    rows: pd.DataFrame
        Endpoints of the projected band and of the theta interval.
    bands: pd.DataFrame
        The band, and the criterion-function set when configured, in the CSV
        band layout.

    """
    if cfg.coordinate >= cfg.model.dim:
        raise ConfigError(f"coordinate {cfg.coordinate} outside dimension {cfg.model.dim}")
    grid = _axis_grid(cfg.model.dim, cfg.coordinate)
    results = _replicate(partial(cfg._replication, grid), cfg.replications, cfg.threads)
    rows = pd.DataFrame.from_records([row for res in results for row in res["rows"]])
    bands = pd.DataFrame.from_records([row for res in results for row in res["bands"]])
    return rows, bands


def summarise_projection(rows: pd.DataFrame) -> pd.DataFrame:
    """Averaged endpoints per setting."""
    columns = ["q", "set_lo", "set_hi", "theta_lo", "theta_hi"]
    out = rows.groupby(["setting", "n", "K", "B"], sort=False)[columns].mean().reset_index()
    out.insert(4, "R", rows.groupby("setting", sort=False).size().to_numpy())
    return out


def summarise_bands(bands: pd.DataFrame) -> pd.DataFrame:
    """Coverage of the true projection and averaged outer endpoints per setting and kind."""
    groups = bands.groupby(["setting", "kind"], sort=False)
    out = groups[["lo_outer", "hi_outer"]].mean().reset_index()
    out.insert(2, "R", groups.size().to_numpy())
    coverage = groups["covers_truth"].mean().to_numpy()
    out["coverage"] = coverage
    out["coverage_se"] = mc_standard_error(coverage, out["R"].to_numpy())
    return out


class TimingPoint(SetidBaseModel):
    """One cell of the timing grid."""

    n: int = Field(500, description="Sample size", ge=1)
    B: int = Field(100, description="Posterior draws and bootstrap resamples", ge=50)
    K: int = Field(100, description="Truncation of the Dirichlet process", ge=1)
    M: int = Field(50, description="Uniform draws from Theta for the criterion set", ge=1)

    @property
    def label(self) -> str:
        return f"n={self.n},B={self.B},K={self.K},M={self.M}"


class TimingConfig(ExperimentConfig):
    """Wall time of the projected credible set against the criterion-function set.

    Timed runs are sequential whatever ``threads`` says. ``warmup`` runs per
    point are discarded.

    """

    experiment: Literal["timing"] = Field("timing", description="Experiment discriminator")
    model: IntervalRegressionModel = Field(
        default_factory=IntervalRegressionModel, description="Interval-regression model"
    )
    points: list[TimingPoint] = Field(
        default_factory=lambda: [TimingPoint()], description="Grid of (n, B, K, M)"
    )
    replications: int = Field(50, description="Timed runs per point", ge=1)
    warmup: int = Field(1, description="Discarded runs per point", ge=0)
    tau: float = Field(0.1, description="One minus the credible level", gt=0, lt=1)
    sup_method: Literal["optimize", "lattice"] = Field(
        "optimize", description="Sup computation of the bootstrap statistic"
    )

    @classmethod
    def full_grid(cls, **kwargs) -> "TimingConfig":
        """Full grid n in (500, 1000), B in (50, 100, 200), (K, M) in ((50, 30), (100, 50), (500, 100))."""
        points = [
            TimingPoint(n=n, B=B, K=K, M=M)
            for n in (500, 1000)
            for B in (50, 100, 200)
            for K, M in ((50, 30), (100, 50), (500, 100))
        ]
        return cls(points=points, **kwargs)

    def time_once(self, point: TimingPoint, stream: RngStream) -> tuple[float, float, FcsResult]:
        """Seconds for the projected credible set and for the criterion-function set, and the latter."""
        model = self.model.model_copy(
            update={"dp": self.model.dp.model_copy(update={"truncation_K": point.K})}
        )
        data = model.simulate_dgp(stream.child(0), point.n)
        grid = _axis_grid(model.dim, 0)

        start = time.perf_counter()
        draws = model.sample_posterior(stream.child(1), data, point.B)
        band = bcs_for_identified_set(
            model, draws, draws.mean(), point.n, self.level, grid, Sided.UPPER
        )
        project_band(band, model, 0)
        bcs_time = time.perf_counter() - start

        cfg = CriterionConfig(B_boot=point.B, M=point.M, sup_method=self.sup_method)
        start = time.perf_counter()
        result = project_fcs(model, data, cfg, self.tau, stream.child(2))
        fcs_time = time.perf_counter() - start
        if result.fallback:
            logger.warning(f"criterion set at {point.label} fell back to the estimate, its time is not comparable")
        return bcs_time, fcs_time, result

    def run(self) -> dict[str, pd.DataFrame]:
        rows = run_timing_bench(self)
        return {"timing_rows": rows, "timing_summary": summarise_timing(rows)}


def run_timing_bench(cfg: TimingConfig) -> pd.DataFrame:
    """Timed runs at every grid point, warm-up runs excluded."""
    rows = []
    for point in cfg.points:
        logger.info(f"timing {point.label}")
        for w in range(cfg.warmup):
            cfg.time_once(point, RngStream(seed=cfg.seed, stream_id=cfg.replications + w))
        for r in range(cfg.replications):
            bcs_time, fcs_time, result = cfg.time_once(point, cfg.stream(r))
            rows.append(
                dict(
                    setting=point.label,
                    replication=r,
                    n=point.n,
                    B=point.B,
                    K=point.K,
                    M=point.M,
                    bcs_time=bcs_time,
                    fcs_time=fcs_time,
                    sup_method=cfg.sup_method,
                    lattice=result.lattice,
                    fcs_accepted=result.accepted,
                    fcs_fallback=result.fallback,
                )
            )
    return pd.DataFrame.from_records(rows)


def summarise_timing(rows: pd.DataFrame) -> pd.DataFrame:
    """Mean times per grid point and their ratio fcs / bcs."""
    out = (
        rows.groupby(["setting", "n", "B", "K", "M", "sup_method"], sort=False)[["bcs_time", "fcs_time"]]
        .mean()
        .reset_index()
    )
    out["ratio"] = out.fcs_time / out.bcs_time
    return out


class HJConfig(ExperimentConfig):
    """Posterior of the SDF mean-variance set on simulated factor returns.

    Replication ``r`` draws its own loadings. The bundle of draws, support
    curves and boundaries comes from replication 0, the coverage table from all
    of them.

    """

    experiment: Literal["hj"] = Field("hj", description="Experiment discriminator")
    model: HJModel = Field(default_factory=HJModel, description="HJ model and DGP")
    n: int = Field(200, description="Sample size", ge=2)
    B: int = Field(1000, description="Posterior draws", ge=1)
    grid_size: int = Field(256, description="Directions of the sup in J", ge=4)
    mu_grid: int = Field(200, description="Points on each boundary curve", ge=2)
    arc_points: int = Field(101, description="Directions on each support arc", ge=2)

    def _replication(self, grid: SphereGrid, r: int) -> dict:
        model = self.model
        stream = self.stream(r)
        loadings = model.draw_loadings(stream.child(0))
        data = model.simulate_dgp(stream.child(1), self.n, loadings)
        draws = model.sample_posterior(stream.child(2), data, self.B)
        phi_hat = model.posterior_point_estimate(draws, model.default_estimate())
        truth = model.true_phi(loadings)
        band = bcs_for_identified_set(model, draws, phi_hat, self.n, self.level, grid)
        s_true = model.support_batch(truth, grid.directions)
        s_hat = model.support_batch(phi_hat, grid.directions)
        out = dict(
            coverage=dict(
                replication=r,
                q=band.q,
                excluded_draws=band.excluded,
                covered=bool(np.all(s_true <= s_hat + band.radius + 1e-12)),
            )
        )
        if r == 0:
            out["bundle"] = self._bundle(model, stream, draws, phi_hat, truth, band)
        return out

    def _bundle(self, model: HJModel, stream: RngStream, draws, phi_hat, truth, band) -> dict:
        thetas, skipped = sample_theta_posterior(model, stream.child(3), draws)
        theta_draws = pd.DataFrame({"mu": thetas[:, 0], "sigma2": thetas[:, 1]})

        arcs = hj_support_arcs(self.arc_points)
        per_draw = np.array([model.support_batch(row, arcs) for row in draws.draws])
        feasible = np.all(np.isfinite(per_draw), axis=1)
        s_hat = model.support_batch(phi_hat, arcs)
        support = pd.DataFrame(
            {
                "arc": ["right"] * self.arc_points + ["left"] * self.arc_points,
                "nu1": arcs[:, 0],
                "nu2": arcs[:, 1],
                "s_true": model.support_batch(truth, arcs),
                "s_hat": s_hat,
                "s_lower": s_hat - band.radius,
                "s_upper": s_hat + band.radius,
                "s_posterior_mean": per_draw[feasible].mean(axis=0),
            }
        )

        curves = []
        for name, frame in (
            ("truth", hj_set_boundary(model, truth, self.mu_grid)),
            ("estimate", hj_set_boundary(model, phi_hat, self.mu_grid)),
            ("outer", hj_band_boundary(band, model, self.mu_grid)),
        ):
            curves.append(frame.assign(curve=name)[["curve", "mu", "sigma2", "below_zero"]])
        if skipped:
            logger.warning(f"{skipped} posterior draws skipped for the theta draws")
        return dict(
            hj_theta_draws=theta_draws, hj_support=support, hj_boundary=pd.concat(curves, ignore_index=True)
        )

    def run(self) -> dict[str, pd.DataFrame]:
        return run_hj_application(self)


def run_hj_application(cfg: HJConfig) -> dict[str, pd.DataFrame]:
    """Theta draws, support curves, boundary polylines and the coverage of the true set."""
    grid = SphereGrid(dim=2, size=cfg.grid_size)
    results = _replicate(partial(cfg._replication, grid), cfg.replications, cfg.threads)
    tables = dict(results[0]["bundle"])
    tables["hj_coverage"] = pd.DataFrame.from_records([res["coverage"] for res in results])
    return tables


EXPERIMENT_TYPES = Annotated[
    Union[CoverageConfig, UniformityConfig, ProjectionConfig, TimingConfig, HJConfig],
    Field(discriminator="experiment"),
]


class ExperimentRun(SetidBaseModel):
    """An experiment run.

    It deals with where the output is going. The experiment itself, including
    its seed and replications, is provided by the experiment object.

    """

    run_id: str = Field("run_id", description="The run id")
    output_dir: str = Field("./simulations", description="The output directory")
    experiment: EXPERIMENT_TYPES = Field(
        default_factory=CoverageConfig, description="The experiment configuration"
    )

    @property
    def staging_dir(self) -> str:
        """The directory the report files are written to."""
        odir = os.path.join(self.output_dir, self.run_id)
        os.makedirs(odir, exist_ok=True)
        return odir

    def generate(self) -> dict[str, Path]:
        """Run the experiment and write one CSV per table plus summary.txt.

        returns
        -------
        paths : dict
            Table name to CSV path.

        """
        logger.info("")
        logger.info("-----------------------------------------------------")
        logger.info("Experiment settings:")
        logger.info(self)
        logger.info("-----------------------------------------------------")

        tables = self.experiment(self)

        staging_dir = Path(self.staging_dir)
        paths = {}
        for name, table in tables.items():
            paths[name] = staging_dir / f"{name}.csv"
            table.to_csv(paths[name], index=False, float_format=FLOAT_FORMAT)
        with open(staging_dir / "summary.txt", "w") as stream:
            for name, table in tables.items():
                if name.endswith("_rows") or name in DETAIL_TABLES:
                    continue
                stream.write(f"{name}\n{table.to_string(index=False)}\n\n")

        logger.info("")
        logger.info(f"Successfully wrote {len(paths)} tables to {staging_dir}")
        logger.info("-----------------------------------------------------")
        return paths

    def __call__(self):
        return self.generate()

    def __str__(self):
        repr = f"\nrun_id: {self.run_id}"
        repr += f"\noutput_dir: {self.output_dir}"
        repr += f"\nexperiment: {self.experiment.experiment}"
        repr += f"\nseed: {self.experiment.seed}"
        repr += f"\nreplications: {self.experiment.replications}\n"
        return repr
