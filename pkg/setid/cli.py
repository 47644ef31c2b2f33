# -*- coding: utf-8 -*-

import logging
import sys
from typing import Optional

import click
import yaml
from pydantic import ValidationError

from setid.core.errors import ConfigError, DomainError, NumericError
from setid.experiments import ExperimentRun, TimingConfig
from setid.selftest import run_selftest

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _load_config(config) -> dict:
    """Experiment settings from a YAML file, either a bare experiment or a full run."""
    if config is None:
        return {}
    args = yaml.safe_load(config)
    if args is None:
        return {}
    if not isinstance(args, dict):
        raise ConfigError(f"{config.name} must hold a mapping of settings")
    return args


def _experiment_run(name: str, config, seed, threads, out, run_id, **overrides) -> ExperimentRun:
    args = _load_config(config)
    run_args = {k: args.pop(k) for k in ("run_id", "output_dir") if k in args}
    experiment = args.pop("experiment", None)
    if isinstance(experiment, dict):
        args = {**experiment, **args}
        experiment = args.pop("experiment", None)
    if experiment is not None and experiment != name:
        raise ConfigError(f"config describes experiment '{experiment}', not '{name}'")
    args["experiment"] = name
    if seed is not None:
        args["seed"] = seed
    if threads is not None:
        args["threads"] = threads
    for key, value in overrides.items():
        args.setdefault(key, value)
    if out is not None:
        run_args["output_dir"] = out
    if run_id is not None:
        run_args["run_id"] = run_id
    run_args.setdefault("run_id", name)
    return ExperimentRun(experiment=args, **run_args)


def experiment_options(func):
    """Options shared by every experiment subcommand."""
    options = [
        click.option("--config", "-c", type=click.File("r"), help="YAML experiment file"),
        click.option("--seed", type=click.IntRange(min=0), help="Master seed, overrides the file"),
        click.option(
            "--threads",
            type=click.IntRange(min=1),
            envvar="SETID_THREADS",
            help="Worker threads for the replications",
        ),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory"),
        click.option("--run-id", help="Name of the run subdirectory"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
def cli():
    """Bayesian credible sets for set-identified models.

    Usage: setid <experiment> --config experiment.yml
    """


@cli.command()
@experiment_options
def coverage(config, seed, threads, out, run_id):
    """Coverage of the band in the missing-data model."""
    _experiment_run("coverage", config, seed, threads, out, run_id)()


@cli.command()
@experiment_options
def uniformity(config, seed, threads, out, run_id):
    """One-sided bands near point identification."""
    _experiment_run("uniformity", config, seed, threads, out, run_id)()


@cli.command()
@experiment_options
def project(config, seed, threads, out, run_id):
    """Projected credible sets in interval regression."""
    _experiment_run("projection", config, seed, threads, out, run_id)()


@cli.command()
@experiment_options
@click.option(
    "--grid",
    type=click.Choice(["default", "full", "paper"]),
    default="default",
    help="'full' (alias 'paper') runs every (n, B, K, M) cell of the full timing grid",
)
def bench(config, seed, threads, out, run_id, grid):
    """Wall time of credible against criterion-function projections."""
    overrides = {}
    if grid in ("full", "paper"):
        overrides["points"] = [p.model_dump() for p in TimingConfig.full_grid().points]
    _experiment_run("timing", config, seed, threads, out, run_id, **overrides)()


@cli.command()
@experiment_options
def hj(config, seed, threads, out, run_id):
    """Posterior of the SDF mean-variance set."""
    _experiment_run("hj", config, seed, threads, out, run_id)()


@cli.command()
def selftest():
    """Run the invariant checks."""
    results = run_selftest()
    for res in results:
        click.echo(f"{'ok  ' if res.passed else 'FAIL'} {res.name}: {res.detail}")
    failed = [res.name for res in results if not res.passed]
    if failed:
        raise click.ClickException(f"{len(failed)} checks failed: {', '.join(failed)}")


def main(argv: Optional[list[str]] = None) -> int:
    """Run the CLI and map failures to exit codes.

    returns
    -------
    code : int
        0 on success, 2 on usage or config errors, 3 on numeric failures
        and aborted experiments.

    """
    try:
        cli.main(args=argv, prog_name="setid", standalone_mode=False)
    except click.UsageError as err:
        err.show()
        return EXIT_CONFIG
    except (ValidationError, ConfigError, yaml.YAMLError) as err:
        logger.error(f"invalid configuration: {err}")
        return EXIT_CONFIG
    except (NumericError, DomainError) as err:
        logger.error(f"numeric failure: {err}")
        return EXIT_NUMERIC
    except click.ClickException as err:
        err.show()
        return err.exit_code
    except click.Abort:
        return EXIT_FAILED
    return EXIT_OK


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
