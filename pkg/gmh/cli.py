#!/usr/bin/env python
import asyncio
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import Optional, Tuple

import click
import uvloop
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from gmh.config import load_config
from gmh.constants import minimum_tuning_replicates, reference_seed
from gmh.exceptions import ConfigurationError, GmhError
from gmh.experiment import Experiment, summarize_traces, write_summary
from gmh.pseudo_marginal import ParticleFilterEstimator, PseudoMarginalTarget, tune_particle_count
from gmh.registry import SamplerKind, TargetKind, build_target
from gmh.rng import RngStream
from gmh.settings import Settings
from gmh.targets import reference_dataset_path, write_reference_dataset
from gmh.trace import ChainTrace

console = Console(stderr=True)

exit_configuration_error = 2
exit_runtime_error = 3


def wrap_coroutine(f):
    @wraps(f)
    def wrapper(*args, **kwargs):
        uvloop.install()
        asyncio.run(f(*args, **kwargs))

    return wrapper


def exit_codes(f):
    @wraps(f)
    def wrapper(*args, **kwargs):
        try:
            f(*args, **kwargs)
        except ConfigurationError as e:
            console.log(f"[red]Configuration error: {e}[/red]")
            sys.exit(exit_configuration_error)
        except GmhError as e:
            console.log(f"[red]{type(e).__name__}: {e}[/red]")
            sys.exit(exit_runtime_error)

    return wrapper


def load_settings() -> Settings:
    settings = Settings()
    settings.apply_environment_variables()
    return settings


@click.group()
def main() -> None:
    try:
        level = load_settings().log_level
    except ConfigurationError as e:
        console.log(f"[red]Configuration error: {e}[/red]")
        sys.exit(exit_configuration_error)

    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=console)],
    )


@main.command()
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Experiment configuration file",
)
@click.option("--seed", type=int, default=None, help="Seed, overrides the config")
@click.option("--threads", type=int, default=None, help="Chains run concurrently")
@click.option("--output", type=str, default=None, help="Directory for traces and summary")
@exit_codes
@wrap_coroutine
async def run(
    config_path: Path,
    seed: Optional[int],
    threads: Optional[int],
    output: Optional[str],
) -> None:
    """Run the chains an experiment config declares."""
    console.log("Loading experiment configuration...")
    config = load_config(config_path)

    settings = load_settings()
    settings.apply_arguments(seed=seed, threads=threads, output=output)
    settings.apply_config(config)

    if not settings.valid():
        console.log("Settings seem to be invalid.", settings)
        raise ConfigurationError("A seed, an output directory and threads >= 1 are required")

    console.log("Settings loaded.", settings)

    experiment = Experiment(console=console, settings=settings, config=config)
    await experiment.run()


@main.command()
@click.argument(
    "trace_paths",
    nargs=-1,
    required=True,
    type=click.Path(path_type=Path),
)
@click.option(
    "--output",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("."),
    help="Directory for summary.csv and summary.jsonl",
)
@exit_codes
def summarize(trace_paths: Tuple[Path, ...], output: Path) -> None:
    """Per-coordinate mean, variance, IACT, ESS and acceptance rate of traces."""
    traces = [ChainTrace.read_csv(path) for path in trace_paths]
    summary = summarize_traces(traces, [str(path) for path in trace_paths])

    for path in write_summary(summary, output):
        console.log(f"Wrote {path}")


@main.command("tune-particles")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Experiment configuration with a state space model target",
)
@click.option("--theta", type=float, multiple=True, required=True, help="Reference parameter")
@click.option("--replicates", type=int, default=minimum_tuning_replicates)
@click.option("--seed", type=int, default=None)
@exit_codes
def tune_particles(
    config_path: Path,
    theta: Tuple[float, ...],
    replicates: int,
    seed: Optional[int],
) -> None:
    """Smallest particle count with Var[log likelihood estimate] in the target band."""
    config = load_config(config_path)
    target = build_target(config.target, config.target_parameters)

    if not isinstance(target, PseudoMarginalTarget) or not isinstance(
        target.estimator, ParticleFilterEstimator
    ):
        raise ConfigurationError(f"Target {config.target.value} has no particle filter")

    settings = load_settings()
    settings.apply_arguments(seed=seed, threads=None, output=None)
    settings.apply_config(config)

    estimator = target.estimator
    report = tune_particle_count(
        lambda n: ParticleFilterEstimator(estimator.model, estimator.data, n),
        theta,
        RngStream(settings.seed if settings.seed is not None else reference_seed),
        replicates=replicates,
    )

    table = Table("particles", "Var[log estimate]")
    for n, variance in report.variances.items():
        table.add_row(str(n), f"{variance:.4g}")

    console.print(table)
    console.log(f"Selected {report.n_particles} particles.")


@main.command("list-samplers")
def list_samplers() -> None:
    """Samplers and targets usable in experiment configs, with their parameters."""
    for title, kinds in (("sampler", SamplerKind), ("target", TargetKind)):
        table = Table(title, "parameters")
        for kind in kinds:
            table.add_row(
                kind.value,
                ", ".join(f"{name}={default}" for name, (_, default) in kind.schema.items()),
            )

        console.print(table)


@main.command()
@click.option(
    "--output",
    type=click.Path(dir_okay=False, path_type=Path),
    default=reference_dataset_path,
    help="Where to write the reference toy dataset",
)
@exit_codes
def dataset(output: Path) -> None:
    """Regenerate the reference toy dataset from its fixed seed."""
    write_reference_dataset(output)
    console.log(f"Wrote {output}")


if __name__ == "__main__":
    main()
