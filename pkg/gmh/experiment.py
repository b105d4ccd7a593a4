import asyncio
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Sequence

import numpy as np
import pandas as pd
from rich.console import Console
from rich.progress import Progress, TaskID

from gmh.config import ExperimentConfig
from gmh.diagnostics import summarize_trace
from gmh.exceptions import ConfigurationError
from gmh.kernel import Kernel, TargetDensity, run_chain, run_ensemble
from gmh.registry import build_kernel, build_target, default_initial
from gmh.rng import RngStream
from gmh.settings import Settings
from gmh.trace import ChainTrace

# Chain streams are (0, i), starting points are drawn from (1, i)
chain_stream = 0
initial_stream = 1
progress_stride = 100


def trace_name(chain: int) -> str:
    return f"trace_{chain}.csv"


def _replace_atomically(path: Path, write: Callable[[Path], None]) -> None:
    temporary = path.with_name(f".{path.name}.tmp")
    write(temporary)
    os.replace(temporary, path)


def write_summary(summary: pd.DataFrame, directory: Path) -> List[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / "summary.csv"
    json_path = directory / "summary.jsonl"

    _replace_atomically(
        csv_path,
        lambda path: summary.to_csv(path, index=False, lineterminator="\n"),
    )
    _replace_atomically(
        json_path,
        lambda path: summary.to_json(path, orient="records", lines=True, double_precision=15),
    )

    return [csv_path, json_path]


def summarize_traces(traces: Sequence[ChainTrace], names: Sequence[str]) -> pd.DataFrame:
    return pd.concat(
        [summarize_trace(trace, name) for trace, name in zip(traces, names)],
        ignore_index=True,
    )


class Experiment:
    def __init__(
        self,
        console: Console,
        settings: Settings,
        config: ExperimentConfig,
    ) -> None:
        self.console = console
        self.settings = settings
        self.config = config

        if self.settings.seed is None:
            raise ConfigurationError("No seed given in the config, environment or arguments")

        if not self.settings.output:
            raise ConfigurationError("No output directory given")

        self.target: TargetDensity = build_target(config.target, config.target_parameters)
        self.kernel: Kernel = self.build_kernel(0)

        initial = config.initial_position()
        if initial is not None and initial.shape != (self.target.dimension,):
            raise ConfigurationError(
                f"Initial position has {initial.shape[0]} coordinates, "
                f"target has {self.target.dimension}"
            )

        if self.kernel.needs_ensemble and config.chains < 3:
            raise ConfigurationError(
                f"{config.sampler.value} needs at least 3 chains, got {config.chains}"
            )

    @property
    def output_dir(self) -> Path:
        return Path(str(self.settings.output))

    def build_kernel(self, chain: int) -> Kernel:
        return build_kernel(self.config.sampler, self.config.sampler_parameters, self.target)

    def initials(self) -> List[np.ndarray]:
        given = self.config.initial_position()
        streams = RngStream(int(self.settings.seed or 0), stream_id=initial_stream)

        return [
            given.copy() if given is not None else default_initial(self.target, streams.spawn(i))
            for i in range(self.config.chains)
        ]

    async def _run_single_chains(
        self,
        initials: List[np.ndarray],
        root: RngStream,
        progress: Progress,
        tasks: List[TaskID],
    ) -> List[ChainTrace]:
        semaphore = asyncio.Semaphore(self.settings.threads)

        async def run_one(i: int) -> ChainTrace:
            def on_step(row: int) -> None:
                if (row + 1) % progress_stride == 0:
                    progress.update(tasks[i], completed=row + 1)

            async with semaphore:
                trace = await asyncio.to_thread(
                    run_chain,
                    self.build_kernel(i),
                    self.target,
                    initials[i],
                    self.config.iterations,
                    root.spawn(i),
                    self.settings.debug,
                    on_step,
                )

            progress.update(tasks[i], completed=self.config.iterations)
            return trace

        return list(await asyncio.gather(*[run_one(i) for i in range(len(initials))]))

    async def _run_ensemble(
        self,
        initials: List[np.ndarray],
        root: RngStream,
        progress: Progress,
        tasks: List[TaskID],
    ) -> List[ChainTrace]:
        def on_generation(row: int) -> None:
            if (row + 1) % progress_stride == 0:
                for task in tasks:
                    progress.update(task, completed=row + 1)

        executor = (
            ThreadPoolExecutor(max_workers=self.settings.threads)
            if self.settings.threads > 1
            else None
        )

        try:
            return await asyncio.to_thread(
                run_ensemble,
                self.build_kernel,
                self.target,
                initials,
                self.config.iterations,
                root,
                executor,
                self.settings.debug,
                on_generation,
            )
        finally:
            if executor is not None:
                executor.shutdown()

    async def _sample(self) -> List[ChainTrace]:
        initials = self.initials()
        root = RngStream(int(self.settings.seed or 0), stream_id=chain_stream)

        with Progress(console=self.console, expand=True) as progress:
            padding_left = " " * 10
            tasks = [
                progress.add_task(
                    f"{padding_left}[cyan] Chain {i}...",
                    total=self.config.iterations,
                )
                for i in range(self.config.chains)
            ]

            if self.kernel.needs_ensemble:
                return await self._run_ensemble(initials, root, progress, tasks)

            return await self._run_single_chains(initials, root, progress, tasks)

    async def run(self) -> List[Path]:
        self.console.log(
            f"Running {self.config.chains} chain(s) of {self.config.sampler.value} "
            f"on {self.config.target.value}..."
        )
        traces = [trace.discard(self.config.burn_in) for trace in await self._sample()]
        self.console.log("Sampling done.")

        names = [trace_name(i) for i in range(len(traces))]
        summary = summarize_traces(traces, names)

        # Nothing is written unless every chain finished and was summarized
        self.output_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for i, trace in enumerate(traces):
            path = self.output_dir / names[i]
            trace.write_csv(path)
            written.append(path)

        written += write_summary(summary, self.output_dir)

        self.console.log(f"Wrote {len(written)} files to {self.output_dir}.")
        return written
