import asyncio
import io
import tempfile
from pathlib import Path

import pandas as pd
from click.testing import CliRunner
from rich.console import Console
from testslide.dsl import context

from gmh.cli import main
from gmh.config import parse_config
from gmh.exceptions import ConfigurationError
from gmh.experiment import Experiment
from gmh.settings import Settings
from gmh.trace import ChainTrace

gaussian_metropolis = """
[experiment]
sampler = metropolis
target = gaussian
chains = 2
seed = 7
iterations = 600
burn_in = 100

[sampler]
scale = 1.5

[target]
mean = 1, -1
covariance = 1, 0.5; 0.5, 2
"""


@context
def ExperimentTest(context):
    @context.before
    def prepare(self):
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)
        self.console = Console(file=io.StringIO())
        self.runner = CliRunner()

    @context.after
    def cleanup(self):
        self.directory.cleanup()

    @context.function
    def write_config(self, text, name="experiment.cfg"):
        path = self.root / name
        path.write_text(text)
        return path

    @context.function
    def experiment(self, text, output="out", threads=1):
        settings = Settings()
        settings.apply_arguments(seed=None, threads=threads, output=str(self.root / output))
        config = parse_config(text)
        settings.apply_config(config)
        return Experiment(console=self.console, settings=settings, config=config)

    @context.function
    def invoke(self, *args):
        return self.runner.invoke(main, [str(arg) for arg in args], catch_exceptions=False)

    @context.sub_context
    def experiment_object(context):
        @context.example
        def writes_traces_and_summary(self):
            written = asyncio.run(self.experiment(gaussian_metropolis).run())

            self.assertEqual(
                sorted(path.name for path in written),
                ["summary.csv", "summary.jsonl", "trace_0.csv", "trace_1.csv"],
            )

            trace = ChainTrace.read_csv(self.root / "out" / "trace_0.csv")
            self.assertEqual(trace.iterations, 500)
            self.assertEqual(trace.dimension, 2)

            frame = pd.read_csv(self.root / "out" / "trace_0.csv")
            self.assertEqual(frame["iteration"].iloc[0], 0)

            summary = pd.read_csv(self.root / "out" / "summary.csv")
            self.assertEqual(len(summary), 4)
            self.assertEqual(list(summary["trace"]), ["trace_0.csv"] * 2 + ["trace_1.csv"] * 2)

            records = pd.read_json(self.root / "out" / "summary.jsonl", lines=True)
            self.assertEqual(len(records), 4)

        @context.example
        def thread_count_does_not_change_draws(self):
            asyncio.run(self.experiment(gaussian_metropolis, output="one").run())
            asyncio.run(self.experiment(gaussian_metropolis, output="two", threads=2).run())

            for name in ("trace_0.csv", "trace_1.csv"):
                self.assertEqual(
                    (self.root / "one" / name).read_bytes(),
                    (self.root / "two" / name).read_bytes(),
                )

        @context.example
        def chains_start_apart(self):
            asyncio.run(self.experiment(gaussian_metropolis).run())
            first = ChainTrace.read_csv(self.root / "out" / "trace_0.csv")
            second = ChainTrace.read_csv(self.root / "out" / "trace_1.csv")

            self.assertNotEqual(first.samples[0].tolist(), second.samples[0].tolist())

        @context.example
        def ensemble_sampler(self):
            text = gaussian_metropolis.replace("sampler = metropolis", "sampler = directional_slice")
            text = text.replace("chains = 2", "chains = 4").replace("scale = 1.5", "")
            written = asyncio.run(self.experiment(text, threads=2).run())

            self.assertEqual(len(written), 6)

        @context.example
        def ensemble_needs_three_chains(self):
            text = gaussian_metropolis.replace("sampler = metropolis", "sampler = directional_slice")

            with self.assertRaises(ConfigurationError):
                self.experiment(text.replace("scale = 1.5", ""))

        @context.example
        def initial_position_must_match_the_target(self):
            text = gaussian_metropolis.replace("burn_in = 100", "burn_in = 100\ninitial = 0, 0, 0")

            with self.assertRaises(ConfigurationError):
                self.experiment(text)

        @context.example
        def needs_a_seed(self):
            with self.assertRaises(ConfigurationError):
                self.experiment(gaussian_metropolis.replace("seed = 7", ""))

    @context.sub_context
    def command_line(context):
        @context.example
        def same_seed_same_bytes(self):
            config = self.write_config(gaussian_metropolis)
            for output in ("a", "b"):
                result = self.invoke("run", "--config", config, "--seed", 7, "--output", self.root / output)
                self.assertEqual(result.exit_code, 0)

            for name in ("trace_0.csv", "trace_1.csv", "summary.csv"):
                self.assertEqual(
                    (self.root / "a" / name).read_bytes(),
                    (self.root / "b" / name).read_bytes(),
                )

        @context.example
        def seed_argument_overrides_the_config(self):
            config = self.write_config(gaussian_metropolis)
            self.invoke("run", "--config", config, "--output", self.root / "a")
            self.invoke("run", "--config", config, "--seed", 8, "--output", self.root / "b")

            self.assertNotEqual(
                (self.root / "a" / "trace_0.csv").read_bytes(),
                (self.root / "b" / "trace_0.csv").read_bytes(),
            )

        @context.example
        def malformed_config_exits_with_two(self):
            config = self.write_config("[experiment]\nsampler = metropolis\n")
            result = self.invoke("run", "--config", config, "--output", self.root / "out")

            self.assertEqual(result.exit_code, 2)
            self.assertFalse((self.root / "out").exists())

        @context.example
        def missing_config_exits_with_two(self):
            result = self.invoke("run", "--config", self.root / "absent.cfg", "--output", self.root / "out")

            self.assertEqual(result.exit_code, 2)

        @context.example
        def summarizes_several_traces(self):
            asyncio.run(self.experiment(gaussian_metropolis).run())
            traces = [self.root / "out" / "trace_0.csv", self.root / "out" / "trace_1.csv"]

            result = self.invoke("summarize", *traces, "--output", self.root / "summary")
            self.assertEqual(result.exit_code, 0)

            summary = pd.read_csv(self.root / "summary" / "summary.csv")
            self.assertEqual(list(summary["trace"]), [str(traces[0])] * 2 + [str(traces[1])] * 2)

        @context.example
        def empty_trace_exits_with_three(self):
            empty = self.root / "empty.csv"
            empty.write_text("")

            result = self.invoke("summarize", empty, "--output", self.root / "summary")

            self.assertEqual(result.exit_code, 3)
            self.assertFalse((self.root / "summary" / "summary.csv").exists())

        @context.example
        def lists_samplers(self):
            self.assertEqual(self.invoke("list-samplers").exit_code, 0)

        @context.example
        def regenerates_the_dataset(self):
            output = self.root / "toy.csv"
            result = self.invoke("dataset", "--output", output)

            self.assertEqual(result.exit_code, 0)
            self.assertEqual(len(output.read_text().splitlines()), 100)

        @context.example
        def tune_particles_needs_a_state_space_model(self):
            config = self.write_config(gaussian_metropolis)
            result = self.invoke("tune-particles", "--config", config, "--theta", 0.0)

            self.assertEqual(result.exit_code, 2)

        @context.example
        def negative_seed_exits_with_two(self):
            config = self.write_config(
                "[experiment]\nsampler = pmmh\ntarget = linear_gaussian\nseed = 7\n"
                "iterations = 10\n\n[target]\nparticles = 10\n"
            )
            result = self.invoke(
                "tune-particles", "--config", config, "--theta", 0.0, "--seed", -1
            )

            self.assertEqual(result.exit_code, 2)
