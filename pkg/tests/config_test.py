import os
import unittest.mock as mock
from pathlib import Path

import numpy as np
from frozendict import frozendict
from testslide.dsl import context

from gmh.config import load_config, parse_config
from gmh.exceptions import ConfigurationError
from gmh.gibbs import GibbsSweep
from gmh.metropolis import AdaptiveMetropolis, MetropolisKernel
from gmh.pseudo_marginal import (
    LogNormalProposal,
    PseudoMarginalHamiltonianSlice,
    PseudoMarginalMetropolis,
    PseudoMarginalTarget,
    TruncatedGaussianRProposal,
)
from gmh.particle_filter import AbcObservation
from gmh.registry import (
    SamplerKind,
    TargetKind,
    build_kernel,
    build_target,
    parse_matrix,
    parse_parameters,
)
from gmh.settings import Settings
from gmh.slice import DirectionalSlice
from gmh.targets import GaussianTarget, ToyJointTarget, ToyScalarTarget

configs = Path(__file__).parent.parent / "configs"

minimal = """
[experiment]
sampler = metropolis
target = gaussian
iterations = 1000
"""


@context
def ConfigTest(context):
    @context.sub_context
    def parsing(context):
        @context.example
        def defaults(self):
            config = parse_config(minimal)

            self.assertEqual(config.sampler, SamplerKind.METROPOLIS)
            self.assertEqual(config.target, TargetKind.GAUSSIAN)
            self.assertEqual(config.chains, 1)
            self.assertEqual(config.burn_in, 0)
            self.assertIsNone(config.seed)
            self.assertIsNone(config.output_dir)
            self.assertIsNone(config.initial_position())
            self.assertEqual(config.sampler_parameters, frozendict(scale=1.0))

        @context.example
        def full_config(self):
            config = parse_config(
                """
                [experiment]
                sampler = hmc
                target = gaussian
                chains = 4
                seed = 18446744073709551615
                iterations = 500
                burn_in = 100
                output_dir = runs/hmc
                initial = 0.5, -1

                [sampler]
                step_size = 0.2
                adapt_until = 200

                [target]
                mean = 1, 2
                covariance = 1, 0.5; 0.5, 2
                """.replace(
                    "\n                ", "\n"
                )
            )

            self.assertEqual(config.chains, 4)
            self.assertEqual(config.seed, 2**64 - 1)
            self.assertEqual(config.output_dir, "runs/hmc")
            np.testing.assert_array_equal(config.initial_position(), [0.5, -1.0])
            self.assertEqual(config.sampler_parameters["step_size"], 0.2)
            self.assertEqual(config.sampler_parameters["n_steps"], 10)
            self.assertEqual(config.sampler_parameters["adapt_until"], 200)
            self.assertEqual(config.target_parameters["covariance"], ((1.0, 0.5), (0.5, 2.0)))

        @context.example
        def parameters_are_immutable(self):
            config = parse_config(minimal)

            with self.assertRaises(TypeError):
                config.sampler_parameters["scale"] = 2.0

        @context.example
        def shipped_configs_parse(self):
            for path in sorted(configs.glob("*.cfg")):
                config = load_config(path)
                self.assertGreater(config.iterations, config.burn_in)

        @context.example
        def missing_file(self):
            with self.assertRaises(ConfigurationError):
                load_config("/nonexistent/experiment.cfg")

        @context.sub_context
        def rejects(context):
            @context.function
            def assert_rejected(self, text):
                with self.assertRaises(ConfigurationError):
                    parse_config(text)

            @context.example
            def malformed_text(self):
                self.assert_rejected("sampler = metropolis")

            @context.example
            def missing_experiment_section(self):
                self.assert_rejected("[sampler]\nscale = 1.0\n")

            @context.example
            def unknown_section(self):
                self.assert_rejected(minimal + "[extras]\nfoo = 1\n")

            @context.example
            def unknown_experiment_key(self):
                self.assert_rejected(minimal + "thinning = 10\n")

            @context.example
            def unknown_sampler_key(self):
                self.assert_rejected(minimal + "[sampler]\nwidth = 1.0\n")

            @context.example
            def unknown_sampler(self):
                self.assert_rejected(minimal.replace("metropolis", "nuts"))

            @context.example
            def missing_iterations(self):
                self.assert_rejected(minimal.replace("iterations = 1000", ""))

            @context.example
            def non_integer_iterations(self):
                self.assert_rejected(minimal.replace("1000", "many"))

            @context.example
            def burn_in_covering_the_run(self):
                self.assert_rejected(minimal + "burn_in = 1000\n")

            @context.example
            def no_chains(self):
                self.assert_rejected(minimal + "chains = 0\n")

            @context.example
            def seed_beyond_64_bits(self):
                self.assert_rejected(minimal + f"seed = {2**64}\n")

            @context.example
            def bad_parameter_value(self):
                self.assert_rejected(minimal + "[sampler]\nscale = wide\n")

    @context.sub_context
    def registry(context):
        @context.example
        def unknown_parameter(self):
            with self.assertRaises(ConfigurationError):
                parse_parameters(SamplerKind.MALA.schema, {"n_steps": "3"}, "sampler")

        @context.example
        def never_adapt(self):
            parameters = parse_parameters(
                SamplerKind.ADAPTIVE_METROPOLIS.schema, {"adapt_until": "never"}, "sampler"
            )

            self.assertIsNone(parameters["adapt_until"])

        @context.example
        def matrix_rows(self):
            self.assertEqual(parse_matrix("1, 0; 0, 1"), ((1.0, 0.0), (0.0, 1.0)))

        @context.example
        def every_sampler_has_a_schema(self):
            for kind in SamplerKind:
                parse_parameters(kind.schema, {}, "sampler")

        @context.example
        def builds_targets(self):
            defaults = {kind: parse_parameters(kind.schema, {}, "target") for kind in TargetKind}

            self.assertIsInstance(build_target(TargetKind.GAUSSIAN, defaults[TargetKind.GAUSSIAN]), GaussianTarget)
            self.assertIsInstance(
                build_target(TargetKind.TOY_SCALAR, defaults[TargetKind.TOY_SCALAR]), ToyScalarTarget
            )

            joint = build_target(TargetKind.TOY_JOINT, defaults[TargetKind.TOY_JOINT])
            self.assertIsInstance(joint, ToyJointTarget)
            self.assertEqual(joint.dimension, 101)

            ssm = build_target(TargetKind.LINEAR_GAUSSIAN, defaults[TargetKind.LINEAR_GAUSSIAN])
            self.assertIsInstance(ssm, PseudoMarginalTarget)
            self.assertEqual(ssm.estimator.n_particles, 100)

        @context.example
        def abc_wraps_the_model(self):
            parameters = parse_parameters(
                TargetKind.LINEAR_GAUSSIAN.schema, {"abc": "true", "abc_epsilon": "0.5"}, "target"
            )
            target = build_target(TargetKind.LINEAR_GAUSSIAN, parameters)

            self.assertIsInstance(target.estimator.model, AbcObservation)
            self.assertEqual(target.estimator.model.epsilon, 0.5)

        @context.example
        def builds_kernels(self):
            gaussian = GaussianTarget([0.0, 0.0], np.eye(2))

            def kernel(kind, target, **raw):
                return build_kernel(kind, parse_parameters(kind.schema, raw, "sampler"), target)

            self.assertIsInstance(kernel(SamplerKind.METROPOLIS, gaussian), MetropolisKernel)
            self.assertIsInstance(
                kernel(SamplerKind.ADAPTIVE_METROPOLIS, gaussian), AdaptiveMetropolis
            )
            self.assertIsInstance(kernel(SamplerKind.GIBBS, gaussian), GibbsSweep)
            self.assertTrue(kernel(SamplerKind.DIRECTIONAL_SLICE, gaussian).needs_ensemble)
            self.assertIsInstance(kernel(SamplerKind.DIRECTIONAL_SLICE, gaussian), DirectionalSlice)

            ssm = build_target(
                TargetKind.LINEAR_GAUSSIAN,
                parse_parameters(TargetKind.LINEAR_GAUSSIAN.schema, {}, "target"),
            )
            self.assertIsInstance(kernel(SamplerKind.PMMH, ssm), PseudoMarginalMetropolis)

            pm_slice = kernel(SamplerKind.PM_HAMILTONIAN_SLICE, ssm, truncated="yes")
            self.assertIsInstance(pm_slice, PseudoMarginalHamiltonianSlice)
            self.assertIsInstance(pm_slice.r_proposal, TruncatedGaussianRProposal)

        @context.example
        def ellipse_covariance_and_mass_matrices(self):
            gaussian = GaussianTarget([0.0, 0.0], np.eye(2))

            def kernel(kind, **raw):
                return build_kernel(kind, parse_parameters(kind.schema, raw, "sampler"), gaussian)

            hamiltonian_slice = kernel(SamplerKind.HAMILTONIAN_SLICE, covariance="2, 0.5; 0.5, 1")
            np.testing.assert_allclose(hamiltonian_slice.params.sigma, [[2.0, 0.5], [0.5, 1.0]])

            default = kernel(SamplerKind.ELLIPTICAL_SLICE, variance="3")
            np.testing.assert_allclose(default.prior.sigma, 3.0 * np.eye(2))

            hmc = kernel(SamplerKind.HMC, mass="4, 9")
            np.testing.assert_array_equal(hmc.mass_matrix, np.diag([4.0, 9.0]))

            mala = kernel(SamplerKind.MALA, mass="2, 1; 1, 2")
            np.testing.assert_array_equal(mala.mass_matrix, [[2.0, 1.0], [1.0, 2.0]])
            self.assertIsNone(kernel(SamplerKind.MALA).mass_matrix)

            with self.assertRaises(ConfigurationError):
                kernel(SamplerKind.HMC, mass="1, 2, 3")

            with self.assertRaises(ConfigurationError):
                kernel(SamplerKind.HAMILTONIAN_SLICE, covariance="1, 0; 0")

        @context.example
        def multiplicative_pmmh(self):
            ssm = build_target(
                TargetKind.LINEAR_GAUSSIAN,
                parse_parameters(TargetKind.LINEAR_GAUSSIAN.schema, {}, "target"),
            )
            parameters = parse_parameters(
                SamplerKind.PMMH.schema, {"scale": "0.4", "multiplicative": "yes"}, "sampler"
            )
            kernel = build_kernel(SamplerKind.PMMH, parameters, ssm)

            self.assertIsInstance(kernel.parameter_proposal, LogNormalProposal)
            self.assertEqual(kernel.parameter_proposal.scale, 0.4)

        @context.example
        def pseudo_marginal_samplers_need_estimators(self):
            gaussian = GaussianTarget([0.0], np.eye(1))

            with self.assertRaises(ConfigurationError):
                build_kernel(SamplerKind.PMMH, frozendict(scale=1.0), gaussian)

    @context.sub_context
    def settings(context):
        @context.before
        def prepare(self):
            self.environment = mock.patch.dict(os.environ, {}, clear=True)
            self.environment.start()
            self.settings = Settings()
            self.config = parse_config(minimal + "seed = 5\noutput_dir = runs/a\n")

        @context.after
        def restore(self):
            self.environment.stop()

        @context.example
        def defaults_are_invalid(self):
            self.assertEqual(self.settings.log, "info")
            self.assertEqual(self.settings.threads, 1)
            self.assertFalse(self.settings.valid())

        @context.example
        def environment_variables(self):
            os.environ.update(GMH_LOG="debug", GMH_THREADS="4", GMH_SEED="9", GMH_OUTPUT="out")
            self.settings.apply_environment_variables()

            self.assertTrue(self.settings.debug)
            self.assertEqual(self.settings.threads, 4)
            self.assertEqual(self.settings.seed, 9)
            self.assertEqual(self.settings.output, "out")
            self.assertTrue(self.settings.valid())

        @context.example
        def invalid_environment_variable(self):
            os.environ["GMH_THREADS"] = "many"

            with self.assertRaises(ConfigurationError):
                self.settings.apply_environment_variables()

        @context.example
        def arguments_override_the_environment(self):
            os.environ["GMH_SEED"] = "9"
            self.settings.apply_environment_variables()
            self.settings.apply_arguments(seed=11, threads=None, output=None)

            self.assertEqual(self.settings.seed, 11)
            self.assertEqual(self.settings.threads, 1)

        @context.example
        def config_fills_what_is_unset(self):
            self.settings.apply_arguments(seed=None, threads=2, output="elsewhere")
            self.settings.apply_config(self.config)

            self.assertEqual(self.settings.seed, 5)
            self.assertEqual(self.settings.output, "elsewhere")
            self.assertTrue(self.settings.valid())

        @context.example
        def unknown_log_level(self):
            self.settings.log = "verbose"

            with self.assertRaises(ConfigurationError):
                self.settings.log_level
