import math

import numpy as np
from testslide.dsl import context

from gmh.exceptions import ConfigurationError, ContractViolation
from gmh.particle_filter import (
    AbcObservation,
    abc_bandwidth,
    abc_log_observation_density,
    bootstrap_particle_filter,
    systematic_resample,
)
from gmh.rng import RngStream
from gmh.targets import LinearGaussianSSM, kalman_log_likelihood, load_reference_dataset


class ImpossibleObservations(LinearGaussianSSM):
    def observation_log_density(self, theta, y, particles):
        return np.full(len(particles), -math.inf)


class NanObservations(LinearGaussianSSM):
    def observation_log_density(self, theta, y, particles):
        return np.full(len(particles), math.nan)


@context
def ParticleFilterTest(context):
    @context.before
    def prepare(self):
        self.rng = RngStream(seed=11)
        self.model = LinearGaussianSSM()
        self.theta = np.array([0.0])
        self.data = load_reference_dataset()

    @context.sub_context
    def resampling(context):
        @context.example
        def uniform_weights_keep_every_particle(self):
            np.testing.assert_array_equal(
                systematic_resample(np.full(8, 0.125), self.rng), np.arange(8)
            )

        @context.example
        def zero_weights_are_never_picked(self):
            indices = systematic_resample(np.array([0.5, 0.0, 0.5, 0.0]), self.rng)

            self.assertEqual(sorted(indices), [0, 0, 2, 2])

        @context.example
        def counts_stay_within_one_of_expectation(self):
            for trial in range(50):
                rng = self.rng.spawn(trial)
                weights = rng.uniform(size=20)
                weights /= weights.sum()

                counts = np.bincount(systematic_resample(weights, rng), minlength=20)
                self.assertTrue(np.all(np.abs(counts - 20 * weights) < 1.0 + 1e-9))

    @context.sub_context
    def bootstrap_filter(context):
        @context.example
        def agrees_with_the_kalman_filter(self):
            data = self.data[:50]
            exact = kalman_log_likelihood(self.model, self.theta, data)

            close = sum(
                abs(
                    bootstrap_particle_filter(
                        self.model, self.theta, data, 1000, self.rng.spawn(replicate)
                    )
                    - exact
                )
                < 1.0
                for replicate in range(100)
            )

            self.assertGreaterEqual(close, 95)

        @context.example
        def likelihood_estimate_is_unbiased(self):
            data = self.data[:20]
            exact = kalman_log_likelihood(self.model, self.theta, data)

            ratios = np.exp(
                [
                    bootstrap_particle_filter(
                        self.model, self.theta, data, 100, self.rng.spawn(replicate)
                    )
                    - exact
                    for replicate in range(2000)
                ]
            )

            self.assertLess(abs(ratios.mean() - 1.0), 0.05)

        @context.example
        def variance_falls_as_particles_double(self):
            data = self.data[:50]
            variances = [
                np.var(
                    [
                        bootstrap_particle_filter(
                            self.model, self.theta, data, n, self.rng.spawn(replicate)
                        )
                        for replicate in range(300)
                    ],
                    ddof=1,
                )
                for n in (100, 200, 400)
            ]

            for larger, smaller in zip(variances, variances[1:]):
                self.assertGreater(larger, smaller)
                # Asymptotically Var ∝ 1/N
                self.assertGreater(larger / smaller, 1.4)
                self.assertLess(larger / smaller, 2.9)

        @context.example
        def same_stream_same_estimate(self):
            first = bootstrap_particle_filter(self.model, self.theta, self.data, 50, RngStream(3))
            second = bootstrap_particle_filter(self.model, self.theta, self.data, 50, RngStream(3))

            self.assertEqual(first, second)

        @context.example
        def needs_two_particles(self):
            with self.assertRaises(ConfigurationError):
                bootstrap_particle_filter(self.model, self.theta, self.data, 1, self.rng)

        @context.example
        def vanishing_weights_give_a_zero_estimate(self):
            estimate = bootstrap_particle_filter(
                ImpossibleObservations(), self.theta, self.data, 10, self.rng
            )

            self.assertEqual(estimate, -math.inf)

        @context.example
        def nan_weights(self):
            with self.assertRaises(ContractViolation):
                bootstrap_particle_filter(NanObservations(), self.theta, self.data, 10, self.rng)

    @context.sub_context
    def abc(context):
        @context.example
        def largest_at_zero_discrepancy(self):
            values = abc_log_observation_density(1.5, np.array([0.5, 1.5, 3.5]), 0.4)

            self.assertEqual(int(np.argmax(values)), 1)

        @context.example
        def wider_bandwidth_flattens_the_kernel(self):
            simulated = np.array([0.0, 1.0])
            narrow = abc_log_observation_density(0.0, simulated, 0.5)
            wide = abc_log_observation_density(0.0, simulated, 1.0)

            self.assertLess(wide[0] - wide[1], narrow[0] - narrow[1])

        @context.example
        def summary_statistics_reduce_rows(self):
            simulated = np.zeros((4, 3))
            values = abc_log_observation_density(
                np.zeros(3), simulated, 1.0, summary=lambda x: np.sum(x, axis=-1)
            )

            self.assertEqual(values.shape, (4,))

        @context.example
        def nonpositive_bandwidth(self):
            with self.assertRaises(ConfigurationError):
                abc_log_observation_density(0.0, np.zeros(3), 0.0)

        @context.example
        def default_bandwidth_is_the_data_spread(self):
            observation = AbcObservation(self.model, self.data)

            self.assertAlmostEqual(observation.epsilon, float(np.std(self.data, ddof=1)))
            self.assertEqual(abc_bandwidth(self.data), observation.epsilon)

        @context.example
        def abc_filter_gives_finite_estimates(self):
            observation = AbcObservation(self.model, self.data[:20], epsilon=0.5)
            estimate = bootstrap_particle_filter(
                observation, self.theta, self.data[:20], 200, self.rng
            )

            self.assertTrue(math.isfinite(estimate))
