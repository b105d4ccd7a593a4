import math

import numpy as np
from testslide.dsl import context

from gmh.diagnostics import iact_sokal
from gmh.exceptions import ConfigurationError
from gmh.kernel import run_chain
from gmh.metropolis import AdaptiveMetropolis, AdaptiveMetropolisState, MetropolisKernel
from gmh.rng import RngStream
from gmh.targets import GaussianTarget, ToyScalarTarget, load_reference_dataset


@context
def MetropolisTest(context):
    @context.before
    def prepare(self):
        self.rng = RngStream(seed=20170401)
        self.standard_normal = GaussianTarget([0.0], np.eye(1))

    @context.sub_context
    def fixed_proposal(context):
        @context.example
        def covariance_and_sampler_are_exclusive(self):
            with self.assertRaises(ConfigurationError):
                MetropolisKernel(1, covariance=np.eye(1), proposal=lambda rng, n: np.zeros(n))

        @context.example
        def reports_the_acceptance_log_probability(self):
            kernel = MetropolisKernel(1, proposal=lambda rng, n: np.array([1.0]))
            state = kernel.initial_state(self.standard_normal, np.zeros(1), self.rng)
            step = kernel.step(state, self.standard_normal, self.rng)

            self.assertAlmostEqual(step.log_alpha, -0.5)

    @context.sub_context
    def running_moments(context):
        @context.example
        def match_the_batch_formulas(self):
            draws = self.rng.standard_normal((500, 3)) @ np.array(
                [[1.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.0, -0.3, 2.0]]
            )
            am = AdaptiveMetropolisState.start(draws[0], 0.44)
            for draw in draws[1:]:
                am = am.absorb(draw)

            np.testing.assert_allclose(am.running_mean, draws.mean(axis=0), rtol=1e-10)
            np.testing.assert_allclose(
                am.running_covariance, np.cov(draws.T, bias=True), rtol=1e-10, atol=1e-12
            )
            self.assertEqual(am.sample_count, 500)

        @context.example
        def start_at_the_optimal_scale(self):
            am = AdaptiveMetropolisState.start(np.zeros(4), 0.44)

            self.assertAlmostEqual(math.exp(am.log_scale), 2.38**2 / 4)
            np.testing.assert_allclose(am.proposal_covariance(), 2.38**2 / 4 * np.eye(4))

        @context.example
        def proposal_covariance_is_regularized(self):
            am = AdaptiveMetropolisState.start(np.zeros(2), 0.44)
            for _ in range(150):
                am = am.absorb(np.array([1.0, 1.0]) * self.rng.normal())

            eigenvalues = np.linalg.eigvalsh(am.proposal_covariance())
            self.assertGreater(eigenvalues.min(), 0.0)

    @context.sub_context
    def adaptation(context):
        @context.example
        def warns_outside_the_recommended_band(self):
            with self.assertLogs("gmh.metropolis", level="WARNING"):
                AdaptiveMetropolis(target_rate=0.9)

        @context.example
        def rejects_impossible_rates(self):
            with self.assertRaises(ConfigurationError):
                AdaptiveMetropolis(target_rate=1.0)

        @context.example
        def converges_to_the_target_acceptance(self):
            trace = run_chain(
                AdaptiveMetropolis(target_rate=0.44),
                self.standard_normal,
                np.zeros(1),
                20_000,
                self.rng,
            )

            self.assertLess(abs(trace.discard(10_000).acceptance_rate - 0.44), 0.06)

        @context.example
        def freezes_after_adapt_until(self):
            kernel = AdaptiveMetropolis(adapt_until=50)
            state = kernel.initial_state(self.standard_normal, np.zeros(1), self.rng)
            for _ in range(60):
                state = kernel.step(state, self.standard_normal, self.rng).next_state

            frozen = state.scratch
            for _ in range(20):
                state = kernel.step(state, self.standard_normal, self.rng).next_state

            self.assertIs(state.scratch, frozen)

    @context.sub_context
    def toy_posterior(context):
        @context.before
        def prepare_target(self):
            self.target = ToyScalarTarget(load_reference_dataset())

        @context.example
        def plain_and_refreshed_autocorrelation_times(self):
            taus = {}
            for refresh in (False, True):
                trace = run_chain(
                    AdaptiveMetropolis(refresh_proposal=refresh),
                    self.target,
                    np.zeros(1),
                    55_000,
                    RngStream(seed=20170401),
                )
                taus[refresh] = iact_sokal(trace.discard(5_000).samples[:, 0]).tau

            self.assertGreaterEqual(taus[False], 3.0)
            self.assertLessEqual(taus[False], 9.0)
            self.assertLessEqual(taus[True], taus[False] + 1.0)
