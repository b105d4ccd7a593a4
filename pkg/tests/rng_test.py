import numpy as np
from testslide.dsl import context

from gmh.exceptions import ConfigurationError
from gmh.rng import RngStream


@context
def RngStreamTest(context):
    @context.example
    def same_seed_and_stream_reproduce_draws(self):
        a = RngStream(seed=7, stream_id=3)
        b = RngStream(seed=7, stream_id=3)

        np.testing.assert_array_equal(a.standard_normal(50), b.standard_normal(50))
        self.assertEqual(a.uniform(), b.uniform())
        self.assertEqual(a.exponential(), b.exponential())

    @context.example
    def distinct_streams_differ(self):
        a = RngStream(seed=7, stream_id=0)
        b = RngStream(seed=7, stream_id=1)

        self.assertFalse(np.array_equal(a.standard_normal(10), b.standard_normal(10)))

    @context.example
    def spawned_streams_are_reproducible_and_distinct(self):
        root = RngStream(seed=11)

        np.testing.assert_array_equal(
            root.spawn(2).standard_normal(5),
            RngStream(seed=11).spawn(2).standard_normal(5),
        )
        self.assertFalse(
            np.array_equal(root.spawn(0).standard_normal(5), root.spawn(1).standard_normal(5))
        )

    @context.example
    def spawning_does_not_consume_parent_draws(self):
        a = RngStream(seed=5)
        b = RngStream(seed=5)
        a.spawn(0)

        self.assertEqual(a.uniform(), b.uniform())

    @context.example
    def rejects_seeds_outside_64_bits(self):
        with self.assertRaises(ConfigurationError):
            RngStream(seed=-1)

        with self.assertRaises(ConfigurationError):
            RngStream(seed=2**64)

    @context.example
    def exponential_draws_have_unit_mean(self):
        rng = RngStream(seed=3)
        draws = np.array([rng.exponential() for _ in range(20000)])

        self.assertLess(abs(draws.mean() - 1.0), 4.0 / np.sqrt(20000))
