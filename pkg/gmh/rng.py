from typing import Optional, Tuple, Union

import numpy as np

from gmh.exceptions import ConfigurationError


class RngStream:
    def __init__(
        self,
        seed: int,
        stream_id: int = 0,
        spawn_key: Tuple[int, ...] = (),
    ) -> None:
        if not 0 <= seed < 2**64:
            raise ConfigurationError(f"Seed must be a 64-bit unsigned integer, got {seed}")

        self.seed = seed
        self.stream_id = stream_id
        self.spawn_key = spawn_key + (stream_id,)

        self.generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(seed, spawn_key=self.spawn_key))
        )

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(
            seed=self.seed,
            stream_id=stream_id,
            spawn_key=self.spawn_key,
        )

    def uniform(
        self,
        low: float = 0.0,
        high: float = 1.0,
        size: Optional[Union[int, Tuple[int, ...]]] = None,
    ):
        return self.generator.uniform(low, high, size)

    def standard_normal(self, size: Optional[Union[int, Tuple[int, ...]]] = None):
        return self.generator.standard_normal(size)

    def normal(
        self,
        loc: float = 0.0,
        scale: float = 1.0,
        size: Optional[Union[int, Tuple[int, ...]]] = None,
    ):
        return self.generator.normal(loc, scale, size)

    def exponential(self) -> float:
        return float(self.generator.standard_exponential())

    def integers(self, low: int, high: int, size: Optional[int] = None):
        return self.generator.integers(low, high, size)

    def choice(self, options: int, size: int, replace: bool = True):
        return self.generator.choice(options, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"<RngStream seed={self.seed}, stream_id={self.stream_id}, spawn_key={self.spawn_key}>"
