import logging
from abc import abstractmethod
from dataclasses import replace
from typing import Optional, Sequence, Tuple

import numpy as np

from gmh.exceptions import ConfigurationError, ContractViolation
from gmh.helpers import slice_height
from gmh.kernel import ChainState, EnsembleSnapshot, Kernel, KernelStep, TargetDensity
from gmh.mappings import gibbs_swap_map
from gmh.rng import RngStream
from gmh.slice import shrink, step_out

logger = logging.getLogger(__name__)


class ConditionalTarget(TargetDensity):
    def __init__(self, target: TargetDensity, block: Sequence[int], anchor: np.ndarray) -> None:
        self.target = target
        self.block = np.asarray(list(block), dtype=int)
        self.anchor = anchor.copy()
        self.dimension = len(self.block)

    def embed(self, x: np.ndarray) -> np.ndarray:
        theta = self.anchor.copy()
        theta[self.block] = x
        return theta

    def log_density(self, x: np.ndarray) -> float:
        return self.target.log_density(self.embed(x))

    @property
    def has_gradient(self) -> bool:
        return self.target.has_gradient

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.target.gradient(self.embed(x))[self.block]


class MHWithinGibbs(Kernel):
    def __init__(
        self,
        block: Sequence[int],
        inner: Optional[Kernel] = None,
        exact: bool = True,
    ) -> None:
        self.block = tuple(int(i) for i in block)
        self.inner = inner
        self.exact = exact

        if not self.block:
            raise ConfigurationError("Empty Gibbs block")

        if inner is not None and inner.needs_ensemble:
            raise ConfigurationError("Ensemble kernels cannot run inside a Gibbs block")

    def _check_block(self, target: TargetDensity) -> None:
        if min(self.block) < 0 or max(self.block) >= target.dimension:
            raise ConfigurationError(
                f"Block {self.block} out of range for dimension {target.dimension}"
            )

    def initial_scratch(
        self,
        target: TargetDensity,
        position: np.ndarray,
        rng: RngStream,
    ):
        self._check_block(target)

        if self.inner is None:
            if target.conditional_sampler(self.block) is None:
                raise ConfigurationError(
                    f"Block {self.block} has no exact sampler and no inner kernel"
                )
            return None

        conditional = ConditionalTarget(target, self.block, position)
        return self.inner.initial_scratch(conditional, position[list(self.block)], rng)

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        sampler = target.conditional_sampler(self.block) if self.exact else None

        if sampler is not None:
            xi, _ = gibbs_swap_map(state.position, sampler(state.position, rng), self.block)
            return KernelStep(state.moved(xi, target.evaluate(xi)), True)

        if self.inner is None:
            raise ConfigurationError(f"Block {self.block} has no exact sampler and no inner kernel")

        conditional = ConditionalTarget(target, self.block, state.position)
        inner_state = ChainState(
            position=state.position[list(self.block)],
            log_density=state.log_density,
            iteration=state.iteration,
            scratch=state.scratch,
        )
        step = self.inner.step(inner_state, conditional, rng)
        inner_next = step.next_state

        return replace(
            step,
            next_state=ChainState(
                position=conditional.embed(inner_next.position),
                log_density=inner_next.log_density,
                iteration=state.iteration + 1,
                scratch=inner_next.scratch,
            ),
        )

    def __repr__(self) -> str:
        return f"<MHWithinGibbs block={self.block}, inner={self.inner!r}>"


class GibbsSweep(Kernel):
    def __init__(self, kernels: Sequence[Kernel]) -> None:
        if not kernels:
            raise ConfigurationError("A Gibbs sweep needs at least one kernel")

        self.kernels = tuple(kernels)
        self.needs_ensemble = any(k.needs_ensemble for k in self.kernels)

    def initial_scratch(
        self,
        target: TargetDensity,
        position: np.ndarray,
        rng: RngStream,
    ) -> Tuple:
        return tuple(k.initial_scratch(target, position, rng) for k in self.kernels)

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        scratches = list(state.scratch)
        current = state
        accepted = True
        evaluations = 0
        log_alpha = 0.0

        for i, kernel in enumerate(self.kernels):
            step = kernel.step(replace(current, scratch=scratches[i]), target, rng, snapshot)
            scratches[i] = step.next_state.scratch
            current = replace(step.next_state, iteration=state.iteration)

            accepted = accepted and step.accepted
            evaluations += step.proposals_evaluated
            log_alpha += step.log_alpha

        return KernelStep(
            next_state=replace(current, iteration=state.iteration + 1, scratch=tuple(scratches)),
            accepted=accepted,
            proposals_evaluated=evaluations,
            log_alpha=log_alpha,
        )


class FactoredTarget(TargetDensity):
    @abstractmethod
    def factor_log_values(self, theta: np.ndarray) -> np.ndarray:
        ...

    def exact_interval(
        self,
        theta: np.ndarray,
        coordinate: int,
        log_heights: np.ndarray,
    ) -> Optional[Tuple[float, float]]:
        return None

    def log_density(self, theta: np.ndarray) -> float:
        return float(np.sum(self.factor_log_values(theta)))


class SingleFactor(FactoredTarget):
    def __init__(self, target: TargetDensity) -> None:
        self.target = target
        self.dimension = target.dimension

    def factor_log_values(self, theta: np.ndarray) -> np.ndarray:
        return np.array([self.target.log_density(theta)])


class AuxiliaryGibbs(Kernel):
    def __init__(self, width: float = 1.0, coordinates: Optional[Sequence[int]] = None) -> None:
        if not width > 0.0:
            raise ConfigurationError(f"Slice width must be positive, got {width}")

        self.width = width
        self.coordinates = None if coordinates is None else tuple(coordinates)

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        if not isinstance(target, FactoredTarget):
            target = SingleFactor(target)

        log_values = target.factor_log_values(state.position)
        log_heights = np.array([slice_height(value, rng) for value in log_values])

        theta = state.position.copy()
        evaluations = 0

        coordinates = range(target.dimension) if self.coordinates is None else self.coordinates
        for i in coordinates:
            interval = target.exact_interval(theta, i, log_heights)

            if interval is not None:
                lower, upper = interval
                if not lower <= theta[i] <= upper:
                    raise ContractViolation(
                        f"Exact slice interval [{lower}, {upper}] excludes the current coordinate {i}"
                    )
                theta[i] = rng.uniform(lower, upper)
                continue

            theta[i], calls = self._slice_coordinate(target, theta, i, log_heights, rng)
            evaluations += calls

        return KernelStep(
            next_state=state.moved(theta, target.evaluate(theta)),
            accepted=True,
            proposals_evaluated=max(evaluations, 1),
        )

    def _slice_coordinate(
        self,
        target: FactoredTarget,
        theta: np.ndarray,
        i: int,
        log_heights: np.ndarray,
        rng: RngStream,
    ) -> Tuple[float, int]:
        origin = theta[i]
        calls = 0

        def along(r: float) -> Tuple[float, float]:
            nonlocal calls
            calls += 1

            candidate = theta.copy()
            candidate[i] = origin + r * self.width
            # Every factor must clear its own height; the margin is ≥ 0 inside
            return float(np.min(target.factor_log_values(candidate) - log_heights)), candidate[i]

        interval = step_out(along, 0.0, rng)
        _, _, value = shrink(along, 0.0, interval, rng)
        return value, calls
