import logging
import math
from abc import ABC, abstractmethod
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from gmh.exceptions import ConfigurationError, ContractViolation
from gmh.helpers import reject_nan
from gmh.rng import RngStream
from gmh.trace import ChainTrace

logger = logging.getLogger(__name__)

ConditionalSampler = Callable[[np.ndarray, RngStream], np.ndarray]


class TargetDensity(ABC):
    # log π̃(θ): -inf outside the support, never NaN
    # Immutable once built; chains may share one
    dimension: int

    @abstractmethod
    def log_density(self, theta: np.ndarray) -> float:
        ...

    @property
    def has_gradient(self) -> bool:
        return False

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        raise ConfigurationError(f"{type(self).__name__} provides no gradient")

    def conditional_sampler(self, block: Tuple[int, ...]) -> Optional[ConditionalSampler]:
        return None

    def evaluate(self, theta: np.ndarray) -> float:
        return reject_nan(float(self.log_density(theta)), "Target log density")


class FunctionTarget(TargetDensity):
    def __init__(
        self,
        dimension: int,
        log_density: Callable[[np.ndarray], float],
        gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ) -> None:
        if dimension < 1:
            raise ConfigurationError(f"Target dimension must be positive, got {dimension}")

        self.dimension = dimension
        self._log_density = log_density
        self._gradient = gradient

    def log_density(self, theta: np.ndarray) -> float:
        return self._log_density(theta)

    @property
    def has_gradient(self) -> bool:
        return self._gradient is not None

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        if self._gradient is None:
            return super().gradient(theta)

        return np.asarray(self._gradient(theta), dtype=float)


@dataclass
class ChainState:
    position: np.ndarray
    log_density: float
    iteration: int = 0
    # Chain-local adaptive state owned by the kernel
    scratch: Any = None

    def moved(self, position: np.ndarray, log_density: float) -> "ChainState":
        return replace(
            self,
            position=position,
            log_density=log_density,
            iteration=self.iteration + 1,
        )

    def stayed(self) -> "ChainState":
        return replace(self, iteration=self.iteration + 1)


@dataclass
class KernelStep:
    next_state: ChainState
    accepted: bool
    proposals_evaluated: int = 1
    log_alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.proposals_evaluated < 1:
            raise ContractViolation("A kernel step must evaluate at least one proposal")


@dataclass(frozen=True)
class EnsembleSnapshot:
    positions: np.ndarray
    index: int
    others: Tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "others",
            tuple(i for i in range(self.positions.shape[0]) if i != self.index),
        )

    def difference_direction(self, rng: RngStream) -> np.ndarray:
        if len(self.others) < 2:
            raise ConfigurationError(
                "Cross-chain directions need at least two other chains"
            )

        j, k = rng.choice(len(self.others), size=2, replace=False)
        return self.positions[self.others[j]] - self.positions[self.others[k]]


class Kernel(ABC):
    # Consumes cross-chain directions when run inside an ensemble
    needs_ensemble = False
    # Cached log density is the exact target value (false for estimators)
    exact_density = True

    def initial_scratch(
        self,
        target: TargetDensity,
        position: np.ndarray,
        rng: RngStream,
    ) -> Any:
        return None

    def initial_state(
        self,
        target: TargetDensity,
        position: np.ndarray,
        rng: RngStream,
    ) -> ChainState:
        position = np.array(position, dtype=float).reshape(target.dimension)
        log_density = target.evaluate(position)

        if log_density == -math.inf:
            raise ContractViolation("Initial point has zero target density")

        return ChainState(
            position=position,
            log_density=log_density,
            scratch=self.initial_scratch(target, position, rng),
        )

    @abstractmethod
    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        ...

    def __repr__(self) -> str:
        return f"<{type(self).__name__}>"


def log_acceptance(
    log_joint_current: float,
    log_joint_proposed: float,
    log_abs_jacobian: float = 0.0,
) -> float:
    for name, value in (
        ("current log density", log_joint_current),
        ("proposed log density", log_joint_proposed),
        ("log Jacobian", log_abs_jacobian),
    ):
        reject_nan(value, f"Acceptance input {name}")

    if log_joint_current == -math.inf:
        raise ContractViolation("Chain sits at a point of zero density")

    if log_joint_proposed == -math.inf:
        return -math.inf

    return min(0.0, log_joint_proposed - log_joint_current + log_abs_jacobian)


def generalized_accept(
    log_joint_current: float,
    log_joint_proposed: float,
    log_abs_jacobian: float,
    u: float,
) -> bool:
    reject_nan(u, "Acceptance uniform")
    if not 0.0 <= u <= 1.0:
        raise ContractViolation(f"Acceptance uniform must lie in [0, 1], got {u}")

    log_alpha = log_acceptance(log_joint_current, log_joint_proposed, log_abs_jacobian)

    if log_alpha == -math.inf:
        return False

    if u == 0.0:
        return True

    return math.log(u) <= log_alpha


def _record(trace: ChainTrace, row: int, step: KernelStep) -> None:
    trace.samples[row] = step.next_state.position
    trace.accepted[row] = step.accepted
    trace.log_density[row] = step.next_state.log_density
    trace.proposals_evaluated[row] = step.proposals_evaluated


def _check_cache(kernel: Kernel, target: TargetDensity, state: ChainState) -> None:
    if not kernel.exact_density:
        return

    expected = target.evaluate(state.position)
    if not math.isclose(expected, state.log_density, rel_tol=1e-9, abs_tol=1e-9):
        raise ContractViolation(
            f"{kernel!r} cached log density {state.log_density} but target gives {expected}"
        )


def run_chain(
    kernel: Kernel,
    target: TargetDensity,
    initial: np.ndarray,
    iterations: int,
    rng: RngStream,
    check_cache: bool = False,
    on_step: Optional[Callable[[int], None]] = None,
) -> ChainTrace:
    if iterations < 1:
        raise ConfigurationError(f"A chain needs at least one iteration, got {iterations}")

    state = kernel.initial_state(target, initial, rng)
    trace = ChainTrace.allocate(iterations, target.dimension)

    for row in range(iterations):
        step = kernel.step(state, target, rng)
        state = step.next_state
        _record(trace, row, step)

        if check_cache:
            _check_cache(kernel, target, state)

        if on_step is not None:
            on_step(row)

    return trace


def run_ensemble(
    kernel_factory: Callable[[int], Kernel],
    target: TargetDensity,
    initials: Sequence[np.ndarray],
    iterations: int,
    rng: RngStream,
    executor: Optional[Executor] = None,
    check_cache: bool = False,
    on_generation: Optional[Callable[[int], None]] = None,
) -> List[ChainTrace]:
    """Advance chains in lockstep generations.

    Chain i uses substream rng.spawn(i). Direction-consuming kernels only see
    the positions at the end of the previous generation; every generation is
    completed for all chains before the next one starts.
    """
    if iterations < 1:
        raise ConfigurationError(f"A chain needs at least one iteration, got {iterations}")

    chains = len(initials)
    kernels = [kernel_factory(i) for i in range(chains)]

    if any(k.needs_ensemble for k in kernels) and chains < 3:
        raise ConfigurationError(
            f"Cross-chain directions need at least 3 chains, got {chains}"
        )

    rngs = [rng.spawn(i) for i in range(chains)]
    states = [
        kernel.initial_state(target, initial, chain_rng)
        for kernel, initial, chain_rng in zip(kernels, initials, rngs)
    ]
    traces = [ChainTrace.allocate(iterations, target.dimension) for _ in range(chains)]

    for row in range(iterations):
        positions = np.array([state.position for state in states])
        positions.setflags(write=False)

        def advance(i: int) -> KernelStep:
            snapshot = (
                EnsembleSnapshot(positions=positions, index=i)
                if kernels[i].needs_ensemble
                else None
            )
            return kernels[i].step(states[i], target, rngs[i], snapshot)

        if executor is None:
            steps = [advance(i) for i in range(chains)]
        else:
            steps = list(executor.map(advance, range(chains)))

        for i, step in enumerate(steps):
            states[i] = step.next_state
            _record(traces[i], row, step)

            if check_cache:
                _check_cache(kernels[i], target, states[i])

        if on_generation is not None:
            on_generation(row)

    return traces
