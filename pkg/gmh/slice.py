import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterator, Optional, Tuple

import numpy as np

from gmh.constants import recursive_proposal_cap, shrink_cap, stepping_out_cap
from gmh.exceptions import ConfigurationError, ContractViolation
from gmh.helpers import slice_height
from gmh.kernel import ChainState, EnsembleSnapshot, Kernel, KernelStep, TargetDensity
from gmh.linalg import cholesky_spd, ellipsoid_uniform
from gmh.mappings import EllipseParams, elliptical_map
from gmh.metropolis import MetropolisKernel
from gmh.rng import RngStream

logger = logging.getLogger(__name__)

# r -> (log slice value, payload); payload is whatever the caller needs back
LineDensity = Callable[[float], Tuple[float, Any]]


@dataclass
class SliceInterval:
    a: float
    b: float
    expansion_count: int = 0
    shrink_count: int = 0

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ContractViolation(f"Degenerate slice bracket [{self.a}, {self.b}]")

    def shrink_to(self, r: float) -> None:
        # r = 0 is the current point and always stays inside
        if r >= 0.0:
            self.b = r
        else:
            self.a = r

        self.shrink_count += 1
        if self.shrink_count > shrink_cap:
            raise ContractViolation(
                f"Slice shrinking exceeded {shrink_cap} rejections on [{self.a}, {self.b}]"
            )


class _Counted:
    def __init__(self, density: LineDensity) -> None:
        self.density = density
        self.calls = 0

    def __call__(self, r: float) -> Tuple[float, Any]:
        self.calls += 1
        return self.density(r)


def step_out(
    density: LineDensity,
    log_height: float,
    rng: RngStream,
) -> SliceInterval:
    u = rng.uniform()
    interval = SliceInterval(a=u - 1.0, b=u)

    for side in ("a", "b"):
        steps = 0
        while density(getattr(interval, side))[0] >= log_height:
            if steps == stepping_out_cap:
                logger.warning(
                    "Stepping out stopped after %d steps on side %s", stepping_out_cap, side
                )
                break

            setattr(interval, side, getattr(interval, side) + (-1.0 if side == "a" else 1.0))
            interval.expansion_count += 1
            steps += 1

    return interval


def shrink(
    density: LineDensity,
    log_height: float,
    interval: SliceInterval,
    rng: RngStream,
) -> Tuple[float, float, Any]:
    while True:
        r = rng.uniform(interval.a, interval.b)
        log_value, payload = density(r)

        if log_value >= log_height:
            return r, log_value, payload

        interval.shrink_to(r)


def slice_along_line(
    target: TargetDensity,
    state: ChainState,
    direction: np.ndarray,
    rng: RngStream,
) -> KernelStep:
    if not np.any(direction):
        raise ConfigurationError("Slice direction must be nonzero")

    log_height = slice_height(state.log_density, rng)
    position = state.position

    def along(r: float) -> Tuple[float, np.ndarray]:
        xi = position + r * direction
        return target.evaluate(xi), xi

    density = _Counted(along)
    interval = step_out(density, log_height, rng)
    _, log_value, xi = shrink(density, log_height, interval, rng)

    return KernelStep(
        next_state=state.moved(xi, log_value),
        accepted=True,
        proposals_evaluated=density.calls,
    )


class UnivariateSlice(Kernel):
    def __init__(
        self,
        width: float = 1.0,
        coordinate: Optional[int] = None,
        direction: Optional[np.ndarray] = None,
    ) -> None:
        if not width > 0.0:
            raise ConfigurationError(f"Slice width must be positive, got {width}")

        if coordinate is not None and direction is not None:
            raise ConfigurationError("Give either a coordinate or a direction, not both")

        self.width = width
        self.coordinate = coordinate
        self.direction = None if direction is None else np.asarray(direction, dtype=float)

    def _directions(self, dimension: int):
        if self.direction is not None:
            yield self.width * self.direction
            return

        coordinates = range(dimension) if self.coordinate is None else [self.coordinate]
        for i in coordinates:
            e = np.zeros(dimension)
            e[i] = self.width
            yield e

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        evaluations = 0
        current = state

        for direction in self._directions(target.dimension):
            step = slice_along_line(target, current, direction, rng)
            evaluations += step.proposals_evaluated
            # One chain iteration, however many coordinates were visited
            current = replace(step.next_state, iteration=state.iteration)

        return KernelStep(
            next_state=replace(current, iteration=state.iteration + 1),
            accepted=True,
            proposals_evaluated=evaluations,
        )


class DirectionalSlice(Kernel):
    needs_ensemble = True

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        if snapshot is None:
            direction = rng.standard_normal(target.dimension)
        else:
            direction = snapshot.difference_direction(rng)

        if not np.any(direction):
            raise ConfigurationError("Degenerate zero direction for directional slice")

        return slice_along_line(target, state, direction, rng)


class RecursiveGaussianSlice(Kernel):
    def __init__(self, covariance: np.ndarray, scale: float = 1.0) -> None:
        if not scale > 0.0:
            raise ConfigurationError(f"Proposal scale must be positive, got {scale}")

        self.scale = scale
        self.lower = cholesky_spd(scale * np.atleast_2d(covariance)).lower

    def offsets(self, rng: RngStream) -> Iterator[np.ndarray]:
        # V_n has covariance 2sΣ/n
        dimension = self.lower.shape[0]
        total = np.zeros(dimension)

        for n in range(1, recursive_proposal_cap + 1):
            total += self.lower @ rng.standard_normal(dimension)
            yield total / n + self.lower @ rng.standard_normal(dimension) / math.sqrt(n)

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        log_height = slice_height(state.log_density, rng)

        for n, v in enumerate(self.offsets(rng), start=1):
            xi = state.position + v
            log_proposed = target.evaluate(xi)
            if log_proposed >= log_height:
                return KernelStep(
                    next_state=state.moved(xi, log_proposed),
                    accepted=True,
                    proposals_evaluated=n,
                )

        raise ContractViolation(
            f"Recursive Gaussian slice found no point in the slice after {recursive_proposal_cap} proposals"
        )


class SingleProposalSlice(MetropolisKernel):
    """Slice sampling with a single translation proposal and no recursion.

    Draws V and then u exactly as the Metropolis kernel does, sets the
    height to u·π̃(θ), and moves iff the proposal lies in the slice. This is
    the Metropolis kernel written as a slice sampler, so `accepted` here
    reports whether the proposal was taken.
    """

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        xi = state.position + self.draw_offset(rng)
        log_proposed = target.evaluate(xi)
        u = rng.uniform()

        # π̃(ξ) ≥ u π̃(θ), compared in ratio form
        in_slice = log_proposed > -math.inf and (
            u == 0.0 or log_proposed - state.log_density >= math.log(u)
        )

        if in_slice:
            return KernelStep(state.moved(xi, log_proposed), True)

        return KernelStep(state.stayed(), False)


def elliptical_bracket(rng: RngStream) -> SliceInterval:
    u = rng.uniform(0.0, 2.0 * math.pi)
    return SliceInterval(a=u - 2.0 * math.pi, b=u)


class EllipticalSlice(Kernel):
    def __init__(
        self,
        prior: EllipseParams,
        log_likelihood: Optional[Callable[[np.ndarray], float]] = None,
    ) -> None:
        self.prior = prior
        self.log_likelihood = log_likelihood

    def _likelihood(self, target: TargetDensity, theta: np.ndarray) -> Tuple[float, float]:
        if self.log_likelihood is not None:
            return float(self.log_likelihood(theta)), math.nan

        log_density = target.evaluate(theta)
        return log_density - self.prior.log_prior(theta), log_density

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        v = self.prior.sample_momentum(rng)
        log_height = slice_height(self._likelihood(target, state.position)[0], rng)

        def along(r: float) -> Tuple[float, Tuple[np.ndarray, float]]:
            xi, _, _ = elliptical_map(state.position, v, r, self.prior)
            log_likelihood, log_density = self._likelihood(target, xi)
            return log_likelihood, (xi, log_density)

        density = _Counted(along)
        _, _, (xi, log_density) = shrink(density, log_height, elliptical_bracket(rng), rng)

        if math.isnan(log_density):
            log_density = target.evaluate(xi)

        return KernelStep(
            next_state=state.moved(xi, log_density),
            accepted=True,
            proposals_evaluated=density.calls,
        )


class HamiltonianSlice(Kernel):
    def __init__(self, params: EllipseParams) -> None:
        self.params = params

    def initial_scratch(
        self,
        target: TargetDensity,
        position: np.ndarray,
        rng: RngStream,
    ) -> np.ndarray:
        return self.params.sample_momentum(rng)

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        params = self.params
        log_height = slice_height(state.log_density - params.kinetic(state.scratch), rng)

        # {v : log π̃(θ) - ½ vᵀΣv ≥ log h}
        v = ellipsoid_uniform(params.chol, 2.0 * (state.log_density - log_height), rng)

        def along(r: float) -> Tuple[float, Tuple[np.ndarray, np.ndarray, float]]:
            xi, w, _ = elliptical_map(state.position, v, r, params)
            log_density = target.evaluate(xi)
            return log_density - params.kinetic(w), (xi, w, log_density)

        density = _Counted(along)
        _, _, (xi, w, log_density) = shrink(density, log_height, elliptical_bracket(rng), rng)

        return KernelStep(
            next_state=replace(state.moved(xi, log_density), scratch=w),
            accepted=True,
            proposals_evaluated=density.calls,
        )
