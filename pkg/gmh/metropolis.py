import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np

from gmh.constants import (
    covariance_regularization,
    covariance_warmup,
    optimal_scale_numerator,
    recommended_acceptance_band,
)
from gmh.exceptions import ConfigurationError
from gmh.helpers import robbins_monro_gain, slice_height
from gmh.kernel import (
    ChainState,
    EnsembleSnapshot,
    Kernel,
    KernelStep,
    TargetDensity,
    generalized_accept,
    log_acceptance,
)
from gmh.linalg import cholesky_spd, unit_ball_uniform
from gmh.mappings import translation_map
from gmh.rng import RngStream

logger = logging.getLogger(__name__)

SymmetricProposal = Callable[[RngStream, int], np.ndarray]


class MetropolisKernel(Kernel):
    def __init__(
        self,
        dimension: int,
        covariance: Optional[np.ndarray] = None,
        proposal: Optional[SymmetricProposal] = None,
    ) -> None:
        if covariance is not None and proposal is not None:
            raise ConfigurationError("Give either a proposal covariance or a proposal sampler")

        self.dimension = dimension
        self.proposal = proposal
        self.lower = cholesky_spd(
            np.eye(dimension) if covariance is None else covariance
        ).lower

    def draw_offset(self, rng: RngStream) -> np.ndarray:
        if self.proposal is not None:
            return np.asarray(self.proposal(rng, self.dimension), dtype=float)

        return self.lower @ rng.standard_normal(self.dimension)

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        xi, _ = translation_map(state.position, self.draw_offset(rng))
        log_proposed = target.evaluate(xi)
        u = rng.uniform()

        log_alpha = log_acceptance(state.log_density, log_proposed)
        if generalized_accept(state.log_density, log_proposed, 0.0, u):
            return KernelStep(state.moved(xi, log_proposed), True, log_alpha=log_alpha)

        return KernelStep(state.stayed(), False, log_alpha=log_alpha)


@dataclass
class AdaptiveMetropolisState:
    running_mean: np.ndarray
    running_covariance: np.ndarray
    log_scale: float
    target_rate: float
    sample_count: int

    @classmethod
    def start(cls, position: np.ndarray, target_rate: float) -> "AdaptiveMetropolisState":
        dimension = position.shape[0]
        return cls(
            running_mean=position.copy(),
            running_covariance=np.zeros((dimension, dimension)),
            log_scale=math.log(optimal_scale_numerator / dimension),
            target_rate=target_rate,
            sample_count=1,
        )

    def absorb(self, position: np.ndarray) -> "AdaptiveMetropolisState":
        k = self.sample_count + 1
        delta = position - self.running_mean

        return replace(
            self,
            running_mean=self.running_mean + delta / k,
            running_covariance=(k - 1) / k * self.running_covariance
            + (k - 1) / k**2 * np.outer(delta, delta),
            sample_count=k,
        )

    def adapt_scale(self, k: int, alpha: float) -> "AdaptiveMetropolisState":
        return replace(
            self,
            log_scale=self.log_scale + robbins_monro_gain(k) * (alpha - self.target_rate),
        )

    def proposal_covariance(self) -> np.ndarray:
        dimension = self.running_mean.shape[0]

        if self.sample_count < covariance_warmup:
            covariance = np.eye(dimension)
        else:
            covariance = self.running_covariance + covariance_regularization * float(
                np.trace(self.running_covariance)
            ) / dimension * np.eye(dimension)

        return math.exp(self.log_scale) * covariance


class AdaptiveMetropolis(Kernel):
    def __init__(
        self,
        target_rate: float = 0.44,
        adapt_until: Optional[int] = None,
        refresh_proposal: bool = False,
    ) -> None:
        if not 0.0 < target_rate < 1.0:
            raise ConfigurationError(f"Target acceptance must lie in (0, 1), got {target_rate}")

        low, high = recommended_acceptance_band
        if not low <= target_rate <= high:
            logger.warning(
                "Target acceptance %.3f outside the recommended band [%.2f, %.2f]",
                target_rate,
                low,
                high,
            )

        self.target_rate = target_rate
        self.adapt_until = adapt_until
        self.refresh_proposal = refresh_proposal

    def initial_scratch(
        self,
        target: TargetDensity,
        position: np.ndarray,
        rng: RngStream,
    ) -> AdaptiveMetropolisState:
        return AdaptiveMetropolisState.start(position, self.target_rate)

    def _propose(
        self,
        state: ChainState,
        target: TargetDensity,
        lower: np.ndarray,
        rng: RngStream,
    ) -> Tuple[np.ndarray, float, bool, float]:
        z = rng.standard_normal(lower.shape[0])

        if not self.refresh_proposal:
            xi, _ = translation_map(state.position, lower @ z)
            log_proposed = target.evaluate(xi)
            log_alpha = log_acceptance(state.log_density, log_proposed)
            accepted = generalized_accept(state.log_density, log_proposed, 0.0, rng.uniform())
            return xi, log_proposed, accepted, log_alpha

        # V = Lz, so ½ Vᵀ(sΣ)⁻¹V = ½|z|² and the slice on V is a ball
        log_height = slice_height(state.log_density - 0.5 * float(z @ z), rng)
        radius = 2.0 * (state.log_density - log_height)

        y = unit_ball_uniform(lower.shape[0], rng) * math.sqrt(radius)
        xi, _ = translation_map(state.position, lower @ y)
        log_proposed = target.evaluate(xi)

        log_alpha = log_acceptance(state.log_density, log_proposed)
        accepted = log_proposed > -math.inf and log_proposed - 0.5 * float(y @ y) >= log_height
        return xi, log_proposed, accepted, log_alpha

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        am: AdaptiveMetropolisState = state.scratch
        lower = cholesky_spd(am.proposal_covariance()).lower

        xi, log_proposed, accepted, log_alpha = self._propose(state, target, lower, rng)
        next_state = state.moved(xi, log_proposed) if accepted else state.stayed()

        if self.adapt_until is None or state.iteration < self.adapt_until:
            alpha = float(accepted) if self.refresh_proposal else math.exp(log_alpha)
            am = am.absorb(next_state.position).adapt_scale(next_state.iteration, alpha)

        return KernelStep(replace(next_state, scratch=am), accepted, log_alpha=log_alpha)

    def __repr__(self) -> str:
        return (
            f"<AdaptiveMetropolis target_rate={self.target_rate}, "
            f"refresh_proposal={self.refresh_proposal}>"
        )
