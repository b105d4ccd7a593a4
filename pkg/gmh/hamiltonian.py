import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from gmh.constants import hmc_target_acceptance
from gmh.exceptions import ConfigurationError, TrajectoryDiverged
from gmh.helpers import robbins_monro_gain
from gmh.kernel import (
    ChainState,
    EnsembleSnapshot,
    Kernel,
    KernelStep,
    TargetDensity,
    generalized_accept,
    log_acceptance,
)
from gmh.mappings import EllipseParams, MassMatrix, leapfrog_map
from gmh.rng import RngStream

logger = logging.getLogger(__name__)


@dataclass
class HamiltonianState:
    log_step_size: float
    mass: MassMatrix

    @property
    def step_size(self) -> float:
        return math.exp(self.log_step_size)


class HamiltonianMonteCarlo(Kernel):
    def __init__(
        self,
        step_size: float,
        n_steps: int = 1,
        mass_matrix: Optional[np.ndarray] = None,
        adapt_until: Optional[int] = None,
        target_rate: float = hmc_target_acceptance,
    ) -> None:
        if not step_size > 0.0 or n_steps < 1:
            raise ConfigurationError(
                f"HMC needs ε > 0 and L ≥ 1, got ε = {step_size}, L = {n_steps}"
            )

        self.step_size = step_size
        self.n_steps = n_steps
        self.mass_matrix = mass_matrix
        self.adapt_until = adapt_until
        self.target_rate = target_rate

    def initial_scratch(
        self,
        target: TargetDensity,
        position: np.ndarray,
        rng: RngStream,
    ) -> HamiltonianState:
        if not target.has_gradient:
            raise ConfigurationError(f"{self!r} needs a target with a gradient")

        return HamiltonianState(
            log_step_size=math.log(self.step_size),
            mass=MassMatrix(self.mass_matrix, dimension=target.dimension),
        )

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        hmc: HamiltonianState = state.scratch
        v = hmc.mass.sample(rng)

        try:
            xi, w = leapfrog_map(
                state.position, v, hmc.step_size, self.n_steps, target, hmc.mass
            )
            log_proposed = target.evaluate(xi)
        except TrajectoryDiverged as e:
            logger.debug("Rejecting diverged trajectory: %s", e)
            xi, w, log_proposed = state.position, v, -math.inf

        log_current_joint = state.log_density - hmc.mass.kinetic(v)
        log_proposed_joint = (
            log_proposed - hmc.mass.kinetic(w) if log_proposed > -math.inf else -math.inf
        )

        log_alpha = log_acceptance(log_current_joint, log_proposed_joint)
        accepted = generalized_accept(log_current_joint, log_proposed_joint, 0.0, rng.uniform())

        if self.adapt_until is not None and state.iteration < self.adapt_until:
            k = state.iteration + 1
            hmc = replace(
                hmc,
                log_step_size=hmc.log_step_size
                + robbins_monro_gain(k) * (math.exp(log_alpha) - self.target_rate),
            )

        next_state = state.moved(xi, log_proposed) if accepted else state.stayed()
        return KernelStep(
            next_state=replace(next_state, scratch=hmc),
            accepted=accepted,
            proposals_evaluated=self.n_steps,
            log_alpha=log_alpha,
        )

    def __repr__(self) -> str:
        return f"<HamiltonianMonteCarlo ε={self.step_size}, L={self.n_steps}>"


def mala(
    step_size: float,
    mass_matrix: Optional[np.ndarray] = None,
    adapt_until: Optional[int] = None,
) -> HamiltonianMonteCarlo:
    return HamiltonianMonteCarlo(
        step_size=step_size,
        n_steps=1,
        mass_matrix=mass_matrix,
        adapt_until=adapt_until,
    )


def langevin_proposal_mean(
    theta: np.ndarray,
    step_size: float,
    target: TargetDensity,
    params: EllipseParams,
) -> np.ndarray:
    return theta + 0.5 * step_size**2 * params.sigma @ target.gradient(theta)
