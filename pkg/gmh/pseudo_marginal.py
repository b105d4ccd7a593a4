import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from gmh.constants import (
    log_estimate_variance_band,
    minimum_tuning_replicates,
    particle_cap,
)
from gmh.exceptions import ConfigurationError, ContractViolation, TuningError
from gmh.helpers import reject_nan, slice_height
from gmh.kernel import (
    ChainState,
    EnsembleSnapshot,
    Kernel,
    KernelStep,
    TargetDensity,
    generalized_accept,
    log_acceptance,
)
from gmh.linalg import ellipsoid_uniform
from gmh.mappings import EllipseParams, elliptical_map
from gmh.metropolis import MetropolisKernel
from gmh.particle_filter import StateSpaceModel, bootstrap_particle_filter
from gmh.rng import RngStream

logger = logging.getLogger(__name__)


class LikelihoodEstimator(ABC):
    # Expected target evaluations per call
    cost_hint: int = 1

    @abstractmethod
    def estimate(self, theta: np.ndarray, rng: RngStream) -> float:
        # Log of a nonnegative unbiased estimate; -inf for a zero estimate
        ...

    def evaluate(self, theta: np.ndarray, rng: RngStream) -> float:
        return reject_nan(float(self.estimate(theta, rng)), "Likelihood estimate")


class ParticleFilterEstimator(LikelihoodEstimator):
    def __init__(self, model: StateSpaceModel, data: np.ndarray, n_particles: int) -> None:
        self.model = model
        self.data = np.asarray(data, dtype=float)
        self.n_particles = n_particles
        self.cost_hint = n_particles * len(self.data)

    def estimate(self, theta: np.ndarray, rng: RngStream) -> float:
        return bootstrap_particle_filter(self.model, theta, self.data, self.n_particles, rng)

    def __repr__(self) -> str:
        return f"<ParticleFilterEstimator N={self.n_particles}, T={len(self.data)}>"


class ExactEstimator(LikelihoodEstimator):
    def __init__(self, target: TargetDensity) -> None:
        self.target = target

    def estimate(self, theta: np.ndarray, rng: RngStream) -> float:
        return self.target.evaluate(theta)


class PseudoMarginalTarget(TargetDensity):
    def __init__(
        self,
        dimension: int,
        estimator: LikelihoodEstimator,
        log_prior: Optional[Callable[[np.ndarray], float]] = None,
    ) -> None:
        self.dimension = dimension
        self.estimator = estimator
        self.log_prior = log_prior or (lambda theta: 0.0)

    @classmethod
    def for_model(
        cls,
        model: StateSpaceModel,
        data: np.ndarray,
        n_particles: int,
    ) -> "PseudoMarginalTarget":
        return cls(
            dimension=model.parameter_dimension,
            estimator=ParticleFilterEstimator(model, data, n_particles),
            log_prior=model.log_prior,
        )

    def log_density(self, theta: np.ndarray) -> float:
        raise ConfigurationError("A pseudo-marginal target only provides estimates")

    def estimate(self, theta: np.ndarray, rng: RngStream) -> float:
        log_prior = reject_nan(float(self.log_prior(theta)), "Prior log density")

        if log_prior == -math.inf:
            return -math.inf

        return log_prior + self.estimator.evaluate(theta, rng)


@dataclass
class PseudoMarginalState(ChainState):
    # log_density holds the estimate made when θ was accepted; it is never recomputed
    momentum: Optional[np.ndarray] = None

    @property
    def log_estimate(self) -> float:
        return self.log_density


def _pseudo_marginal(target: TargetDensity) -> PseudoMarginalTarget:
    if not isinstance(target, PseudoMarginalTarget):
        raise ConfigurationError(
            f"Pseudo-marginal kernels need a PseudoMarginalTarget, got {type(target).__name__}"
        )

    return target


def _initial_estimate(
    target: TargetDensity,
    position: np.ndarray,
    rng: RngStream,
) -> Tuple[PseudoMarginalTarget, np.ndarray, float]:
    target = _pseudo_marginal(target)
    position = np.array(position, dtype=float).reshape(target.dimension)
    log_estimate = target.estimate(position, rng)

    if log_estimate == -math.inf:
        raise ContractViolation("Initial point has a zero likelihood estimate")

    return target, position, log_estimate


class ParameterProposal(ABC):
    @abstractmethod
    def sample(self, theta: np.ndarray, rng: RngStream) -> np.ndarray:
        ...

    @abstractmethod
    def log_density(self, to: np.ndarray, frm: np.ndarray) -> float:
        ...

    def log_correction(self, theta: np.ndarray, xi: np.ndarray) -> float:
        return self.log_density(theta, xi) - self.log_density(xi, theta)


class LogNormalProposal(ParameterProposal):
    def __init__(self, scale: float = 0.5) -> None:
        if not scale > 0.0:
            raise ConfigurationError(f"Log-normal proposal scale must be positive, got {scale}")

        self.scale = scale

    def sample(self, theta: np.ndarray, rng: RngStream) -> np.ndarray:
        if np.any(theta <= 0.0):
            raise ContractViolation(f"Log-normal proposal needs a positive θ, got {theta}")

        return theta * np.exp(self.scale * rng.standard_normal(theta.shape[0]))

    def log_density(self, to: np.ndarray, frm: np.ndarray) -> float:
        if np.any(to <= 0.0):
            return -math.inf

        log_to = np.log(to)
        return float(
            np.sum(stats.norm.logpdf(log_to, loc=np.log(frm), scale=self.scale) - log_to)
        )


class PseudoMarginalMetropolis(MetropolisKernel):
    exact_density = False

    def __init__(
        self,
        dimension: int,
        covariance: Optional[np.ndarray] = None,
        parameter_proposal: Optional[ParameterProposal] = None,
    ) -> None:
        if covariance is not None and parameter_proposal is not None:
            raise ConfigurationError("Give either a translation covariance or a parameter proposal")

        super().__init__(dimension, covariance=covariance)
        self.parameter_proposal = parameter_proposal

    def initial_state(
        self,
        target: TargetDensity,
        position: np.ndarray,
        rng: RngStream,
    ) -> ChainState:
        _, position, log_estimate = _initial_estimate(target, position, rng)
        return PseudoMarginalState(position=position, log_density=log_estimate)

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        if self.parameter_proposal is None:
            xi = state.position + self.draw_offset(rng)
            log_correction = 0.0
        else:
            xi = np.asarray(self.parameter_proposal.sample(state.position, rng), dtype=float)
            log_correction = self.parameter_proposal.log_correction(state.position, xi)

        log_estimate = _pseudo_marginal(target).estimate(xi, rng)
        u = rng.uniform()

        log_alpha = log_acceptance(state.log_density, log_estimate, log_correction)
        if generalized_accept(state.log_density, log_estimate, log_correction, u):
            return KernelStep(state.moved(xi, log_estimate), True, log_alpha=log_alpha)

        return KernelStep(state.stayed(), False, log_alpha=log_alpha)


class GaussianRProposal:
    def __init__(self, sigma: float = 1.0, zeta: float = 1.0) -> None:
        if not sigma > 0.0 or zeta < 0.0:
            raise ConfigurationError(f"Need σ > 0 and ζ ≥ 0, got σ = {sigma}, ζ = {zeta}")

        self.sigma = sigma
        self.zeta = zeta

    def scale(self, log_relative_height: float) -> float:
        return self.sigma * math.exp(-0.5 * self.zeta * log_relative_height)

    def sample(self, log_relative_height: float, rng: RngStream) -> float:
        return float(rng.normal(0.0, self.scale(log_relative_height)))

    def log_density(self, r: float, log_relative_height: float) -> float:
        return float(stats.norm.logpdf(r, scale=self.scale(log_relative_height)))


class TruncatedGaussianRProposal(GaussianRProposal):
    def bound(self, log_relative_height: float) -> float:
        return self.sigma * math.exp(-self.zeta * log_relative_height)

    def _law(self, log_relative_height: float):
        limit = self.bound(log_relative_height) / self.sigma
        return stats.truncnorm(-limit, limit, scale=self.sigma)

    def sample(self, log_relative_height: float, rng: RngStream) -> float:
        return float(self._law(log_relative_height).rvs(random_state=rng.generator))

    def log_density(self, r: float, log_relative_height: float) -> float:
        return float(self._law(log_relative_height).logpdf(r))


class PseudoMarginalHamiltonianSlice(Kernel):
    """Single-proposal Hamiltonian slice move on φ(θ, v, u) = N(v; 0, Σ⁻¹) π̂(θ, u).

    The integration time r is drawn from a symmetric law whose spread grows
    as the slice deepens. The relative depth is measured against the
    refreshed point, so the reverse move's density enters the test whenever
    the two ends of the trajectory disagree on it.
    """

    exact_density = False

    def __init__(
        self,
        params: EllipseParams,
        r_proposal: Optional[GaussianRProposal] = None,
    ) -> None:
        self.params = params
        self.r_proposal = r_proposal or GaussianRProposal()

    def initial_state(
        self,
        target: TargetDensity,
        position: np.ndarray,
        rng: RngStream,
    ) -> ChainState:
        _, position, log_estimate = _initial_estimate(target, position, rng)
        return PseudoMarginalState(
            position=position,
            log_density=log_estimate,
            momentum=self.params.sample_momentum(rng),
        )

    def step(
        self,
        state: ChainState,
        target: TargetDensity,
        rng: RngStream,
        snapshot: Optional[EnsembleSnapshot] = None,
    ) -> KernelStep:
        if not isinstance(state, PseudoMarginalState) or state.momentum is None:
            raise ContractViolation("Hamiltonian slice state carries no momentum")

        params = self.params
        log_height = slice_height(state.log_density - params.kinetic(state.momentum), rng)
        v = ellipsoid_uniform(params.chol, 2.0 * (state.log_density - log_height), rng)

        log_depth = log_height - (state.log_density - params.kinetic(v))
        r = self.r_proposal.sample(log_depth, rng)

        if r == 0.0:
            return KernelStep(replace(state.stayed(), momentum=v), True)

        xi, w, _ = elliptical_map(state.position, v, r, params)
        log_estimate = _pseudo_marginal(target).estimate(xi, rng)
        log_joint = log_estimate - params.kinetic(w) if log_estimate > -math.inf else -math.inf

        accepted = log_joint >= log_height
        log_alpha = 0.0 if accepted else -math.inf

        if accepted:
            log_reverse = self.r_proposal.log_density(-r, log_height - log_joint)
            log_forward = self.r_proposal.log_density(r, log_depth)

            if log_reverse != log_forward:
                log_alpha = min(0.0, log_reverse - log_forward)
                accepted = generalized_accept(log_forward, log_reverse, 0.0, rng.uniform())

        if accepted:
            return KernelStep(
                replace(state.moved(xi, log_estimate), momentum=w),
                True,
                log_alpha=log_alpha,
            )

        return KernelStep(replace(state.stayed(), momentum=v), False, log_alpha=log_alpha)


@dataclass(frozen=True)
class TuningReport:
    n_particles: int
    variances: Dict[int, float]


def tune_particle_count(
    estimator_factory: Callable[[int], LikelihoodEstimator],
    theta_ref: Sequence[float],
    rng: RngStream,
    replicates: int = minimum_tuning_replicates,
    target_band: Tuple[float, float] = log_estimate_variance_band,
    n_min: int = 2,
    n_max: int = particle_cap,
) -> TuningReport:
    """Smallest N on a doubling ladder with Var[log π̂(θ_ref)] ≤ the band's upper edge.

    A variance already below the band at `n_min` returns `n_min`.
    """
    if replicates < minimum_tuning_replicates:
        raise ConfigurationError(
            f"Need at least {minimum_tuning_replicates} replicates, got {replicates}"
        )

    low, high = target_band
    if not 0.0 <= low < high:
        raise ConfigurationError(f"Invalid variance band {target_band}")

    theta = np.asarray(theta_ref, dtype=float)
    variances: Dict[int, float] = {}
    n = n_min

    while n <= n_max:
        estimator = estimator_factory(n)
        estimates = np.array([estimator.evaluate(theta, rng) for _ in range(replicates)])
        variance = float(np.var(estimates, ddof=1)) if np.all(np.isfinite(estimates)) else math.inf
        variances[n] = variance

        logger.debug("N=%d gives Var[log estimate]=%.4g", n, variance)

        if variance <= high:
            if variance < low:
                logger.debug("Variance %.4g at N=%d is below the band", variance, n)

            return TuningReport(n_particles=n, variances=variances)

        n *= 2

    raise TuningError(
        f"Var[log estimate] still above {high} at the cap of {n_max} particles",
        variances=variances,
    )
