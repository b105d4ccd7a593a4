import logging
import math
from abc import ABC, abstractmethod
from typing import Callable, Optional

import numpy as np
from scipy import stats

from gmh.exceptions import ConfigurationError
from gmh.helpers import reject_nan
from gmh.rng import RngStream

logger = logging.getLogger(__name__)

Summary = Callable[[np.ndarray], np.ndarray]


class StateSpaceModel(ABC):
    parameter_dimension: int

    @abstractmethod
    def initial_sample(self, theta: np.ndarray, n: int, rng: RngStream) -> np.ndarray:
        ...

    @abstractmethod
    def transition_sample(
        self,
        theta: np.ndarray,
        particles: np.ndarray,
        rng: RngStream,
    ) -> np.ndarray:
        ...

    @abstractmethod
    def log_prior(self, theta: np.ndarray) -> float:
        ...

    def observation_log_density(
        self,
        theta: np.ndarray,
        y: float,
        particles: np.ndarray,
    ) -> np.ndarray:
        raise ConfigurationError(f"{type(self).__name__} has no observation density")

    def observation_sample(
        self,
        theta: np.ndarray,
        particles: np.ndarray,
        rng: RngStream,
    ) -> np.ndarray:
        raise ConfigurationError(f"{type(self).__name__} cannot simulate observations")

    def log_weights(
        self,
        theta: np.ndarray,
        y: float,
        particles: np.ndarray,
        rng: RngStream,
    ) -> np.ndarray:
        return self.observation_log_density(theta, y, particles)


def systematic_resample(weights: np.ndarray, rng: RngStream) -> np.ndarray:
    n = len(weights)
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    positions = (rng.uniform() + np.arange(n)) / n
    return np.clip(np.searchsorted(cumulative, positions), 0, n - 1)


def bootstrap_particle_filter(
    model: StateSpaceModel,
    theta: np.ndarray,
    data: np.ndarray,
    n_particles: int,
    rng: RngStream,
) -> float:
    """Log of the bootstrap filter's unbiased likelihood estimate.

    Resamples systematically after every observation except the last.
    Returns -inf when every particle weight vanishes at some step.
    """
    if n_particles < 2:
        raise ConfigurationError(f"A particle filter needs at least 2 particles, got {n_particles}")

    particles = model.initial_sample(theta, n_particles, rng)
    log_likelihood = 0.0

    for t, y in enumerate(data):
        if t > 0:
            particles = model.transition_sample(theta, particles, rng)

        log_w = np.asarray(model.log_weights(theta, y, particles, rng), dtype=float)
        if np.isnan(log_w).any():
            reject_nan(math.nan, f"Particle log weight at t={t}")

        peak = float(np.max(log_w))
        if peak == -math.inf:
            logger.debug("All particle weights vanished at t=%d", t)
            return -math.inf

        w = np.exp(log_w - peak)
        log_likelihood += peak + math.log(float(np.mean(w)))

        if t < len(data) - 1:
            particles = particles[systematic_resample(w / w.sum(), rng)]

    return log_likelihood


def abc_log_observation_density(
    y: np.ndarray,
    simulated: np.ndarray,
    epsilon: float,
    summary: Optional[Summary] = None,
) -> np.ndarray:
    if not epsilon > 0.0:
        raise ConfigurationError(f"ABC bandwidth must be positive, got {epsilon}")

    summary = summary or (lambda x: x)
    discrepancy = np.asarray(summary(np.asarray(simulated, dtype=float))) - np.asarray(
        summary(np.asarray(y, dtype=float))
    )

    log_density = stats.norm.logpdf(discrepancy, scale=epsilon * math.sqrt(2.0))
    if log_density.ndim > 1:
        return log_density.reshape(log_density.shape[0], -1).sum(axis=1)

    return log_density


def abc_bandwidth(data: np.ndarray, summary: Optional[Summary] = None) -> float:
    summary = summary or (lambda x: x)
    return float(np.std(summary(np.asarray(data, dtype=float)), ddof=1))


class AbcObservation(StateSpaceModel):
    def __init__(
        self,
        model: StateSpaceModel,
        data: np.ndarray,
        epsilon: Optional[float] = None,
        summary: Optional[Summary] = None,
    ) -> None:
        self.model = model
        self.summary = summary
        self.epsilon = abc_bandwidth(data, summary) if epsilon is None else epsilon
        self.parameter_dimension = model.parameter_dimension

        if not self.epsilon > 0.0:
            raise ConfigurationError(f"ABC bandwidth must be positive, got {self.epsilon}")

    def initial_sample(self, theta: np.ndarray, n: int, rng: RngStream) -> np.ndarray:
        return self.model.initial_sample(theta, n, rng)

    def transition_sample(
        self,
        theta: np.ndarray,
        particles: np.ndarray,
        rng: RngStream,
    ) -> np.ndarray:
        return self.model.transition_sample(theta, particles, rng)

    def log_prior(self, theta: np.ndarray) -> float:
        return self.model.log_prior(theta)

    def log_weights(
        self,
        theta: np.ndarray,
        y: float,
        particles: np.ndarray,
        rng: RngStream,
    ) -> np.ndarray:
        simulated = self.model.observation_sample(theta, particles, rng)
        return abc_log_observation_density(y, simulated, self.epsilon, self.summary)
