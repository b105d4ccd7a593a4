import logging
import math
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg, optimize, special, stats

from gmh.constants import (
    reference_length,
    reference_log_variance,
    reference_seed,
    square_root_tolerance,
)
from gmh.exceptions import ConfigurationError, ContractViolation
from gmh.gibbs import FactoredTarget
from gmh.kernel import ConditionalSampler, TargetDensity
from gmh.linalg import cholesky_spd, mvn_sample
from gmh.particle_filter import StateSpaceModel
from gmh.rng import RngStream

logger = logging.getLogger(__name__)

reference_dataset_path = Path(__file__).parent / "data" / "toy_reference.csv"


class GaussianTarget(TargetDensity):
    def __init__(self, mean: Sequence[float], covariance: np.ndarray) -> None:
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
        self.factor = cholesky_spd(self.covariance)
        self.dimension = self.mean.shape[0]

        if self.factor.dimension != self.dimension:
            raise ConfigurationError(
                f"Mean has {self.dimension} entries but covariance is {self.factor.dimension}-dimensional"
            )

        self._log_normalizer = 0.5 * (
            self.dimension * math.log(2.0 * math.pi) + self.factor.log_determinant()
        )

    def log_density(self, theta: np.ndarray) -> float:
        z = linalg.solve_triangular(self.factor.lower, theta - self.mean, lower=True)
        return -0.5 * float(z @ z) - self._log_normalizer

    @property
    def has_gradient(self) -> bool:
        return True

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return -self.factor.solve(theta - self.mean)

    def sample(self, rng: RngStream) -> np.ndarray:
        return mvn_sample(self.mean, self.factor.lower, rng)

    def conditional_sampler(self, block: Tuple[int, ...]) -> Optional[ConditionalSampler]:
        inside = np.asarray(block, dtype=int)
        outside = np.setdiff1d(np.arange(self.dimension), inside)

        if outside.size == 0:
            return lambda theta, rng: self.sample(rng)[inside]

        # Σ_d,-d Σ_-d⁻¹ and the Schur complement
        cross = self.covariance[np.ix_(inside, outside)]
        regression = np.linalg.solve(self.covariance[np.ix_(outside, outside)], cross.T).T
        lower = cholesky_spd(
            self.covariance[np.ix_(inside, inside)] - regression @ cross.T
        ).lower

        def sampler(theta: np.ndarray, rng: RngStream) -> np.ndarray:
            mean = self.mean[inside] + regression @ (theta[outside] - self.mean[outside])
            return mvn_sample(mean, lower, rng)

        return sampler

    def __repr__(self) -> str:
        return f"<GaussianTarget dimension={self.dimension}>"


def _log1p_exp(upsilon: float) -> float:
    return float(np.logaddexp(0.0, upsilon))


class ToyScalarTarget(TargetDensity):
    dimension = 1

    def __init__(self, data: Sequence[float]) -> None:
        self.data = np.asarray(data, dtype=float)
        self.sum_of_squares = float(self.data @ self.data)

    def log_density(self, theta: np.ndarray) -> float:
        upsilon = float(theta[0])
        return (
            float(stats.norm.logpdf(upsilon))
            - 0.5 * len(self.data) * _log1p_exp(upsilon)
            - 0.5 * self.sum_of_squares * special.expit(-upsilon)
        )

    @property
    def has_gradient(self) -> bool:
        return True

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        upsilon = float(theta[0])
        p = special.expit(upsilon)
        return np.array(
            [-upsilon - 0.5 * len(self.data) * p + 0.5 * self.sum_of_squares * p * (1.0 - p)]
        )

    def posterior_mode(self, bracket: Tuple[float, float] = (-2.0, 2.0)) -> float:
        result = optimize.minimize_scalar(
            lambda u: -self.log_density(np.array([u])),
            bracket=bracket,
            method="golden",
            tol=1e-10,
        )
        return float(result.x)


class ToyJointTarget(FactoredTarget):
    # Factors [ψ(υ), l_1, ..., l_T] with l_t = exp(-x²/2 - (y-x)²/2e^υ) / √e^υ
    def __init__(self, data: Sequence[float]) -> None:
        self.data = np.asarray(data, dtype=float)
        self.dimension = len(self.data) + 1

    def factor_log_values(self, theta: np.ndarray) -> np.ndarray:
        upsilon, x = float(theta[0]), theta[1:]
        return np.concatenate(
            (
                [stats.norm.logpdf(upsilon)],
                -0.5 * x**2 - 0.5 * (self.data - x) ** 2 * math.exp(-upsilon) - 0.5 * upsilon,
            )
        )

    @property
    def has_gradient(self) -> bool:
        return True

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        upsilon, x = float(theta[0]), theta[1:]
        residual = self.data - x
        d_upsilon = (
            -upsilon
            - 0.5 * len(self.data)
            + 0.5 * math.exp(-upsilon) * float(residual @ residual)
        )
        return np.concatenate(([d_upsilon], -x + residual * math.exp(-upsilon)))

    @staticmethod
    def conditional_parameters(upsilon: float, y: Union[float, np.ndarray]):
        # (μ_t, σ, log s_t) with l_t = (s_t / σ) exp(-(x - μ_t)² / 2σ²)
        variance = special.expit(upsilon)
        mean = y * special.expit(-upsilon)
        log_s = -0.5 * np.square(y) * special.expit(-upsilon) - 0.5 * _log1p_exp(upsilon)
        return mean, math.sqrt(variance), log_s

    def conditional_sampler(self, block: Tuple[int, ...]) -> Optional[ConditionalSampler]:
        index = np.asarray(block, dtype=int)
        if index.min() < 1:
            return None

        observations = self.data[index - 1]

        def sampler(theta: np.ndarray, rng: RngStream) -> np.ndarray:
            mean, sd, _ = self.conditional_parameters(float(theta[0]), observations)
            return mean + sd * rng.standard_normal(len(index))

        return sampler

    def exact_interval(
        self,
        theta: np.ndarray,
        coordinate: int,
        log_heights: np.ndarray,
    ) -> Optional[Tuple[float, float]]:
        if coordinate == 0:
            return None

        return conditional_interval(
            log_heights[coordinate], float(theta[0]), float(self.data[coordinate - 1])
        )

    def marginal_log_density(self, upsilon: float) -> float:
        _, _, log_s = self.conditional_parameters(upsilon, self.data)
        return (
            float(stats.norm.logpdf(upsilon))
            + float(np.sum(log_s))
            + 0.5 * len(self.data) * math.log(2.0 * math.pi)
        )


def conditional_interval(log_height: float, upsilon: float, y: float) -> Tuple[float, float]:
    # {x_t : l_t(x_t) ≥ h_t} = μ_t ± σ √(-2 log(σ h_t / s_t))
    mean, sd, log_s = ToyJointTarget.conditional_parameters(upsilon, y)
    argument = -2.0 * (math.log(sd) + log_height - float(log_s))

    if argument < -square_root_tolerance:
        raise ContractViolation(f"Slice height above the conditional's peak ({argument:.3g})")

    half_width = sd * math.sqrt(max(argument, 0.0))
    return float(mean) - half_width, float(mean) + half_width


class LinearGaussianSSM(StateSpaceModel):
    parameter_dimension = 1

    def __init__(
        self,
        transition: float = 0.0,
        state_variance: float = 1.0,
        initial_variance: float = 1.0,
        observation_variance: Optional[float] = None,
    ) -> None:
        if state_variance <= 0.0 or initial_variance <= 0.0:
            raise ConfigurationError("State variances must be positive")

        if observation_variance is not None and observation_variance <= 0.0:
            raise ConfigurationError("Observation variance must be positive")

        self.transition = transition
        self.state_variance = state_variance
        self.initial_variance = initial_variance
        self.observation_variance = observation_variance

    def noise_variance(self, theta: np.ndarray) -> float:
        if self.observation_variance is not None:
            return self.observation_variance

        return math.exp(float(theta[0]))

    def log_prior(self, theta: np.ndarray) -> float:
        return float(np.sum(stats.norm.logpdf(theta)))

    def initial_sample(self, theta: np.ndarray, n: int, rng: RngStream) -> np.ndarray:
        return rng.normal(0.0, math.sqrt(self.initial_variance), n)

    def transition_sample(
        self,
        theta: np.ndarray,
        particles: np.ndarray,
        rng: RngStream,
    ) -> np.ndarray:
        return self.transition * particles + rng.normal(
            0.0, math.sqrt(self.state_variance), len(particles)
        )

    def observation_log_density(
        self,
        theta: np.ndarray,
        y: float,
        particles: np.ndarray,
    ) -> np.ndarray:
        return stats.norm.logpdf(y, loc=particles, scale=math.sqrt(self.noise_variance(theta)))

    def observation_sample(
        self,
        theta: np.ndarray,
        particles: np.ndarray,
        rng: RngStream,
    ) -> np.ndarray:
        return particles + rng.normal(0.0, math.sqrt(self.noise_variance(theta)), len(particles))

    def simulate(
        self,
        theta: np.ndarray,
        length: int,
        rng: RngStream,
    ) -> Tuple[np.ndarray, np.ndarray]:
        states = np.empty(length)
        states[0] = self.initial_sample(theta, 1, rng)[0]

        for t in range(1, length):
            states[t] = self.transition_sample(theta, states[t - 1 : t], rng)[0]

        return states, self.observation_sample(theta, states, rng)

    def __repr__(self) -> str:
        return (
            f"<LinearGaussianSSM φ={self.transition}, q={self.state_variance}, "
            f"p0={self.initial_variance}, r={self.observation_variance or 'e^θ'}>"
        )


def kalman_log_likelihood(
    model: LinearGaussianSSM,
    theta: np.ndarray,
    data: Sequence[float],
) -> float:
    r = model.noise_variance(theta)
    mean, variance = 0.0, model.initial_variance
    log_likelihood = 0.0

    for t, y in enumerate(data):
        if t > 0:
            mean = model.transition * mean
            variance = model.transition**2 * variance + model.state_variance

        innovation_variance = variance + r
        if not innovation_variance > 0.0:
            raise ContractViolation(f"Nonpositive innovation variance at t={t}")

        log_likelihood += float(
            stats.norm.logpdf(y, loc=mean, scale=math.sqrt(innovation_variance))
        )

        gain = variance / innovation_variance
        mean += gain * (y - mean)
        variance *= 1.0 - gain

    return log_likelihood


def simulate_toy_data(length: int, true_upsilon: float, rng: RngStream) -> np.ndarray:
    if length < 1:
        raise ConfigurationError(f"Need at least one observation, got {length}")

    states = rng.standard_normal(length)
    return states + rng.normal(0.0, math.exp(0.5 * true_upsilon), length)


def load_reference_dataset(path: Optional[Union[str, Path]] = None) -> np.ndarray:
    path = Path(path) if path is not None else reference_dataset_path

    if path.exists():
        return pd.read_csv(path, header=None, float_precision="round_trip")[0].to_numpy(
            dtype=float
        )

    if path != reference_dataset_path:
        raise ConfigurationError(f"Dataset {path} does not exist")

    logger.warning("%s is missing, regenerating it from seed %d", path, reference_seed)
    return simulate_toy_data(reference_length, reference_log_variance, RngStream(reference_seed))


def write_reference_dataset(path: Union[str, Path]) -> np.ndarray:
    data = simulate_toy_data(reference_length, reference_log_variance, RngStream(reference_seed))
    pd.Series(data).to_csv(path, index=False, header=False, lineterminator="\n")
    return data
