import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from gmh.constants import singular_time_tolerance
from gmh.exceptions import ConfigurationError, ContractViolation, TrajectoryDiverged
from gmh.kernel import TargetDensity
from gmh.linalg import CholeskyFactor, cholesky_spd
from gmh.rng import RngStream


@dataclass(frozen=True)
class EllipseParams:
    mu: np.ndarray
    sigma: np.ndarray
    chol: np.ndarray

    @classmethod
    def from_moments(cls, mu: Sequence[float], sigma: np.ndarray) -> "EllipseParams":
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        factor = cholesky_spd(np.atleast_2d(sigma))

        if factor.dimension != mu.shape[0]:
            raise ConfigurationError(
                f"Mean has {mu.shape[0]} entries but covariance is {factor.dimension}-dimensional"
            )

        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        return cls(
            mu=mu,
            sigma=sigma + factor.jitter * np.eye(factor.dimension),
            chol=factor.lower,
        )

    @property
    def dimension(self) -> int:
        return self.mu.shape[0]

    def sigma_solve(self, x: np.ndarray) -> np.ndarray:
        return linalg.cho_solve((self.chol, True), x, check_finite=False)

    def kinetic(self, v: np.ndarray) -> float:
        return 0.5 * float(v @ self.sigma @ v)

    def potential(self, theta: np.ndarray) -> float:
        z = linalg.solve_triangular(self.chol, theta - self.mu, lower=True)
        return 0.5 * float(z @ z)

    def approx_hamiltonian(self, theta: np.ndarray, v: np.ndarray) -> float:
        return self.potential(theta) + self.kinetic(v)

    def log_prior(self, theta: np.ndarray) -> float:
        log_normalizer = 0.5 * self.dimension * math.log(2.0 * math.pi) + float(
            np.sum(np.log(np.diag(self.chol)))
        )
        return -self.potential(theta) - log_normalizer

    def sample_momentum(self, rng: RngStream) -> np.ndarray:
        # Cov = L⁻ᵀ L⁻¹ = Σ⁻¹
        return linalg.solve_triangular(
            self.chol, rng.standard_normal(self.dimension), lower=True, trans="T"
        )

    def sample_position(self, rng: RngStream) -> np.ndarray:
        return self.mu + self.chol @ rng.standard_normal(self.dimension)


class MassMatrix:
    def __init__(self, matrix: Optional[np.ndarray] = None, dimension: int = 1) -> None:
        if matrix is None:
            matrix = np.eye(dimension)

        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.factor: CholeskyFactor = cholesky_spd(self.matrix)

    @classmethod
    def from_precision_of(cls, params: EllipseParams) -> "MassMatrix":
        return cls(matrix=params.sigma_solve(np.eye(params.dimension)))

    @property
    def dimension(self) -> int:
        return self.factor.dimension

    def velocity(self, v: np.ndarray) -> np.ndarray:
        return self.factor.solve(v)

    def kinetic(self, v: np.ndarray) -> float:
        return 0.5 * float(v @ self.factor.solve(v))

    def sample(self, rng: RngStream) -> np.ndarray:
        return self.factor.lower @ rng.standard_normal(self.dimension)


def _check_same_dimension(theta: np.ndarray, other: np.ndarray, what: str) -> None:
    if theta.shape != other.shape:
        raise ConfigurationError(
            f"Dimension mismatch: θ has shape {theta.shape}, {what} has shape {other.shape}"
        )


def translation_map(theta: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    _check_same_dimension(theta, v, "V")
    return theta + v, -v


def gibbs_swap_map(
    theta: np.ndarray,
    v: np.ndarray,
    block: Sequence[int],
) -> Tuple[np.ndarray, np.ndarray]:
    index = _validate_block(block, theta.shape[0])

    if v.shape != (len(index),):
        raise ConfigurationError(f"Block of size {len(index)} got V of shape {v.shape}")

    xi = theta.copy()
    xi[index] = v
    return xi, theta[index].copy()


def _validate_block(block: Sequence[int], dimension: int) -> np.ndarray:
    index = np.asarray(list(block), dtype=int)

    if index.size == 0:
        raise ConfigurationError("Empty Gibbs block")

    if index.min() < 0 or index.max() >= dimension:
        raise ConfigurationError(f"Block {list(block)} out of range for dimension {dimension}")

    if np.unique(index).size != index.size:
        raise ConfigurationError(f"Block {list(block)} repeats coordinates")

    return index


def _check_rho(rho: float, dimension: int) -> None:
    if rho not in (0.0, -1.0):
        raise ConfigurationError(f"Directional ρ must be 0 or -1, got {rho}")

    if dimension == 1 and rho != 0.0:
        raise ConfigurationError("One-dimensional directional maps only support ρ = 0")


def directional_map(
    theta: np.ndarray,
    r: float,
    v: np.ndarray,
    rho: float = 0.0,
) -> Tuple[np.ndarray, float, np.ndarray]:
    _check_same_dimension(theta, v, "v")
    _check_rho(rho, theta.shape[0])

    stretch = 1.0 + r * rho
    if abs(stretch) < singular_time_tolerance:
        raise ContractViolation(f"Singular directional time r = {r} for ρ = {rho}")

    return theta + r * (v + rho * theta), -r / stretch, v.copy()


def directional_log_jacobian(dimension: int, r: float, rho: float) -> float:
    if rho == 0.0:
        return 0.0

    return (dimension - 2) * math.log(abs(1.0 + r * rho))


def elliptical_map(
    theta: np.ndarray,
    v: np.ndarray,
    r: float,
    params: EllipseParams,
) -> Tuple[np.ndarray, np.ndarray, float]:
    _check_same_dimension(theta, v, "v")
    offset = theta - params.mu
    cos_r, sin_r = math.cos(r), math.sin(r)

    xi = offset * cos_r + (params.sigma @ v) * sin_r + params.mu
    w = v * cos_r - params.sigma_solve(offset) * sin_r
    return xi, w, -r


def _finite_gradient(target: TargetDensity, theta: np.ndarray) -> np.ndarray:
    gradient = target.gradient(theta)

    if not np.all(np.isfinite(gradient)):
        raise TrajectoryDiverged(f"Non-finite gradient at {theta}")

    return gradient


def leapfrog_map(
    theta: np.ndarray,
    v: np.ndarray,
    step_size: float,
    n_steps: int,
    target: TargetDensity,
    mass: MassMatrix,
) -> Tuple[np.ndarray, np.ndarray]:
    if not target.has_gradient:
        raise ConfigurationError("Leapfrog integration needs a target gradient")

    if not step_size > 0.0 or n_steps < 1:
        raise ConfigurationError(
            f"Leapfrog needs ε > 0 and L ≥ 1, got ε = {step_size}, L = {n_steps}"
        )

    _check_same_dimension(theta, v, "v")

    position = theta.copy()
    momentum = v + 0.5 * step_size * _finite_gradient(target, position)

    for i in range(n_steps):
        position = position + step_size * mass.velocity(momentum)
        gradient = _finite_gradient(target, position)

        if i < n_steps - 1:
            momentum = momentum + step_size * gradient

    momentum = momentum + 0.5 * step_size * gradient
    return position, -momentum


class SelfInverseMap(ABC):
    # T(T(θ, V)) = (θ, V); the log-Jacobian is exact
    input_dims: Tuple[int, int]

    @abstractmethod
    def apply(self, theta: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ...

    def log_abs_jacobian(self, theta: np.ndarray, v: np.ndarray) -> float:
        return 0.0

    def _check_inputs(self, theta: np.ndarray, v: np.ndarray) -> None:
        if (theta.shape[0], v.shape[0]) != self.input_dims:
            raise ConfigurationError(
                f"{type(self).__name__} expects dimensions {self.input_dims}, "
                f"got ({theta.shape[0]}, {v.shape[0]})"
            )


class TranslationMap(SelfInverseMap):
    def __init__(self, dimension: int) -> None:
        self.input_dims = (dimension, dimension)

    def apply(self, theta: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        self._check_inputs(theta, v)
        return translation_map(theta, v)


class GibbsSwapMap(SelfInverseMap):
    def __init__(self, dimension: int, block: Sequence[int]) -> None:
        self.block = tuple(int(i) for i in _validate_block(block, dimension))
        self.input_dims = (dimension, len(self.block))

    def apply(self, theta: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        self._check_inputs(theta, v)
        return gibbs_swap_map(theta, v, self.block)


class DirectionalMap(SelfInverseMap):
    # V = [r, v] with ξ = θ + r(v + ρθ), s = -r/(1 + rρ), w = v
    def __init__(self, dimension: int, rho: float = 0.0) -> None:
        _check_rho(rho, dimension)
        self.rho = rho
        self.input_dims = (dimension, dimension + 1)

    def apply(self, theta: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        self._check_inputs(theta, v)
        xi, s, w = directional_map(theta, float(v[0]), v[1:], self.rho)
        return xi, np.concatenate(([s], w))

    def log_abs_jacobian(self, theta: np.ndarray, v: np.ndarray) -> float:
        return directional_log_jacobian(theta.shape[0], float(v[0]), self.rho)


class EllipticalMap(SelfInverseMap):
    def __init__(self, params: EllipseParams) -> None:
        self.params = params
        self.input_dims = (params.dimension, params.dimension + 1)

    def apply(self, theta: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        self._check_inputs(theta, v)
        xi, w, s = elliptical_map(theta, v[:-1], float(v[-1]), self.params)
        return xi, np.concatenate((w, [s]))


class LeapfrogMap(SelfInverseMap):
    def __init__(
        self,
        target: TargetDensity,
        step_size: float,
        n_steps: int,
        mass: Optional[MassMatrix] = None,
    ) -> None:
        self.target = target
        self.step_size = step_size
        self.n_steps = n_steps
        self.mass = mass or MassMatrix(dimension=target.dimension)
        self.input_dims = (target.dimension, target.dimension)

    def apply(self, theta: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        self._check_inputs(theta, v)
        return leapfrog_map(
            theta, v, self.step_size, self.n_steps, self.target, self.mass
        )
