import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from gmh.constants import (
    jitter_growth,
    jitter_initial,
    jitter_maximum,
    symmetry_tolerance,
)
from gmh.exceptions import ConfigurationError, ContractViolation
from gmh.rng import RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CholeskyFactor:
    lower: np.ndarray
    jitter: float

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    def matrix(self) -> np.ndarray:
        return self.lower @ self.lower.T

    def solve(self, b: np.ndarray) -> np.ndarray:
        # (L Lᵀ)⁻¹ b via two triangular solves
        return linalg.cho_solve((self.lower, True), b, check_finite=False)

    def log_determinant(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))


def _check_symmetric(matrix: np.ndarray) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ConfigurationError(f"Expected a square matrix, got shape {matrix.shape}")

    scale = max(float(np.max(np.abs(matrix))), 1.0)
    if np.max(np.abs(matrix - matrix.T)) > symmetry_tolerance * scale:
        raise ConfigurationError("Matrix is not symmetric")


def cholesky_spd(matrix: np.ndarray) -> CholeskyFactor:
    """Lower Cholesky factor of a symmetric matrix with escalating jitter.

    The plain factorization is tried first. On failure a diagonal jitter of
    1e-10 * mean(diag) is added and multiplied by ten until the factorization
    succeeds or the jitter would exceed 1e-6 * mean(diag).
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    _check_symmetric(matrix)

    try:
        return CholeskyFactor(
            lower=linalg.cholesky(matrix, lower=True, check_finite=True),
            jitter=0.0,
        )
    except (linalg.LinAlgError, ValueError):
        pass

    mean_diagonal = float(np.mean(np.diag(matrix)))
    if not mean_diagonal > 0.0:
        raise ContractViolation("Cannot regularize a matrix with nonpositive diagonal")

    relative = jitter_initial
    while relative <= jitter_maximum * (1.0 + 1e-9):
        jitter = relative * mean_diagonal
        try:
            lower = linalg.cholesky(
                matrix + jitter * np.eye(matrix.shape[0]),
                lower=True,
            )
        except linalg.LinAlgError:
            relative *= jitter_growth
            continue

        logger.warning("Cholesky factorization needed jitter %.3g", jitter)
        return CholeskyFactor(lower=lower, jitter=jitter)

    raise ContractViolation(
        f"Cholesky factorization failed even with jitter {jitter_maximum:g} * mean(diag)"
    )


def mvn_sample(mean: np.ndarray, lower: np.ndarray, rng: RngStream) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    lower = np.atleast_2d(lower)

    if lower.shape != (mean.shape[0], mean.shape[0]):
        raise ConfigurationError(
            f"Dimension mismatch between mean {mean.shape} and factor {lower.shape}"
        )

    return mean + lower @ rng.standard_normal(mean.shape[0])


def unit_ball_uniform(dimension: int, rng: RngStream) -> np.ndarray:
    while True:
        z = rng.standard_normal(dimension)
        norm = float(np.linalg.norm(z))
        if norm > 0.0:
            break

    return z / norm * rng.uniform() ** (1.0 / dimension)


def ellipsoid_uniform(lower: np.ndarray, radius: float, rng: RngStream) -> np.ndarray:
    if not radius > 0.0:
        raise ContractViolation(f"Ellipsoid radius must be positive, got {radius}")

    lower = np.atleast_2d(lower)
    y = unit_ball_uniform(lower.shape[0], rng)

    # Lᵀ v = √ρ y  ⇒  vᵀ Σ v = ρ |y|²
    return linalg.solve_triangular(lower, y, lower=True, trans="T") * np.sqrt(radius)
