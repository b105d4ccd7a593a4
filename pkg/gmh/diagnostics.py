import math
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from gmh.constants import minimum_series_length, moment_z_threshold, sokal_window_constant
from gmh.exceptions import ContractViolation
from gmh.trace import ChainTrace


@dataclass(frozen=True)
class IactEstimate:
    tau: float
    window: int
    autocorrelations: np.ndarray


def _validated(series: Sequence[float]) -> np.ndarray:
    x = np.asarray(series, dtype=float).ravel()

    if len(x) < minimum_series_length:
        raise ContractViolation(
            f"Series of length {len(x)} is shorter than {minimum_series_length}"
        )

    if np.ptp(x) == 0.0:
        raise ContractViolation("Series has zero variance")

    return x


def autocorrelation(series: np.ndarray) -> np.ndarray:
    n = len(series)
    centred = series - np.mean(series)
    size = 1 << (2 * n - 1).bit_length()

    spectrum = np.fft.rfft(centred, n=size)
    autocovariance = np.fft.irfft(spectrum * np.conjugate(spectrum), n=size)[:n] / n
    return autocovariance / autocovariance[0]


def iact_sokal(
    series: Sequence[float],
    window_constant: float = sokal_window_constant,
) -> IactEstimate:
    # τ = 1 + 2 Σ_{k≤W} ρ_k with the smallest self-consistent window W ≥ c τ(W)
    x = _validated(series)
    rho = autocorrelation(x)

    # taus[W] = 1 + 2 Σ_{k=1}^{W} ρ_k
    taus = 2.0 * np.cumsum(rho) - 1.0
    consistent = np.arange(len(taus)) >= window_constant * taus
    window = int(np.argmax(consistent)) if consistent.any() else len(taus) - 1

    # Strongly alternating chains give τ < 1; it stays positive so M/τ is defined
    tau = max(float(taus[window]), 1.0 / len(x))
    return IactEstimate(tau=tau, window=window, autocorrelations=rho[: window + 1])


def iact_batch_means(series: Sequence[float]) -> float:
    x = _validated(series)
    batch_size = int(math.sqrt(len(x)))
    batches = len(x) // batch_size

    means = x[: batches * batch_size].reshape(batches, batch_size).mean(axis=1)
    return batch_size * float(np.var(means, ddof=1)) / float(np.var(x, ddof=1))


def ess(series: Sequence[float]) -> float:
    x = np.asarray(series, dtype=float).ravel()
    return len(x) / iact_sokal(x).tau


@dataclass(frozen=True)
class MomentRow:
    coordinate: int
    mean: float
    var: float
    tau: float
    ess: float
    z_mean: float
    z_var: float

    @property
    def passed(self) -> bool:
        return abs(self.z_mean) <= moment_z_threshold and abs(self.z_var) <= moment_z_threshold


@dataclass(frozen=True)
class MomentReport:
    rows: List[MomentRow]

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.__dict__ for row in self.rows])

    def __str__(self) -> str:
        return self.to_frame().to_string(index=False)


def moment_test(
    samples: Union[np.ndarray, ChainTrace],
    target_mean: Sequence[float],
    target_cov: np.ndarray,
) -> MomentReport:
    if isinstance(samples, ChainTrace):
        samples = samples.samples

    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 1:
        samples = samples.T

    mean = np.atleast_1d(np.asarray(target_mean, dtype=float))
    variance = np.diag(np.atleast_2d(target_cov))
    m = samples.shape[0]

    rows = []
    for i in range(samples.shape[1]):
        x = samples[:, i]
        tau = iact_sokal(x).tau

        squared = (x - mean[i]) ** 2
        tau_squared = iact_sokal(squared).tau
        squared_se = float(np.std(squared, ddof=1)) * math.sqrt(tau_squared / m)

        rows.append(
            MomentRow(
                coordinate=i,
                mean=float(np.mean(x)),
                var=float(np.var(x, ddof=1)),
                tau=tau,
                ess=m / tau,
                z_mean=(float(np.mean(x)) - mean[i]) / (math.sqrt(variance[i]) * math.sqrt(tau / m)),
                z_var=(float(np.mean(squared)) - variance[i]) / squared_se,
            )
        )

    return MomentReport(rows=rows)


def summarize_trace(trace: ChainTrace, name: str = "") -> pd.DataFrame:
    rows = []
    for i, coordinate in enumerate(trace.coordinate_names()):
        x = trace.samples[:, i]
        estimate = iact_sokal(x)
        rows.append(
            {
                "trace": name,
                "coordinate": coordinate,
                "mean": float(np.mean(x)),
                "var": float(np.var(x, ddof=1)),
                "tau": estimate.tau,
                "ess": len(x) / estimate.tau,
                "acceptance_rate": trace.acceptance_rate,
            }
        )

    return pd.DataFrame(rows)
