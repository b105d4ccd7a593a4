import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np
import pandas as pd

from gmh.constants import trace_metadata_columns
from gmh.exceptions import TraceFormatError


@dataclass
class ChainTrace:
    samples: np.ndarray
    accepted: np.ndarray
    log_density: np.ndarray
    proposals_evaluated: np.ndarray

    @classmethod
    def allocate(cls, iterations: int, dimension: int) -> "ChainTrace":
        return cls(
            samples=np.empty((iterations, dimension)),
            accepted=np.zeros(iterations, dtype=bool),
            log_density=np.empty(iterations),
            proposals_evaluated=np.zeros(iterations, dtype=np.int64),
        )

    @property
    def iterations(self) -> int:
        return self.samples.shape[0]

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted))

    def discard(self, burn_in: int) -> "ChainTrace":
        return ChainTrace(
            samples=self.samples[burn_in:],
            accepted=self.accepted[burn_in:],
            log_density=self.log_density[burn_in:],
            proposals_evaluated=self.proposals_evaluated[burn_in:],
        )

    def coordinate_names(self) -> List[str]:
        return [f"coord_{i}" for i in range(self.dimension)]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.samples, columns=self.coordinate_names())
        frame.insert(0, "iteration", np.arange(self.iterations))
        frame["log_density"] = self.log_density
        frame["accepted"] = self.accepted.astype(int)
        frame["proposals_evaluated"] = self.proposals_evaluated
        return frame

    def write_csv(self, path: Union[str, Path]) -> None:
        path = Path(path)
        temporary = path.with_name(f".{path.name}.tmp")

        # Default float formatting is repr, which round-trips
        self.to_frame().to_csv(temporary, index=False, lineterminator="\n")
        os.replace(temporary, path)

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "ChainTrace":
        try:
            frame = pd.read_csv(path, float_precision="round_trip")
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise TraceFormatError(f"Unable to read trace {path}: {e}") from e

        coordinates = [c for c in frame.columns if c.startswith("coord_")]
        missing = [c for c in trace_metadata_columns if c not in frame.columns]

        if missing or not coordinates:
            raise TraceFormatError(
                f"Trace {path} lacks columns: {', '.join(missing) or 'coord_*'}"
            )

        if len(frame) == 0:
            raise TraceFormatError(f"Trace {path} has no rows")

        samples = frame[coordinates].to_numpy(dtype=float)
        if np.isnan(samples).any():
            raise TraceFormatError(f"Trace {path} contains NaN samples")

        return cls(
            samples=samples,
            accepted=frame["accepted"].to_numpy().astype(bool),
            log_density=frame["log_density"].to_numpy(dtype=float),
            proposals_evaluated=frame["proposals_evaluated"].to_numpy(dtype=np.int64),
        )
