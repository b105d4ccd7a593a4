from typing import Dict, Optional


class GmhError(Exception):
    pass


class ConfigurationError(GmhError):
    pass


class ContractViolation(GmhError):
    pass


class TuningError(ContractViolation):
    def __init__(
        self,
        message: str,
        variances: Optional[Dict[int, float]] = None,
    ) -> None:
        super().__init__(message)
        self.variances: Dict[int, float] = variances or {}


class TrajectoryDiverged(GmhError):
    pass


class TraceFormatError(GmhError):
    pass
