import os
from typing import Generator, Optional

from gmh.config import ExperimentConfig
from gmh.exceptions import ConfigurationError
from gmh.helpers import log_level


class Settings:
    fields = (
        "log",
        "threads",
        "seed",
        "output",
    )
    environment_prefix = "GMH_"

    def __init__(self) -> None:
        self.log: str = "info"
        self.threads: int = 1
        self.seed: Optional[int] = None
        self.output: Optional[str] = None

    def _set(self, field_name: str, value: str) -> None:
        try:
            if field_name in ("threads", "seed"):
                setattr(self, field_name, int(value))
            else:
                setattr(self, field_name, value)
        except ValueError as e:
            raise ConfigurationError(f"Invalid {field_name} setting {value!r}") from e

    def apply_environment_variables(self) -> None:
        for field_name in self.fields:
            name = f"{self.environment_prefix}{field_name.upper()}"
            if os.environ.get(name):
                self._set(field_name, os.environ[name])

    def apply_arguments(
        self,
        seed: Optional[int],
        threads: Optional[int],
        output: Optional[str],
    ) -> None:
        self.seed = seed if seed is not None else self.seed
        self.threads = threads if threads is not None else self.threads
        self.output = output if output is not None else self.output

    def apply_config(
        self,
        config: ExperimentConfig,
    ) -> None:
        self.seed = self.seed if self.seed is not None else config.seed
        self.output = self.output if self.output is not None else config.output_dir

    @property
    def log_level(self) -> int:
        return log_level(self.log)

    @property
    def debug(self) -> bool:
        return self.log.lower() == "debug"

    def valid(self) -> bool:
        return (
            self.seed is not None
            and 0 <= self.seed < 2**64
            and self.threads >= 1
            and bool(self.output)
        )

    def __rich_repr__(self) -> Generator:
        yield "log", self.log
        yield "threads", self.threads
        yield "seed", self.seed
        yield "output", self.output
