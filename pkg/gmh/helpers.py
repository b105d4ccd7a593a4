import logging
import math
from functools import cache
from typing import TYPE_CHECKING

from gmh.constants import robbins_monro_exponent
from gmh.exceptions import ConfigurationError, ContractViolation

if TYPE_CHECKING:
    from gmh.rng import RngStream


@cache
def log_level(name: str) -> int:
    levels = {
        "error": logging.ERROR,
        "warning": logging.WARNING,
        "info": logging.INFO,
        "debug": logging.DEBUG,
    }

    if name.lower() not in levels:
        raise ConfigurationError(
            f"Unknown log level {name!r}, expected one of {', '.join(levels)}"
        )

    return levels[name.lower()]


@cache
def parse_bool(value: str) -> bool:
    if value.lower() in ("1", "true", "yes", "on"):
        return True

    if value.lower() in ("0", "false", "no", "off"):
        return False

    raise ConfigurationError(f"Expected a boolean, got {value!r}")


def robbins_monro_gain(k: int) -> float:
    return float(k) ** -robbins_monro_exponent


def slice_height(log_value: float, rng: "RngStream") -> float:
    # log(u * f) with u ~ U[0, 1] is log f - Exp(1)
    return log_value - rng.exponential()


def reject_nan(value: float, what: str) -> float:
    if math.isnan(value):
        raise ContractViolation(f"{what} is NaN")

    return value
