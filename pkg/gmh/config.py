import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
from frozendict import frozendict

from gmh.exceptions import ConfigurationError
from gmh.registry import SamplerKind, TargetKind, parse_floats, parse_parameters

sections = ("experiment", "sampler", "target")

experiment_keys: Dict[str, Callable[[str], Any]] = {
    "sampler": str,
    "target": str,
    "chains": int,
    "seed": int,
    "iterations": int,
    "burn_in": int,
    "output_dir": str,
    "initial": str,
}


@dataclass(frozen=True)
class ExperimentConfig:
    sampler: SamplerKind
    target: TargetKind
    chains: int
    iterations: int
    burn_in: int
    seed: Optional[int]
    output_dir: Optional[str]
    # None means the target's default starting point
    initial: Optional[Tuple[float, ...]]
    sampler_parameters: frozendict
    target_parameters: frozendict

    def initial_position(self) -> Optional[np.ndarray]:
        return None if self.initial is None else np.asarray(self.initial, dtype=float)


def _kind(enum, value: str, what: str):
    try:
        return enum(value)
    except ValueError as e:
        names = ", ".join(kind.value for kind in enum)
        raise ConfigurationError(f"Unknown {what} {value!r}, expected one of {names}") from e


def _experiment_values(raw: Dict[str, str]) -> Dict[str, Any]:
    unknown = sorted(set(raw) - set(experiment_keys))
    if unknown:
        raise ConfigurationError(f"Unknown experiment keys: {', '.join(unknown)}")

    for required in ("sampler", "target", "iterations"):
        if required not in raw:
            raise ConfigurationError(f"Missing experiment key: {required}")

    values: Dict[str, Any] = {}
    for key, value in raw.items():
        try:
            values[key] = experiment_keys[key](value)
        except ValueError as e:
            raise ConfigurationError(f"Invalid experiment value {key} = {value!r}") from e

    return values


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)

    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigurationError(f"Malformed config {source}: {e}") from e

    unknown = sorted(set(parser.sections()) - set(sections))
    if unknown:
        raise ConfigurationError(f"Unknown config sections: {', '.join(unknown)}")

    if not parser.has_section("experiment"):
        raise ConfigurationError(f"Config {source} lacks an [experiment] section")

    values = _experiment_values(dict(parser["experiment"]))
    sampler = _kind(SamplerKind, values["sampler"], "sampler")
    target = _kind(TargetKind, values["target"], "target")

    chains = values.get("chains", 1)
    iterations = values["iterations"]
    burn_in = values.get("burn_in", 0)

    if chains < 1:
        raise ConfigurationError(f"chains must be positive, got {chains}")

    if iterations < 1:
        raise ConfigurationError(f"iterations must be positive, got {iterations}")

    if not 0 <= burn_in < iterations:
        raise ConfigurationError(f"burn_in must lie in [0, {iterations}), got {burn_in}")

    seed = values.get("seed")
    if seed is not None and not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {seed}")

    initial = values.get("initial")

    return ExperimentConfig(
        sampler=sampler,
        target=target,
        chains=chains,
        iterations=iterations,
        burn_in=burn_in,
        seed=seed,
        output_dir=values.get("output_dir"),
        initial=None if initial in (None, "", "default") else parse_floats(initial),
        sampler_parameters=parse_parameters(
            sampler.schema,
            dict(parser["sampler"]) if parser.has_section("sampler") else {},
            "sampler",
        ),
        target_parameters=parse_parameters(
            target.schema,
            dict(parser["target"]) if parser.has_section("target") else {},
            "target",
        ),
    )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigurationError(f"Unable to read config {path}: {e}") from e

    return parse_config(text, source=str(path))
