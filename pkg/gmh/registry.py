from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
from frozendict import frozendict

from gmh.exceptions import ConfigurationError
from gmh.gibbs import AuxiliaryGibbs, GibbsSweep, MHWithinGibbs
from gmh.hamiltonian import HamiltonianMonteCarlo, mala
from gmh.helpers import parse_bool
from gmh.kernel import Kernel, TargetDensity
from gmh.mappings import EllipseParams
from gmh.metropolis import AdaptiveMetropolis, MetropolisKernel
from gmh.particle_filter import AbcObservation
from gmh.pseudo_marginal import (
    GaussianRProposal,
    LogNormalProposal,
    PseudoMarginalHamiltonianSlice,
    PseudoMarginalMetropolis,
    PseudoMarginalTarget,
    TruncatedGaussianRProposal,
)
from gmh.rng import RngStream
from gmh.slice import (
    DirectionalSlice,
    EllipticalSlice,
    HamiltonianSlice,
    RecursiveGaussianSlice,
    UnivariateSlice,
)
from gmh.targets import (
    GaussianTarget,
    LinearGaussianSSM,
    ToyJointTarget,
    ToyScalarTarget,
    load_reference_dataset,
)


def parse_floats(value: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in value.replace(";", ",").split(",") if v.strip())
    except ValueError as e:
        raise ConfigurationError(f"Expected comma separated numbers, got {value!r}") from e


def parse_matrix(value: str) -> Tuple[Tuple[float, ...], ...]:
    return tuple(parse_floats(row) for row in value.split(";") if row.strip())


def parse_optional_int(value: str) -> Any:
    return None if value.lower() in ("", "none", "never") else int(value)


def parse_optional_str(value: str) -> Any:
    return value or None


# name -> (parser, default)
Schema = Mapping[str, Tuple[Callable[[str], Any], Any]]


class TargetKind(Enum):
    GAUSSIAN = "gaussian"
    TOY_SCALAR = "toy_scalar"
    TOY_JOINT = "toy_joint"
    LINEAR_GAUSSIAN = "linear_gaussian"

    @property
    def schema(self) -> Schema:
        return target_schemas[self]


class SamplerKind(Enum):
    METROPOLIS = "metropolis"
    ADAPTIVE_METROPOLIS = "adaptive_metropolis"
    GIBBS = "gibbs"
    AUXILIARY_GIBBS = "auxiliary_gibbs"
    UNIVARIATE_SLICE = "univariate_slice"
    RECURSIVE_SLICE = "recursive_slice"
    DIRECTIONAL_SLICE = "directional_slice"
    ELLIPTICAL_SLICE = "elliptical_slice"
    HAMILTONIAN_SLICE = "hamiltonian_slice"
    HMC = "hmc"
    MALA = "mala"
    PMMH = "pmmh"
    PM_HAMILTONIAN_SLICE = "pm_hamiltonian_slice"

    @property
    def schema(self) -> Schema:
        return sampler_schemas[self]

    @property
    def pseudo_marginal(self) -> bool:
        return self in (SamplerKind.PMMH, SamplerKind.PM_HAMILTONIAN_SLICE)


_dataset_schema: Schema = {"dataset": (parse_optional_str, None)}
_ellipse_schema: Schema = {
    "mean": (parse_floats, None),
    "variance": (float, 1.0),
    "covariance": (parse_matrix, None),
}

target_schemas: Dict[TargetKind, Schema] = {
    TargetKind.GAUSSIAN: {
        "mean": (parse_floats, (0.0,)),
        "covariance": (parse_matrix, None),
    },
    TargetKind.TOY_SCALAR: _dataset_schema,
    TargetKind.TOY_JOINT: _dataset_schema,
    TargetKind.LINEAR_GAUSSIAN: {
        **_dataset_schema,
        "transition": (float, 0.0),
        "state_variance": (float, 1.0),
        "initial_variance": (float, 1.0),
        "particles": (int, 100),
        "abc": (parse_bool, False),
        "abc_epsilon": (float, None),
    },
}

sampler_schemas: Dict[SamplerKind, Schema] = {
    SamplerKind.METROPOLIS: {"scale": (float, 1.0)},
    SamplerKind.ADAPTIVE_METROPOLIS: {
        "target_rate": (float, 0.44),
        "adapt_until": (parse_optional_int, None),
        "refresh_proposal": (parse_bool, False),
    },
    SamplerKind.GIBBS: {"width": (float, 1.0), "group_exact": (parse_bool, False)},
    SamplerKind.AUXILIARY_GIBBS: {"width": (float, 1.0)},
    SamplerKind.UNIVARIATE_SLICE: {"width": (float, 1.0)},
    SamplerKind.RECURSIVE_SLICE: {"scale": (float, 1.0)},
    SamplerKind.DIRECTIONAL_SLICE: {},
    SamplerKind.ELLIPTICAL_SLICE: _ellipse_schema,
    SamplerKind.HAMILTONIAN_SLICE: _ellipse_schema,
    SamplerKind.HMC: {
        "step_size": (float, 0.1),
        "n_steps": (int, 10),
        "adapt_until": (parse_optional_int, None),
        "mass": (parse_matrix, None),
    },
    SamplerKind.MALA: {
        "step_size": (float, 0.5),
        "adapt_until": (parse_optional_int, None),
        "mass": (parse_matrix, None),
    },
    SamplerKind.PMMH: {"scale": (float, 1.0), "multiplicative": (parse_bool, False)},
    SamplerKind.PM_HAMILTONIAN_SLICE: {
        **_ellipse_schema,
        "sigma": (float, 1.0),
        "zeta": (float, 1.0),
        "truncated": (parse_bool, False),
    },
}


def parse_parameters(schema: Schema, raw: Mapping[str, str], what: str) -> frozendict:
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigurationError(f"Unknown {what} keys: {', '.join(unknown)}")

    parameters = {}
    for name, (parser, default) in schema.items():
        if name not in raw:
            parameters[name] = default
            continue

        try:
            parameters[name] = parser(raw[name])
        except ValueError as e:
            raise ConfigurationError(f"Invalid {what} value {name} = {raw[name]!r}: {e}") from e

    return frozendict(parameters)


def build_target(kind: TargetKind, parameters: Mapping[str, Any]) -> TargetDensity:
    if kind is TargetKind.GAUSSIAN:
        mean = np.asarray(parameters["mean"], dtype=float)
        covariance = parameters["covariance"]
        return GaussianTarget(
            mean, np.eye(len(mean)) if covariance is None else np.asarray(covariance)
        )

    data = load_reference_dataset(parameters["dataset"])

    if kind is TargetKind.TOY_SCALAR:
        return ToyScalarTarget(data)

    if kind is TargetKind.TOY_JOINT:
        return ToyJointTarget(data)

    model = LinearGaussianSSM(
        transition=parameters["transition"],
        state_variance=parameters["state_variance"],
        initial_variance=parameters["initial_variance"],
    )
    if parameters["abc"]:
        model = AbcObservation(model, data, epsilon=parameters["abc_epsilon"])

    return PseudoMarginalTarget.for_model(model, data, parameters["particles"])


def default_initial(target: TargetDensity, rng: RngStream) -> np.ndarray:
    if isinstance(target, GaussianTarget):
        return target.sample(rng)

    if isinstance(target, ToyJointTarget):
        return np.concatenate(([0.0], 0.5 * target.data))

    return np.zeros(target.dimension)


def square_matrix(rows: Any, dimension: int, what: str) -> np.ndarray:
    try:
        matrix = np.atleast_2d(np.asarray(rows, dtype=float))
    except ValueError as e:
        raise ConfigurationError(f"{what} rows have different lengths") from e

    # A single row lists the diagonal
    if matrix.shape == (1, dimension) and dimension > 1:
        matrix = np.diag(matrix[0])

    if matrix.shape != (dimension, dimension):
        raise ConfigurationError(
            f"{what} must be {dimension}x{dimension} or a diagonal, got shape {matrix.shape}"
        )

    return matrix


def _optional_matrix(rows: Any, dimension: int, what: str) -> Optional[np.ndarray]:
    return None if rows is None else square_matrix(rows, dimension, what)


def _ellipse(parameters: Mapping[str, Any], dimension: int) -> EllipseParams:
    mean = parameters["mean"] or (0.0,) * dimension
    covariance = _optional_matrix(parameters["covariance"], dimension, "Ellipse covariance")

    if covariance is None:
        covariance = parameters["variance"] * np.eye(dimension)

    return EllipseParams.from_moments(mean, covariance)


def _gibbs(parameters: Mapping[str, Any], target: TargetDensity) -> Kernel:
    exact = [i for i in range(target.dimension) if target.conditional_sampler((i,)) is not None]
    rest = [i for i in range(target.dimension) if i not in exact]
    inner = UnivariateSlice(width=parameters["width"])

    blocks: List[Tuple[int, ...]] = [(i,) for i in rest]
    if parameters["group_exact"] and exact and target.conditional_sampler(tuple(exact)):
        blocks.append(tuple(exact))
    else:
        blocks.extend((i,) for i in exact)

    return GibbsSweep(
        [MHWithinGibbs(block, inner=None if block[0] in exact else inner) for block in blocks]
    )


def build_kernel(
    kind: SamplerKind,
    parameters: Mapping[str, Any],
    target: TargetDensity,
) -> Kernel:
    dimension = target.dimension

    if kind.pseudo_marginal != isinstance(target, PseudoMarginalTarget):
        raise ConfigurationError(
            f"Sampler {kind.value} cannot run on target {type(target).__name__}"
        )

    if kind is SamplerKind.METROPOLIS:
        return MetropolisKernel(dimension, covariance=parameters["scale"] ** 2 * np.eye(dimension))

    if kind is SamplerKind.ADAPTIVE_METROPOLIS:
        return AdaptiveMetropolis(
            target_rate=parameters["target_rate"],
            adapt_until=parameters["adapt_until"],
            refresh_proposal=parameters["refresh_proposal"],
        )

    if kind is SamplerKind.GIBBS:
        return _gibbs(parameters, target)

    if kind is SamplerKind.AUXILIARY_GIBBS:
        return AuxiliaryGibbs(width=parameters["width"])

    if kind is SamplerKind.UNIVARIATE_SLICE:
        return UnivariateSlice(width=parameters["width"])

    if kind is SamplerKind.RECURSIVE_SLICE:
        return RecursiveGaussianSlice(np.eye(dimension), scale=parameters["scale"])

    if kind is SamplerKind.DIRECTIONAL_SLICE:
        return DirectionalSlice()

    if kind is SamplerKind.ELLIPTICAL_SLICE:
        return EllipticalSlice(_ellipse(parameters, dimension))

    if kind is SamplerKind.HAMILTONIAN_SLICE:
        return HamiltonianSlice(_ellipse(parameters, dimension))

    if kind is SamplerKind.HMC:
        return HamiltonianMonteCarlo(
            step_size=parameters["step_size"],
            n_steps=parameters["n_steps"],
            mass_matrix=_optional_matrix(parameters["mass"], dimension, "Mass matrix"),
            adapt_until=parameters["adapt_until"],
        )

    if kind is SamplerKind.MALA:
        return mala(
            step_size=parameters["step_size"],
            mass_matrix=_optional_matrix(parameters["mass"], dimension, "Mass matrix"),
            adapt_until=parameters["adapt_until"],
        )

    if kind is SamplerKind.PMMH:
        if parameters["multiplicative"]:
            return PseudoMarginalMetropolis(
                dimension, parameter_proposal=LogNormalProposal(scale=parameters["scale"])
            )

        return PseudoMarginalMetropolis(
            dimension, covariance=parameters["scale"] ** 2 * np.eye(dimension)
        )

    proposal_class = TruncatedGaussianRProposal if parameters["truncated"] else GaussianRProposal
    return PseudoMarginalHamiltonianSlice(
        _ellipse(parameters, dimension),
        r_proposal=proposal_class(sigma=parameters["sigma"], zeta=parameters["zeta"]),
    )
