"""Loading scenario documents and turning them into graphs, parameters, systems and initial states."""
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from src.constants import Numerics
from src.dynamics import (
    InputSchedule,
    OpinionSystem,
    ScheduleSegment,
    SystemBase,
    TensorSystem,
    TwoOptionSystem,
)
from src.feedback import AttentionParams, AttentionSystem, CouplingFeedbackParams, TransitionSystem
from src.graph import AdjacencySpec, build_graph, clustered_graph, validate_partition
from src.model import (
    TANH,
    ModelParams,
    SaturationFamily,
    SaturationSpec,
    TwoOptionParams,
    consensus_params,
    signed_consensus_params,
    tensor_from_params,
)
from src.schemas import (
    AttentionConfig,
    GraphConfig,
    ModelConfig,
    RandomInitial,
    SaturationConfig,
    ScenarioConfig,
)
from src.utils.errors import ParameterError

log = logging.getLogger(__name__)

Params = Union[ModelParams, TwoOptionParams]


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """Read and validate a YAML scenario document."""
    with Path(path).open() as file:
        document = yaml.safe_load(file)
    if not isinstance(document, dict):
        raise ParameterError("scenario", str(path), "the document must be a mapping")
    return ScenarioConfig.parse_obj(document)


def dump_scenario(config: ScenarioConfig, path: Union[str, Path]) -> None:
    # through JSON so that enums come out as plain strings
    document = json.loads(config.json(exclude_none=True))
    with Path(path).open("w") as file:
        yaml.safe_dump(document, file, sort_keys=False)


def build_adjacency(graph: GraphConfig) -> AdjacencySpec:
    if graph.clusters is not None:
        clusters = graph.clusters
        return clustered_graph(clusters.sizes, clusters.within * graph.weight, clusters.across * graph.weight)
    return build_graph(graph.kind, graph.n, graph.weight, graph.matrix)


def build_saturation(config: Optional[SaturationConfig], default: SaturationSpec) -> SaturationSpec:
    if config is None:
        return default
    return SaturationSpec(
        config.family,
        config.k1,
        config.k2,
        None if config.table_x is None else tuple(config.table_x),
        None if config.table_y is None else tuple(config.table_y),
    )


def _coupling_matrix(value: Union[float, list[list[float]]], adjacency: AdjacencySpec) -> np.ndarray:
    if isinstance(value, list):
        return np.array(value, dtype=float)
    return value * adjacency.entries


def _general_inputs(b: Union[float, list[float], list[list[float]]], n_agents: int, n_options: int) -> np.ndarray:
    values = np.asarray(b, dtype=float)
    if values.ndim == 1 and values.shape != (n_options,):
        raise ParameterError("model.b", values.shape, f"a single row of inputs needs {n_options} entries")
    return np.broadcast_to(values, (n_agents, n_options)).copy()


def build_params(model: ModelConfig, adjacency: AdjacencySpec) -> Params:
    """Parameters of the configured model form, specializations taking the scalar attention."""
    if model.specialization != "none":
        if isinstance(model.u, list):
            raise ParameterError("model.u", model.u, "specializations take a single attention value")
        if model.specialization == "consensus":
            params = consensus_params(adjacency, model.u)
        else:
            params = signed_consensus_params(
                adjacency, model.u, linear=model.specialization == "linear_signed_consensus"
            )
        return params.with_inputs(np.broadcast_to(np.asarray(model.b, dtype=float), (adjacency.n_agents,)))

    n = adjacency.n_agents
    gamma = _coupling_matrix(model.gamma, adjacency)
    delta = _coupling_matrix(model.delta, adjacency)
    per_agent = {name: getattr(model, name) for name in ("d", "u", "alpha", "beta")}
    if model.form == "two_option":
        if np.ndim(model.b) > 1:
            raise ParameterError("model.b", np.shape(model.b), "two-option inputs have one entry per agent")
        return TwoOptionParams(
            **{name: np.broadcast_to(np.asarray(value, dtype=float), (n,)) for name, value in per_agent.items()},
            gamma=gamma,
            delta=delta,
            b=np.broadcast_to(np.asarray(model.b, dtype=float), (n,)),
            s1=build_saturation(model.s1, TANH),
            s2=build_saturation(model.s2, TANH),
        )

    default = SaturationSpec(SaturationFamily.ASYMMETRIC_LOGISTIC)
    return ModelParams(
        **{name: np.broadcast_to(np.asarray(value, dtype=float), (n,)) for name, value in per_agent.items()},
        gamma=gamma,
        delta=delta,
        b=_general_inputs(model.b, n, model.n_options),
        s1=build_saturation(model.s1, default),
        s2=build_saturation(model.s2, default),
    )


def perturb_params(params: Params, adjacency: AdjacencySpec, std: float, rng: np.random.Generator) -> Params:
    """Add independent N(0, std^2) noise to alpha and beta of every agent and to gamma and delta on every edge."""
    n = adjacency.n_agents
    edges = adjacency.entries != 0
    updates: dict[str, np.ndarray] = {
        name: getattr(params, name) + rng.normal(0.0, std, n) for name in ("alpha", "beta")
    }
    for name in ("gamma", "delta"):
        updates[name] = getattr(params, name) + np.where(edges, rng.normal(0.0, std, (n, n)), 0.0)
    if isinstance(params, ModelParams):
        updates["b"] = params.b_raw
    return replace(params, **updates)


def build_attention(config: AttentionConfig) -> AttentionParams:
    return AttentionParams(
        tau_u=config.tau_u,
        n_hill=config.n_hill,
        y_th=config.y_th,
        u_low=config.u_low,
        u_high=config.u_high,
        attention_adjacency=None if config.attention_adjacency is None else np.array(config.attention_adjacency),
    )


def build_system(config: ScenarioConfig, adjacency: AdjacencySpec, params: Params) -> SystemBase:
    """The integrable system of a scenario, feedback blocks wrapped around the opinion system."""
    if isinstance(params, TwoOptionParams):
        opinions = TwoOptionSystem(params)
    elif config.model.form == "tensor":
        opinions = TensorSystem(tensor_from_params(params), params.d, params.u, params.b)
    else:
        opinions = OpinionSystem(params)
    if config.attention is None:
        return opinions

    ap = build_attention(config.attention)
    matrix = ap.matrix_for(adjacency)
    if config.coupling is None:
        return AttentionSystem(opinions, ap, matrix)

    coupling = config.coupling
    cp = CouplingFeedbackParams(
        partition=validate_partition(coupling.partition, adjacency.n_agents),
        tau_gamma=coupling.tau_gamma,
        tau_delta=coupling.tau_delta,
        gamma_f=coupling.gamma_f,
        delta_f=coupling.delta_f,
        g_gamma=coupling.g_gamma,
        g_delta=coupling.g_delta,
        sigma=coupling.sigma,
        drive=coupling.drive,
    )
    if not isinstance(opinions, TwoOptionSystem):
        raise ParameterError("coupling", config.model.form, "coupling feedback needs the two_option form")
    return TransitionSystem(opinions, ap, matrix, cp)


def build_schedule(config: ScenarioConfig) -> Optional[InputSchedule]:
    if not config.schedule:
        return None
    return InputSchedule(
        tuple(
            ScheduleSegment(
                entry.t_start,
                b=None if entry.b is None else np.array(entry.b, dtype=float),
                sigma=entry.sigma,
                tag=entry.tag,
            )
            for entry in config.schedule
        )
    )


def _draw(spec: RandomInitial, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    if spec.distribution == "uniform":
        return rng.uniform(spec.low, spec.high, size=shape)
    return rng.normal(spec.mean, spec.std, size=shape)


def build_initial_state(config: ScenarioConfig, system: SystemBase, rng: np.random.Generator) -> np.ndarray:
    """
    Flat initial state: explicit or random opinions (neutral by default) followed by the feedback variables.

    Attention starts at u_low and the coupling gains at 0 unless configured. Random draws happen in a fixed
    order (opinions, u, gamma, delta) so a seed always gives the same state.
    """
    initial = config.initial
    shape = system.layout.opinion_shape
    if initial.opinions is not None:
        opinions = np.array(initial.opinions, dtype=float)
    elif initial.random is not None:
        opinions = _draw(initial.random, shape, rng)
    else:
        opinions = np.zeros(shape)

    extras: dict[str, np.ndarray] = {}
    for name in system.layout.extras:
        value = getattr(initial, name)
        if isinstance(value, RandomInitial):
            extras[name] = _draw(value, (system.n_agents,), rng)
        elif value is not None:
            extras[name] = np.broadcast_to(np.asarray(value, dtype=float), (system.n_agents,))
        elif name == "u" and config.attention is not None:
            extras[name] = np.full(system.n_agents, config.attention.u_low)
        else:
            extras[name] = np.zeros(system.n_agents)
    return system.initial_state(opinions, **extras)


@dataclass(frozen=True)
class Scenario:
    """A scenario document with every domain object built from it."""

    config: ScenarioConfig
    adjacency: AdjacencySpec
    params: Params
    system: SystemBase
    schedule: Optional[InputSchedule]
    initial_state: np.ndarray
    dt: float

    @property
    def t_end(self) -> float:
        return self.config.integration.t_end

    @property
    def partition(self) -> Optional[tuple[tuple[int, ...], ...]]:
        partition = self.config.analysis.partition
        return None if partition is None else validate_partition(partition, self.adjacency.n_agents)


def build_scenario(config: ScenarioConfig, *, seed: Optional[int] = None, dt: Optional[float] = None) -> Scenario:
    """
    Build a scenario, `seed` and `dt` overriding the document.

    A document without a seed gets fresh entropy, which is written back into the config so the run
    records the seed it used.
    """
    updates: dict[str, object] = {}
    if seed is not None:
        updates["seed"] = seed
    elif config.seed is None:
        updates["seed"] = np.random.SeedSequence().entropy
        log.info(f"Scenario {config.name!r} has no seed, drew seed={updates['seed']}")
    if dt is not None:
        updates["integration"] = config.integration.copy(update={"dt": dt})
    if updates:
        config = config.copy(update=updates)

    adjacency = build_adjacency(config.graph)
    params = build_params(config.model, adjacency)
    rng = np.random.default_rng(config.seed)
    if config.model.perturbation is not None:
        params = perturb_params(params, adjacency, config.model.perturbation.std, rng)
    system = build_system(config, adjacency, params)
    initial_state = build_initial_state(config, system, rng)
    step = config.integration.dt if config.integration.dt is not None else Numerics.DT
    log.debug(f"Built scenario {config.name!r}: {system.describe()}, {step=}")
    return Scenario(config, adjacency, params, system, build_schedule(config), initial_state, step)
