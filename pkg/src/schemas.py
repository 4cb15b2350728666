from typing import Literal, Optional, Union

from pydantic import BaseModel, validator

from src.feedback.coupling import CouplingDrive
from src.graph import GraphKind
from src.model import SaturationFamily

PerAgent = Union[float, list[float]]
Matrix = list[list[float]]


class StrictModel(BaseModel):
    class Config:
        extra = "forbid"


# region: Graph


class ClusteredGraph(StrictModel):
    sizes: list[int]
    within: float
    across: float


class GraphConfig(StrictModel):
    kind: GraphKind = GraphKind.CUSTOM
    n: Optional[int] = None
    weight: float = 1.0
    matrix: Optional[Matrix] = None
    clusters: Optional[ClusteredGraph] = None

    @validator("clusters")
    def clusters_need_custom_kind(cls, value: Optional[ClusteredGraph], values: dict) -> Optional[ClusteredGraph]:
        if value is not None and (values.get("kind") is not GraphKind.CUSTOM or values.get("matrix") is not None):
            raise ValueError("clusters replace the matrix of a custom graph")
        return value


# endregion
# region: Model


class SaturationConfig(StrictModel):
    family: SaturationFamily = SaturationFamily.ODD_TANH
    k1: Optional[float] = None
    k2: Optional[float] = None
    table_x: Optional[list[float]] = None
    table_y: Optional[list[float]] = None


class PerturbationConfig(StrictModel):
    # standard deviation of the additive normal noise
    std: float

    @validator("std")
    def positive_std(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("the perturbation std must be positive")
        return value


class ModelConfig(StrictModel):
    form: Literal["general", "two_option", "tensor"] = "two_option"
    specialization: Literal["none", "consensus", "signed_consensus", "linear_signed_consensus"] = "none"
    n_options: int = 2
    d: PerAgent = 1.0
    u: PerAgent = 1.0
    alpha: PerAgent = 0.0
    beta: PerAgent = 0.0
    # scalars multiply the adjacency matrix, matrices are used as given
    gamma: Union[float, Matrix] = 0.0
    delta: Union[float, Matrix] = 0.0
    b: Union[float, list[float], Matrix] = 0.0
    s1: Optional[SaturationConfig] = None
    s2: Optional[SaturationConfig] = None
    perturbation: Optional[PerturbationConfig] = None

    @validator("n_options")
    def at_least_two_options(cls, value: int) -> int:
        if value < 2:
            raise ValueError("at least two options are required")
        return value


# endregion
# region: Feedback


class AttentionConfig(StrictModel):
    tau_u: float = 1.0
    n_hill: float = 2.0
    y_th: float = 1.0
    u_low: float = 0.0
    u_high: float = 1.0
    attention_adjacency: Optional[Matrix] = None


class CouplingConfig(StrictModel):
    partition: list[list[int]]
    tau_gamma: float = 100.0
    tau_delta: float = 100.0
    gamma_f: float = 1.0
    delta_f: float = 1.0
    g_gamma: float = 1.0
    g_delta: float = 1.0
    sigma: Literal[-1, 1] = 1
    drive: CouplingDrive = CouplingDrive.PRODUCT


# endregion
# region: Runs


class ScheduleEntry(StrictModel):
    t_start: float
    b: Optional[Union[list[float], Matrix]] = None
    sigma: Optional[Literal[-1, 1]] = None
    tag: str = ""


class RandomInitial(StrictModel):
    distribution: Literal["uniform", "normal"] = "uniform"
    low: float = -1.0
    high: float = 1.0
    mean: float = 0.0
    std: float = 1.0


class InitialConfig(StrictModel):
    opinions: Optional[Union[list[float], Matrix]] = None
    random: Optional[RandomInitial] = None
    # feedback variables, explicit per-agent values or random draws
    u: Optional[Union[float, list[float], RandomInitial]] = None
    gamma: Optional[Union[float, list[float], RandomInitial]] = None
    delta: Optional[Union[float, list[float], RandomInitial]] = None

    @validator("random")
    def one_source(cls, value: Optional[RandomInitial], values: dict) -> Optional[RandomInitial]:
        if value is not None and values.get("opinions") is not None:
            raise ValueError("give either explicit or random initial opinions")
        return value


class IntegrationConfig(StrictModel):
    t_end: float = 100.0
    dt: Optional[float] = None
    record_every: int = 10

    @validator("t_end")
    def positive_end(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("t_end must be positive")
        return value


class AnalysisConfig(StrictModel):
    partition: Optional[list[list[int]]] = None
    strong_threshold: Optional[float] = None


class OutputConfig(StrictModel):
    directory: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    plot: bool = True


# endregion


class ScenarioConfig(StrictModel):
    """A complete scenario document; see docs/scenario.md for the units and defaults of every field."""

    name: str = "scenario"
    seed: Optional[int] = None
    graph: GraphConfig
    model: ModelConfig = ModelConfig()
    attention: Optional[AttentionConfig] = None
    coupling: Optional[CouplingConfig] = None
    schedule: list[ScheduleEntry] = []
    initial: InitialConfig = InitialConfig()
    integration: IntegrationConfig = IntegrationConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    output: OutputConfig = OutputConfig()

    @validator("coupling")
    def coupling_needs_attention(cls, value: Optional[CouplingConfig], values: dict) -> Optional[CouplingConfig]:
        if value is not None and values.get("attention") is None:
            raise ValueError("coupling feedback runs on top of the attention dynamics, add an attention block")
        return value
