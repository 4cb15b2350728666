"""
Attention dynamics: every agent's attention is a leaky integrator driven by the opinions it listens to.

    tau_u du_i/dt = -u_i + S_u(y_i),    y_i = 1/N_o sum_k sum_l (abar_ik z_kl)^2

For two-option systems y_i = sum_k (abar_ik x_k)^2, without the 1/N_o factor. S_u is the Hill function
S_u(y) = u_low + (u_high - u_low) y^n / (y_th^n + y^n).
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from src.dynamics.abc import OpinionSystemBase, StateLayout, SystemBase
from src.dynamics.systems import SWEEP_PARAMETERS
from src.graph import AdjacencySpec, frozen_array
from src.utils.errors import DimensionError, ParameterError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttentionParams:
    tau_u: float
    n_hill: float
    y_th: float
    u_low: float
    u_high: float
    attention_adjacency: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        for name in ("tau_u", "n_hill", "y_th"):
            if getattr(self, name) <= 0:
                raise ParameterError(name, getattr(self, name), "must be positive")
        if self.u_low < 0:
            raise ParameterError("u_low", self.u_low, "attention must be nonnegative")
        if self.u_high <= self.u_low:
            raise ParameterError("u_high", self.u_high, f"must exceed u_low = {self.u_low}")
        if self.attention_adjacency is not None:
            matrix = frozen_array(self.attention_adjacency, field="attention_adjacency")
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ParameterError("attention_adjacency", matrix.shape, "expected a square matrix")
            object.__setattr__(self, "attention_adjacency", matrix)

    def matrix_for(self, adjacency: Union[AdjacencySpec, np.ndarray]) -> np.ndarray:
        """The attention adjacency to use on a graph, A + I unless one was configured."""
        if self.attention_adjacency is None:
            return default_attention_adjacency(adjacency)
        n = adjacency.n_agents if isinstance(adjacency, AdjacencySpec) else np.shape(adjacency)[0]
        if self.attention_adjacency.shape != (n, n):
            raise DimensionError("attention_adjacency", (n, n), self.attention_adjacency.shape)
        return self.attention_adjacency

    def brackets(self, u_star: float) -> bool:
        """Whether u_low <= u_star < u_high, the range where attention can switch an opinion cascade on and off."""
        return self.u_low <= u_star < self.u_high


def default_attention_adjacency(adjacency: Union[AdjacencySpec, np.ndarray]) -> np.ndarray:
    entries = adjacency.entries if isinstance(adjacency, AdjacencySpec) else np.asarray(adjacency, dtype=float)
    return entries + np.eye(entries.shape[0])


def _check_drive(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ParameterError("y", float(np.min(y)), "the Hill function is only defined for nonnegative arguments")
    return y


def hill_eval(ap: AttentionParams, y: Union[float, np.ndarray]) -> np.ndarray:
    y = _check_drive(y)
    power = y**ap.n_hill
    return ap.u_low + (ap.u_high - ap.u_low) * power / (ap.y_th**ap.n_hill + power)


def hill_derivative(ap: AttentionParams, y: Union[float, np.ndarray]) -> np.ndarray:
    y = _check_drive(y)
    threshold = ap.y_th**ap.n_hill
    with np.errstate(divide="ignore"):
        numerator = ap.n_hill * threshold * y ** (ap.n_hill - 1)
    return (ap.u_high - ap.u_low) * numerator / (threshold + y**ap.n_hill) ** 2


def attention_drive(opinions: np.ndarray, attention_adjacency: np.ndarray, *, two_option: bool) -> np.ndarray:
    """The Hill argument y_i of every agent, batched over leading dimensions."""
    weights = np.asarray(attention_adjacency, dtype=float) ** 2
    if two_option:
        return np.asarray(opinions) ** 2 @ weights.T
    n_options = opinions.shape[-1]
    return np.sum(np.asarray(opinions) ** 2, axis=-1) @ weights.T / n_options


def attention_field(
    opinions: np.ndarray,
    u: np.ndarray,
    ap: AttentionParams,
    attention_adjacency: np.ndarray,
    *,
    two_option: bool,
) -> np.ndarray:
    y = attention_drive(opinions, attention_adjacency, two_option=two_option)
    return (-u + hill_eval(ap, y)) / ap.tau_u


class AttentionSystem(SystemBase):
    """An opinion system whose attention gains follow the attention dynamics instead of being fixed."""

    extras: tuple[str, ...] = ("u",)

    def __init__(
        self,
        opinions: OpinionSystemBase,
        ap: AttentionParams,
        attention_adjacency: np.ndarray,
        *,
        sigma: int = 1,
    ):
        layout = StateLayout(opinions.n_agents, opinions.n_options, opinions.layout.two_option, self.extras)
        super().__init__(layout=layout, sigma=sigma)
        self.opinions = opinions
        self.ap = ap
        self.attention_adjacency = np.asarray(attention_adjacency, dtype=float)
        if self.attention_adjacency.shape != (self.n_agents, self.n_agents):
            raise DimensionError("attention_adjacency", (self.n_agents, self.n_agents), self.attention_adjacency.shape)

    def _pack_derivative(self, opinions: np.ndarray, *extras: np.ndarray) -> np.ndarray:
        batch = opinions.shape[: opinions.ndim - len(self.layout.opinion_shape)]
        return np.concatenate([opinions.reshape(batch + (self.layout.opinion_size,)), *extras], axis=-1)

    def field(self, y: np.ndarray) -> np.ndarray:
        z = self.layout.opinions(y)
        u = self.layout.extra(y, "u")
        dz = self.opinions.opinion_field(z, u=u)
        du = attention_field(z, u, self.ap, self.attention_adjacency, two_option=self.layout.two_option)
        return self._pack_derivative(dz, du)

    def rest_state(self, u0: Optional[float] = None) -> np.ndarray:
        """Neutral opinions with every attention at `u0` (u_low by default)."""
        u0 = self.ap.u_low if u0 is None else u0
        return self.initial_state(np.zeros(self.layout.opinion_shape), u=np.full(self.n_agents, u0))

    def _rebuild(self, opinions: OpinionSystemBase) -> "AttentionSystem":
        return AttentionSystem(opinions, self.ap, self.attention_adjacency)

    def with_inputs(self, b: np.ndarray) -> "AttentionSystem":
        return self._rebuild(self.opinions.with_inputs(b))

    def with_parameter(self, name: str, value: float) -> "AttentionSystem":
        if name == "u":
            raise ParameterError("parameter", name, "attention is a state variable of attention-coupled systems")
        if name not in SWEEP_PARAMETERS:
            raise ParameterError("parameter", name, f"sweepable parameters are {', '.join(SWEEP_PARAMETERS)}")
        return self._rebuild(self.opinions.with_parameter(name, value))

    def strong_threshold(self) -> float:
        return 0.3 * self.opinions.upper_bound * self.ap.u_high

    def describe(self) -> str:
        return f"{type(self).__name__}({self.opinions.describe()}, tau_u={self.ap.tau_u})"
