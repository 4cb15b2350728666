import logging
from typing import Optional

import numpy as np

from src.dynamics.abc import OpinionSystemBase, StateLayout
from src.model import (
    AdjacencyTensor,
    ModelParams,
    TwoOptionParams,
    vector_field,
    vector_field_tensor,
    vector_field_two_option,
)
from src.utils.errors import DimensionError, ParameterError

log = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("u", "b_scale")


def _check_parameter(name: str) -> None:
    if name not in SWEEP_PARAMETERS:
        raise ParameterError("parameter", name, f"sweepable parameters are {', '.join(SWEEP_PARAMETERS)}")


class OpinionSystem(OpinionSystemBase):
    """The general model dZ/dt = P_0 F(Z)."""

    def __init__(self, params: ModelParams, *, base_inputs: Optional[np.ndarray] = None):
        super().__init__(layout=StateLayout(params.n_agents, params.n_options, two_option=False))
        self.params = params
        self.base_inputs = params.b_raw if base_inputs is None else base_inputs

    def opinion_field(
        self,
        opinions: np.ndarray,
        *,
        u: Optional[np.ndarray] = None,
        gamma: Optional[np.ndarray] = None,
        delta: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        return vector_field(opinions, self.params, u=u, gamma=gamma, delta=delta)

    def with_inputs(self, b: np.ndarray) -> "OpinionSystem":
        return OpinionSystem(self.params.with_inputs(b))

    def with_parameter(self, name: str, value: float) -> "OpinionSystem":
        _check_parameter(name)
        if name == "u":
            return OpinionSystem(self.params.with_attention(value), base_inputs=self.base_inputs)
        return OpinionSystem(self.params.with_inputs(value * self.base_inputs), base_inputs=self.base_inputs)

    @property
    def upper_bound(self) -> float:
        return self.params.s1.k2

    @property
    def attention(self) -> np.ndarray:
        return self.params.u


class TensorSystem(OpinionSystemBase):
    """The adjacency tensor form of the general model."""

    def __init__(self, tensor: AdjacencyTensor, d: np.ndarray, u: np.ndarray, b: np.ndarray):
        super().__init__(layout=StateLayout(tensor.n_agents, tensor.n_options, two_option=False))
        self.tensor = tensor
        self.d = np.broadcast_to(np.asarray(d, dtype=float), (tensor.n_agents,))
        self.u = np.broadcast_to(np.asarray(u, dtype=float), (tensor.n_agents,))
        self.b = np.broadcast_to(np.asarray(b, dtype=float), (tensor.n_agents, tensor.n_options))

    def opinion_field(
        self,
        opinions: np.ndarray,
        *,
        u: Optional[np.ndarray] = None,
        gamma: Optional[np.ndarray] = None,
        delta: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        if gamma is not None or delta is not None:
            raise ParameterError("gamma", "override", "tensor systems carry their couplings in the tensor")
        return vector_field_tensor(opinions, self.tensor, self.d, self.u if u is None else u, self.b)

    def with_inputs(self, b: np.ndarray) -> "TensorSystem":
        return TensorSystem(self.tensor, self.d, self.u, b)

    def with_parameter(self, name: str, value: float) -> "TensorSystem":
        _check_parameter(name)
        if name == "u":
            return TensorSystem(self.tensor, self.d, np.full(self.n_agents, value), self.b)
        return TensorSystem(self.tensor, self.d, self.u, value * self.b)

    @property
    def upper_bound(self) -> float:
        return self.tensor.s1.k2

    @property
    def attention(self) -> np.ndarray:
        return self.u


class TwoOptionSystem(OpinionSystemBase):
    """
    The two-option reduction dx/dt = -d x + u (S1^(...) - S2^(...)) + b.

    Besides the input stored in the parameters, the system can carry a batch of inputs of shape
    (..., n_agents), one row per trial of a batched integration.
    """

    def __init__(
        self,
        params: TwoOptionParams,
        *,
        batch_inputs: Optional[np.ndarray] = None,
        base_inputs: Optional[np.ndarray] = None,
    ):
        super().__init__(layout=StateLayout(params.n_agents, 2, two_option=True))
        self.params = params
        self.batch_inputs = batch_inputs
        self.base_inputs = params.b if base_inputs is None else base_inputs

    def opinion_field(
        self,
        opinions: np.ndarray,
        *,
        u: Optional[np.ndarray] = None,
        gamma: Optional[np.ndarray] = None,
        delta: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        return vector_field_two_option(opinions, self.params, u=u, gamma=gamma, delta=delta, b=self.batch_inputs)

    def with_inputs(self, b: np.ndarray) -> "TwoOptionSystem":
        b = np.asarray(b, dtype=float)
        if b.shape[-1:] != (self.n_agents,):
            raise DimensionError("b", (self.n_agents,), b.shape)
        if b.ndim == 1:
            return TwoOptionSystem(self.params.with_inputs(b))
        return TwoOptionSystem(self.params, batch_inputs=b, base_inputs=self.base_inputs)

    def with_parameter(self, name: str, value: float) -> "TwoOptionSystem":
        _check_parameter(name)
        if name == "u":
            return TwoOptionSystem(self.params.with_attention(value), base_inputs=self.base_inputs)
        return TwoOptionSystem(self.params.with_inputs(value * self.base_inputs), base_inputs=self.base_inputs)

    @property
    def upper_bound(self) -> float:
        return self.params.s1.k2

    @property
    def attention(self) -> np.ndarray:
        return self.params.u


def opinion_system(params: ModelParams | TwoOptionParams) -> OpinionSystem | TwoOptionSystem:
    """Wrap a parameter set into the matching integrable system."""
    if isinstance(params, TwoOptionParams):
        return TwoOptionSystem(params)
    return OpinionSystem(params)
