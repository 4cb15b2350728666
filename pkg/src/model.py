"""
Opinion state, saturation functions, parameters and the vector fields of the opinion model.

Every field accepts arrays with arbitrary leading batch dimensions: a general state has shape
(..., n_agents, n_options), a two-option state (..., n_agents). Parameter objects are frozen and hold
read-only arrays, new values are made with `dataclasses.replace` or the `with_*` helpers.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Optional, Union

import numpy as np
import scipy.linalg
import scipy.special
from scipy.interpolate import PchipInterpolator

from src.graph import AdjacencySpec, frozen_array
from src.utils.errors import DimensionError, Hypothesis, HypothesisError, ParameterError

log = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray, list]

_FD_STEP = 1e-6
_SLOPE_TOL = 1e-9


def project_tangent(v: ArrayLike) -> np.ndarray:
    """Apply P_0 = I - 11^T/N_o along the last axis (remove each row's mean)."""
    v = np.asarray(v, dtype=float)
    return v - v.mean(axis=-1, keepdims=True)


# region: Saturations


class SaturationFamily(str, Enum):
    ODD_TANH = "odd_tanh"
    ASYMMETRIC_LOGISTIC = "asymmetric_logistic"
    CUSTOM_TABLE = "custom_table"
    LINEAR = "linear"


_DEFAULT_BOUNDS = {
    SaturationFamily.ODD_TANH: (1.0, 1.0),
    SaturationFamily.ASYMMETRIC_LOGISTIC: (0.8, 1.2),
    SaturationFamily.CUSTOM_TABLE: (1.0, 1.0),
    SaturationFamily.LINEAR: (np.inf, np.inf),
}


@dataclass(frozen=True)
class SaturationSpec:
    """
    A sigmoid S with S(0) = 0, S'(0) = 1 and range [-k1, k2].

    odd_tanh is k*tanh(y/k) (k1 == k2 required), asymmetric_logistic is (k1+k2)*sigmoid(B*y + y0) - k1 with
    B = (k1+k2)/(k1*k2) and sigmoid(y0) = k1/(k1+k2), custom_table is a monotone cubic through the
    points (table_x, table_y) held constant outside them. linear is the identity and only serves the
    linear comparison model.
    """

    family: SaturationFamily = SaturationFamily.ODD_TANH
    k1: Optional[float] = None
    k2: Optional[float] = None
    table_x: Optional[tuple[float, ...]] = None
    table_y: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        family = SaturationFamily(self.family)
        object.__setattr__(self, "family", family)
        default_k1, default_k2 = _DEFAULT_BOUNDS[family]
        object.__setattr__(self, "k1", float(default_k1 if self.k1 is None else self.k1))
        object.__setattr__(self, "k2", float(default_k2 if self.k2 is None else self.k2))
        if family is SaturationFamily.LINEAR:
            return

        if self.k1 <= 0 or self.k2 <= 0:
            raise ParameterError("saturation", (self.k1, self.k2), "k1 and k2 must be positive")
        if family is SaturationFamily.ODD_TANH and self.k1 != self.k2:
            raise ParameterError("saturation", (self.k1, self.k2), "odd_tanh is symmetric, k1 must equal k2")
        if family is SaturationFamily.CUSTOM_TABLE:
            self._validate_table()
        self._validate_shape()

    def _validate_table(self) -> None:
        if self.table_x is None or self.table_y is None or len(self.table_x) != len(self.table_y):
            raise ParameterError("saturation.table", (self.table_x, self.table_y), "x and y of equal length needed")
        if len(self.table_x) < 3 or np.any(np.diff(self.table_x) <= 0):
            raise ParameterError("saturation.table_x", self.table_x, "at least 3 strictly increasing points")
        if np.any(np.diff(self.table_y) <= 0):
            raise ParameterError("saturation.table_y", self.table_y, "a saturation must be strictly increasing")
        object.__setattr__(self, "table_x", tuple(float(x) for x in self.table_x))
        object.__setattr__(self, "table_y", tuple(float(y) for y in self.table_y))
        object.__setattr__(self, "k1", -self.table_y[0])
        object.__setattr__(self, "k2", self.table_y[-1])

    def _validate_shape(self) -> None:
        """Check S(0) = 0, S'(0) = 1, the range and (for asymmetric bounds) S''(0) != 0 numerically."""
        at_zero = float(self.eval(0.0))
        if self.family is SaturationFamily.CUSTOM_TABLE:
            # the interpolant is only piecewise cubic, a central difference across 0 picks up its curvature
            slope = float(self.derivative(0.0))
        else:
            slope = float((self.eval(_FD_STEP) - self.eval(-_FD_STEP)) / (2 * _FD_STEP))
        if abs(at_zero) > _SLOPE_TOL:
            raise ParameterError("saturation", self.family.value, f"S(0) = {at_zero}, must vanish")
        if abs(slope - 1) > _SLOPE_TOL:
            raise ParameterError("saturation", self.family.value, f"S'(0) = {slope}, must be 1")

        grid = np.linspace(-50, 50, 2001)
        values = self.eval(grid)
        if np.any(values < -self.k1 - 1e-12) or np.any(values > self.k2 + 1e-12):
            raise ParameterError("saturation", self.family.value, "values leave the range [-k1, k2]")

        if self.family is SaturationFamily.ASYMMETRIC_LOGISTIC and self.k1 != self.k2:
            if abs(self.second_derivative_at_zero()) <= 1e-6:
                raise ParameterError("saturation", self.family.value, "S''(0) must not vanish for k1 != k2")

    @cached_property
    def _table(self) -> PchipInterpolator:
        return PchipInterpolator(np.array(self.table_x), np.array(self.table_y), extrapolate=False)

    @property
    def bound(self) -> float:
        """max(k1, k2), the bound on |S|."""
        return max(self.k1, self.k2)

    def eval(self, y: ArrayLike) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.family is SaturationFamily.ODD_TANH:
            return self.k1 * np.tanh(y / self.k1)
        if self.family is SaturationFamily.ASYMMETRIC_LOGISTIC:
            total = self.k1 + self.k2
            slope = total / (self.k1 * self.k2)
            return total * scipy.special.expit(slope * y + np.log(self.k1 / self.k2)) - self.k1
        if self.family is SaturationFamily.CUSTOM_TABLE:
            clipped = np.clip(y, self.table_x[0], self.table_x[-1])
            return self._table(clipped)
        return y.copy()

    def derivative(self, y: ArrayLike) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.family is SaturationFamily.ODD_TANH:
            return 1.0 - np.tanh(y / self.k1) ** 2
        if self.family is SaturationFamily.ASYMMETRIC_LOGISTIC:
            total = self.k1 + self.k2
            slope = total / (self.k1 * self.k2)
            sigma = scipy.special.expit(slope * y + np.log(self.k1 / self.k2))
            return total * slope * sigma * (1 - sigma)
        if self.family is SaturationFamily.CUSTOM_TABLE:
            inside = (y >= self.table_x[0]) & (y <= self.table_x[-1])
            return np.where(inside, self._table.derivative()(np.clip(y, self.table_x[0], self.table_x[-1])), 0.0)
        return np.ones_like(y)

    def second_derivative_at_zero(self, step: float = 1e-4) -> float:
        return float((self.eval(step) - 2 * self.eval(0.0) + self.eval(-step)) / step**2)

    def odd_eval(self, y: ArrayLike) -> np.ndarray:
        """The odd part (S(y) - S(-y)) / 2 used by the two-option reduction."""
        y = np.asarray(y, dtype=float)
        if self.family in (SaturationFamily.ODD_TANH, SaturationFamily.LINEAR):
            return self.eval(y)
        return 0.5 * (self.eval(y) - self.eval(-y))

    def odd_derivative(self, y: ArrayLike) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return 0.5 * (self.derivative(y) + self.derivative(-y))

    def max_slope(self) -> float:
        """Supremum of S' (the right end of the interval the cluster condition takes its sup over)."""
        if self.family is SaturationFamily.ODD_TANH or self.family is SaturationFamily.LINEAR:
            return 1.0
        if self.family is SaturationFamily.ASYMMETRIC_LOGISTIC:
            return (self.k1 + self.k2) ** 2 / (4 * self.k1 * self.k2)
        grid = np.linspace(self.table_x[0], self.table_x[-1], 4001)
        return float(np.max(self.derivative(grid)))


def saturation_eval(s: SaturationSpec, y: ArrayLike) -> np.ndarray:
    return s.eval(y)


def saturation_derivative(s: SaturationSpec, y: ArrayLike) -> np.ndarray:
    return s.derivative(y)


TANH = SaturationSpec(SaturationFamily.ODD_TANH)
LINEAR = SaturationSpec(SaturationFamily.LINEAR)


# endregion
# region: State and parameters


@dataclass(frozen=True)
class OpinionState:
    """Stacked agent opinions z_ij, every row summing to zero."""

    z: np.ndarray

    def __post_init__(self) -> None:
        z = frozen_array(self.z, field="state", ndim=2)
        if z.shape[1] < 2:
            raise ParameterError("n_options", z.shape[1], "at least two options are required")
        drift = np.max(np.abs(z.sum(axis=1)))
        if drift > 1e-9:
            raise ParameterError("state", drift, "every agent's opinion must sum to zero")
        object.__setattr__(self, "z", z)

    @classmethod
    def from_raw(cls, z: ArrayLike) -> "OpinionState":
        """Build a state from arbitrary rows by projecting them onto the zero-sum subspace."""
        return cls(project_tangent(z))

    @classmethod
    def from_two_option(cls, x: ArrayLike) -> "OpinionState":
        x = np.asarray(x, dtype=float)
        return cls(np.stack([x, -x], axis=-1))

    @property
    def n_agents(self) -> int:
        return self.z.shape[0]

    @property
    def n_options(self) -> int:
        return self.z.shape[1]


def _per_agent(values: ArrayLike, n: int, name: str) -> np.ndarray:
    array = np.broadcast_to(np.asarray(values, dtype=float), (n,)) if np.ndim(values) == 0 else np.asarray(values)
    if array.shape != (n,):
        raise DimensionError(name, (n,), np.shape(values))
    return frozen_array(array, field=name)


def _square(values: ArrayLike, n: int, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.shape != (n, n):
        raise DimensionError(name, (n, n), array.shape)
    if np.any(np.diag(array) != 0):
        raise ParameterError(name, np.diag(array).tolist(), "self coupling belongs in alpha/beta, diagonal must be 0")
    return frozen_array(array, field=name)


def _validate_gains(d: np.ndarray, u: np.ndarray) -> None:
    if np.any(d <= 0):
        raise ParameterError("d", d.tolist(), "resistance must be positive")
    if np.any(u < 0):
        raise ParameterError("u", u.tolist(), "attention must be nonnegative")


@dataclass(frozen=True)
class ModelParams:
    """
    Parameters of the general model.

    `b` is given raw and stored projected (each agent's mean input removed), the raw value stays
    available as `b_raw` for reporting.
    """

    d: np.ndarray
    u: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    b: np.ndarray
    s1: SaturationSpec = field(default_factory=lambda: SaturationSpec(SaturationFamily.ASYMMETRIC_LOGISTIC))
    s2: SaturationSpec = field(default_factory=lambda: SaturationSpec(SaturationFamily.ASYMMETRIC_LOGISTIC))
    b_raw: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.ndim != 2:
            raise ParameterError("gamma", gamma.shape, "expected an n x n matrix")
        n = gamma.shape[0]
        object.__setattr__(self, "gamma", _square(gamma, n, "gamma"))
        object.__setattr__(self, "delta", _square(self.delta, n, "delta"))
        for name in ("d", "u", "alpha", "beta"):
            object.__setattr__(self, name, _per_agent(getattr(self, name), n, name))
        _validate_gains(self.d, self.u)

        b_raw = np.asarray(self.b, dtype=float)
        if b_raw.ndim != 2 or b_raw.shape[0] != n:
            raise ParameterError("b", b_raw.shape, f"expected an array of shape ({n}, n_options)")
        if b_raw.shape[1] < 2:
            raise ParameterError("n_options", b_raw.shape[1], "at least two options are required")
        object.__setattr__(self, "b_raw", frozen_array(b_raw, field="b"))
        object.__setattr__(self, "b", frozen_array(project_tangent(b_raw), field="b"))

        for name in ("s1", "s2"):
            if getattr(self, name).family is SaturationFamily.LINEAR:
                raise ParameterError(name, "linear", "the general model needs bounded saturations")

    @classmethod
    def homogeneous(
        cls,
        adjacency: AdjacencySpec,
        *,
        n_options: int,
        d: float = 1.0,
        u: float = 1.0,
        alpha: float = 0.0,
        beta: float = 0.0,
        gamma: float = 0.0,
        delta: float = 0.0,
        b: Optional[ArrayLike] = None,
        s1: Optional[SaturationSpec] = None,
        s2: Optional[SaturationSpec] = None,
    ) -> "ModelParams":
        """The homogeneous regime: scalar d, u, alpha, beta and Gamma = gamma*A, Delta = delta*A."""
        n = adjacency.n_agents
        inputs = np.zeros((n, n_options)) if b is None else np.broadcast_to(np.asarray(b, float), (n, n_options))
        default = SaturationSpec(SaturationFamily.ASYMMETRIC_LOGISTIC)
        return cls(
            d=np.full(n, d),
            u=np.full(n, u),
            alpha=np.full(n, alpha),
            beta=np.full(n, beta),
            gamma=gamma * adjacency.entries,
            delta=delta * adjacency.entries,
            b=np.array(inputs),
            s1=s1 or default,
            s2=s2 or default,
        )

    @property
    def n_agents(self) -> int:
        return self.gamma.shape[0]

    @property
    def n_options(self) -> int:
        return self.b.shape[1]

    @property
    def is_homogeneous(self) -> bool:
        return all(np.all(values == values[0]) for values in (self.d, self.u, self.alpha, self.beta))

    def with_attention(self, u: ArrayLike) -> "ModelParams":
        return replace(self, u=_per_agent(u, self.n_agents, "u"), b=self.b_raw)

    def with_inputs(self, b: ArrayLike) -> "ModelParams":
        return replace(self, b=np.broadcast_to(np.asarray(b, float), (self.n_agents, self.n_options)).copy())


@dataclass(frozen=True)
class TwoOptionParams:
    """
    Parameters of the two-option reduction x_i = z_i1 = -z_i2.

    The saturations enter through their odd parts. With `linear` set both saturations are replaced
    by the identity, which turns the model into the linear (signed) consensus protocol.
    """

    d: np.ndarray
    u: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    b: np.ndarray
    s1: SaturationSpec = TANH
    s2: SaturationSpec = TANH
    linear: bool = False

    def __post_init__(self) -> None:
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.ndim != 2:
            raise ParameterError("gamma", gamma.shape, "expected an n x n matrix")
        n = gamma.shape[0]
        object.__setattr__(self, "gamma", _square(gamma, n, "gamma"))
        object.__setattr__(self, "delta", _square(self.delta, n, "delta"))
        for name in ("d", "u", "alpha", "beta", "b"):
            object.__setattr__(self, name, _per_agent(getattr(self, name), n, name))
        _validate_gains(self.d, self.u)

        grid = np.linspace(-10, 10, 201)
        for name in ("s1", "s2"):
            spec: SaturationSpec = getattr(self, name)
            if np.max(np.abs(spec.odd_eval(-grid) + spec.odd_eval(grid))) > 1e-12:
                raise ParameterError(name, spec.family.value, "odd part is not odd")

    @classmethod
    def homogeneous(
        cls,
        adjacency: AdjacencySpec,
        *,
        d: float = 1.0,
        u: float = 1.0,
        alpha: float = 0.0,
        beta: float = 0.0,
        gamma: float = 0.0,
        delta: float = 0.0,
        b: ArrayLike = 0.0,
        s1: SaturationSpec = TANH,
        s2: SaturationSpec = TANH,
    ) -> "TwoOptionParams":
        n = adjacency.n_agents
        return cls(
            d=np.full(n, d),
            u=np.full(n, u),
            alpha=np.full(n, alpha),
            beta=np.full(n, beta),
            gamma=gamma * adjacency.entries,
            delta=delta * adjacency.entries,
            b=np.broadcast_to(np.asarray(b, float), (n,)).copy(),
            s1=s1,
            s2=s2,
        )

    @property
    def n_agents(self) -> int:
        return self.gamma.shape[0]

    @property
    def n_options(self) -> int:
        return 2

    @property
    def is_homogeneous(self) -> bool:
        return all(np.all(values == values[0]) for values in (self.d, self.u, self.alpha, self.beta))

    def with_attention(self, u: ArrayLike) -> "TwoOptionParams":
        return replace(self, u=_per_agent(u, self.n_agents, "u"))

    def with_inputs(self, b: ArrayLike) -> "TwoOptionParams":
        return replace(self, b=_per_agent(b, self.n_agents, "b"))

    def to_model_params(self) -> ModelParams:
        """Lift to the general model with two options (inputs (b, -b) per agent)."""
        if self.linear:
            raise ParameterError("linear", True, "the linear comparison model has no general form")
        return ModelParams(
            d=self.d,
            u=self.u,
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            delta=self.delta,
            b=np.stack([self.b, -self.b], axis=-1),
            s1=self.s1,
            s2=self.s2,
        )


def consensus_params(adjacency: AdjacencySpec, u: float = 1.0) -> TwoOptionParams:
    """Nonlinear consensus: alpha = 0, gamma_ik = a_ik >= 0 and d_i the in-degree."""
    if adjacency.signed:
        raise ParameterError("adjacency", "signed", "the consensus specialization needs nonnegative weights")
    degree = adjacency.entries.sum(axis=1)
    return TwoOptionParams(
        d=degree,
        u=np.full(adjacency.n_agents, u),
        alpha=np.zeros(adjacency.n_agents),
        beta=np.zeros(adjacency.n_agents),
        gamma=adjacency.entries,
        delta=np.zeros_like(adjacency.entries),
        b=np.zeros(adjacency.n_agents),
    )


def signed_consensus_params(adjacency: AdjacencySpec, u: float = 1.0, *, linear: bool = False) -> TwoOptionParams:
    """
    Consensus with antagonistic interactions: alpha = 0, signed gamma_ik = a_ik, d_i = sum_k |a_ik|.

    With `linear` (and u = 1) this is the linear signed consensus protocol dx/dt = -(D - A) x.
    """
    n = adjacency.n_agents
    return TwoOptionParams(
        d=np.abs(adjacency.entries).sum(axis=1),
        u=np.full(n, u),
        alpha=np.zeros(n),
        beta=np.zeros(n),
        gamma=adjacency.entries,
        delta=np.zeros_like(adjacency.entries),
        b=np.zeros(n),
        s1=LINEAR if linear else TANH,
        s2=LINEAR if linear else TANH,
        linear=linear,
    )


@dataclass(frozen=True)
class AdjacencyTensor:
    """Gains A[i, k, j, l] from agent k / option l to agent i / option j, with the saturations they feed."""

    entries: np.ndarray
    s1: SaturationSpec = field(default_factory=lambda: SaturationSpec(SaturationFamily.ASYMMETRIC_LOGISTIC))
    s2: SaturationSpec = field(default_factory=lambda: SaturationSpec(SaturationFamily.ASYMMETRIC_LOGISTIC))

    def __post_init__(self) -> None:
        entries = frozen_array(self.entries, field="tensor", ndim=4)
        n, n_k, n_o, n_l = entries.shape
        if n != n_k or n_o != n_l:
            raise DimensionError("tensor", (n, n, n_o, n_o), entries.shape)
        object.__setattr__(self, "entries", entries)

    @property
    def n_agents(self) -> int:
        return self.entries.shape[0]

    @property
    def n_options(self) -> int:
        return self.entries.shape[2]


def tensor_from_params(p: ModelParams) -> AdjacencyTensor:
    """Specialization map: A_ii^jj = alpha_i, A_ik^jj = gamma_ik, A_ii^jl = beta_i, A_ik^jl = delta_ik."""
    n, n_o = p.n_agents, p.n_options
    same_option = np.eye(n_o)
    other_option = 1.0 - same_option
    agents_1 = p.gamma + np.diag(p.alpha)
    agents_2 = p.delta + np.diag(p.beta)
    entries = agents_1[:, :, None, None] * same_option + agents_2[:, :, None, None] * other_option
    return AdjacencyTensor(entries.reshape(n, n, n_o, n_o), s1=p.s1, s2=p.s2)


# endregion
# region: Vector fields


def _state_array(state: Union[OpinionState, ArrayLike]) -> np.ndarray:
    return state.z if isinstance(state, OpinionState) else np.asarray(state, dtype=float)


def _check_shape(array: np.ndarray, expected: tuple[int, ...], name: str = "state") -> None:
    if array.shape[array.ndim - len(expected) :] != expected:
        raise DimensionError(name, expected, array.shape)


def _couple(matrix: np.ndarray, z: np.ndarray) -> np.ndarray:
    """sum_k m_ik z_k..., with `matrix` either shared (n, n) or batched (..., n, n)."""
    return np.matmul(matrix, z)


def vector_field(
    state: Union[OpinionState, ArrayLike],
    p: ModelParams,
    *,
    u: Optional[np.ndarray] = None,
    gamma: Optional[np.ndarray] = None,
    delta: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    dZ/dt = P_0 F(Z) for the general model.

    F_ij = -d_i z_ij + u_i [S1(alpha_i z_ij + sum_k gamma_ik z_kj)
           + sum_{l != j} S2(beta_i z_il + sum_k delta_ik z_kl)]
    + b_ij, with the projection applied last. `u`, `gamma` and `delta` override the parameter values
    (and may carry batch dimensions) for the feedback systems.
    """
    z = _state_array(state)
    _check_shape(z, (p.n_agents, p.n_options))
    attention = p.u if u is None else u
    gamma = p.gamma if gamma is None else gamma
    delta = p.delta if delta is None else delta

    same_option = p.s1.eval(p.alpha[:, None] * z + _couple(gamma, z))
    cross = p.s2.eval(p.beta[:, None] * z + _couple(delta, z))
    other_options = cross.sum(axis=-1, keepdims=True) - cross
    social = same_option + other_options
    return project_tangent(-p.d[:, None] * z + attention[..., None] * social + p.b)


def vector_field_tensor(
    state: Union[OpinionState, ArrayLike],
    tensor: AdjacencyTensor,
    d: ArrayLike,
    u: ArrayLike,
    b: ArrayLike,
) -> np.ndarray:
    """F_ij = -d_i z_ij + u_i sum_l S_l(sum_k A_ik^jl z_kl) + b_ij with S_l = S1 for l == j, S2 otherwise."""
    z = _state_array(state)
    n, n_o = tensor.n_agents, tensor.n_options
    _check_shape(z, (n, n_o))
    d = _per_agent(d, n, "d")
    u = np.asarray(u, dtype=float) if np.ndim(u) else np.full(n, float(u))  # type: ignore[arg-type]
    b = project_tangent(np.broadcast_to(np.asarray(b, dtype=float), (n, n_o)))

    weighted = np.einsum("ikjl,...kl->...ijl", tensor.entries, z)
    same = np.eye(n_o, dtype=bool)
    saturated = np.where(same, tensor.s1.eval(weighted), tensor.s2.eval(weighted))
    return project_tangent(-d[:, None] * z + u[..., None] * saturated.sum(axis=-1) + b)


def vector_field_two_option(
    x: ArrayLike,
    p: TwoOptionParams,
    *,
    u: Optional[np.ndarray] = None,
    gamma: Optional[np.ndarray] = None,
    delta: Optional[np.ndarray] = None,
    b: Optional[np.ndarray] = None,
) -> np.ndarray:
    """dx_i/dt = -d_i x_i + u_i (S1^(alpha_i x_i + sum_k gamma_ik x_k) - S2^(beta_i x_i + sum_k delta_ik x_k)) + b_i"""
    x = np.asarray(x, dtype=float)
    _check_shape(x, (p.n_agents,))
    attention = p.u if u is None else u
    gamma = p.gamma if gamma is None else gamma
    delta = p.delta if delta is None else delta
    inputs = p.b if b is None else b

    same = p.alpha * x + np.matmul(gamma, x[..., None])[..., 0]
    cross = p.beta * x + np.matmul(delta, x[..., None])[..., 0]
    return -p.d * x + attention * (p.s1.odd_eval(same) - p.s2.odd_eval(cross)) + inputs


# endregion
# region: Linearization, bounds and maps


def tangent_basis(n_options: int) -> np.ndarray:
    """Orthonormal basis (n_options x n_options-1) of the zero-sum subspace."""
    return scipy.linalg.null_space(np.ones((1, n_options)))


def restrict_to_tangent(matrix: np.ndarray, n_agents: int, n_options: int) -> np.ndarray:
    """Restrict an (n*N_o)^2 operator on stacked states to V (the product of zero-sum subspaces)."""
    basis = np.kron(np.eye(n_agents), tangent_basis(n_options))
    return basis.T @ matrix @ basis


@dataclass(frozen=True)
class OriginJacobian:
    matrix: np.ndarray
    eigenvalues_on_v: np.ndarray
    eigenvalues: np.ndarray

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues_on_v.real))


def homogeneous_scalars(p: Union[ModelParams, TwoOptionParams]) -> tuple[float, float, float, float]:
    """(d, u, alpha, beta) of a homogeneous parameter set, refusing heterogeneous ones."""
    if not p.is_homogeneous:
        raise HypothesisError([Hypothesis.HETEROGENEOUS])
    return float(p.d[0]), float(p.u[0]), float(p.alpha[0]), float(p.beta[0])


def jacobian_at_origin(p: ModelParams) -> OriginJacobian:
    """
    J = ((-d + u(alpha - beta)) I + u (Gamma - Delta)) kron P_0 at Z = 0.

    The spectrum on V is -d + u(alpha - beta) + u*lambda_i(Gamma - Delta), each with multiplicity N_o - 1,
    the remaining n eigenvalues (directions off V) are zero.
    """
    d, u, alpha, beta = homogeneous_scalars(p)
    if np.any(p.b != 0):
        raise HypothesisError([Hypothesis.NONZERO_INPUT])

    n, n_o = p.n_agents, p.n_options
    agent_block = (-d + u * (alpha - beta)) * np.eye(n) + u * (p.gamma - p.delta)
    projector = np.eye(n_o) - np.full((n_o, n_o), 1.0 / n_o)
    matrix = np.kron(agent_block, projector)

    agent_values = scipy.linalg.eigvals(agent_block)
    on_v = np.repeat(agent_values, n_o - 1)
    return OriginJacobian(
        matrix=matrix,
        eigenvalues_on_v=on_v,
        eigenvalues=np.concatenate([on_v, np.zeros(n, dtype=complex)]),
    )


def boundedness_radius(p: ModelParams, z0: Union[OpinionState, ArrayLike]) -> float:
    """
    Radius of a ball every trajectory from `z0` stays in.

    max(|Z0|, n N_o R / min d) with R = max_ij |b_ij| + u_i (k1~ + (N_o - 1) k2~) bounding the non-decay
    part of F.
    """
    z0 = _state_array(z0)
    per_agent = np.abs(p.b).max(axis=1) + p.u * (p.s1.bound + (p.n_options - 1) * p.s2.bound)
    radius = p.n_agents * p.n_options * float(per_agent.max()) / float(p.d.min())
    return max(float(np.linalg.norm(z0)), radius)


def to_simplex(state: Union[OpinionState, ArrayLike], radius: float, r: float = 1.0) -> np.ndarray:
    """Map opinions with |z_ij| <= radius onto the product of simplices with rows summing to r."""
    z = _state_array(state)
    if radius <= 0:
        raise ParameterError("radius", radius, "must be positive")
    n_o = z.shape[-1]
    return r / (n_o * radius) * z + r / n_o


# endregion
