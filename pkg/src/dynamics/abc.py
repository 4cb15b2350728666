import itertools
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, TypeVar

import numpy as np

from src.model import project_tangent, tangent_basis
from src.utils.errors import DimensionError

if TYPE_CHECKING:
    from src.dynamics.integrate import ScheduleSegment

S = TypeVar("S", bound="SystemBase")
log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StateLayout:
    """
    How a flat state vector is laid out.

    The opinions come first (x_i for two-option systems, z_ij row-major otherwise), followed by one
    block of n_agents values per extra variable (attention u, coupling gains gamma and delta).
    """

    n_agents: int
    n_options: int
    two_option: bool
    extras: tuple[str, ...] = ()

    @property
    def opinion_shape(self) -> tuple[int, ...]:
        return (self.n_agents,) if self.two_option else (self.n_agents, self.n_options)

    @property
    def opinion_size(self) -> int:
        return int(np.prod(self.opinion_shape))

    @property
    def dim(self) -> int:
        return self.opinion_size + self.n_agents * len(self.extras)

    def opinions(self, y: np.ndarray) -> np.ndarray:
        return y[..., : self.opinion_size].reshape(y.shape[:-1] + self.opinion_shape)

    def extra(self, y: np.ndarray, name: str) -> np.ndarray:
        start = self.opinion_size + self.n_agents * self.extras.index(name)
        return y[..., start : start + self.n_agents]

    def pack(self, opinions: np.ndarray, **extras: np.ndarray) -> np.ndarray:
        """Inverse of `opinions`/`extra`; every name in `self.extras` must be supplied."""
        opinions = np.asarray(opinions, dtype=float)
        batch = opinions.shape[: opinions.ndim - len(self.opinion_shape)]
        if opinions.shape[len(batch) :] != self.opinion_shape:
            raise DimensionError("opinions", self.opinion_shape, opinions.shape)
        blocks = [opinions.reshape(batch + (self.opinion_size,))]
        for name in self.extras:
            blocks.append(np.broadcast_to(np.asarray(extras[name], dtype=float), batch + (self.n_agents,)))
        return np.concatenate(blocks, axis=-1)

    def columns(self) -> list[str]:
        """CSV column names (agents and options numbered from 1)."""
        if self.two_option:
            names = [f"x_{i + 1}" for i in range(self.n_agents)]
        else:
            names = [f"z_{i + 1}_{j + 1}" for i in range(self.n_agents) for j in range(self.n_options)]
        for extra in self.extras:
            names.extend(f"{extra}_{i + 1}" for i in range(self.n_agents))
        return names

    def project(self, y: np.ndarray) -> np.ndarray:
        """Re-project the opinion rows onto the zero-sum subspace."""
        if self.two_option:
            return y
        projected = y.copy()
        projected[..., : self.opinion_size] = project_tangent(self.opinions(y)).reshape(
            y.shape[:-1] + (self.opinion_size,)
        )
        return projected

    def basis(self) -> np.ndarray:
        """Orthonormal basis (dim x reduced dim) of the subspace the dynamics live on."""
        if self.two_option:
            opinion_basis = np.eye(self.opinion_size)
        else:
            opinion_basis = np.kron(np.eye(self.n_agents), tangent_basis(self.n_options))
        extra_size = self.n_agents * len(self.extras)
        basis = np.zeros((self.dim, opinion_basis.shape[1] + extra_size))
        basis[: self.opinion_size, : opinion_basis.shape[1]] = opinion_basis
        basis[self.opinion_size :, opinion_basis.shape[1] :] = np.eye(extra_size)
        return basis


class SystemBase(ABC):
    """The base class for every integrable opinion system."""

    _system_counter = itertools.count(0)

    def __init__(self, *, layout: StateLayout, sigma: int = 1):
        """
        System constructor.

        :param layout: How the flat state vector of this system is organized.
        :param sigma: Sign of the coupling-gain feedback, only read by systems that have one.
        """
        self.layout = layout
        self.sigma = sigma

        # Distinguishes the systems in debug logs when several are integrated side by side.
        self.system_no = next(self._system_counter)

    @property
    def n_agents(self) -> int:
        return self.layout.n_agents

    @property
    def n_options(self) -> int:
        return self.layout.n_options

    @property
    def dim(self) -> int:
        return self.layout.dim

    def initial_state(self, opinions: np.ndarray, **extras: np.ndarray) -> np.ndarray:
        """Build a valid flat initial state, projecting the opinions."""
        y = self.layout.pack(np.asarray(opinions, dtype=float), **extras)
        return self.layout.project(y)

    def segment_applied(self: S, segment: "ScheduleSegment") -> S:
        """
        Return a copy of this system with an input schedule segment applied.

        Segments carry a new input and/or a new feedback sign. The default handles the input through
        `with_inputs` and the sign by copying; systems without feedback ignore the sign.
        """
        system = self if segment.b is None else self.with_inputs(segment.b)
        if segment.sigma is not None and segment.sigma != system.sigma:
            log.debug(f"Feedback sign flipped to {segment.sigma} (system #{self.system_no})")
            system = system.with_sigma(segment.sigma)
        return system

    def with_sigma(self: S, sigma: int) -> S:
        return self

    @abstractmethod
    def field(self, y: np.ndarray) -> np.ndarray:
        """
        Evaluate the time derivative of a flat state (or a batch of them, shape (..., dim)).

        The returned opinion part must be tangent to the zero-sum subspace, so that together with the
        re-projection after each integration step the row sums never drift.
        """
        raise NotImplementedError()

    @abstractmethod
    def with_inputs(self: S, b: np.ndarray) -> S:
        """
        Return a copy of this system driven by the input `b`.

        For two-option systems `b` has one entry per agent (or a batch of such rows, one per
        integrated trial), otherwise it is the raw n_agents x n_options input matrix.
        """
        raise NotImplementedError()

    @abstractmethod
    def with_parameter(self: S, name: str, value: float) -> S:
        """Return a copy with the named sweep parameter ('u' or 'b_scale') set to `value`."""
        raise NotImplementedError()

    def strong_threshold(self) -> float:
        """Default opinion magnitude above which an agent counts as strongly opinionated."""
        return 0.3

    def describe(self) -> str:
        return f"{type(self).__name__}(n_agents={self.n_agents}, n_options={self.n_options})"


class OpinionSystemBase(SystemBase):
    """The base class for systems whose extra variables (if any) feed the opinion field."""

    @property
    @abstractmethod
    def upper_bound(self) -> float:
        """Upper saturation bound k2 of the same-option saturation."""
        raise NotImplementedError()

    @property
    @abstractmethod
    def attention(self) -> np.ndarray:
        raise NotImplementedError()

    def strong_threshold(self) -> float:
        return 0.3 * self.upper_bound * float(np.max(self.attention))

    @abstractmethod
    def opinion_field(
        self,
        opinions: np.ndarray,
        *,
        u: Optional[np.ndarray] = None,
        gamma: Optional[np.ndarray] = None,
        delta: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """
        Evaluate the opinion vector field with optionally overridden (possibly batched) gains.

        This is how the feedback systems plug their state-dependent attention and coupling gains
        into an otherwise fixed parameter set.
        """
        raise NotImplementedError()

    def field(self, y: np.ndarray) -> np.ndarray:
        opinions = self.layout.opinions(y)
        derivative = self.opinion_field(opinions)
        return derivative.reshape(y.shape[:-1] + (self.layout.opinion_size,))
