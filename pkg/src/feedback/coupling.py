"""
Slow feedback on the coupling gains between two clusters of agents.

Each agent i of cluster p listens to the other cluster s through Gamma_ik = gamma_i / N_s and
Delta_ik = delta_i / N_s, and the gains follow

    tau_gamma dgamma_i/dt = -gamma_i + sigma gamma_f tanh(g_gamma s)
    tau_delta ddelta_i/dt = -delta_i - sigma delta_f tanh(g_delta s)

with s = xhat_1 xhat_2 (the product of the cluster mean opinions) or its magnitude. Flipping sigma turns
cooperation between the clusters into competition.
"""
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from src.dynamics.clusters import cluster_means
from src.dynamics.systems import TwoOptionSystem
from src.feedback.attention import AttentionParams, AttentionSystem, attention_field
from src.graph import validate_partition
from src.utils.errors import ParameterError

log = logging.getLogger(__name__)


class CouplingDrive(str, Enum):
    PRODUCT = "product"
    MAGNITUDE = "magnitude"


@dataclass(frozen=True)
class CouplingFeedbackParams:
    partition: tuple[tuple[int, ...], ...]
    tau_gamma: float
    tau_delta: float
    gamma_f: float
    delta_f: float
    g_gamma: float
    g_delta: float
    sigma: int = 1
    drive: CouplingDrive = CouplingDrive.PRODUCT

    def __post_init__(self) -> None:
        partition = tuple(tuple(int(i) for i in cell) for cell in self.partition)
        if len(partition) != 2:
            raise ParameterError("partition", partition, "coupling feedback acts between exactly two clusters")
        object.__setattr__(self, "partition", partition)
        for name in ("tau_gamma", "tau_delta", "gamma_f", "delta_f", "g_gamma", "g_delta"):
            if getattr(self, name) <= 0:
                raise ParameterError(name, getattr(self, name), "must be positive")
        if self.sigma not in (-1, 1):
            raise ParameterError("sigma", self.sigma, "must be +1 or -1")
        object.__setattr__(self, "drive", CouplingDrive(self.drive))


def coupling_field(
    gamma: np.ndarray,
    delta: np.ndarray,
    x1_hat: np.ndarray,
    x2_hat: np.ndarray,
    cp: CouplingFeedbackParams,
    sigma: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives of the inter-cluster gains, `sigma` overriding the sign stored in `cp`."""
    sigma = cp.sigma if sigma is None else sigma
    drive = np.asarray(x1_hat, dtype=float) * np.asarray(x2_hat, dtype=float)
    if cp.drive is CouplingDrive.MAGNITUDE:
        drive = np.abs(drive)
    drive = drive[..., None] if np.ndim(drive) else drive

    dgamma = (-gamma + sigma * cp.gamma_f * np.tanh(cp.g_gamma * drive)) / cp.tau_gamma
    ddelta = (-delta - sigma * cp.delta_f * np.tanh(cp.g_delta * drive)) / cp.tau_delta
    return dgamma, ddelta


def inter_cluster_weights(partition: Sequence[Sequence[int]], n_agents: int) -> np.ndarray:
    """W_ik = 1/N_s when k lies in cluster s and i in the other cluster, 0 otherwise."""
    cells = validate_partition(partition, n_agents)
    weights = np.zeros((n_agents, n_agents))
    for p, cell in enumerate(cells):
        for s, other in enumerate(cells):
            if p != s:
                weights[np.ix_(cell, other)] = 1.0 / len(other)
    return weights


class TransitionSystem(AttentionSystem):
    """
    Two-option opinions with attention dynamics and feedback on the inter-cluster coupling gains.

    The wrapped system carries the intra-cluster couplings; its inter-cluster entries are replaced by the
    gain variables gamma_i and delta_i of the state.
    """

    extras = ("u", "gamma", "delta")

    def __init__(
        self,
        opinions: TwoOptionSystem,
        ap: AttentionParams,
        attention_adjacency: np.ndarray,
        cp: CouplingFeedbackParams,
        *,
        sigma: Optional[int] = None,
    ):
        if not isinstance(opinions, TwoOptionSystem):
            raise ParameterError("opinions", type(opinions).__name__, "coupling feedback needs a two-option system")
        super().__init__(opinions, ap, attention_adjacency, sigma=cp.sigma if sigma is None else sigma)
        self.cp = cp
        self.weights = inter_cluster_weights(cp.partition, self.n_agents)

        outside = self.weights > 0
        params = opinions.params
        if np.any(params.gamma[outside] != 0) or np.any(params.delta[outside] != 0):
            log.warning("Inter-cluster couplings of the opinion parameters are ignored in favour of the gain state")
        self.gamma_intra = np.where(outside, 0.0, params.gamma)
        self.delta_intra = np.where(outside, 0.0, params.delta)

    def field(self, y: np.ndarray) -> np.ndarray:
        x = self.layout.opinions(y)
        u = self.layout.extra(y, "u")
        gamma = self.layout.extra(y, "gamma")
        delta = self.layout.extra(y, "delta")

        dx = self.opinions.opinion_field(
            x,
            u=u,
            gamma=self.gamma_intra + gamma[..., :, None] * self.weights,
            delta=self.delta_intra + delta[..., :, None] * self.weights,
        )
        du = attention_field(x, u, self.ap, self.attention_adjacency, two_option=True)
        means = cluster_means(x, self.cp.partition, two_option=True)
        dgamma, ddelta = coupling_field(gamma, delta, means[..., 0], means[..., 1], self.cp, self.sigma)
        return self._pack_derivative(dx, du, dgamma, ddelta)

    def _rebuild(self, opinions) -> "TransitionSystem":  # type: ignore[override]
        return TransitionSystem(opinions, self.ap, self.attention_adjacency, self.cp, sigma=self.sigma)

    def with_sigma(self, sigma: int) -> "TransitionSystem":
        return TransitionSystem(self.opinions, self.ap, self.attention_adjacency, self.cp, sigma=sigma)

    def describe(self) -> str:
        return f"{type(self).__name__}(n_agents={self.n_agents}, sigma={self.sigma:+d}, drive={self.cp.drive.value})"
