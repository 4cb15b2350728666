from collections.abc import Sequence
from typing import Union

import numpy as np

from src.graph import validate_partition
from src.model import OpinionState

Partition = Sequence[Sequence[int]]


def _opinion_rows(state: Union[OpinionState, np.ndarray], two_option: bool) -> np.ndarray:
    """Opinion matrices (..., n_agents, n_options); two-option states x are lifted to rows (x, -x)."""
    if isinstance(state, OpinionState):
        return state.z
    z = np.asarray(state, dtype=float)
    if two_option:
        return np.stack([z, -z], axis=-1)
    return z


def cluster_means(
    state: Union[OpinionState, np.ndarray],
    partition: Partition,
    *,
    two_option: bool = False,
) -> np.ndarray:
    """Average opinion of each cluster, shape (..., n_clusters, n_options) (or (..., n_clusters) for two options)."""
    if two_option and not isinstance(state, OpinionState):
        x = np.asarray(state, dtype=float)
        cells = validate_partition(partition, x.shape[-1])
        return np.stack([x[..., list(cell)].mean(axis=-1) for cell in cells], axis=-1)

    z = _opinion_rows(state, two_option=False)
    cells = validate_partition(partition, z.shape[-2])
    return np.stack([z[..., list(cell), :].mean(axis=-2) for cell in cells], axis=-2)


def distance_to_cluster_manifold(
    state: Union[OpinionState, np.ndarray],
    partition: Partition,
    *,
    two_option: bool = False,
) -> Union[float, np.ndarray]:
    """
    Distance of a state to the manifold where agents of the same cluster hold identical opinions.

    This is sqrt(V) with V = sum_p 1/2 sum_{i,k in cluster p} |z_i - z_k|^2, computed through the
    identity 1/2 sum_{i,k} |z_i - z_k|^2 = N_p sum_i |z_i - mean_p|^2. Batched states give an array.
    """
    z = _opinion_rows(state, two_option)
    cells = validate_partition(partition, z.shape[-2])
    total = np.zeros(z.shape[:-2])
    for cell in cells:
        members = z[..., list(cell), :]
        spread = members - members.mean(axis=-2, keepdims=True)
        total = total + len(cell) * np.sum(spread**2, axis=(-2, -1))
    distance = np.sqrt(total)
    return float(distance) if distance.ndim == 0 else distance
