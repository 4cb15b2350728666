"""
Inter-agent communication structure.

An `AdjacencySpec` wraps the (possibly signed, possibly directed) matrix a_ik, where a nonzero a_ik means
agent i listens to agent k. `spectral_extrema` extracts the extremal eigen-pairs every bifurcation
prediction is expressed in.
"""
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import networkx as nx
import numpy as np
import scipy.linalg

from src.constants import Numerics
from src.utils.errors import DimensionError, ParameterError

log = logging.getLogger(__name__)


class GraphKind(str, Enum):
    PATH = "path"
    CYCLE = "cycle"
    STAR = "star"
    WHEEL = "wheel"
    ALL_TO_ALL = "all_to_all"
    CUSTOM = "custom"


_MIN_AGENTS = {
    GraphKind.PATH: 2,
    GraphKind.CYCLE: 3,
    GraphKind.STAR: 2,
    GraphKind.WHEEL: 3,
    GraphKind.ALL_TO_ALL: 2,
    GraphKind.CUSTOM: 1,
}


def frozen_array(values: object, *, field: str, ndim: Optional[int] = None) -> np.ndarray:
    """Return a read-only float copy of `values`, rejecting non-finite entries."""
    array = np.array(values, dtype=float)
    if ndim is not None and array.ndim != ndim:
        raise ParameterError(field, array.shape, f"expected a {ndim}-dimensional array")
    if not np.all(np.isfinite(array)):
        raise ParameterError(field, values, "entries must be finite")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class AdjacencySpec:
    """A square inter-agent coupling matrix with its graph family tag."""

    entries: np.ndarray
    kind: GraphKind = GraphKind.CUSTOM
    allow_diagonal: bool = False

    def __post_init__(self) -> None:
        entries = frozen_array(self.entries, field="adjacency", ndim=2)
        n_rows, n_cols = entries.shape
        if n_rows != n_cols:
            raise DimensionError("adjacency", (n_rows, n_rows), entries.shape)
        if n_rows == 0:
            raise ParameterError("adjacency", entries.shape, "at least one agent is required")
        if not self.allow_diagonal and np.any(np.diag(entries) != 0):
            raise ParameterError("adjacency", np.diag(entries).tolist(), "diagonal entries must be zero")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "kind", GraphKind(self.kind))

    @property
    def n_agents(self) -> int:
        return self.entries.shape[0]

    @property
    def signed(self) -> bool:
        return bool(np.any(self.entries < 0))

    @property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))

    def to_networkx(self) -> nx.DiGraph:
        """Directed graph with an edge i -> k for every nonzero a_ik (signs are kept as edge weights)."""
        return nx.from_numpy_array(self.entries, create_using=nx.DiGraph)

    def as_record(self) -> dict[str, object]:
        return {
            "kind": self.kind.value,
            "n": self.n_agents,
            "signed": self.signed,
            "symmetric": self.symmetric,
            "matrix": self.entries.tolist(),
        }


@dataclass(frozen=True)
class SpectralSummary:
    """Extremal eigenvalues (by real part) of an adjacency matrix with unit right/left eigenvectors."""

    lambda_max: float
    lambda_min: float
    v_max: np.ndarray
    w_max: np.ndarray
    v_min: np.ndarray
    w_min: np.ndarray
    lambda_max_simple: bool
    lambda_min_simple: bool
    lambda_max_real: bool
    lambda_min_real: bool
    lambda_max_real_part_isolated: bool
    lambda_min_real_part_isolated: bool
    perron_positive: bool
    eigenvalues: np.ndarray

    def as_record(self) -> dict[str, object]:
        return {
            "lambda_max": self.lambda_max,
            "lambda_min": self.lambda_min,
            "v_max": self.v_max.tolist(),
            "w_max": self.w_max.tolist(),
            "v_min": self.v_min.tolist(),
            "w_min": self.w_min.tolist(),
            "lambda_max_simple": self.lambda_max_simple,
            "lambda_min_simple": self.lambda_min_simple,
            "lambda_max_real": self.lambda_max_real,
            "lambda_min_real": self.lambda_min_real,
            "lambda_max_real_part_isolated": self.lambda_max_real_part_isolated,
            "lambda_min_real_part_isolated": self.lambda_min_real_part_isolated,
            "perron_positive": self.perron_positive,
            "simple_tolerance": Numerics.SIMPLE_TOL,
        }


def build_graph(
    kind: GraphKind | str,
    n: Optional[int] = None,
    weight: float = 1.0,
    matrix: Optional[Sequence[Sequence[float]]] = None,
) -> AdjacencySpec:
    """
    Build the standard 0/1 adjacency of the named family scaled by `weight`.

    Node 0 is the hub of star and wheel graphs. The custom kind takes an explicit `matrix`
    (`weight` still scales it); `n`, when given, must then match its size.
    """
    kind = GraphKind(kind)
    if kind is GraphKind.CUSTOM:
        if matrix is None:
            raise ParameterError("matrix", None, "custom graphs need an explicit matrix")
        entries = np.array(matrix, dtype=float)
        if n is not None and entries.shape != (n, n):
            raise DimensionError("matrix", (n, n), entries.shape)
        return AdjacencySpec(weight * entries, kind)

    if n is None or n < _MIN_AGENTS[kind]:
        raise ParameterError("n", n, f"{kind.value} graphs need at least {_MIN_AGENTS[kind]} agents")

    if kind is GraphKind.PATH:
        graph = nx.path_graph(n)
    elif kind is GraphKind.CYCLE:
        graph = nx.cycle_graph(n)
    elif kind is GraphKind.STAR:
        graph = nx.star_graph(n - 1)
    elif kind is GraphKind.WHEEL:
        graph = nx.wheel_graph(n)
    else:
        graph = nx.complete_graph(n)

    entries = nx.to_numpy_array(graph, nodelist=range(n), dtype=float)
    log.debug(f"Built {kind.value} graph with {n=} and {weight=}")
    return AdjacencySpec(weight * entries, kind)


def clustered_graph(sizes: Sequence[int], within: float, across: float) -> AdjacencySpec:
    """All-to-all graph whose weight is `within` inside consecutive clusters of `sizes` and `across` between them."""
    labels = np.repeat(np.arange(len(sizes)), sizes)
    entries = np.where(labels[:, None] == labels[None, :], within, across)
    np.fill_diagonal(entries, 0.0)
    return AdjacencySpec(entries, GraphKind.CUSTOM)


def is_strongly_connected(adjacency: AdjacencySpec) -> bool:
    """Every agent reaches every other one through nonzero entries, signs ignored."""
    if adjacency.n_agents == 1:
        return True
    return nx.is_strongly_connected(adjacency.to_networkx())


def _is_isolated(values: np.ndarray, index: int, *, real_part: bool) -> bool:
    """Whether values[index] is farther than the simplicity tolerance from every other eigenvalue."""
    others = np.delete(values, index)
    if others.size == 0:
        return True
    target = values[index]
    if real_part:
        distance = np.min(np.abs(others.real - target.real))
    else:
        distance = np.min(np.abs(others - target))
    return bool(distance > Numerics.SIMPLE_TOL * max(1.0, abs(target)))


def _real_unit(vector: np.ndarray) -> np.ndarray:
    """Rotate a complex eigenvector so its largest entry is real, drop the imaginary part, normalize."""
    pivot = vector[np.argmax(np.abs(vector))]
    if pivot != 0:
        vector = vector * (abs(pivot) / pivot)
    real = np.real(vector)
    return real / np.linalg.norm(real)


def _sum_nonnegative(vector: np.ndarray) -> np.ndarray:
    return -vector if vector.sum() < 0 else vector


def _largest_entry_positive(vector: np.ndarray) -> np.ndarray:
    return -vector if vector[np.argmax(np.abs(vector))] < 0 else vector


def _extremal_index(values: np.ndarray, *, largest: bool) -> int:
    # ties on the real part go to the most nearly real eigenvalue
    order = np.lexsort((np.abs(values.imag), -values.real if largest else values.real))
    return int(order[0])


def spectral_extrema(adjacency: AdjacencySpec) -> SpectralSummary:
    """
    Extremal eigenvalues by real part with right (v) and left (w) unit eigenvectors.

    Symmetric matrices go through the symmetric solver and get w = v. Otherwise the left eigenvectors come
    from the same decomposition as the right ones, so repeated eigenvalues keep their pairing. Signs are
    normalized so that v_max has a nonnegative entry sum (entrywise nonnegative when it is a Perron vector),
    the largest entry of v_min is positive, and <v_min, w_min> > 0.
    """
    matrix = adjacency.entries
    if adjacency.symmetric:
        real_values, vectors = scipy.linalg.eigh(matrix)
        values = real_values.astype(complex)
        left_vectors = right_vectors = vectors.astype(complex)
    else:
        values, left_vectors, right_vectors = scipy.linalg.eig(matrix, left=True)

    i_max = _extremal_index(values, largest=True)
    i_min = _extremal_index(values, largest=False)

    v_max = _sum_nonnegative(_real_unit(right_vectors[:, i_max]))
    w_max = _sum_nonnegative(_real_unit(left_vectors[:, i_max]))
    v_min = _largest_entry_positive(_real_unit(right_vectors[:, i_min]))
    w_min = _real_unit(left_vectors[:, i_min])
    if np.dot(v_min, w_min) < 0:
        w_min = -w_min

    perron_positive = bool(np.all(v_max > 1e-12))
    imag_tol = Numerics.SIMPLE_TOL
    summary = SpectralSummary(
        lambda_max=float(values[i_max].real),
        lambda_min=float(values[i_min].real),
        v_max=v_max,
        w_max=w_max,
        v_min=v_min,
        w_min=w_min,
        lambda_max_simple=_is_isolated(values, i_max, real_part=False),
        lambda_min_simple=_is_isolated(values, i_min, real_part=False),
        lambda_max_real=bool(abs(values[i_max].imag) <= imag_tol * max(1.0, abs(values[i_max]))),
        lambda_min_real=bool(abs(values[i_min].imag) <= imag_tol * max(1.0, abs(values[i_min]))),
        lambda_max_real_part_isolated=_is_isolated(values, i_max, real_part=True),
        lambda_min_real_part_isolated=_is_isolated(values, i_min, real_part=True),
        perron_positive=perron_positive,
        eigenvalues=values,
    )
    log.debug(
        f"Spectrum of {adjacency.kind.value} graph: lambda_max={summary.lambda_max:.6g}"
        f" lambda_min={summary.lambda_min:.6g} simple=({summary.lambda_max_simple}, {summary.lambda_min_simple})"
    )
    return summary


def validate_partition(partition: Sequence[Sequence[int]], n_agents: int) -> tuple[tuple[int, ...], ...]:
    """Check that `partition` splits the agents 0..n_agents-1 into disjoint nonempty clusters."""
    cells = tuple(tuple(int(i) for i in cell) for cell in partition)
    members = [i for cell in cells for i in cell]
    if any(len(cell) == 0 for cell in cells):
        raise ParameterError("partition", partition, "clusters must not be empty")
    if sorted(members) != list(range(n_agents)):
        raise ParameterError("partition", partition, f"clusters must cover agents 0..{n_agents - 1} exactly once")
    return cells
