"""
Executable predictions of the opinion model.

Critical attention thresholds and the opinion pattern that forms at them, state classification, the direction
a pitchfork unfolds in under an input, the cluster condition and cluster reduction, and numerical symmetry checks.
"""
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Union

import numpy as np
import scipy.linalg

from src.constants import Numerics
from src.graph import (
    AdjacencySpec,
    GraphKind,
    SpectralSummary,
    is_strongly_connected,
    spectral_extrema,
    validate_partition,
)
from src.model import (
    ModelParams,
    OpinionState,
    TwoOptionParams,
    homogeneous_scalars,
    vector_field,
    vector_field_two_option,
)
from src.utils.errors import Hypothesis, HypothesisError, ParameterError

log = logging.getLogger(__name__)

Params = Union[ModelParams, TwoOptionParams]
_HOMOGENEITY_TOL = 1e-12


class Regime(str, Enum):
    AGREEMENT = "agreement"
    DISAGREEMENT = "disagreement"

    @classmethod
    def parse(cls, value: Union["Regime", str]) -> "Regime":
        """Accept the consensus/dissensus aliases used when talking about symmetric graphs."""
        aliases = {"consensus": cls.AGREEMENT, "dissensus": cls.DISAGREEMENT}
        if isinstance(value, str) and value in aliases:
            return aliases[value]
        return cls(value)


# region: Thresholds


@dataclass(frozen=True)
class RegimePrediction:
    u_star: float
    regime: Regime
    eigenvalue: float
    pattern_vector: np.ndarray
    centrality_vector: np.ndarray
    failures: tuple[Hypothesis, ...] = ()

    @property
    def hypotheses_ok(self) -> bool:
        return not self.failures

    def as_record(self) -> dict[str, object]:
        return {
            "u_star": self.u_star,
            "regime": self.regime.value,
            "eigenvalue": self.eigenvalue,
            "pattern_vector": self.pattern_vector.tolist(),
            "centrality_vector": self.centrality_vector.tolist(),
            "hypotheses_ok": self.hypotheses_ok,
            "diagnostics": [failure.value for failure in self.failures],
        }


def coupling_scale(p: Params, adjacency: AdjacencySpec) -> float:
    """The scalar c with Gamma - Delta = c A, refusing coupling matrices that aren't a multiple of A."""
    difference = p.gamma - p.delta
    norm = float(np.sum(adjacency.entries**2))
    if norm == 0:
        if np.any(difference != 0):
            raise HypothesisError([Hypothesis.HETEROGENEOUS], detail="the adjacency matrix is empty")
        return 0.0
    scale = float(np.sum(difference * adjacency.entries) / norm)
    if not np.allclose(difference, scale * adjacency.entries, rtol=0, atol=1e-12 * max(1.0, abs(scale))):
        raise HypothesisError([Hypothesis.HETEROGENEOUS], detail="Gamma - Delta is not a multiple of the adjacency")
    return scale


def critical_attention(p: Params, adjacency: AdjacencySpec) -> RegimePrediction:
    """
    Critical attention of the homogeneous regime and the pattern the opinions form at it.

    With c = gamma - delta > 0 the bifurcation is an agreement one at u_a = d / (alpha - beta + c lambda_max),
    with c < 0 a disagreement one at u_d = d / (alpha - beta + c lambda_min). Failed spectral hypotheses
    are listed in the prediction instead of raised. A nonpositive denominator gives u_star = inf.

    :raises HypothesisError: Heterogeneous parameters, or gamma == delta (mode interaction).
    """
    d, _, alpha, beta = homogeneous_scalars(p)
    scale = coupling_scale(p, adjacency)
    if scale == 0:
        raise HypothesisError([Hypothesis.MODE_INTERACTION])

    summary = spectral_extrema(adjacency)
    failures: list[Hypothesis] = []
    if scale > 0:
        regime = Regime.AGREEMENT
        eigenvalue, pattern, centrality = summary.lambda_max, summary.v_max, summary.w_max
        if not summary.lambda_max_real:
            failures.append(Hypothesis.LAMBDA_COMPLEX)
        if not summary.lambda_max_simple:
            failures.append(Hypothesis.LAMBDA_NOT_SIMPLE)
        if not summary.lambda_max_real_part_isolated:
            failures.append(Hypothesis.REAL_PART_NOT_ISOLATED)
        if not is_strongly_connected(adjacency):
            failures.append(Hypothesis.NOT_STRONGLY_CONNECTED)
        if adjacency.signed and not summary.perron_positive:
            failures.append(Hypothesis.NOT_PERRON)
    else:
        regime = Regime.DISAGREEMENT
        eigenvalue, pattern, centrality = summary.lambda_min, summary.v_min, summary.w_min
        if not summary.lambda_min_real:
            failures.append(Hypothesis.LAMBDA_COMPLEX)
        if not summary.lambda_min_simple:
            failures.append(Hypothesis.LAMBDA_NOT_SIMPLE)
        if not summary.lambda_min_real_part_isolated:
            failures.append(Hypothesis.REAL_PART_NOT_ISOLATED)

    denominator = alpha - beta + scale * eigenvalue
    if denominator > 0:
        u_star = d / denominator
    else:
        u_star = math.inf
        failures.append(Hypothesis.NONPOSITIVE_DENOMINATOR)

    prediction = RegimePrediction(u_star, regime, eigenvalue, pattern, centrality, tuple(failures))
    log.debug(f"Critical attention {prediction.u_star:.9g} ({regime.value}, {denominator=:.6g})")
    return prediction


def threshold_from_coupling(p: Params) -> tuple[float, complex]:
    """
    First opinion-forming bifurcation for arbitrary Gamma and Delta with homogeneous d, alpha and beta.

    Every real eigenvalue lambda of Gamma - Delta with alpha - beta + lambda > 0 crosses at
    u = d / (alpha - beta + lambda); the smallest such u is returned with its eigenvalue.
    """
    d, _, alpha, beta = homogeneous_scalars(p)
    eigenvalues = scipy.linalg.eigvals(p.gamma - p.delta)
    real = eigenvalues[np.abs(eigenvalues.imag) <= Numerics.SIMPLE_TOL * np.maximum(1.0, np.abs(eigenvalues))]
    denominators = alpha - beta + real.real
    if not np.any(denominators > 0):
        raise HypothesisError([Hypothesis.NONPOSITIVE_DENOMINATOR])
    best = int(np.argmax(np.where(denominators > 0, denominators, -np.inf)))
    return d / float(denominators[best]), complex(real[best])


def predict_symmetric_lambda(kind: Union[GraphKind, str], n: int, regime: Union[Regime, str]) -> float:
    """Closed form extremal eigenvalue of the unit all-to-all and cycle graphs."""
    kind = GraphKind(kind)
    regime = Regime.parse(regime)
    if kind is GraphKind.ALL_TO_ALL:
        return float(n - 1) if regime is Regime.AGREEMENT else -1.0
    if kind is GraphKind.CYCLE:
        if regime is Regime.AGREEMENT:
            return 2.0
        return -2.0 if n % 2 == 0 else 2 * math.cos(math.pi * (n - 1) / n)
    raise HypothesisError([Hypothesis.UNSUPPORTED_KIND], detail=kind.value)


# endregion
# region: Classification


def _as_rows(state: Union[OpinionState, np.ndarray]) -> tuple[np.ndarray, bool]:
    """Opinion matrix of a state, lifting one-dimensional (two-option) states to rows (x, -x)."""
    if isinstance(state, OpinionState):
        return state.z, False
    z = np.asarray(state, dtype=float)
    if z.ndim == 1:
        return np.stack([z, -z], axis=-1), True
    return z, False


@dataclass(frozen=True)
class StateClassification:
    agreement: bool
    consensus: bool
    dissensus: bool
    opinionated: tuple[str, ...]
    sign_matrix: np.ndarray

    @property
    def disagreement(self) -> bool:
        return not self.agreement

    @property
    def n_strong(self) -> int:
        return self.opinionated.count("strong")

    def as_record(self) -> dict[str, object]:
        return {
            "agreement": self.agreement,
            "consensus": self.consensus,
            "dissensus": self.dissensus,
            "opinionated": list(self.opinionated),
            "signs": self.sign_matrix.astype(int).tolist(),
        }


def classify_state(
    state: Union[OpinionState, np.ndarray],
    strong_threshold: float = 0.3,
    tol: float = Numerics.SIGN_TOL,
) -> StateClassification:
    """
    Agreement, consensus and dissensus of a state, plus the weak/strong opinionated tag of every agent.

    Entries with |z| < tol are sign wildcards. Agents of a two-option state are strong when
    |x_i| >= strong_threshold, otherwise when |Z_i| >= strong_threshold.
    """
    if strong_threshold <= 0 or tol <= 0:
        raise ParameterError("threshold", (strong_threshold, tol), "thresholds must be positive")
    z, two_option = _as_rows(state)
    signs = np.where(np.abs(z) < tol, 0, np.sign(z))
    agreement = not np.any(np.any(signs > 0, axis=0) & np.any(signs < 0, axis=0))
    consensus = bool(np.max(np.abs(z - z[0])) < tol)
    dissensus = bool(np.all(np.abs(z.mean(axis=0)) < tol))

    magnitudes = np.abs(z[:, 0]) if two_option else np.linalg.norm(z, axis=1)
    opinionated = tuple("strong" if magnitude >= strong_threshold else "weak" for magnitude in magnitudes)
    sign_matrix = signs[:, 0] if two_option else signs
    return StateClassification(bool(agreement), consensus, dissensus, opinionated, sign_matrix)


def find_clusters(state: Union[OpinionState, np.ndarray], tol: float = Numerics.SIGN_TOL) -> list[list[int]]:
    """Group agents whose opinions coincide within `tol` (max norm), in order of first appearance."""
    z, _ = _as_rows(state)
    clusters: list[list[int]] = []
    for i, row in enumerate(z):
        for cluster in clusters:
            if np.max(np.abs(z[cluster[0]] - row)) < tol:
                cluster.append(i)
                break
        else:
            clusters.append([i])
    return clusters


def describe_outcome(
    state: Union[OpinionState, np.ndarray],
    partition: Optional[Sequence[Sequence[int]]] = None,
    tol: float = Numerics.SIGN_TOL,
) -> str:
    """Short label of a (final) state used in run summaries."""
    z, _ = _as_rows(state)
    if np.max(np.abs(z)) < tol:
        return "neutral equilibrium"
    classification = classify_state(z, tol=tol)
    if classification.consensus:
        return "consensus"
    if classification.agreement:
        return "agreement"

    clusters = [list(cell) for cell in partition] if partition is not None else find_clusters(z, tol)
    if len(clusters) < z.shape[0]:
        means = np.array([z[cluster].mean(axis=0) for cluster in clusters])
        conflicting = np.any(means > tol, axis=0) & np.any(means < -tol, axis=0)
        if len(clusters) >= 2 and np.any(conflicting):
            return "clustered dissensus"
    return "dissensus" if classification.dissensus else "disagreement"


def branch_alignment(x: np.ndarray, pattern: np.ndarray) -> float:
    """|cos| of the angle between a state and a pattern vector."""
    x = np.ravel(x)
    pattern = np.ravel(pattern)
    norm = np.linalg.norm(x) * np.linalg.norm(pattern)
    return 0.0 if norm == 0 else float(abs(np.dot(x, pattern)) / norm)


# endregion
# region: Unfolding


@dataclass(frozen=True)
class Unfolding:
    """
    How an input breaks the symmetric pitchfork.

    `projection` is <b, w> (one value per option for general inputs), the branch connected to the
    pre-bifurcation equilibrium grows along sign(projection) * pattern.
    """

    projection: Union[float, np.ndarray]
    sign: Union[int, np.ndarray]
    pattern_vector: np.ndarray

    @property
    def symmetric(self) -> bool:
        return bool(np.all(self.sign == 0))

    def as_record(self) -> dict[str, object]:
        return {
            "projection": np.asarray(self.projection).tolist(),
            "sign": np.asarray(self.sign).tolist(),
            "pattern_vector": self.pattern_vector.tolist(),
        }


def unfolding_direction(
    b: np.ndarray,
    summary: SpectralSummary,
    regime: Union[Regime, str],
    tol: float = 1e-12,
) -> Unfolding:
    regime = Regime.parse(regime)
    w, v = (summary.w_max, summary.v_max) if regime is Regime.AGREEMENT else (summary.w_min, summary.v_min)
    b = np.asarray(b, dtype=float)
    projection = w @ b
    sign = np.where(np.abs(projection) <= tol, 0, np.sign(projection)).astype(int)
    if b.ndim == 1:
        return Unfolding(float(projection), int(sign), v)
    return Unfolding(projection, sign, v)


# endregion
# region: Clusters


@dataclass(frozen=True)
class ClusterGains:
    """Per-cluster gains: diagonal (bar) and within-cluster (tilde) self gains, between-cluster gains."""

    d: np.ndarray
    u: np.ndarray
    alpha_bar: np.ndarray
    alpha_tilde: np.ndarray
    beta_bar: np.ndarray
    beta_tilde: np.ndarray
    gamma_tilde: np.ndarray
    delta_tilde: np.ndarray
    b: np.ndarray
    sizes: np.ndarray


def _uniform(values: np.ndarray, what: str) -> float:
    if values.size and np.max(np.abs(values - values.flat[0])) > _HOMOGENEITY_TOL:
        raise HypothesisError([Hypothesis.CLUSTER_HETEROGENEOUS], detail=what)
    return float(values.flat[0]) if values.size else 0.0


def cluster_gains(p: Params, partition: Sequence[Sequence[int]]) -> ClusterGains:
    """Collect the cluster-level gains, refusing parameters that aren't homogeneous within and between clusters."""
    cells = validate_partition(partition, p.n_agents)
    n_c = len(cells)
    scalars = {name: np.zeros(n_c) for name in ("d", "u", "alpha_bar", "alpha_tilde", "beta_bar", "beta_tilde")}
    gamma_tilde = np.zeros((n_c, n_c))
    delta_tilde = np.zeros((n_c, n_c))
    b = np.zeros((n_c,) + p.b.shape[1:])

    for q, cell in enumerate(cells):
        rows = list(cell)
        scalars["d"][q] = _uniform(p.d[rows], f"d in cluster {q}")
        scalars["u"][q] = _uniform(p.u[rows], f"u in cluster {q}")
        scalars["alpha_bar"][q] = _uniform(p.alpha[rows], f"alpha in cluster {q}")
        scalars["beta_bar"][q] = _uniform(p.beta[rows], f"beta in cluster {q}")
        b[q] = p.b[rows[0]]
        if np.max(np.abs(p.b[rows] - p.b[rows[0]])) > _HOMOGENEITY_TOL:
            raise HypothesisError([Hypothesis.CLUSTER_HETEROGENEOUS], detail=f"inputs in cluster {q}")

        off_diagonal = ~np.eye(len(rows), dtype=bool)
        if len(rows) > 1:
            scalars["alpha_tilde"][q] = _uniform(p.gamma[np.ix_(rows, rows)][off_diagonal], f"gamma in cluster {q}")
            scalars["beta_tilde"][q] = _uniform(p.delta[np.ix_(rows, rows)][off_diagonal], f"delta in cluster {q}")
        else:
            scalars["alpha_tilde"][q] = scalars["alpha_bar"][q]
            scalars["beta_tilde"][q] = scalars["beta_bar"][q]

        for s, other in enumerate(cells):
            if s == q:
                continue
            block = np.ix_(rows, list(other))
            gamma_tilde[q, s] = _uniform(p.gamma[block], f"gamma between clusters {q} and {s}")
            delta_tilde[q, s] = _uniform(p.delta[block], f"delta between clusters {q} and {s}")

    return ClusterGains(
        gamma_tilde=gamma_tilde,
        delta_tilde=delta_tilde,
        b=b,
        sizes=np.array([len(cell) for cell in cells]),
        **scalars,
    )


@dataclass(frozen=True)
class ClusterCondition:
    holds: bool
    margins: np.ndarray

    @property
    def worst_margin(self) -> float:
        return float(np.max(self.margins))

    def as_record(self) -> dict[str, object]:
        return {"holds": self.holds, "margins": self.margins.tolist(), "worst_margin": self.worst_margin}


def check_cluster_condition(p: Params, partition: Sequence[Sequence[int]]) -> ClusterCondition:
    """
    Sufficient condition for the cluster manifold to attract exponentially.

    For every cluster the sup over kappa_q in (0, max S_q'] of
    -d + u kappa_1 (alpha_bar - alpha_tilde) + u kappa_2 (beta_bar - beta_tilde) must be negative.
    Singleton clusters are trivially synchronized and get the margin -d.
    """
    gains = cluster_gains(p, partition)
    kappa_1, kappa_2 = p.s1.max_slope(), p.s2.max_slope()
    same = np.maximum(0.0, kappa_1 * (gains.alpha_bar - gains.alpha_tilde))
    cross = np.maximum(0.0, kappa_2 * (gains.beta_bar - gains.beta_tilde))
    margins = -gains.d + gains.u * same + gains.u * cross
    condition = ClusterCondition(bool(np.all(margins < 0)), margins)
    log.debug(f"Cluster condition margins {margins.tolist()}")
    return condition


def reduce_clusters(p: Params, partition: Sequence[Sequence[int]]) -> Params:
    """
    Dynamics on the cluster manifold as a model with one agent per cluster.

    alpha_hat = alpha_bar + (N_p - 1) alpha_tilde, beta_hat = beta_bar + (N_p - 1) beta_tilde,
    gamma_hat_ps = N_s gamma_tilde_ps and delta_hat_ps = N_s delta_tilde_ps.
    """
    gains = cluster_gains(p, partition)
    extra = gains.sizes - 1
    kwargs = {
        "d": gains.d,
        "u": gains.u,
        "alpha": gains.alpha_bar + extra * gains.alpha_tilde,
        "beta": gains.beta_bar + extra * gains.beta_tilde,
        "gamma": gains.gamma_tilde * gains.sizes[None, :],
        "delta": gains.delta_tilde * gains.sizes[None, :],
        "b": gains.b,
    }
    return replace(p, **kwargs)


# endregion
# region: Symmetry


def _permute(z: np.ndarray, agents: np.ndarray, options: Optional[np.ndarray], two_option: bool) -> np.ndarray:
    permuted = z[..., agents] if two_option else z[..., agents, :]
    if options is None:
        return permuted
    if two_option:
        return -permuted if options[0] == 1 else permuted
    return permuted[..., options]


def equivariance_residual(
    p: Params,
    agent_permutation: Sequence[int],
    option_permutation: Optional[Sequence[int]] = None,
    samples: Optional[np.ndarray] = None,
) -> float:
    """
    max over the sample states of |rho F(Z) - F(rho Z)|, with (rho Z)_ij = Z_{pi(i), sigma(j)}.

    For two-option parameters the only option permutation, (1, 0), acts as x -> -x.
    """
    two_option = isinstance(p, TwoOptionParams)
    agents = np.asarray(agent_permutation, dtype=int)
    if sorted(agents.tolist()) != list(range(p.n_agents)):
        raise ParameterError("agent_permutation", agent_permutation, "not a permutation of the agents")
    options = None if option_permutation is None else np.asarray(option_permutation, dtype=int)
    if options is not None and sorted(options.tolist()) != list(range(p.n_options)):
        raise ParameterError("option_permutation", option_permutation, "not a permutation of the options")
    if samples is None:
        raise ParameterError("samples", None, "at least one sample state is required")

    states = np.asarray(samples, dtype=float)
    field = (lambda z: vector_field_two_option(z, p)) if two_option else (lambda z: vector_field(z, p))
    permuted_field = field(_permute(states, agents, options, two_option))
    residuals = permuted_field - _permute(field(states), agents, options, two_option)
    return float(np.max(np.abs(residuals)))


# endregion
