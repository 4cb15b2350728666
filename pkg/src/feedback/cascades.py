"""
Opinion cascades of attention-coupled two-option networks.

Below a threshold on |<w_c, b>| the network keeps a weakly opinionated equilibrium, above it the agents
cascade to strong opinions. The threshold is estimated empirically by batched bisection on the input
magnitude, and cascade frequencies over (input norm, alignment with w_c) bins by Monte-Carlo runs.
"""
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.stats import binomtest

from src.constants import Numerics
from src.dynamics.integrate import integrate_final
from src.dynamics.systems import TwoOptionSystem
from src.feedback.attention import AttentionSystem
from src.graph import AdjacencySpec, is_strongly_connected
from src.utils.errors import BracketError, Hypothesis, HypothesisError, ParameterError
from src.utils.pool import ordered_map

log = logging.getLogger(__name__)

CASCADE_TIME = 500.0


def is_cascade(opinions: np.ndarray, strong_threshold: float) -> np.ndarray:
    """
    Whether at least half of the agents (rounded up) hold a strong opinion.

    `opinions` are two-option states (..., n_agents); the result has the leading batch shape.
    """
    opinions = np.asarray(opinions, dtype=float)
    n_agents = opinions.shape[-1]
    strong = np.sum(np.abs(opinions) >= strong_threshold, axis=-1)
    return strong >= math.ceil(n_agents / 2)


@dataclass(frozen=True)
class CascadeThreshold:
    threshold: float
    lower: float
    upper: float
    resolution: float
    direction: np.ndarray
    runs: int

    def as_record(self) -> dict[str, object]:
        return {
            "threshold": self.threshold,
            "lower": self.lower,
            "upper": self.upper,
            "resolution": self.resolution,
            "direction": self.direction.tolist(),
            "runs": self.runs,
        }


def _check_cascade_system(system: AttentionSystem, adjacency: AdjacencySpec) -> None:
    if not isinstance(system, AttentionSystem) or not isinstance(system.opinions, TwoOptionSystem):
        raise ParameterError("system", type(system).__name__, "cascades need an attention-coupled two-option system")
    if adjacency.n_agents != system.n_agents:
        raise ParameterError("adjacency", adjacency.n_agents, f"expected {system.n_agents} agents")
    failures = []
    if not adjacency.symmetric:
        failures.append(Hypothesis.NOT_SYMMETRIC)
    if not is_strongly_connected(adjacency):
        failures.append(Hypothesis.NOT_STRONGLY_CONNECTED)
    if failures:
        raise HypothesisError(failures, detail="cascade thresholds need a symmetric irreducible adjacency")


def _unit(direction: np.ndarray, n_agents: int) -> np.ndarray:
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (n_agents,):
        raise ParameterError("direction", direction.shape, f"expected one entry per agent ({n_agents})")
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise ParameterError("direction", direction.tolist(), "direction must be nonzero")
    return direction / norm


def cascade_outcomes(
    system: AttentionSystem,
    inputs: np.ndarray,
    *,
    u0: Optional[float] = None,
    t_end: float = CASCADE_TIME,
    dt: float = Numerics.DT,
) -> np.ndarray:
    """Cascade flags of a batch of constant inputs (shape (trials, n_agents)), all started at rest."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    start = np.tile(system.rest_state(u0), (inputs.shape[0], 1))
    final = integrate_final(system.with_inputs(inputs), start, t_end=t_end, dt=dt)
    return is_cascade(system.layout.opinions(final), system.strong_threshold())


def estimate_cascade_threshold(
    system: AttentionSystem,
    adjacency: AdjacencySpec,
    direction: np.ndarray,
    bracket: tuple[float, float] = (0.0, 0.1),
    *,
    resolution: float = 5e-4,
    samples: int = 7,
    u0: Optional[float] = None,
    t_end: float = CASCADE_TIME,
    dt: float = Numerics.DT,
) -> CascadeThreshold:
    """
    Smallest input magnitude along `direction` that triggers a cascade, to within `resolution`.

    Every round integrates `samples` evenly spaced magnitudes inside the current bracket as one batch and
    keeps the sub-interval where the outcome switches, so the bracket shrinks by a factor samples + 1.

    :raises BracketError: The bracket ends don't straddle the threshold (the error holds both outcomes).
    :raises HypothesisError: The adjacency isn't symmetric and irreducible.
    """
    _check_cascade_system(system, adjacency)
    lower, upper = map(float, bracket)
    if not 0 <= lower < upper:
        raise ParameterError("bracket", bracket, "expected 0 <= lower < upper")
    if resolution <= 0 or samples < 1:
        raise ParameterError("resolution", (resolution, samples), "resolution and samples must be positive")
    unit = _unit(direction, system.n_agents)

    def run(magnitudes: np.ndarray) -> np.ndarray:
        return cascade_outcomes(system, magnitudes[:, None] * unit, u0=u0, t_end=t_end, dt=dt)

    ends = run(np.array([lower, upper]))
    runs = 2
    if bool(ends[0]) or not bool(ends[1]):
        raise BracketError(lower, upper, bool(ends[0]), bool(ends[1]))

    while upper - lower > resolution:
        magnitudes = np.linspace(lower, upper, samples + 2)[1:-1]
        outcomes = run(magnitudes)
        runs += samples
        cascading = np.flatnonzero(outcomes)
        if cascading.size and np.any(~outcomes[cascading[0] :]):
            log.warning(f"Non-monotone cascade outcomes in [{lower:.6g}, {upper:.6g}]: {outcomes.astype(int)}")
        if cascading.size:
            first = int(cascading[0])
            upper = float(magnitudes[first])
            lower = float(magnitudes[first - 1]) if first > 0 else lower
        else:
            lower = float(magnitudes[-1])
        log.debug(f"Cascade bracket narrowed to [{lower:.6g}, {upper:.6g}]")

    result = CascadeThreshold((lower + upper) / 2, lower, upper, resolution, unit, runs)
    log.info(f"Cascade threshold {result.threshold:.6g} (+- {(upper - lower) / 2:.2g}) after {runs} runs")
    return result


# region: Monte-Carlo frequency grid


def sample_aligned_inputs(
    w: np.ndarray,
    norm_range: tuple[float, float],
    alignment_range: tuple[float, float],
    n_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Random inputs with norm and |cos| of the angle to `w` drawn uniformly from the given ranges.

    b = m (s c w + sqrt(1 - c^2) q), with q a uniformly random unit vector orthogonal to w and a random sign s.
    """
    w = _unit(w, np.size(w))
    if w.size < 2:
        raise ParameterError("w", w.tolist(), "alignment sampling needs at least two agents")
    norms = rng.uniform(*norm_range, size=n_samples)
    alignments = rng.uniform(*alignment_range, size=n_samples)
    signs = rng.choice([-1.0, 1.0], size=n_samples)

    q = rng.standard_normal((n_samples, w.size))
    q -= np.outer(q @ w, w)
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return norms[:, None] * (signs[:, None] * alignments[:, None] * w + np.sqrt(1 - alignments**2)[:, None] * q)


@dataclass(frozen=True)
class _BinTask:
    system: AttentionSystem
    w: np.ndarray
    norm_range: tuple[float, float]
    alignment_range: tuple[float, float]
    trials: int
    seed: np.random.SeedSequence
    u0: Optional[float]
    t_end: float
    dt: float


def _bin_cascades(task: _BinTask) -> int:
    rng = np.random.default_rng(task.seed)
    inputs = sample_aligned_inputs(task.w, task.norm_range, task.alignment_range, task.trials, rng)
    outcomes = cascade_outcomes(task.system, inputs, u0=task.u0, t_end=task.t_end, dt=task.dt)
    return int(np.sum(outcomes))


def cascade_frequency_grid(
    system: AttentionSystem,
    adjacency: AdjacencySpec,
    w: np.ndarray,
    *,
    norm_edges: Sequence[float],
    alignment_edges: Sequence[float],
    trials: int,
    seed: Optional[int] = None,
    u0: Optional[float] = None,
    t_end: float = CASCADE_TIME,
    dt: float = Numerics.DT,
    workers: Optional[int] = None,
) -> pd.DataFrame:
    """
    Cascade frequency over a grid of (input norm, alignment |cos(b, w)|) bins.

    Every bin draws `trials` inputs from its own child of the seed sequence, so the grid is reproducible
    for a given seed regardless of the number of workers.
    """
    _check_cascade_system(system, adjacency)
    norm_edges = [float(edge) for edge in norm_edges]
    alignment_edges = [float(edge) for edge in alignment_edges]
    if len(norm_edges) < 2 or any(b <= a for a, b in zip(norm_edges, norm_edges[1:])) or norm_edges[0] < 0:
        raise ParameterError("norm_edges", norm_edges, "expected at least two increasing nonnegative edges")
    if (
        len(alignment_edges) < 2
        or any(b <= a for a, b in zip(alignment_edges, alignment_edges[1:]))
        or alignment_edges[0] < 0
        or alignment_edges[-1] > 1
    ):
        raise ParameterError("alignment_edges", alignment_edges, "expected at least two increasing edges in [0, 1]")
    if trials < 1:
        raise ParameterError("trials", trials, "at least one trial per bin is required")

    bins = [
        (norm_range, alignment_range)
        for norm_range in zip(norm_edges, norm_edges[1:])
        for alignment_range in zip(alignment_edges, alignment_edges[1:])
    ]
    sequence = np.random.SeedSequence(seed)
    if seed is None:
        log.info(f"Cascade study has no seed, drew seed={sequence.entropy}")
    seeds = sequence.spawn(len(bins))
    tasks = [
        _BinTask(system, np.asarray(w, dtype=float), norm_range, alignment_range, trials, child, u0, t_end, dt)
        for (norm_range, alignment_range), child in zip(bins, seeds)
    ]
    cascades = ordered_map(_bin_cascades, tasks, workers=workers)

    frame = pd.DataFrame(
        {
            "norm_low": [norm_range[0] for norm_range, _ in bins],
            "norm_high": [norm_range[1] for norm_range, _ in bins],
            "alignment_low": [alignment_range[0] for _, alignment_range in bins],
            "alignment_high": [alignment_range[1] for _, alignment_range in bins],
            "trials": trials,
            "cascades": cascades,
        }
    )
    frame["frequency"] = frame["cascades"] / frame["trials"]
    frame.attrs["seed"] = sequence.entropy
    log.info(f"Cascade frequencies over {len(bins)} bins with {trials} trials each")
    return frame


def is_nondecreasing(cascades: Sequence[int], trials: Sequence[int], confidence: float = 0.95) -> bool:
    """
    Whether a sequence of binomial frequencies is nondecreasing within Wilson confidence intervals.

    A step counts as a decrease only when the upper bound of the later bin is below the lower bound of the
    earlier one.
    """
    if len(cascades) != len(trials):
        raise ParameterError("trials", len(trials), f"expected {len(cascades)} entries")
    intervals = [
        binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
        for k, n in zip(cascades, trials)
    ]
    return all(later.high >= earlier.low for earlier, later in zip(intervals, intervals[1:]))


# endregion
