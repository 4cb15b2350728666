"""
Equilibria of the composed systems, their stability and multi-start bifurcation sweeps.

Everything is computed in reduced coordinates c = B^T y, where the columns of B span the subspace the
dynamics live on (zero-sum opinion rows plus the free feedback variables). This removes the directions
projected out of the opinion field, which would otherwise make every Jacobian singular.
"""
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from src.analysis import StateClassification, classify_state
from src.constants import Numerics
from src.dynamics.abc import StateLayout, SystemBase
from src.dynamics.integrate import integrate_final
from src.utils.errors import DimensionError, IntegrationError, ParameterError
from src.utils.pool import ordered_map

log = logging.getLogger(__name__)

_FD_STEP = 1e-6
_MIN_DAMPING = 1.0 / 1024


@dataclass(frozen=True)
class EquilibriumReport:
    state: np.ndarray
    layout: StateLayout
    residual: float
    tolerance: float
    converged: bool
    stable: bool
    eigenvalues: np.ndarray
    classification: StateClassification
    iterations: int
    method: str

    @property
    def opinions(self) -> np.ndarray:
        return self.layout.opinions(self.state)

    def as_record(self) -> dict[str, object]:
        return {
            "state": self.state.tolist(),
            "residual": self.residual,
            "tolerance": self.tolerance,
            "converged": self.converged,
            "stable": self.stable,
            "max_real_eigenvalue": float(np.max(self.eigenvalues.real)) if self.eigenvalues.size else None,
            "classification": self.classification.as_record(),
            "iterations": self.iterations,
            "method": self.method,
        }


def _flat_guess(system: SystemBase, guess: np.ndarray) -> np.ndarray:
    """Accept either a full flat state or (for systems without extra variables) bare opinions."""
    guess = np.asarray(guess, dtype=float)
    if guess.shape == (system.dim,):
        return system.layout.project(guess)
    if not system.layout.extras and guess.shape == system.layout.opinion_shape:
        return system.layout.project(guess.reshape(system.dim))
    raise DimensionError("guess", (system.dim,), guess.shape)


def _reduced_field(system: SystemBase, basis: np.ndarray, c: np.ndarray) -> np.ndarray:
    return system.field(c @ basis.T) @ basis


def reduced_jacobian(system: SystemBase, y: np.ndarray, basis: Optional[np.ndarray] = None) -> np.ndarray:
    """Central difference Jacobian (step 1e-6) of the field restricted to the invariant subspace."""
    basis = system.layout.basis() if basis is None else basis
    c = y @ basis
    offsets = _FD_STEP * np.eye(c.size)
    plus = _reduced_field(system, basis, c + offsets)
    minus = _reduced_field(system, basis, c - offsets)
    return ((plus - minus) / (2 * _FD_STEP)).T


def stability(system: SystemBase, y: np.ndarray) -> tuple[bool, np.ndarray]:
    """Whether every eigenvalue of the restricted Jacobian has real part below -1e-7 (configurable)."""
    eigenvalues = scipy.linalg.eigvals(reduced_jacobian(system, y))
    stable = bool(np.all(eigenvalues.real < -Numerics.STABILITY_TOL))
    return stable, eigenvalues


def _newton(
    system: SystemBase,
    basis: np.ndarray,
    c: np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, float, int]:
    """Damped Newton iteration with a halving line search, returns the best iterate, its residual and the steps."""
    g = _reduced_field(system, basis, c)
    norm = float(np.linalg.norm(g))
    for iteration in range(max_iter):
        if norm < tol:
            return c, norm, iteration

        jacobian = reduced_jacobian(system, c @ basis.T, basis)
        step = scipy.linalg.lstsq(jacobian, -g)[0]
        damping = 1.0
        while damping >= _MIN_DAMPING:
            trial = c + damping * step
            g_trial = _reduced_field(system, basis, trial)
            trial_norm = float(np.linalg.norm(g_trial))
            if np.isfinite(trial_norm) and trial_norm < (1 - 1e-4 * damping) * norm:
                break
            damping /= 2
        else:
            log.debug(f"Newton stalled at residual {norm:.3e} after {iteration} iterations")
            return c, norm, iteration

        c, g, norm = trial, g_trial, trial_norm
    return c, norm, max_iter


def find_equilibrium(
    system: SystemBase,
    guess: np.ndarray,
    tol: float = 1e-10,
    *,
    max_iter: int = 50,
    fallback_time: float = 500.0,
    dt: float = Numerics.DT,
) -> EquilibriumReport:
    """
    Converge to an equilibrium near `guess`.

    Damped Newton iteration with a finite difference Jacobian runs first. When it stalls or runs out of
    iterations, the system is integrated from the guess for `fallback_time` and Newton is restarted from
    there. The report carries the residual |f(y)| either way, `converged` means it is below `tol`.
    """
    if tol <= 0:
        raise ParameterError("tol", tol, "must be positive")
    y0 = _flat_guess(system, guess)
    basis = system.layout.basis()

    c, residual, iterations = _newton(system, basis, y0 @ basis, tol, max_iter)
    method = "newton"
    if residual >= tol:
        try:
            settled = integrate_final(system, y0, t_end=fallback_time, dt=dt)
        except IntegrationError as exc:
            log.debug(f"Fallback integration diverged after t={exc.last_finite_time}")
        else:
            c_fallback, residual_fallback, extra_iterations = _newton(system, basis, settled @ basis, tol, max_iter)
            if residual_fallback < residual:
                c, residual = c_fallback, residual_fallback
                iterations += extra_iterations
                method = "integration+newton"

    y = system.layout.project(c @ basis.T)
    residual = float(np.linalg.norm(system.field(y)))
    stable, eigenvalues = stability(system, y)
    report = EquilibriumReport(
        state=y,
        layout=system.layout,
        residual=residual,
        tolerance=tol,
        converged=residual < tol,
        stable=stable,
        eigenvalues=eigenvalues,
        classification=classify_state(system.layout.opinions(y), system.strong_threshold()),
        iterations=iterations,
        method=method,
    )
    log.debug(f"Equilibrium search ({method}) ended with residual {residual:.3e}, {stable=}")
    return report


# region: Sweeps


@dataclass(frozen=True)
class BranchPoint:
    parameter: str
    value: float
    state: np.ndarray
    projection: float
    stable: bool
    residual: float

    def as_row(self, layout: StateLayout) -> dict[str, object]:
        row: dict[str, object] = {
            self.parameter: self.value,
            "projection": self.projection,
            "stable": self.stable,
            "residual": self.residual,
        }
        row.update(zip(layout.columns(), self.state.tolist()))
        return row


def _converge(task: tuple[SystemBase, np.ndarray, float]) -> EquilibriumReport:
    system, seed, tol = task
    return find_equilibrium(system, seed, tol)


def _projector(layout: StateLayout, direction: Optional[np.ndarray]) -> np.ndarray:
    """Unit vector over the flat opinion block that branch states are projected on for plotting."""
    if direction is None:
        return np.full(layout.opinion_size, 1.0 / np.sqrt(layout.opinion_size))
    direction = np.asarray(direction, dtype=float)
    if direction.shape == (layout.opinion_size,):
        return direction / np.linalg.norm(direction)
    if direction.shape == (layout.n_agents,):
        # agent vectors project the first option of every agent
        full = np.zeros(layout.opinion_shape)
        full[:, 0] = direction / np.linalg.norm(direction)
        return full.reshape(layout.opinion_size)
    raise DimensionError("projection", (layout.n_agents,), direction.shape)


def sweep_bifurcation(
    system: SystemBase,
    values: Sequence[float],
    seeds: Sequence[np.ndarray],
    *,
    parameter: str = "u",
    projection: Optional[np.ndarray] = None,
    tol: float = 1e-10,
    workers: Optional[int] = None,
) -> list[BranchPoint]:
    """
    Equilibria over a sorted parameter grid, converged from every seed and deduplicated per grid value.

    Runs fan out to the worker pool; the result is ordered by grid value, then by projection. Seeds that
    don't converge are dropped, so a grid value may end up with no branch points.
    """
    grid = [float(value) for value in values]
    if any(later < earlier for earlier, later in zip(grid, grid[1:])):
        raise ParameterError("grid", grid, "parameter values must be sorted")
    if not seeds:
        raise ParameterError("seeds", seeds, "at least one seed is required")
    starts = [_flat_guess(system, seed) for seed in seeds]
    direction = _projector(system.layout, projection)

    tasks = [(system.with_parameter(parameter, value), start, tol) for value in grid for start in starts]
    reports = ordered_map(_converge, tasks, workers=workers)

    points: list[BranchPoint] = []
    for index, value in enumerate(grid):
        distinct: list[EquilibriumReport] = []
        for report in reports[index * len(starts) : (index + 1) * len(starts)]:
            if not report.converged:
                continue
            if any(np.max(np.abs(report.state - other.state)) < Numerics.DEDUP_TOL for other in distinct):
                continue
            distinct.append(report)

        branch = [
            BranchPoint(
                parameter=parameter,
                value=value,
                state=report.state,
                projection=float(report.state[: system.layout.opinion_size] @ direction),
                stable=report.stable,
                residual=report.residual,
            )
            for report in distinct
        ]
        points.extend(sorted(branch, key=lambda point: point.projection))

    log.info(f"Swept {parameter} over {len(grid)} values from {len(starts)} seeds: {len(points)} branch points")
    return points


# endregion
