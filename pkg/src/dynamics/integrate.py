"""
Fixed-step integration of the composed opinion systems.

Integration uses the classical fourth order Runge-Kutta scheme. Steps are shortened so that they end
exactly on every schedule boundary, after each step the opinion rows are re-projected onto the zero-sum
subspace.
"""
import logging
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.constants import Numerics
from src.dynamics.abc import StateLayout, SystemBase
from src.graph import frozen_array
from src.model import project_tangent
from src.utils.errors import DimensionError, IntegrationError, ParameterError

log = logging.getLogger(__name__)

_BOUNDARY_SLACK = 1e-9


@dataclass(frozen=True)
class ScheduleSegment:
    """
    A piecewise-constant change applied at `t_start`.

    `b` replaces the input (one value per agent for two-option systems, a raw n_agents x n_options matrix
    otherwise, projected on construction). `sigma` replaces the sign of the coupling-gain feedback.
    """

    t_start: float
    b: Optional[np.ndarray] = None
    sigma: Optional[int] = None
    tag: str = ""

    def __post_init__(self) -> None:
        if self.b is not None:
            b = frozen_array(self.b, field="schedule.b")
            if b.ndim == 2:
                b = frozen_array(project_tangent(b), field="schedule.b")
            object.__setattr__(self, "b", b)
        if self.sigma is not None and self.sigma not in (-1, 1):
            raise ParameterError("schedule.sigma", self.sigma, "must be +1 or -1")
        if not self.tag:
            parts = []
            if self.b is not None:
                parts.append("input switch")
            if self.sigma is not None:
                parts.append(f"sigma={self.sigma:+d}")
            object.__setattr__(self, "tag", ", ".join(parts) or "segment")


@dataclass(frozen=True)
class InputSchedule:
    """Segments ordered by strictly increasing start times."""

    segments: tuple[ScheduleSegment, ...] = ()

    def __post_init__(self) -> None:
        segments = tuple(self.segments)
        starts = [segment.t_start for segment in segments]
        if any(later <= earlier for earlier, later in zip(starts, starts[1:])):
            raise ParameterError("schedule", starts, "segment starts must be strictly increasing")
        object.__setattr__(self, "segments", segments)

    @classmethod
    def constant(cls, b: np.ndarray) -> "InputSchedule":
        return cls((ScheduleSegment(0.0, b=b, tag="initial input"),))

    def split(self, t0: float) -> tuple[list[ScheduleSegment], list[ScheduleSegment]]:
        """Segments already active at `t0` and the ones starting after it."""
        active = [segment for segment in self.segments if segment.t_start <= t0]
        return active, [segment for segment in self.segments if segment.t_start > t0]


@dataclass(frozen=True)
class Trajectory:
    """Recorded flat states (shape (n_times, dim)) with the schedule events that happened along the way."""

    times: np.ndarray
    states: np.ndarray
    layout: StateLayout
    events: tuple[tuple[float, str], ...] = field(default=())

    def opinions(self) -> np.ndarray:
        return self.layout.opinions(self.states)

    def extra(self, name: str) -> np.ndarray:
        return self.layout.extra(self.states, name)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_opinions(self) -> np.ndarray:
        return self.layout.opinions(self.states[-1])

    def at(self, t: float) -> np.ndarray:
        """The recorded state closest to time `t`."""
        return self.states[int(np.argmin(np.abs(self.times - t)))]

    def window(self, t_start: float, t_end: float) -> "Trajectory":
        mask = (self.times >= t_start - _BOUNDARY_SLACK) & (self.times <= t_end + _BOUNDARY_SLACK)
        events = tuple(event for event in self.events if t_start <= event[0] <= t_end)
        return Trajectory(self.times[mask], self.states[mask], self.layout, events)


def _rk4_step(system: SystemBase, y: np.ndarray, h: float) -> np.ndarray:
    k1 = system.field(y)
    k2 = system.field(y + 0.5 * h * k1)
    k3 = system.field(y + 0.5 * h * k2)
    k4 = system.field(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _check_run(system: SystemBase, y0: np.ndarray, t0: float, t_end: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ParameterError("dt", dt, "step size must be positive")
    if t_end <= t0:
        raise ParameterError("t_end", t_end, f"must be larger than the start time {t0}")
    y0 = np.asarray(y0, dtype=float)
    if y0.shape[-1:] != (system.dim,):
        raise DimensionError("initial state", (system.dim,), y0.shape)
    if not np.all(np.isfinite(y0)):
        raise ParameterError("initial state", "non-finite", "initial state must be finite")
    return system.layout.project(y0)


def _march(
    system: SystemBase,
    y: np.ndarray,
    schedule: Optional[InputSchedule],
    *,
    t0: float,
    t_end: float,
    dt: float,
    stops: Iterable[float] = (),
    events: Optional[list[tuple[float, str]]] = None,
) -> Iterator[tuple[float, np.ndarray, bool]]:
    """
    Advance `y` from `t0` to `t_end`, yielding (t, state, on_boundary) after every step.

    Boundaries are the schedule starts and the extra `stops`; steps are shortened to land on them exactly.
    Applied segments are appended to `events`.
    """
    schedule = schedule or InputSchedule()
    active, upcoming = schedule.split(t0)
    for segment in active:
        system = system.segment_applied(segment)
        if events is not None:
            events.append((t0, segment.tag))

    pending = {segment.t_start: segment for segment in upcoming if segment.t_start < t_end}
    boundaries = sorted({*pending, *(t for t in stops if t0 < t < t_end), t_end})
    log.debug(f"Integrating {system.describe()} over [{t0}, {t_end}] with {dt=} (system #{system.system_no})")

    t = t0
    for boundary in boundaries:
        n_steps = max(1, int(np.ceil((boundary - t) / dt - _BOUNDARY_SLACK)))
        h = (boundary - t) / n_steps
        start = t
        for k in range(1, n_steps + 1):
            y_next = system.layout.project(_rk4_step(system, y, h))
            if not np.all(np.isfinite(y_next)):
                raise IntegrationError(t)
            y = y_next
            t = boundary if k == n_steps else start + k * h
            yield t, y, k == n_steps

        segment = pending.get(boundary)
        if segment is not None:
            system = system.segment_applied(segment)
            if events is not None:
                events.append((boundary, segment.tag))


def integrate(
    system: SystemBase,
    y0: np.ndarray,
    schedule: Optional[InputSchedule] = None,
    *,
    t_end: float,
    dt: float = Numerics.DT,
    t0: float = 0.0,
    record_every: int = 1,
) -> Trajectory:
    """
    Integrate a single initial state and record the trajectory.

    Every `record_every`-th step is recorded, together with every schedule boundary and the final time.

    :raises IntegrationError: The state stopped being finite (the error holds the last finite time).
    """
    if record_every < 1:
        raise ParameterError("record_every", record_every, "must be at least 1")
    y = _check_run(system, y0, t0, t_end, dt)
    if y.ndim != 1:
        raise DimensionError("initial state", (system.dim,), y.shape)

    times, states = [t0], [y]
    events: list[tuple[float, str]] = []
    for step, (t, state, on_boundary) in enumerate(
        _march(system, y, schedule, t0=t0, t_end=t_end, dt=dt, events=events), start=1
    ):
        if on_boundary or step % record_every == 0:
            times.append(t)
            states.append(state)

    log.debug(f"Recorded {len(times)} states, {len(events)} events (system #{system.system_no})")
    return Trajectory(np.array(times), np.array(states), system.layout, tuple(events))


def integrate_final(
    system: SystemBase,
    y0s: np.ndarray,
    schedule: Optional[InputSchedule] = None,
    *,
    t_end: float,
    dt: float = Numerics.DT,
    t0: float = 0.0,
    sample_times: Sequence[float] = (),
) -> np.ndarray:
    """
    Integrate a batch of initial states (shape (batch, dim)) at once, without recording trajectories.

    Returns the final states, or with `sample_times` the states at each of those times stacked in front,
    shape (len(sample_times), batch, dim). Every sample time must lie in (t0, t_end].
    """
    y = _check_run(system, y0s, t0, t_end, dt)
    samples = sorted(float(t) for t in sample_times)
    if samples and (samples[0] <= t0 or samples[-1] > t_end):
        raise ParameterError("sample_times", samples, f"must lie in ({t0}, {t_end}]")

    wanted = set(samples)
    collected: dict[float, np.ndarray] = {}
    for t, state, on_boundary in _march(system, y, schedule, t0=t0, t_end=t_end, dt=dt, stops=samples):
        y = state
        if on_boundary and t in wanted:
            collected[t] = state

    if not samples:
        return y
    return np.stack([collected[t] for t in samples])
