import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import ClassVar, Optional

import numpy as np
import pandas as pd

from src.dynamics import Trajectory, integrate
from src.schemas import ScenarioConfig
from src.utils.errors import ChecklistError
from src.utils.scenario import Scenario, build_scenario

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class FigureResult:
    """Everything a recipe produced: the checklist, data tables, summary records and rendered plots."""

    figure_id: str
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)
    records: dict[str, dict[str, object]] = field(default_factory=dict)
    plots: dict[str, str] = field(default_factory=dict)

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))
        level = logging.INFO if passed else logging.WARNING
        log.log(level, f"[{self.figure_id}] {name}: {'ok' if passed else 'FAILED'}")
        if detail:
            log.debug(f"[{self.figure_id}] {name}: {detail}")

    @property
    def failed(self) -> list[str]:
        return [check.name for check in self.checks if not check.passed]

    @property
    def passed(self) -> bool:
        return not self.failed

    def report(self) -> dict[str, object]:
        return {
            "figure": self.figure_id,
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
            "records": self.records,
        }

    def raise_for_failures(self) -> None:
        if self.failed:
            raise ChecklistError(self.figure_id, self.failed)


class FigureRecipe(ABC):
    """A bundled reproduction: fixed scenarios, the runs over them and the properties their results must show."""

    figure_id: ClassVar[str]
    title: ClassVar[str]

    @abstractmethod
    def scenarios(self) -> dict[str, ScenarioConfig]:
        """The scenario documents this recipe runs, keyed by panel name."""
        raise NotImplementedError()

    @abstractmethod
    def run(
        self, *, seed: Optional[int] = None, dt: Optional[float] = None, workers: Optional[int] = None
    ) -> FigureResult:
        raise NotImplementedError()


def simulate(
    config: ScenarioConfig, *, seed: Optional[int] = None, dt: Optional[float] = None
) -> tuple[Scenario, Trajectory]:
    scenario = build_scenario(config, seed=seed, dt=dt)
    trajectory = integrate(
        scenario.system,
        scenario.initial_state,
        scenario.schedule,
        t_end=scenario.t_end,
        dt=scenario.dt,
        record_every=config.integration.record_every,
    )
    return scenario, trajectory


def signs(values: np.ndarray, tol: float = 1e-3) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.where(np.abs(values) < tol, 0, np.sign(values)).astype(int)


def matches_pattern(x: np.ndarray, pattern: np.ndarray, tol: float = 1e-3) -> bool:
    """Whether the sign pattern of `x` equals the one of `pattern` up to a global sign."""
    observed, expected = signs(x, tol), signs(pattern, 1e-12)
    return bool(np.array_equal(observed, expected) or np.array_equal(observed, -expected))
