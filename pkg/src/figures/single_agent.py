"""A single agent with attention feedback: weak and strong opinion states, and hysteresis under an input flip."""
import logging
from typing import Optional

import numpy as np

from src.figures.base import FigureRecipe, FigureResult, simulate
from src.schemas import ScenarioConfig
from src.storage import trajectory_frame
from src.utils.plots import trajectory_chart

log = logging.getLogger(__name__)


def _single_agent(name: str, b: float, u_high: float, t_end: float, schedule: Optional[list] = None) -> ScenarioConfig:
    return ScenarioConfig.parse_obj(
        {
            "name": name,
            "graph": {"kind": "custom", "matrix": [[0.0]]},
            "model": {"form": "two_option", "d": 1.0, "alpha": 2.0, "beta": -1.0, "b": b},
            "attention": {"tau_u": 1.0, "n_hill": 2.0, "y_th": 4.0, "u_low": 0.0, "u_high": u_high},
            "schedule": schedule or [],
            "initial": {"opinions": [0.0], "u": 0.0},
            "integration": {"t_end": t_end, "record_every": 10},
        }
    )


class AttentionStates(FigureRecipe):
    figure_id = "fig6"
    title = "Weak and strong opinion states of a single agent with attention feedback"

    U_HIGH = 2.0

    def scenarios(self) -> dict[str, ScenarioConfig]:
        return {
            "weak": _single_agent(f"{self.figure_id}_weak", 0.5, self.U_HIGH, 50.0),
            "strong": _single_agent(f"{self.figure_id}_strong", 1.0, self.U_HIGH, 50.0),
        }

    def run(
        self, *, seed: Optional[int] = None, dt: Optional[float] = None, workers: Optional[int] = None
    ) -> FigureResult:
        result = FigureResult(self.figure_id)
        for name, config in self.scenarios().items():
            scenario, trajectory = simulate(config, seed=seed, dt=dt)
            x = float(trajectory.final_opinions[0])
            u = float(trajectory.extra("u")[-1, 0])
            result.tables[name] = trajectory_frame(trajectory)
            result.plots[name] = trajectory_chart(trajectory, f"{self.figure_id} b = {config.model.b}")
            result.records[name] = {"x": x, "u": u, "strong_threshold": scenario.system.strong_threshold()}

            if name == "weak":
                weak = u < 0.1 * self.U_HIGH and abs(x) < 1
                result.check("b = 0.5: weak state with low attention", weak, f"{x=:.4g}, {u=:.4g}")
            else:
                result.check("b = 1: strong state", x > scenario.system.strong_threshold(), f"{x=:.4g}, {u=:.4g}")
        return result


class AttentionHysteresis(FigureRecipe):
    figure_id = "fig7"
    title = "Hysteresis of a single agent with attention feedback when its input flips sign"

    SWITCH_TIME = 50.0
    U_HIGH = {"persistent": 2.5, "flipping": 1.0}

    def scenarios(self) -> dict[str, ScenarioConfig]:
        schedule = [{"t_start": self.SWITCH_TIME, "b": [-1.0], "tag": "input flips to -1"}]
        return {
            name: _single_agent(f"{self.figure_id}_{name}", 1.0, u_high, 2 * self.SWITCH_TIME, schedule)
            for name, u_high in self.U_HIGH.items()
        }

    def run(
        self, *, seed: Optional[int] = None, dt: Optional[float] = None, workers: Optional[int] = None
    ) -> FigureResult:
        result = FigureResult(self.figure_id)
        for name, config in self.scenarios().items():
            _, trajectory = simulate(config, seed=seed, dt=dt)
            before = float(trajectory.opinions()[trajectory.times < self.SWITCH_TIME][-1, 0])
            after = float(trajectory.final_opinions[0])
            result.tables[name] = trajectory_frame(trajectory)
            result.plots[name] = trajectory_chart(trajectory, f"{self.figure_id} u_high = {self.U_HIGH[name]}")
            result.records[name] = {"before_switch": before, "final": after, "u_high": self.U_HIGH[name]}
            log.info(f"{self.figure_id} {name}: x = {before:.4g} before the switch, {after:.4g} at the end")

            expected = 1 if name == "persistent" else -1
            result.check(
                f"u_high = {self.U_HIGH[name]}: opinion {'keeps its sign' if expected > 0 else 'follows the input'}",
                before > 0 and np.sign(after) == expected,
                f"x = {before:.4g} -> {after:.4g}",
            )
        return result
