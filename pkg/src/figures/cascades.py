"""Opinion cascades on a five-agent path: triggered by a single input, and their frequency over random inputs."""
import logging
from typing import Optional

import numpy as np

from src.analysis import Regime, critical_attention
from src.feedback import cascade_frequency_grid, estimate_cascade_threshold, is_cascade, is_nondecreasing
from src.feedback.cascades import CASCADE_TIME
from src.figures.base import FigureRecipe, FigureResult, matches_pattern, signs, simulate
from src.graph import GraphKind, build_graph
from src.schemas import ModelConfig, ScenarioConfig
from src.storage import trajectory_frame
from src.utils.errors import BracketError
from src.utils.plots import cascade_heatmap, trajectory_chart
from src.utils.scenario import build_params, build_scenario

log = logging.getLogger(__name__)

D, ALPHA = 1.0, 2.0
N_AGENTS = 5


def _model(gamma: float, b: list[float]) -> ModelConfig:
    return ModelConfig(form="two_option", d=D, alpha=ALPHA, gamma=gamma, b=b)


def path_critical_attention(gamma: float) -> float:
    """Critical attention on the path, d / alpha for uncoupled agents."""
    if gamma == 0:
        return D / ALPHA
    adjacency = build_graph(GraphKind.PATH, N_AGENTS)
    return critical_attention(build_params(_model(gamma, [0.0] * N_AGENTS), adjacency), adjacency).u_star


class TriggeredCascades(FigureRecipe):
    figure_id = "fig8"
    title = "A cascade triggered by one agent's input under cooperative, competitive and no coupling"

    COUPLINGS = {"cooperative": 1.0, "competitive": -1.0, "uncoupled": 0.0}
    INPUTS = [-0.05, 0.05, 0.05, 0.05, 0.05]
    TRIGGER = 0.25
    SWITCH_TIME = 20.0

    def scenarios(self) -> dict[str, ScenarioConfig]:
        triggered = [*self.INPUTS[:-1], self.TRIGGER]
        configs = {}
        for name, gamma in self.COUPLINGS.items():
            u_star = path_critical_attention(gamma)
            configs[name] = ScenarioConfig(
                name=f"{self.figure_id}_{name}",
                seed=8,
                graph={"kind": "path", "n": N_AGENTS},
                model=_model(gamma, self.INPUTS),
                attention={"tau_u": 5.0, "n_hill": 3.0, "y_th": 0.1, "u_low": 0.2 * u_star, "u_high": u_star + 0.3},
                schedule=[{"t_start": self.SWITCH_TIME, "b": triggered, "tag": "agent 5 input raised"}],
                initial={"random": {"distribution": "uniform", "low": -0.2, "high": 0.2}},
                integration={"t_end": 200.0, "record_every": 50},
            )
        return configs

    def run(
        self, *, seed: Optional[int] = None, dt: Optional[float] = None, workers: Optional[int] = None
    ) -> FigureResult:
        result = FigureResult(self.figure_id)
        triggered = np.array([*self.INPUTS[:-1], self.TRIGGER])
        for name, config in self.scenarios().items():
            scenario, trajectory = simulate(config, seed=seed, dt=dt)
            strong = scenario.system.strong_threshold()
            before = trajectory.opinions()[trajectory.times < self.SWITCH_TIME][-1]
            final = trajectory.final_opinions
            result.tables[name] = trajectory_frame(trajectory)
            result.plots[name] = trajectory_chart(trajectory, f"{self.figure_id} {name}")
            result.records[name] = {"before_switch": before.tolist(), "final": final.tolist(), "strong": strong}

            cascaded = bool(is_cascade(final, strong))
            log.info(f"{self.figure_id} {name}: {cascaded=} at t = {trajectory.times[-1]:g}")
            result.check(f"{name}: no cascade before the switch", not is_cascade(before, strong), f"x = {before}")
            if name == "cooperative":
                passed = cascaded and len(set(signs(final))) == 1 and 0 not in signs(final)
            elif name == "competitive":
                pattern = critical_attention(scenario.params, scenario.adjacency).pattern_vector
                passed = cascaded and matches_pattern(final, pattern)
            else:
                passed = cascaded and np.array_equal(signs(final), signs(triggered))
            result.check(f"{name}: cascade with the expected sign pattern", passed, f"x = {np.round(final, 3)}")
        return result


class CascadeFrequencies(FigureRecipe):
    figure_id = "fig9_scaled"
    title = "Cascade frequency over random inputs binned by norm and alignment with the centrality vector"

    COUPLINGS = {"cooperative": 1.0, "competitive": -1.0}
    NORM_EDGES = tuple(np.linspace(0.0, 0.1, 6))
    ALIGNMENT_EDGES = tuple(np.linspace(0.0, 1.0, 6))
    Y_TH = 0.2
    THRESHOLD_Y_TH = (0.1, 0.2, 0.3)
    THRESHOLD_BRACKET = (0.0, 0.5)

    def __init__(self, trials: int = 1000):
        self.trials = trials

    def scenarios(self) -> dict[str, ScenarioConfig]:
        configs = {}
        for name, gamma in self.COUPLINGS.items():
            u_star = path_critical_attention(gamma)
            configs[name] = ScenarioConfig(
                name=f"{self.figure_id}_{name}",
                seed=9,
                graph={"kind": "path", "n": N_AGENTS},
                model=_model(gamma, [0.0] * N_AGENTS),
                attention={
                    "tau_u": 10.0,
                    "n_hill": 3.0,
                    "y_th": self.Y_TH,
                    "u_low": u_star - 0.01,
                    "u_high": u_star + 0.3,
                },
                initial={"u": 0.0},
                integration={"t_end": CASCADE_TIME, "record_every": 100},
            )
        return configs

    def run(
        self, *, seed: Optional[int] = None, dt: Optional[float] = None, workers: Optional[int] = None
    ) -> FigureResult:
        result = FigureResult(self.figure_id)
        seed = 9 if seed is None else seed
        for name, config in self.scenarios().items():
            scenario = build_scenario(config, seed=seed, dt=dt)
            prediction = critical_attention(scenario.params, scenario.adjacency)
            frame = cascade_frequency_grid(
                scenario.system,
                scenario.adjacency,
                prediction.centrality_vector,
                norm_edges=self.NORM_EDGES,
                alignment_edges=self.ALIGNMENT_EDGES,
                trials=self.trials,
                seed=seed,
                u0=0.0,
                dt=scenario.dt,
                workers=workers,
            )
            result.tables[name] = frame
            result.plots[name] = cascade_heatmap(frame, f"{self.figure_id} {name} ({self.trials} trials per bin)")

            aligned = frame[frame["alignment_high"] == self.ALIGNMENT_EDGES[-1]].sort_values("norm_low")
            strongest = frame[frame["norm_high"] == self.NORM_EDGES[-1]].sort_values("alignment_low")
            result.check(
                f"{name}: cascades grow more frequent with the input norm",
                is_nondecreasing(aligned["cascades"], aligned["trials"]),
                f"frequencies {aligned['frequency'].round(3).tolist()}",
            )
            result.check(
                f"{name}: cascades grow more frequent with the alignment",
                is_nondecreasing(strongest["cascades"], strongest["trials"]),
                f"frequencies {strongest['frequency'].round(3).tolist()}",
            )

            if prediction.regime is Regime.AGREEMENT:
                self._check_threshold_order(result, config, prediction.centrality_vector, seed=seed, dt=dt)
        return result

    def _check_threshold_order(
        self, result: FigureResult, config: ScenarioConfig, w: np.ndarray, *, seed: int, dt: Optional[float]
    ) -> None:
        """A higher Hill threshold y_th must give a higher cascade threshold along w."""
        thresholds = []
        for y_th in self.THRESHOLD_Y_TH:
            variant = config.copy(update={"attention": config.attention.copy(update={"y_th": y_th})})
            scenario = build_scenario(variant, seed=seed, dt=dt)
            try:
                estimate = estimate_cascade_threshold(
                    scenario.system, scenario.adjacency, w, self.THRESHOLD_BRACKET, u0=0.0, dt=scenario.dt
                )
            except BracketError as exc:
                result.check("cascade threshold grows with y_th", False, f"y_th = {y_th}: {exc}")
                return
            thresholds.append(estimate)
            result.records[f"threshold_y_th_{y_th:g}"] = estimate.as_record()

        result.check(
            "cascade threshold grows with y_th",
            all(high.lower > low.upper for low, high in zip(thresholds, thresholds[1:])),
            ", ".join(f"p = {t.threshold:.4g} at y_th = {y_th}" for t, y_th in zip(thresholds, self.THRESHOLD_Y_TH)),
        )
