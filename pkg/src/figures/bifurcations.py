"""Pitchforks of the homogeneous two-option model: the threshold, its unfolding by inputs and pattern selection."""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.analysis import Regime, critical_attention, unfolding_direction
from src.dynamics import BranchPoint, integrate_final, sweep_bifurcation
from src.figures.base import FigureRecipe, FigureResult, matches_pattern, simulate
from src.graph import GraphKind, build_graph, spectral_extrema
from src.schemas import ScenarioConfig
from src.storage import branch_frame, trajectory_frame
from src.utils.plots import branch_chart, trajectory_chart
from src.utils.pool import ordered_map
from src.utils.scenario import build_scenario

log = logging.getLogger(__name__)


def _at(points: list[BranchPoint], value: float) -> list[BranchPoint]:
    return [point for point in points if abs(point.value - value) < 1e-12]


class PitchforkUnfolding(FigureRecipe):
    figure_id = "fig4"
    title = "Disagreement pitchfork on a three-agent path and its unfolding by an input"

    GRID = tuple(np.round(np.linspace(0.3, 0.6, 31), 10))
    BELOW, ABOVE = 0.39, 0.44
    INITIAL_NORM = 1e-3
    INITIAL_SEED = 4
    SYMMETRIC_INPUT = (0.2, 0.0, -0.2)
    UNFOLDING_WEIGHT = -0.1

    def _config(self, name: str, u: float, b: list[float], opinions: list[float], t_end: float) -> ScenarioConfig:
        return ScenarioConfig.parse_obj(
            {
                "name": f"{self.figure_id}_{name}",
                "graph": {"kind": "path", "n": 3},
                "model": {"form": "two_option", "d": 1.0, "u": u, "alpha": 1.0, "gamma": -1.0, "b": b},
                "initial": {"opinions": opinions},
                "integration": {"t_end": t_end, "record_every": 100},
            }
        )

    def inputs(self) -> dict[str, np.ndarray]:
        w_min = spectral_extrema(build_graph(GraphKind.PATH, 3)).w_min
        symmetric = np.array(self.SYMMETRIC_INPUT)
        return {"symmetric": symmetric, "unfolded": symmetric + self.UNFOLDING_WEIGHT * w_min}

    def scenarios(self) -> dict[str, ScenarioConfig]:
        direction = np.random.default_rng(self.INITIAL_SEED).standard_normal(3)
        start = (self.INITIAL_NORM * direction / np.linalg.norm(direction)).tolist()
        configs = {
            "below": self._config("below", self.BELOW, [0.0] * 3, start, 200.0),
            "above": self._config("above", self.ABOVE, [0.0] * 3, start, 300.0),
        }
        for name, b in self.inputs().items():
            configs[f"sweep_{name}"] = self._config(f"sweep_{name}", self.GRID[0], b.tolist(), [0.0] * 3, 1.0)
        return configs

    def run(
        self, *, seed: Optional[int] = None, dt: Optional[float] = None, workers: Optional[int] = None
    ) -> FigureResult:
        result = FigureResult(self.figure_id)
        configs = self.scenarios()

        below, below_run = simulate(configs["below"], seed=seed, dt=dt)
        prediction = critical_attention(below.params, below.adjacency)
        expected = 1 / (1 + np.sqrt(2))
        result.records["prediction"] = prediction.as_record()
        result.check(
            "critical attention is 1 / (1 + sqrt 2)",
            prediction.regime is Regime.DISAGREEMENT and abs(prediction.u_star - expected) < 1e-9,
            f"u* = {prediction.u_star:.12f}",
        )

        peak = float(np.max(np.abs(below_run.final_opinions)))
        result.check(f"u = {self.BELOW}: opinions decay to neutral", peak < 1e-4, f"max |x| {peak:.3g}")
        _, above_run = simulate(configs["above"], seed=seed, dt=dt)
        final = above_run.final_opinions
        result.check(
            f"u = {self.ABOVE}: disagreement along v_min",
            float(np.max(np.abs(final))) > 0.05 and matches_pattern(final, prediction.pattern_vector),
            f"x = {np.round(final, 4).tolist()}",
        )
        for name, trajectory in (("below", below_run), ("above", above_run)):
            result.tables[name] = trajectory_frame(trajectory)
            result.plots[name] = trajectory_chart(trajectory, f"{self.figure_id} u = {getattr(self, name.upper())}")

        v_min = prediction.pattern_vector
        seeds = [np.zeros(3)] + [scale * v_min for scale in (1.0, -1.0, 2.0, -2.0)]
        summary = spectral_extrema(below.adjacency)
        for name in ("symmetric", "unfolded"):
            scenario = build_scenario(configs[f"sweep_{name}"], seed=seed, dt=dt)
            points = sweep_bifurcation(scenario.system, self.GRID, seeds, projection=v_min, workers=workers)
            result.tables[f"sweep_{name}"] = branch_frame(points, scenario.system.layout)
            result.plots[f"sweep_{name}"] = branch_chart(points, f"{self.figure_id} {name} input")

            first, last = _at(points, self.GRID[0]), _at(points, self.GRID[-1])
            unfolding = unfolding_direction(scenario.params.b, summary, Regime.DISAGREEMENT)
            result.records[f"sweep_{name}"] = {"unfolding": unfolding.as_record(), "n_points": len(points)}
            result.check(
                f"{name}: a single stable equilibrium at u = {self.GRID[0]}",
                len(first) == 1 and first[0].stable,
                f"{len(first)} equilibria",
            )
            if name == "symmetric":
                stable = [point.projection for point in last if point.stable]
                result.check(
                    f"{name}: symmetric pitchfork at u = {self.GRID[-1]}",
                    unfolding.symmetric
                    and len(stable) == 2
                    and any(not point.stable for point in last)
                    and abs(sum(stable)) < 1e-6,
                    f"stable projections {stable}",
                )
            else:
                stable_points = [point for point in last if point.stable]
                strongest = max(stable_points, key=lambda point: abs(point.projection), default=None)
                result.check(
                    f"{name}: branch selected by the sign of <w_min, b>",
                    unfolding.sign == -1
                    and bool(first)
                    and np.sign(first[0].projection) == unfolding.sign
                    and strongest is not None
                    and np.sign(strongest.projection) == unfolding.sign,
                    f"sign {unfolding.sign}, projection below threshold {first[0].projection if first else None}",
                )
        return result


@dataclass(frozen=True)
class _PatternTask:
    config: ScenarioConfig
    regime: Regime
    n_initial: int
    seed: Optional[int]
    dt: Optional[float]


def _pattern_share(task: _PatternTask) -> dict[str, object]:
    """Share of random initial conditions that settle on the predicted sign pattern."""
    scenario = build_scenario(task.config, seed=task.seed, dt=task.dt)
    prediction = critical_attention(scenario.params, scenario.adjacency)
    rng = np.random.default_rng(scenario.config.seed)
    starts = rng.uniform(-1.0, 1.0, size=(task.n_initial, scenario.adjacency.n_agents))
    finals = integrate_final(scenario.system, starts, t_end=scenario.t_end, dt=scenario.dt)
    matched = [matches_pattern(final, prediction.pattern_vector) for final in finals]
    return {
        "u_star": prediction.u_star,
        "u": float(scenario.params.u[0]),
        "regime": prediction.regime.value,
        "expected_regime": task.regime.value,
        "matched": int(sum(matched)),
        "initial_conditions": task.n_initial,
        "share": float(np.mean(matched)),
    }


class PatternSelection(FigureRecipe):
    figure_id = "fig5"
    title = "Agreement and disagreement patterns follow the extremal eigenvectors"

    GRAPHS = {
        "path6": (GraphKind.PATH, 6, 0.31),
        "cycle6": (GraphKind.CYCLE, 6, 0.31),
        "star6": (GraphKind.STAR, 6, 0.26),
        "wheel10": (GraphKind.WHEEL, 10, 0.26),
    }
    COUPLINGS = {Regime.AGREEMENT: 1.3, Regime.DISAGREEMENT: -1.3}
    N_INITIAL = 50
    REQUIRED_SHARE = 0.95

    def scenarios(self) -> dict[str, ScenarioConfig]:
        configs = {}
        for graph, (kind, n, u) in self.GRAPHS.items():
            for regime, gamma in self.COUPLINGS.items():
                configs[f"{graph}_{regime.value}"] = ScenarioConfig.parse_obj(
                    {
                        "name": f"{self.figure_id}_{graph}_{regime.value}",
                        "seed": 5,
                        "graph": {"kind": kind.value, "n": n},
                        "model": {"form": "two_option", "d": 1.0, "u": u, "alpha": 1.2, "gamma": gamma},
                        "initial": {"random": {"distribution": "uniform", "low": -1.0, "high": 1.0}},
                        "integration": {"t_end": 500.0, "record_every": 500},
                    }
                )
        return configs

    def run(
        self, *, seed: Optional[int] = None, dt: Optional[float] = None, workers: Optional[int] = None
    ) -> FigureResult:
        result = FigureResult(self.figure_id)
        configs = self.scenarios()
        tasks = [
            _PatternTask(config, Regime(name.rsplit("_", 1)[1]), self.N_INITIAL, seed, dt)
            for name, config in configs.items()
        ]
        shares = ordered_map(_pattern_share, tasks, workers=workers)

        for (name, config), share in zip(configs.items(), shares):
            result.records[name] = share
            log.info(f"{self.figure_id} {name}: {share['share']:.0%} of initial conditions on the predicted pattern")
            result.check(
                f"{name}: {share['regime']} pattern from {self.REQUIRED_SHARE:.0%} of initial conditions",
                share["regime"] == share["expected_regime"]
                and share["u"] > share["u_star"]
                and share["share"] >= self.REQUIRED_SHARE,
                f"{share['matched']}/{share['initial_conditions']} matched, u* = {share['u_star']:.4g}",
            )
            _, trajectory = simulate(config, seed=seed, dt=dt)
            result.tables[name] = trajectory_frame(trajectory)
            result.plots[name] = trajectory_chart(trajectory, f"{self.figure_id} {name}")
        return result
