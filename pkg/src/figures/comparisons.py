"""Comparisons: all-to-all regimes, linear vs saturated signed consensus and clustered dissensus."""
import logging
import math
from typing import Optional

import numpy as np

from src.analysis import check_cluster_condition, classify_state, describe_outcome, reduce_clusters
from src.dynamics import TwoOptionSystem, cluster_means, distance_to_cluster_manifold, integrate_final
from src.figures.base import FigureRecipe, FigureResult, simulate
from src.schemas import ScenarioConfig
from src.storage import trajectory_frame
from src.utils.plots import trajectory_chart

log = logging.getLogger(__name__)


class AllToAllRegimes(FigureRecipe):
    figure_id = "fig1"
    title = "Consensus and dissensus on all-to-all graphs with two and three options"

    GROUPS = {"two_options": (8, 2), "three_options": (12, 3)}
    COUPLINGS = {"cooperative": (0.2, -0.1), "competitive": (-0.1, 0.2)}
    # variance of the additive noise on alpha, beta and the edge weights
    PERTURBATION_VARIANCE = {"cooperative": 0.01, "competitive": 0.001}

    def scenarios(self) -> dict[str, ScenarioConfig]:
        configs = {}
        for group, (n_agents, n_options) in self.GROUPS.items():
            for regime, (gamma, delta) in self.COUPLINGS.items():
                configs[f"{group}_{regime}"] = ScenarioConfig.parse_obj(
                    {
                        "name": f"{self.figure_id}_{group}_{regime}",
                        "seed": 1,
                        "graph": {"kind": "all_to_all", "n": n_agents},
                        "model": {
                            "form": "general",
                            "n_options": n_options,
                            "d": 1.0,
                            "u": 3.0,
                            "alpha": 0.2,
                            "beta": 0.1,
                            "gamma": gamma,
                            "delta": delta,
                            "perturbation": {"std": math.sqrt(self.PERTURBATION_VARIANCE[regime])},
                        },
                        "initial": {"random": {"distribution": "uniform", "low": -1.0, "high": 1.0}},
                        "integration": {"t_end": 200.0, "record_every": 20},
                    }
                )
        return configs

    def run(
        self, *, seed: Optional[int] = None, dt: Optional[float] = None, workers: Optional[int] = None
    ) -> FigureResult:
        result = FigureResult(self.figure_id)
        for name, config in self.scenarios().items():
            scenario, trajectory = simulate(config, seed=seed, dt=dt)
            final = trajectory.final_opinions
            classification = classify_state(final)
            outcome = describe_outcome(final)
            log.info(f"{self.figure_id} {name}: {outcome}")
            result.tables[name] = trajectory_frame(trajectory)
            result.records[name] = {"outcome": outcome, "classification": classification.as_record()}
            result.plots[name] = trajectory_chart(trajectory, f"{self.figure_id} {name}")

            opinionated = float(np.max(np.abs(final))) > 1e-2
            if name.endswith("cooperative"):
                result.check(f"{name}: consensus", opinionated and classification.consensus, outcome)
            else:
                result.check(
                    f"{name}: disagreement without consensus",
                    opinionated and classification.disagreement and not classification.consensus,
                    outcome,
                )
        return result


class LinearComparison(FigureRecipe):
    figure_id = "fig2"
    title = "Linear signed consensus against its saturated counterpart near the threshold"

    GRAPHS = {
        "balanced": [[0, 1, -1], [1, 0, -1], [-1, -1, 0]],
        "one_way": [[0, -1, 0], [-1, 0, 0], [1, 0, 0]],
    }
    INITIAL = [0.1, -0.09, -0.1]
    HORIZON = 5.0

    def scenarios(self) -> dict[str, ScenarioConfig]:
        configs = {}
        for graph, matrix in self.GRAPHS.items():
            for label, specialization, u in (
                ("linear", "linear_signed_consensus", 1.0),
                ("nonlinear", "signed_consensus", 1.01),
            ):
                configs[f"{graph}_{label}"] = ScenarioConfig.parse_obj(
                    {
                        "name": f"{self.figure_id}_{graph}_{label}",
                        "graph": {"kind": "custom", "matrix": matrix},
                        "model": {"form": "two_option", "specialization": specialization, "u": u},
                        "initial": {"opinions": self.INITIAL},
                        "integration": {"t_end": 20.0, "record_every": 1},
                    }
                )
        return configs

    def run(
        self, *, seed: Optional[int] = None, dt: Optional[float] = None, workers: Optional[int] = None
    ) -> FigureResult:
        result = FigureResult(self.figure_id)
        configs = self.scenarios()
        for graph in self.GRAPHS:
            _, linear = simulate(configs[f"{graph}_linear"], seed=seed, dt=dt)
            _, nonlinear = simulate(configs[f"{graph}_nonlinear"], seed=seed, dt=dt)
            for label, trajectory in (("linear", linear), ("nonlinear", nonlinear)):
                result.tables[f"{graph}_{label}"] = trajectory_frame(trajectory)
                result.plots[f"{graph}_{label}"] = trajectory_chart(trajectory, f"{self.figure_id} {graph} {label}")

            early = linear.times <= self.HORIZON + 1e-9
            gap = float(np.max(np.abs(linear.states[early] - nonlinear.states[early])))
            result.records[graph] = {"max_gap": gap, "horizon": self.HORIZON}
            result.check(f"{graph}: trajectories agree on [0, {self.HORIZON:g}]", gap < 0.05, f"max gap {gap:.3g}")
        return result


class ClusteredDissensus(FigureRecipe):
    figure_id = "fig3"
    title = "Antagonistic network: linear decay against saturated clustered dissensus"

    CLUSTERS = {"sizes": [2, 3], "within": -1.0, "across": -2.0}
    PARTITION = [[0, 1], [2, 3, 4]]
    INITIAL = [0.9, -0.4, 0.4, 0.1, -0.8]
    REDUCTION_START = 50.0

    def scenarios(self) -> dict[str, ScenarioConfig]:
        common = {
            "graph": {"kind": "custom", "clusters": self.CLUSTERS},
            "initial": {"opinions": self.INITIAL},
            "analysis": {"partition": self.PARTITION},
        }
        return {
            "linear": ScenarioConfig.parse_obj(
                {
                    **common,
                    "name": f"{self.figure_id}_linear",
                    "model": {"form": "two_option", "specialization": "linear_signed_consensus", "u": 1.0},
                    "integration": {"t_end": 200.0, "record_every": 10},
                }
            ),
            "nonlinear": ScenarioConfig.parse_obj(
                {
                    **common,
                    "name": f"{self.figure_id}_nonlinear",
                    "model": {"form": "two_option", "d": 1.0, "u": 0.5, "alpha": 0.0, "gamma": 1.0},
                    "integration": {"t_end": 100.0, "record_every": 10},
                }
            ),
        }

    def run(
        self, *, seed: Optional[int] = None, dt: Optional[float] = None, workers: Optional[int] = None
    ) -> FigureResult:
        result = FigureResult(self.figure_id)
        configs = self.scenarios()

        _, linear = simulate(configs["linear"], seed=seed, dt=dt)
        linear_peak = float(np.max(np.abs(linear.final_opinions)))
        result.check("linear: decays to neutral by t = 200", linear_peak < 1e-2, f"max |x| {linear_peak:.3g}")

        scenario, nonlinear = simulate(configs["nonlinear"], seed=seed, dt=dt)
        partition = scenario.partition
        final = nonlinear.final_opinions
        outcome = describe_outcome(final, partition)
        means = cluster_means(final, partition, two_option=True)
        spread = max(float(np.ptp(final[list(cell)])) for cell in partition)
        result.check("nonlinear: clustered dissensus", outcome == "clustered dissensus", outcome)
        result.check("nonlinear: within-cluster spread below 1e-6", spread < 1e-6, f"spread {spread:.3g}")
        result.check("nonlinear: clusters take opposite signs", means[0] * means[1] < 0, f"means {means.tolist()}")

        condition = check_cluster_condition(scenario.params, partition)
        distance = distance_to_cluster_manifold(final, partition, two_option=True)
        result.check("cluster condition holds", condition.holds, f"margins {condition.margins.tolist()}")
        result.check("distance to the cluster manifold below 1e-8", distance < 1e-8, f"distance {distance:.3g}")

        # the reduced model started from the cluster means must track them
        reduced = TwoOptionSystem(reduce_clusters(scenario.params, partition))
        start = cluster_means(nonlinear.at(self.REDUCTION_START), partition, two_option=True)
        reduced_final = integrate_final(reduced, start, t0=self.REDUCTION_START, t_end=scenario.t_end, dt=scenario.dt)
        mismatch = float(np.max(np.abs(reduced_final - means)))
        result.check("reduced model tracks the cluster means", mismatch < 1e-6, f"mismatch {mismatch:.3g}")

        halved = integrate_final(scenario.system, scenario.initial_state, t_end=scenario.t_end, dt=scenario.dt / 2)
        step_change = float(np.max(np.abs(halved - nonlinear.final)))
        result.check("halving the step changes the final state by < 1e-6", step_change < 1e-6, f"{step_change:.3g}")

        for name, trajectory in (("linear", linear), ("nonlinear", nonlinear)):
            result.tables[name] = trajectory_frame(trajectory)
            result.plots[name] = trajectory_chart(trajectory, f"{self.figure_id} {name}")
        result.records["nonlinear"] = {
            "outcome": outcome,
            "cluster_means": means.tolist(),
            "cluster_condition": condition.as_record(),
            "distance_to_cluster_manifold": distance,
        }
        return result
