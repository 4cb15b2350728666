"""Two clusters whose coupling gains follow their own feedback, switching from agreement to clustered dissensus."""
import logging
from typing import Optional

import numpy as np

from src.analysis import classify_state, describe_outcome
from src.dynamics import cluster_means
from src.figures.base import FigureRecipe, FigureResult, signs, simulate
from src.schemas import ScenarioConfig
from src.storage import trajectory_frame
from src.utils.plots import line_chart, trajectory_chart

log = logging.getLogger(__name__)


class CouplingTransition(FigureRecipe):
    figure_id = "fig10"
    title = "Cooperation turning into competition between two clusters when the gain feedback flips sign"

    PARTITION = [[0, 1, 2], [3, 4, 5, 6]]
    D, ALPHA, BETA = 1.0, 1.0, -1.0
    INPUT = 0.5
    NOISE = 0.1
    FLIP_TIME = 300.0
    AGREEMENT_WINDOW = (200.0, 300.0)

    def __init__(self, perturbation_seed: int = 10):
        self.perturbation_seed = perturbation_seed

    def _model(self) -> dict[str, object]:
        """Per-agent parameters with every cluster splitting its weights evenly, then perturbed."""
        n = sum(len(cell) for cell in self.PARTITION)
        rng = np.random.default_rng(self.perturbation_seed)
        noise = {name: rng.normal(0.0, self.NOISE, n) for name in ("d", "alpha", "beta", "b")}

        alpha, beta, b = np.zeros(n), np.zeros(n), np.zeros(n)
        gamma, delta = np.zeros((n, n)), np.zeros((n, n))
        for p, cell in enumerate(self.PARTITION):
            size = len(cell)
            for i in cell:
                alpha[i] = (self.ALPHA + noise["alpha"][i]) / size
                beta[i] = (self.BETA + noise["beta"][i]) / size
                b[i] = (self.INPUT if p == 0 else -self.INPUT) + noise["b"][i]
                for k in cell:
                    if k != i:
                        gamma[i, k] = alpha[i]
                        delta[i, k] = beta[i]
        return {
            "form": "two_option",
            "d": (self.D + noise["d"]).tolist(),
            "u": 1.0,
            "alpha": alpha.tolist(),
            "beta": beta.tolist(),
            "gamma": gamma.tolist(),
            "delta": delta.tolist(),
            "b": b.tolist(),
        }

    def scenarios(self) -> dict[str, ScenarioConfig]:
        n = sum(len(cell) for cell in self.PARTITION)
        config = ScenarioConfig.parse_obj(
            {
                "name": f"{self.figure_id}_transition",
                "seed": 10,
                "graph": {"kind": "all_to_all", "n": n},
                "model": self._model(),
                "attention": {
                    "tau_u": 10.0,
                    "n_hill": 2.0,
                    "y_th": 1.0,
                    "u_low": 2.0,
                    "u_high": 3.0,
                    "attention_adjacency": np.ones((n, n)).tolist(),
                },
                "coupling": {
                    "partition": self.PARTITION,
                    "tau_gamma": 100.0,
                    "tau_delta": 100.0,
                    "gamma_f": 2.0,
                    "delta_f": 1.0,
                    "g_gamma": 10.0,
                    "g_delta": 10.0,
                    "sigma": 1,
                    "drive": "magnitude",
                },
                "schedule": [{"t_start": self.FLIP_TIME, "sigma": -1, "tag": "feedback turns competitive"}],
                "initial": {
                    "random": {"distribution": "normal", "mean": 0.0, "std": 2.0},
                    "u": {"distribution": "normal", "mean": 0.0, "std": 0.3},
                    "gamma": {"distribution": "normal", "mean": -3.0, "std": 0.3},
                    "delta": {"distribution": "normal", "mean": 1.0, "std": 0.3},
                },
                "integration": {"t_end": 2 * self.FLIP_TIME, "record_every": 100},
                "analysis": {"partition": self.PARTITION},
            }
        )
        return {"transition": config}

    def run(
        self, *, seed: Optional[int] = None, dt: Optional[float] = None, workers: Optional[int] = None
    ) -> FigureResult:
        result = FigureResult(self.figure_id)
        scenario, trajectory = simulate(self.scenarios()["transition"], seed=seed, dt=dt)
        strong = scenario.system.strong_threshold()
        partition = scenario.partition

        window = trajectory.window(*self.AGREEMENT_WINDOW)
        agreeing = [
            classify_state(x, strong).agreement and np.all(np.abs(x) >= strong) for x in window.opinions()
        ]
        result.check(
            f"strong agreement throughout t in {list(self.AGREEMENT_WINDOW)}",
            bool(agreeing) and all(agreeing),
            f"{sum(agreeing)}/{len(agreeing)} recorded states",
        )

        final = trajectory.final_opinions
        means = cluster_means(final, partition, two_option=True)
        outcome = describe_outcome(final, partition)
        follows = all(np.all(signs(final[list(cell)]) == np.sign(mean)) for cell, mean in zip(partition, means))
        result.check(
            "clustered dissensus after the feedback flips",
            outcome == "clustered dissensus" and means[0] * means[1] < 0 and follows,
            f"{outcome}, cluster means {np.round(means, 3).tolist()}",
        )

        net = trajectory.extra("gamma") - trajectory.extra("delta")
        before, after = net[trajectory.times <= self.FLIP_TIME][-1], net[-1]
        result.check(
            "net inter-cluster gain turns from cooperative to competitive",
            bool(np.all(before > 0) and np.all(after < 0)),
            f"gamma - delta {np.round(before, 3).tolist()} -> {np.round(after, 3).tolist()}",
        )

        result.tables["transition"] = trajectory_frame(trajectory)
        result.plots["transition"] = trajectory_chart(trajectory, f"{self.figure_id} opinions")
        result.plots["gains"] = line_chart(
            trajectory.times,
            {f"gamma_{i + 1} - delta_{i + 1}": net[:, i] for i in range(net.shape[1])},
            title=f"{self.figure_id} net inter-cluster gains",
            x_label="t",
            y_label="gamma - delta",
            events=trajectory.events,
        )
        result.records["transition"] = {"outcome": outcome, "cluster_means": means.tolist(), "strong": strong}
        log.info(f"{self.figure_id}: {outcome} at t = {trajectory.times[-1]:g}")
        return result
