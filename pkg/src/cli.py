"""
Command line front end.

Every subcommand loads a scenario document (or a bundled figure recipe), runs it, and writes its artifacts
to the output directory: tables as CSV (or JSON), summary records as JSON, plots as SVG. Errors end the
process with a nonzero exit code and a JSON description on stderr.
"""
import argparse
import json
import logging
import sys
import time
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Optional

import numpy as np
import pydantic
import yaml

from src.analysis import (
    RegimePrediction,
    Unfolding,
    classify_state,
    critical_attention,
    describe_outcome,
    threshold_from_coupling,
    unfolding_direction,
)
from src.constants import Paths
from src.dynamics import integrate, sweep_bifurcation
from src.dynamics.systems import SWEEP_PARAMETERS
from src.feedback import AttentionSystem, cascade_frequency_grid
from src.figures import RECIPES, get_recipe
from src.figures.cascades import CascadeFrequencies
from src.graph import is_strongly_connected, spectral_extrema
from src.schemas import ScenarioConfig
from src.storage import branch_frame, ensure_directory, trajectory_frame, write_record, write_rows
from src.utils.errors import (
    BracketError,
    ChecklistError,
    Hypothesis,
    HypothesisError,
    IntegrationError,
    OpinionLabError,
    ParameterError,
)
from src.utils.log import setup_logging
from src.utils.plots import branch_chart, cascade_heatmap, trajectory_chart, write_svg
from src.utils.scenario import Scenario, build_scenario, load_scenario

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECKLIST = 1
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_INTEGRATION = 4


# region: Helpers


def _output_directory(args: argparse.Namespace, config: Optional[ScenarioConfig], name: str) -> Path:
    if args.out is not None:
        return ensure_directory(args.out)
    if config is not None and config.output.directory is not None:
        return ensure_directory(config.output.directory)
    return ensure_directory(Paths.OUTPUT_DIR / name)


def _format(args: argparse.Namespace, config: Optional[ScenarioConfig]) -> str:
    if args.format is not None:
        return args.format
    return config.output.format if config is not None else "csv"


def _plots_enabled(args: argparse.Namespace, config: Optional[ScenarioConfig]) -> bool:
    return not args.no_plot and (config is None or config.output.plot)


def _load(args: argparse.Namespace) -> tuple[ScenarioConfig, Scenario]:
    config = load_scenario(args.config)
    scenario = build_scenario(config, seed=args.seed, dt=args.dt)
    return config, scenario


def _prediction(scenario: Scenario) -> dict[str, object]:
    """Threshold prediction of a scenario, falling back to the eigenvalues of Gamma - Delta for general graphs."""
    try:
        prediction = critical_attention(scenario.params, scenario.adjacency)
    except HypothesisError as exc:
        if Hypothesis.HETEROGENEOUS in exc.failures:
            raise
        try:
            u_star, eigenvalue = threshold_from_coupling(scenario.params)
        except HypothesisError:
            return {"available": False, **exc.as_record()}
        return {"available": True, "u_star": u_star, "eigenvalue": eigenvalue.real, "source": "coupling spectrum"}
    record = prediction.as_record()
    record["available"] = True
    record["unfolding"] = _unfolding(scenario, prediction).as_record()
    return record


def _unfolding(scenario: Scenario, prediction: RegimePrediction) -> Unfolding:
    return unfolding_direction(scenario.params.b, spectral_extrema(scenario.adjacency), prediction.regime)


def _emit(record: dict[str, object]) -> None:
    print(json.dumps(record, indent=2, default=str))


# endregion
# region: Subcommands


def run_command(args: argparse.Namespace) -> int:
    config, scenario = _load(args)
    start = time.perf_counter()
    trajectory = integrate(
        scenario.system,
        scenario.initial_state,
        scenario.schedule,
        t_end=scenario.t_end,
        dt=scenario.dt,
        record_every=config.integration.record_every,
    )
    runtime = time.perf_counter() - start

    final = trajectory.final_opinions
    threshold = config.analysis.strong_threshold or scenario.system.strong_threshold()
    try:
        prediction = _prediction(scenario)
    except HypothesisError as exc:
        prediction = {"available": False, **exc.as_record()}

    out = _output_directory(args, config, config.name)
    write_rows(trajectory_frame(trajectory), out / "trajectory", _format(args, config))
    summary = {
        "name": config.name,
        "seed": scenario.config.seed,
        "system": scenario.system.describe(),
        "t_end": scenario.t_end,
        "dt": scenario.dt,
        "outcome": describe_outcome(final, scenario.partition),
        "classification": classify_state(final, threshold).as_record(),
        "final_norm": float(np.linalg.norm(final)),
        "prediction": prediction,
        "spectral": spectral_extrema(scenario.adjacency).as_record(),
        "events": [{"t": t, "tag": tag} for t, tag in trajectory.events],
        "runtime": runtime,
    }
    write_record(summary, out / "summary.json")
    if _plots_enabled(args, config):
        write_svg(trajectory_chart(trajectory, config.name), out / "trajectory.svg")
    log.info(f"{config.name}: {summary['outcome']} (integration took {runtime:.2f}s), artifacts in {out}")
    return EXIT_OK


def analyze_command(args: argparse.Namespace) -> int:
    config, scenario = _load(args)
    record = {"name": config.name, **_prediction(scenario)}
    write_record(record, _output_directory(args, config, config.name) / "prediction.json")
    _emit(record)
    return EXIT_OK


def sweep_command(args: argparse.Namespace) -> int:
    config, scenario = _load(args)
    start, stop, count = args.grid
    values = np.linspace(float(start), float(stop), int(count))

    neutral = scenario.initial_state.copy()
    neutral[: scenario.system.layout.opinion_size] = 0.0
    seeds = [neutral, scenario.initial_state]
    projection = None
    try:
        prediction = critical_attention(scenario.params, scenario.adjacency)
    except HypothesisError as exc:
        log.warning(f"No pattern vector to seed the sweep with: {exc}")
    else:
        projection = prediction.pattern_vector
        seeds += [_pattern_seed(scenario, sign * projection) for sign in (1.0, -1.0)]

    points = sweep_bifurcation(
        scenario.system, values, seeds, parameter=args.parameter, projection=projection, workers=args.threads
    )
    out = _output_directory(args, config, config.name)
    write_rows(branch_frame(points, scenario.system.layout), out / "branches", _format(args, config))
    if _plots_enabled(args, config):
        write_svg(branch_chart(points, f"{config.name}: {args.parameter} sweep"), out / "branches.svg")
    log.info(f"{config.name}: {len(points)} branch points over {len(values)} values of {args.parameter}")
    return EXIT_OK


def _pattern_seed(scenario: Scenario, pattern: np.ndarray) -> np.ndarray:
    """The scenario's initial state with its opinions replaced by a pattern vector (on options 1 and 2)."""
    layout = scenario.system.layout
    if layout.two_option:
        opinions = pattern
    else:
        opinions = np.zeros(layout.opinion_shape)
        opinions[:, 0], opinions[:, 1] = pattern, -pattern
    seed = scenario.initial_state.copy()
    seed[: layout.opinion_size] = np.ravel(opinions)
    return seed


def cascade_command(args: argparse.Namespace) -> int:
    config, scenario = _load(args)
    if not isinstance(scenario.system, AttentionSystem):
        raise ParameterError("attention", None, "cascade studies need a scenario with an attention block")
    prediction = critical_attention(scenario.params, scenario.adjacency)
    u0 = config.initial.u if isinstance(config.initial.u, float) else None

    frame = cascade_frequency_grid(
        scenario.system,
        scenario.adjacency,
        prediction.centrality_vector,
        norm_edges=np.linspace(0.0, args.norm_max, args.bins + 1),
        alignment_edges=np.linspace(0.0, 1.0, args.bins + 1),
        trials=args.trials,
        seed=scenario.config.seed,
        u0=u0,
        dt=scenario.dt,
        workers=args.threads,
    )
    out = _output_directory(args, config, config.name)
    write_rows(frame, out / "cascades", _format(args, config))
    if _plots_enabled(args, config):
        write_svg(cascade_heatmap(frame, f"{config.name}: cascade frequency"), out / "cascades.svg")
    cascades, trials = int(frame["cascades"].sum()), int(frame["trials"].sum())
    log.info(f"{config.name}: {cascades} cascades in {trials} trials (seed={frame.attrs['seed']})")
    return EXIT_OK


def reproduce_command(args: argparse.Namespace) -> int:
    recipe_type = get_recipe(args.figure)
    if args.trials is not None:
        if recipe_type is not CascadeFrequencies:
            raise ParameterError("trials", args.trials, f"only {CascadeFrequencies.figure_id} takes a trial count")
        recipe = CascadeFrequencies(trials=args.trials)
    else:
        recipe = recipe_type()

    result = recipe.run(seed=args.seed, dt=args.dt, workers=args.threads)
    out = _output_directory(args, None, recipe.figure_id)
    fmt = _format(args, None)
    for name, frame in result.tables.items():
        write_rows(frame, out / name, fmt)
    if _plots_enabled(args, None):
        for name, svg in result.plots.items():
            write_svg(svg, out / f"{name}.svg")
    write_record(result.report(), out / "report.json")

    passed = sum(check.passed for check in result.checks)
    log.info(f"{recipe.figure_id}: {passed}/{len(result.checks)} checks passed, artifacts in {out}")
    result.raise_for_failures()
    return EXIT_OK


def graph_command(args: argparse.Namespace) -> int:
    _, scenario = _load(args)
    adjacency = scenario.adjacency
    _emit(
        {
            "graph": adjacency.as_record(),
            "strongly_connected": is_strongly_connected(adjacency),
            "spectral": spectral_extrema(adjacency).as_record(),
        }
    )
    return EXIT_OK


def list_command(args: argparse.Namespace) -> int:
    for figure_id, recipe in RECIPES.items():
        print(f"{figure_id:<12} {recipe.title}")
    return EXIT_OK


# endregion
# region: Parser


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    common.add_argument("--dt", type=float, default=None, help="Override the integration step")
    common.add_argument("--out", type=Path, default=None, help="Output directory")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="Format of written tables")
    common.add_argument("--threads", type=_positive_int, default=None, help="Worker processes (OPINIONLAB_THREADS)")
    common.add_argument("--no-plot", action="store_true", help="Don't render SVG plots")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Log debug messages")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Only log warnings and errors")

    with_config = argparse.ArgumentParser(add_help=False, parents=[common])
    with_config.add_argument("--config", "-c", type=Path, required=True, help="Scenario document (YAML)")

    parser = argparse.ArgumentParser(
        prog="opinionlab", description="Simulate and analyze nonlinear multi-option opinion dynamics."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", parents=[with_config], help="Integrate a scenario")
    run.set_defaults(handler=run_command)

    analyze = commands.add_parser("analyze", parents=[with_config], help="Predict the critical attention")
    analyze.set_defaults(handler=analyze_command)

    sweep = commands.add_parser("sweep", parents=[with_config], help="Equilibria over a parameter grid")
    sweep.add_argument("--parameter", choices=SWEEP_PARAMETERS, default="u")
    sweep.add_argument("--grid", nargs=3, metavar=("START", "STOP", "COUNT"), required=True)
    sweep.set_defaults(handler=sweep_command)

    cascade = commands.add_parser("cascade", parents=[with_config], help="Cascade frequency study")
    cascade.add_argument("--trials", type=_positive_int, default=1000, help="Trials per bin")
    cascade.add_argument("--norm-max", type=float, default=0.1, help="Upper edge of the input norm bins")
    cascade.add_argument("--bins", type=_positive_int, default=5, help="Bins per axis")
    cascade.set_defaults(handler=cascade_command)

    reproduce = commands.add_parser("reproduce", parents=[common], help="Run a bundled figure recipe")
    reproduce.add_argument("figure", help="Recipe id, see the list subcommand")
    reproduce.add_argument("--trials", type=_positive_int, default=None, help="Trials per bin (fig9_scaled)")
    reproduce.set_defaults(handler=reproduce_command)

    graph = commands.add_parser("graph", parents=[with_config], help="Print the spectral report of a graph")
    graph.set_defaults(handler=graph_command)

    listing = commands.add_parser("list", help="List the bundled figure recipes")
    listing.set_defaults(handler=list_command, verbose=False, quiet=False)
    return parser


# endregion


def _fail(exc: Exception, code: int) -> int:
    if isinstance(exc, pydantic.ValidationError):
        record: dict[str, object] = {"error": "ValidationError", "errors": exc.errors()}
    elif isinstance(exc, OpinionLabError) and hasattr(exc, "as_record"):
        record = exc.as_record()
    else:
        record = {"error": type(exc).__name__, "message": str(exc)}
    record["exit_code"] = code
    log.error(f"{record['error']}: {exc}")
    print(json.dumps(record, default=str), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else None
    setup_logging(level)

    handler: Callable[[argparse.Namespace], int] = args.handler
    log.info(f"opinionlab {args.command} starting")
    start = time.perf_counter()
    try:
        code = handler(args)
    except ChecklistError as exc:
        code = _fail(exc, EXIT_CHECKLIST)
    except (HypothesisError, BracketError) as exc:
        code = _fail(exc, EXIT_HYPOTHESIS)
    except IntegrationError as exc:
        code = _fail(exc, EXIT_INTEGRATION)
    except (ParameterError, pydantic.ValidationError, yaml.YAMLError, OSError) as exc:
        code = _fail(exc, EXIT_CONFIG)
    log.info(f"opinionlab {args.command} finished in {time.perf_counter() - start:.2f}s (exit code {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
