import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.dynamics import (
    InputSchedule,
    OpinionSystem,
    ScheduleSegment,
    StateLayout,
    TensorSystem,
    TwoOptionSystem,
    cluster_means,
    distance_to_cluster_manifold,
    find_equilibrium,
    integrate,
    integrate_final,
    opinion_system,
    reduced_jacobian,
    stability,
    sweep_bifurcation,
)
from src.graph import AdjacencySpec, build_graph, spectral_extrema
from src.model import LINEAR, ModelParams, TwoOptionParams, boundedness_radius, tensor_from_params
from src.utils.errors import DimensionError, IntegrationError, ParameterError
from tests.conftest import FIG3_PARTITION


@pytest.fixture
def lone_agent() -> AdjacencySpec:
    return build_graph("custom", matrix=[[0.0]])


@pytest.fixture
def decaying(lone_agent: AdjacencySpec) -> TwoOptionSystem:
    """A single agent without attention: dx/dt = -x + b."""
    return TwoOptionSystem(TwoOptionParams.homogeneous(lone_agent, u=0.0))


# region: Layout


def test_state_layout() -> None:
    layout = StateLayout(2, 3, two_option=False, extras=("u",))
    assert layout.dim == 8
    assert layout.columns() == ["z_1_1", "z_1_2", "z_1_3", "z_2_1", "z_2_2", "z_2_3", "u_1", "u_2"]

    opinions = np.arange(6.0).reshape(2, 3)
    y = layout.pack(opinions, u=[0.1, 0.2])
    assert_allclose(layout.opinions(y), opinions)
    assert_allclose(layout.extra(y, "u"), [0.1, 0.2])
    assert_allclose(layout.project(y)[:6], [-1, 0, 1, -1, 0, 1])
    assert_allclose(layout.project(y)[6:], [0.1, 0.2])

    basis = layout.basis()
    assert basis.shape == (8, 6)
    assert_allclose(basis.T @ basis, np.eye(6), atol=1e-12)

    with pytest.raises(DimensionError):
        layout.pack(np.zeros((3, 3)), u=0.0)


def test_two_option_layout_columns() -> None:
    layout = StateLayout(3, 2, two_option=True, extras=("u", "gamma"))
    assert layout.columns() == ["x_1", "x_2", "x_3", "u_1", "u_2", "u_3", "gamma_1", "gamma_2", "gamma_3"]
    assert layout.opinion_shape == (3,)


# endregion
# region: Systems


def test_initial_state_is_projected() -> None:
    p = ModelParams.homogeneous(build_graph("path", 2), n_options=3)
    system = OpinionSystem(p)
    assert_allclose(system.initial_state([[1.0, 2.0, 3.0], [0.0, 0.0, 3.0]]), [-1, 0, 1, -1, -1, 2])


def test_opinion_system_dispatch(pitchfork_params: TwoOptionParams) -> None:
    assert isinstance(opinion_system(pitchfork_params), TwoOptionSystem)
    assert isinstance(opinion_system(pitchfork_params.to_model_params()), OpinionSystem)


def test_tensor_system_matches_general_system(rng: np.random.Generator) -> None:
    adjacency = build_graph("cycle", 4)
    p = ModelParams.homogeneous(adjacency, n_options=3, u=1.5, alpha=0.3, gamma=0.5, delta=-0.2, b=[0.1, 0.0, 0.0])
    general = OpinionSystem(p)
    tensor = TensorSystem(tensor_from_params(p), p.d, p.u, p.b_raw)
    y = general.initial_state(rng.normal(size=(4, 3)))
    assert_allclose(tensor.field(y), general.field(y), atol=1e-12)


def test_with_parameter(pitchfork_params: TwoOptionParams) -> None:
    system = TwoOptionSystem(pitchfork_params.with_inputs([0.1, 0.0, -0.2]))
    assert_allclose(system.with_parameter("u", 0.7).params.u, 0.7)
    assert_allclose(system.with_parameter("b_scale", 2.0).params.b, [0.2, 0.0, -0.4])
    assert_allclose(system.with_parameter("b_scale", 2.0).with_parameter("b_scale", 0.5).params.b, [0.05, 0, -0.1])
    with pytest.raises(ParameterError):
        system.with_parameter("alpha", 1.0)


def test_strong_threshold_scales_with_attention(pitchfork_params: TwoOptionParams) -> None:
    system = TwoOptionSystem(pitchfork_params.with_attention(2.0))
    assert system.strong_threshold() == pytest.approx(0.6)


# endregion
# region: Integration


def test_free_decay(decaying: TwoOptionSystem) -> None:
    trajectory = integrate(decaying, np.array([1.0]), t_end=1.0, dt=0.01)
    assert trajectory.times[0] == 0.0
    assert trajectory.times[-1] == 1.0
    assert_allclose(trajectory.opinions()[:, 0], np.exp(-trajectory.times), atol=1e-9)


def test_step_input_lands_on_the_boundary(decaying: TwoOptionSystem) -> None:
    schedule = InputSchedule((ScheduleSegment(0.5, b=np.array([1.0])),))
    trajectory = integrate(decaying, np.array([0.0]), schedule, t_end=1.0, dt=0.03)
    assert 0.5 in trajectory.times.tolist()
    assert trajectory.at(0.5)[0] == 0.0
    assert trajectory.final[0] == pytest.approx(1 - math.exp(-0.5), abs=1e-8)
    assert trajectory.events == ((0.5, "input switch"),)

    after = trajectory.window(0.5, 1.0)
    assert after.times[0] == pytest.approx(0.5)
    assert after.events == trajectory.events


def test_segment_active_at_start(decaying: TwoOptionSystem) -> None:
    trajectory = integrate(decaying, np.array([0.0]), InputSchedule.constant(np.array([2.0])), t_end=30.0, dt=0.05)
    assert trajectory.final[0] == pytest.approx(2.0, abs=1e-9)
    assert trajectory.events == ((0.0, "initial input"),)


def test_record_every(decaying: TwoOptionSystem) -> None:
    trajectory = integrate(decaying, np.array([1.0]), t_end=1.0, dt=0.1, record_every=5)
    assert_allclose(trajectory.times, [0.0, 0.5, 1.0])


def test_rows_stay_on_the_simplex_tangent(rng: np.random.Generator) -> None:
    adjacency = build_graph("all_to_all", 3)
    p = ModelParams.homogeneous(adjacency, n_options=4, u=2.0, alpha=0.4, gamma=0.3, delta=-0.2, b=[0.2, 0, 0, 0])
    system = OpinionSystem(p)
    trajectory = integrate(system, system.initial_state(rng.normal(size=(3, 4))), t_end=5.0, dt=0.02)
    assert_allclose(trajectory.opinions().sum(axis=-1), 0.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_trajectories_stay_in_the_bounding_ball(seed: int) -> None:
    rng = np.random.default_rng(seed)
    n, n_options = int(rng.integers(2, 7)), int(rng.integers(2, 5))
    adjacency = build_graph("all_to_all", n, weight=float(rng.uniform(-0.5, 1.0)))
    p = ModelParams.homogeneous(
        adjacency,
        n_options=n_options,
        d=rng.uniform(0.5, 2.0),
        u=rng.uniform(0.5, 3.0),
        alpha=rng.uniform(0.0, 1.0),
        beta=rng.uniform(-0.5, 0.5),
        gamma=rng.uniform(-1.0, 1.0),
        delta=rng.uniform(-1.0, 1.0),
        b=rng.normal(scale=0.5, size=n_options),
    )
    system = OpinionSystem(p)
    # start both inside and far outside the ball the inputs and saturations alone would give
    y0 = system.initial_state(rng.normal(scale=[0.5, 20.0][seed % 2], size=(n, n_options)))
    radius = boundedness_radius(p, system.layout.opinions(y0))

    trajectory = integrate(system, y0, t_end=20.0, dt=0.02)
    norms = np.linalg.norm(trajectory.opinions(), axis=(-2, -1))
    assert np.all(norms <= radius + 1e-6)


def test_blow_up_raises(lone_agent: AdjacencySpec) -> None:
    p = TwoOptionParams(
        d=[1.0], u=[1.0], alpha=[1000.0], beta=[0.0], gamma=[[0.0]], delta=[[0.0]], b=[0.0], s1=LINEAR, s2=LINEAR
    )
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(IntegrationError) as info:
        integrate(TwoOptionSystem(p), np.array([1.0]), t_end=10.0, dt=0.01)
    assert 0 < info.value.last_finite_time < 10.0


def test_schedule_validation() -> None:
    with pytest.raises(ParameterError):
        InputSchedule((ScheduleSegment(1.0), ScheduleSegment(1.0)))
    with pytest.raises(ParameterError):
        ScheduleSegment(0.0, sigma=2)
    assert ScheduleSegment(2.0, b=np.ones((2, 2))).b.tolist() == [[0.0, 0.0], [0.0, 0.0]]
    assert ScheduleSegment(0.0, sigma=-1).tag == "sigma=-1"


def test_run_validation(decaying: TwoOptionSystem) -> None:
    with pytest.raises(ParameterError):
        integrate(decaying, np.array([1.0]), t_end=0.0)
    with pytest.raises(ParameterError):
        integrate(decaying, np.array([1.0]), t_end=1.0, dt=-0.1)
    with pytest.raises(DimensionError):
        integrate(decaying, np.array([1.0, 2.0]), t_end=1.0)
    with pytest.raises(ParameterError):
        integrate(decaying, np.array([np.nan]), t_end=1.0)


def test_batched_integration(decaying: TwoOptionSystem) -> None:
    samples = integrate_final(decaying, np.array([[1.0], [2.0]]), t_end=2.0, dt=0.01, sample_times=[1.0, 2.0])
    assert samples.shape == (2, 2, 1)
    assert_allclose(samples[0, :, 0], [math.exp(-1), 2 * math.exp(-1)], atol=1e-9)
    assert_allclose(samples[1, :, 0], [math.exp(-2), 2 * math.exp(-2)], atol=1e-9)

    with pytest.raises(ParameterError):
        integrate_final(decaying, np.array([[1.0]]), t_end=1.0, sample_times=[2.0])


def test_batched_inputs(decaying: TwoOptionSystem) -> None:
    driven = decaying.with_inputs(np.array([[1.0], [2.0]]))
    final = integrate_final(driven, np.zeros((2, 1)), t_end=1.0, dt=0.01)
    assert_allclose(final[:, 0], [1 - math.exp(-1), 2 * (1 - math.exp(-1))], atol=1e-9)


# endregion
# region: Clusters


def test_cluster_means() -> None:
    x = np.array([1.0, 0.0, 0.3, 0.3, 0.3])
    assert_allclose(cluster_means(x, FIG3_PARTITION, two_option=True), [0.5, 0.3])
    z = np.stack([x, -x], axis=-1)
    assert_allclose(cluster_means(z, FIG3_PARTITION), [[0.5, -0.5], [0.3, -0.3]])


def test_distance_to_cluster_manifold() -> None:
    x = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    assert distance_to_cluster_manifold(x, FIG3_PARTITION, two_option=True) == pytest.approx(math.sqrt(2))
    assert distance_to_cluster_manifold(np.stack([x, -x], axis=-1), FIG3_PARTITION) == pytest.approx(math.sqrt(2))
    assert distance_to_cluster_manifold(np.array([0.4, 0.4, -0.1, -0.1, -0.1]), FIG3_PARTITION, two_option=True) == 0

    batch = np.array([x, np.zeros(5)])
    assert_allclose(distance_to_cluster_manifold(batch, FIG3_PARTITION, two_option=True), [math.sqrt(2), 0.0])


# endregion
# region: Equilibria


def test_reduced_jacobian_at_origin(pitchfork_params: TwoOptionParams, path3: AdjacencySpec) -> None:
    system = TwoOptionSystem(pitchfork_params.with_attention(0.3))
    expected = -np.eye(3) + 0.3 * (np.eye(3) - path3.entries)
    assert_allclose(reduced_jacobian(system, np.zeros(3)), expected, atol=1e-8)

    stable, eigenvalues = stability(system, np.zeros(3))
    assert stable
    assert np.max(eigenvalues.real) == pytest.approx(-1 + 0.3 * (1 + math.sqrt(2)), abs=1e-8)

    unstable, _ = stability(system.with_parameter("u", 0.5), np.zeros(3))
    assert not unstable


def test_find_equilibrium_on_disagreement_branch(pitchfork_params: TwoOptionParams, path3: AdjacencySpec) -> None:
    v_min = spectral_extrema(path3).v_min
    system = TwoOptionSystem(pitchfork_params)
    settled = integrate(system, 0.01 * v_min, t_end=200.0, dt=0.05).final

    report = find_equilibrium(system, settled)
    assert report.converged
    assert report.residual < 1e-10
    assert report.stable
    assert report.classification.disagreement
    assert np.sign(report.opinions).tolist() == np.sign(v_min).tolist()
    assert report.as_record()["converged"] is True


def test_neutral_equilibrium(pitchfork_params: TwoOptionParams) -> None:
    report = find_equilibrium(TwoOptionSystem(pitchfork_params), np.zeros(3))
    assert report.converged
    assert report.method == "newton"
    assert report.iterations == 0
    assert not report.stable

    with pytest.raises(ParameterError):
        find_equilibrium(TwoOptionSystem(pitchfork_params), np.zeros(3), tol=0.0)
    with pytest.raises(DimensionError):
        find_equilibrium(TwoOptionSystem(pitchfork_params), np.zeros(4))


def test_sweep_through_pitchfork(pitchfork_params: TwoOptionParams, path3: AdjacencySpec) -> None:
    v_min = spectral_extrema(path3).v_min
    branching = TwoOptionSystem(pitchfork_params.with_attention(0.6))
    upper = integrate(branching, 0.01 * v_min, t_end=300.0, dt=0.05).final
    lower = integrate(branching, -0.01 * v_min, t_end=300.0, dt=0.05).final
    seeds = [np.zeros(3), upper, lower]

    points = sweep_bifurcation(branching, [0.3, 0.6], seeds, projection=v_min, workers=1)
    before = [point for point in points if point.value == 0.3]
    after = [point for point in points if point.value == 0.6]

    assert len(before) == 1
    assert before[0].stable
    assert before[0].projection == pytest.approx(0.0, abs=1e-8)

    assert len(after) == 3
    assert [point.stable for point in after] == [True, False, True]
    assert after[0].projection < 0 < after[2].projection
    assert after[0].projection == pytest.approx(-after[2].projection, rel=1e-6)

    row = after[2].as_row(branching.layout)
    assert set(row) == {"u", "projection", "stable", "residual", "x_1", "x_2", "x_3"}


def test_sweep_validation(pitchfork_params: TwoOptionParams) -> None:
    system = TwoOptionSystem(pitchfork_params)
    with pytest.raises(ParameterError):
        sweep_bifurcation(system, [0.6, 0.3], [np.zeros(3)], workers=1)
    with pytest.raises(ParameterError):
        sweep_bifurcation(system, [0.3], [], workers=1)


# endregion
