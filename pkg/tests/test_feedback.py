import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.dynamics import OpinionSystem, ScheduleSegment, TwoOptionSystem, integrate
from src.feedback import (
    AttentionParams,
    AttentionSystem,
    CouplingDrive,
    CouplingFeedbackParams,
    TransitionSystem,
    attention_drive,
    cascade_frequency_grid,
    cascade_outcomes,
    coupling_field,
    default_attention_adjacency,
    estimate_cascade_threshold,
    hill_derivative,
    hill_eval,
    inter_cluster_weights,
    is_cascade,
    is_nondecreasing,
    sample_aligned_inputs,
)
from src.graph import AdjacencySpec, build_graph, clustered_graph, spectral_extrema
from src.model import ModelParams, TwoOptionParams, vector_field_two_option
from src.utils.errors import BracketError, Hypothesis, HypothesisError, ParameterError
from tests.conftest import FIG3_PARTITION

FIG9_U_LOW = 0.2579491924311227
FIG9_U_HIGH = 0.5679491924311227


@pytest.fixture
def hill() -> AttentionParams:
    return AttentionParams(tau_u=1.0, n_hill=2.0, y_th=0.4, u_low=0.0, u_high=2.0)


@pytest.fixture
def lone_agent() -> AdjacencySpec:
    return build_graph("custom", matrix=[[0.0]])


@pytest.fixture
def single_agent(lone_agent: AdjacencySpec) -> AttentionSystem:
    """One agent with self-reinforcement alpha = 2, beta = -1 whose attention switches on around |x| = 2."""
    params = TwoOptionParams.homogeneous(lone_agent, alpha=2.0, beta=-1.0)
    ap = AttentionParams(tau_u=1.0, n_hill=2.0, y_th=4.0, u_low=0.0, u_high=2.0)
    return AttentionSystem(TwoOptionSystem(params), ap, ap.matrix_for(lone_agent))


@pytest.fixture
def cooperative_path(path5: AdjacencySpec) -> AttentionSystem:
    params = TwoOptionParams.homogeneous(path5, alpha=2.0, gamma=1.0)
    ap = AttentionParams(tau_u=10.0, n_hill=3.0, y_th=0.2, u_low=FIG9_U_LOW, u_high=FIG9_U_HIGH)
    return AttentionSystem(TwoOptionSystem(params), ap, ap.matrix_for(path5))


# region: Attention


def test_hill_function(hill: AttentionParams) -> None:
    assert hill_eval(hill, 0.8) == pytest.approx(1.6)
    assert hill_derivative(hill, 0.8) == pytest.approx(0.8)
    assert hill_eval(hill, 0.0) == 0.0
    assert hill_derivative(hill, 0.0) == 0.0
    assert hill_eval(hill, 1e6) == pytest.approx(2.0, abs=1e-6)

    step = 1e-6
    numeric = (hill_eval(hill, 0.5 + step) - hill_eval(hill, 0.5 - step)) / (2 * step)
    assert hill_derivative(hill, 0.5) == pytest.approx(numeric, rel=1e-6)

    with pytest.raises(ParameterError):
        hill_eval(hill, -0.1)


def test_attention_params_validation(path3: AdjacencySpec) -> None:
    with pytest.raises(ParameterError):
        AttentionParams(tau_u=0.0, n_hill=2.0, y_th=1.0, u_low=0.0, u_high=1.0)
    with pytest.raises(ParameterError):
        AttentionParams(tau_u=1.0, n_hill=2.0, y_th=1.0, u_low=1.0, u_high=1.0)
    with pytest.raises(ParameterError):
        AttentionParams(tau_u=1.0, n_hill=2.0, y_th=1.0, u_low=-0.1, u_high=1.0)

    configured = AttentionParams(1.0, 2.0, 1.0, 0.0, 1.0, attention_adjacency=np.eye(2))
    with pytest.raises(ParameterError):
        configured.matrix_for(path3)
    assert_allclose(configured.matrix_for(build_graph("path", 2)), np.eye(2))


def test_brackets() -> None:
    ap = AttentionParams(10.0, 3.0, 0.2, FIG9_U_LOW, FIG9_U_HIGH)
    assert ap.brackets(1 / (2 + math.sqrt(3)))
    assert not ap.brackets(0.2)
    assert not ap.brackets(FIG9_U_HIGH)


def test_default_attention_adjacency(path3: AdjacencySpec) -> None:
    assert_allclose(default_attention_adjacency(path3), [[1, 1, 0], [1, 1, 1], [0, 1, 1]])


def test_attention_drive(path3: AdjacencySpec) -> None:
    weights = default_attention_adjacency(path3)
    x = np.array([1.0, 2.0, 0.0])
    assert_allclose(attention_drive(x, weights, two_option=True), [5.0, 5.0, 4.0])
    # the lifted two-option state gives the same drive through the 1/N_o normalization
    z = np.stack([x, -x], axis=-1)
    assert_allclose(attention_drive(z, weights, two_option=False), [5.0, 5.0, 4.0])

    batch = np.array([x, np.zeros(3)])
    assert_allclose(attention_drive(batch, weights, two_option=True), [[5.0, 5.0, 4.0], [0.0, 0.0, 0.0]])


def test_attention_system_layout(cooperative_path: AttentionSystem) -> None:
    assert cooperative_path.layout.extras == ("u",)
    assert cooperative_path.dim == 10
    rest = cooperative_path.rest_state()
    assert_allclose(rest[5:], FIG9_U_LOW)
    assert_allclose(cooperative_path.field(rest), 0.0, atol=1e-15)
    assert_allclose(cooperative_path.rest_state(0.0)[5:], 0.0)
    assert cooperative_path.strong_threshold() == pytest.approx(0.3 * FIG9_U_HIGH)


def test_attention_system_parameters(cooperative_path: AttentionSystem) -> None:
    with pytest.raises(ParameterError):
        cooperative_path.with_parameter("u", 1.0)
    scaled = cooperative_path.with_inputs(np.full(5, 0.1)).with_parameter("b_scale", 2.0)
    assert isinstance(scaled, AttentionSystem)
    assert_allclose(scaled.opinions.params.b, 0.2)


def test_general_opinions_with_attention() -> None:
    adjacency = build_graph("all_to_all", 3)
    p = ModelParams.homogeneous(adjacency, n_options=3, alpha=0.2, gamma=0.3)
    ap = AttentionParams(1.0, 2.0, 0.5, 0.1, 1.0)
    system = AttentionSystem(OpinionSystem(p), ap, ap.matrix_for(adjacency))
    assert system.dim == 12
    y = system.initial_state(np.array([[0.3, 0.0, 0.0], [0.0, 0.2, 0.0], [0.0, 0.0, 0.1]]), u=0.1)
    trajectory = integrate(system, y, t_end=2.0, dt=0.02)
    assert_allclose(trajectory.opinions().sum(axis=-1), 0.0, atol=1e-12)
    assert np.all(trajectory.extra("u") >= 0.1 - 1e-12)


def test_single_agent_weak_and_strong(single_agent: AttentionSystem) -> None:
    weak = integrate(single_agent.with_inputs(np.array([0.5])), single_agent.rest_state(), t_end=50.0, dt=0.02)
    assert abs(weak.final_opinions[0]) < single_agent.strong_threshold()
    assert weak.extra("u")[-1, 0] < 0.05

    strong = integrate(single_agent.with_inputs(np.array([1.0])), single_agent.rest_state(), t_end=50.0, dt=0.02)
    assert strong.final_opinions[0] == pytest.approx(4.9, abs=0.1)
    assert strong.extra("u")[-1, 0] > 1.8

    for trajectory in (weak, strong):
        attention = trajectory.extra("u")
        assert np.all(attention >= single_agent.ap.u_low - 1e-12)
        assert np.all(attention <= single_agent.ap.u_high + 1e-12)


# endregion
# region: Cascades


def test_is_cascade() -> None:
    opinions = np.array([[0.7, 0.1, -0.7], [0.7, 0.1, 0.1]])
    assert is_cascade(opinions, 0.6).tolist() == [True, False]
    assert is_cascade(np.array([0.5, -0.5]), 0.5)


def test_cascade_outcomes(single_agent: AttentionSystem) -> None:
    outcomes = cascade_outcomes(single_agent, np.array([[0.5], [1.0], [-1.0]]), u0=0.0, t_end=50.0)
    assert outcomes.tolist() == [False, True, True]


def test_cascade_threshold_of_single_agent(single_agent: AttentionSystem, lone_agent: AdjacencySpec) -> None:
    estimate = estimate_cascade_threshold(
        single_agent, lone_agent, np.array([1.0]), (0.5, 1.0), resolution=0.01, u0=0.0, t_end=50.0
    )
    assert 0.5 <= estimate.lower < estimate.threshold < estimate.upper <= 1.0
    assert estimate.upper - estimate.lower <= 0.01
    assert estimate.runs == 2 + 7 * 2
    assert estimate.as_record()["direction"] == [1.0]

    below, above = cascade_outcomes(single_agent, np.array([[estimate.lower], [estimate.upper]]), u0=0.0, t_end=50.0)
    assert not below and above


@pytest.mark.slow
def test_cascade_threshold_grows_with_y_th(path5: AdjacencySpec) -> None:
    params = TwoOptionParams.homogeneous(path5, alpha=2.0, gamma=1.0)
    w = spectral_extrema(path5).w_max
    thresholds = []
    for y_th in (0.1, 0.2, 0.3):
        ap = AttentionParams(tau_u=10.0, n_hill=3.0, y_th=y_th, u_low=FIG9_U_LOW, u_high=FIG9_U_HIGH)
        system = AttentionSystem(TwoOptionSystem(params), ap, ap.matrix_for(path5))
        thresholds.append(estimate_cascade_threshold(system, path5, w, (0.0, 0.5), resolution=1e-3, u0=0.0))

    for low, high in zip(thresholds, thresholds[1:]):
        assert high.lower > low.upper


def test_cascade_threshold_bracket_error(cooperative_path: AttentionSystem, path5: AdjacencySpec) -> None:
    with pytest.raises(BracketError) as info:
        estimate_cascade_threshold(cooperative_path, path5, np.ones(5), (0.0, 1e-6), t_end=50.0)
    assert info.value.lower_outcome is False
    assert info.value.upper_outcome is False
    assert info.value.as_record()["upper"] == 1e-6


def test_cascade_threshold_refusals(cooperative_path: AttentionSystem, path5: AdjacencySpec) -> None:
    directed = AdjacencySpec(np.array([[0.0, 1.0], [0.0, 0.0]]))
    params = TwoOptionParams.homogeneous(directed, alpha=2.0, gamma=1.0)
    ap = AttentionParams(1.0, 2.0, 1.0, 0.0, 1.0)
    system = AttentionSystem(TwoOptionSystem(params), ap, ap.matrix_for(directed))
    with pytest.raises(HypothesisError) as info:
        estimate_cascade_threshold(system, directed, np.ones(2))
    assert info.value.failures == [Hypothesis.NOT_SYMMETRIC, Hypothesis.NOT_STRONGLY_CONNECTED]

    with pytest.raises(ParameterError):
        estimate_cascade_threshold(cooperative_path, build_graph("path", 4), np.ones(4))
    with pytest.raises(ParameterError):
        estimate_cascade_threshold(cooperative_path, path5, np.zeros(5))
    with pytest.raises(ParameterError):
        estimate_cascade_threshold(cooperative_path, path5, np.ones(5), (0.1, 0.05))
    with pytest.raises(ParameterError):
        estimate_cascade_threshold(cooperative_path.opinions, path5, np.ones(5))


def test_sample_aligned_inputs(rng: np.random.Generator, path5: AdjacencySpec) -> None:
    w = spectral_extrema(path5).w_max
    inputs = sample_aligned_inputs(w, (0.1, 0.2), (0.3, 0.6), 200, rng)
    assert inputs.shape == (200, 5)
    norms = np.linalg.norm(inputs, axis=1)
    assert np.all((norms >= 0.1 - 1e-12) & (norms <= 0.2 + 1e-12))
    alignments = np.abs(inputs @ w) / norms
    assert np.all((alignments >= 0.3 - 1e-12) & (alignments <= 0.6 + 1e-12))

    with pytest.raises(ParameterError):
        sample_aligned_inputs(np.array([1.0]), (0.1, 0.2), (0.0, 1.0), 5, rng)


def test_cascade_frequency_grid(cooperative_path: AttentionSystem, path5: AdjacencySpec) -> None:
    w = spectral_extrema(path5).w_max
    kwargs = dict(norm_edges=[0.0, 0.05, 0.1], alignment_edges=[0.0, 0.5, 1.0], trials=4, seed=3, t_end=5.0, workers=1)
    frame = cascade_frequency_grid(cooperative_path, path5, w, **kwargs)
    assert list(frame.columns) == [
        "norm_low",
        "norm_high",
        "alignment_low",
        "alignment_high",
        "trials",
        "cascades",
        "frequency",
    ]
    assert len(frame) == 4
    assert frame["norm_low"].tolist() == [0.0, 0.0, 0.05, 0.05]
    assert frame["alignment_high"].tolist() == [0.5, 1.0, 0.5, 1.0]
    assert frame["frequency"].between(0, 1).all()

    again = cascade_frequency_grid(cooperative_path, path5, w, **kwargs)
    assert frame.equals(again)
    assert frame.attrs["seed"] == 3


def test_unseeded_cascade_grid_records_its_seed(cooperative_path: AttentionSystem, path5: AdjacencySpec) -> None:
    w = spectral_extrema(path5).w_max
    kwargs = dict(norm_edges=[0.0, 0.1], alignment_edges=[0.0, 1.0], trials=3, t_end=5.0, workers=1)
    frame = cascade_frequency_grid(cooperative_path, path5, w, **kwargs)
    seed = frame.attrs["seed"]
    assert isinstance(seed, int)

    replay = cascade_frequency_grid(cooperative_path, path5, w, seed=seed, **kwargs)
    assert frame.equals(replay)
    assert replay.attrs["seed"] == seed


def test_cascade_frequency_grid_validation(cooperative_path: AttentionSystem, path5: AdjacencySpec) -> None:
    w = np.ones(5)
    with pytest.raises(ParameterError):
        cascade_frequency_grid(cooperative_path, path5, w, norm_edges=[0.1], alignment_edges=[0, 1], trials=1)
    with pytest.raises(ParameterError):
        cascade_frequency_grid(cooperative_path, path5, w, norm_edges=[0, 1], alignment_edges=[0, 1.5], trials=1)
    with pytest.raises(ParameterError):
        cascade_frequency_grid(cooperative_path, path5, w, norm_edges=[0, 1], alignment_edges=[0, 1], trials=0)


def test_is_nondecreasing() -> None:
    assert is_nondecreasing([0, 5, 10], [10, 10, 10])
    assert is_nondecreasing([5, 4], [10, 10])
    assert not is_nondecreasing([100, 0], [100, 100])
    with pytest.raises(ParameterError):
        is_nondecreasing([1, 2], [10])


# endregion
# region: Coupling feedback


@pytest.fixture
def coupling() -> CouplingFeedbackParams:
    return CouplingFeedbackParams(FIG3_PARTITION, 1.0, 2.0, 1.0, 0.5, 1.0, 2.0)


def test_coupling_params_validation() -> None:
    with pytest.raises(ParameterError):
        CouplingFeedbackParams([[0], [1], [2]], 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        CouplingFeedbackParams(FIG3_PARTITION, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        CouplingFeedbackParams(FIG3_PARTITION, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, sigma=0)
    params = CouplingFeedbackParams(FIG3_PARTITION, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, drive="magnitude")
    assert params.drive is CouplingDrive.MAGNITUDE
    assert params.partition == ((0, 1), (2, 3, 4))


def test_coupling_field(coupling: CouplingFeedbackParams) -> None:
    dgamma, ddelta = coupling_field(np.zeros(5), np.zeros(5), 1.0, 0.5, coupling)
    assert_allclose(dgamma, math.tanh(0.5))
    assert_allclose(ddelta, -0.5 * math.tanh(1.0) / 2.0)

    flipped, _ = coupling_field(np.zeros(5), np.zeros(5), 1.0, 0.5, coupling, sigma=-1)
    assert_allclose(flipped, -math.tanh(0.5))

    decaying, _ = coupling_field(np.ones(5), np.zeros(5), 0.0, 0.0, coupling)
    assert_allclose(decaying, -1.0)

    magnitude = CouplingFeedbackParams(FIG3_PARTITION, 1.0, 2.0, 1.0, 0.5, 1.0, 2.0, drive=CouplingDrive.MAGNITUDE)
    assert_allclose(coupling_field(np.zeros(5), np.zeros(5), 1.0, -0.5, magnitude)[0], math.tanh(0.5))


def test_inter_cluster_weights() -> None:
    weights = inter_cluster_weights(FIG3_PARTITION, 5)
    assert weights[0, 2] == pytest.approx(1 / 3)
    assert weights[2, 0] == pytest.approx(1 / 2)
    assert weights[0, 1] == 0.0
    assert weights[3, 4] == 0.0
    assert_allclose(weights.sum(axis=1), 1.0)


@pytest.fixture
def transition(coupling: CouplingFeedbackParams) -> TransitionSystem:
    adjacency = clustered_graph([2, 3], within=1.0, across=0.0)
    params = TwoOptionParams.homogeneous(adjacency, alpha=1.0, gamma=0.5)
    ap = AttentionParams(1.0, 2.0, 0.5, 0.2, 1.0)
    return TransitionSystem(TwoOptionSystem(params), ap, ap.matrix_for(adjacency), coupling)


def test_transition_system_field(transition: TransitionSystem) -> None:
    assert transition.layout.extras == ("u", "gamma", "delta")
    assert transition.dim == 20

    x = np.array([0.5, 0.5, 0.2, 0.2, 0.2])
    y = transition.initial_state(x, u=0.4, gamma=1.0, delta=-0.5)
    derivative = transition.field(y)

    weights = inter_cluster_weights(FIG3_PARTITION, 5)
    expected = vector_field_two_option(
        x,
        transition.opinions.params,
        u=np.full(5, 0.4),
        gamma=transition.gamma_intra + weights,
        delta=transition.delta_intra - 0.5 * weights,
    )
    assert_allclose(transition.layout.opinions(derivative), expected, atol=1e-14)
    assert_allclose(transition.layout.extra(derivative, "gamma"), -1.0 + math.tanh(0.1), atol=1e-14)
    assert_allclose(transition.layout.extra(derivative, "delta"), (0.5 - 0.5 * math.tanh(0.2)) / 2.0, atol=1e-14)


def test_transition_system_sign_flip(transition: TransitionSystem) -> None:
    assert transition.sigma == 1
    flipped = transition.segment_applied(ScheduleSegment(10.0, sigma=-1))
    assert isinstance(flipped, TransitionSystem)
    assert flipped.sigma == -1
    assert transition.with_inputs(np.full(5, 0.1)).sigma == 1
    assert flipped.with_inputs(np.full(5, 0.1)).sigma == -1


def test_transition_system_needs_two_options(coupling: CouplingFeedbackParams) -> None:
    adjacency = build_graph("all_to_all", 5)
    p = ModelParams.homogeneous(adjacency, n_options=2)
    ap = AttentionParams(1.0, 2.0, 0.5, 0.2, 1.0)
    with pytest.raises(ParameterError):
        TransitionSystem(OpinionSystem(p), ap, ap.matrix_for(adjacency), coupling)  # type: ignore[arg-type]


# endregion
