import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.graph import AdjacencySpec, build_graph
from src.model import (
    LINEAR,
    TANH,
    ModelParams,
    OpinionState,
    SaturationFamily,
    SaturationSpec,
    TwoOptionParams,
    boundedness_radius,
    consensus_params,
    jacobian_at_origin,
    project_tangent,
    signed_consensus_params,
    tensor_from_params,
    to_simplex,
    vector_field,
    vector_field_tensor,
    vector_field_two_option,
)
from src.utils.errors import DimensionError, Hypothesis, HypothesisError, ParameterError

SYMMETRIC_TABLE = SaturationSpec(
    SaturationFamily.CUSTOM_TABLE,
    table_x=(-2.0, -1.0, 0.0, 1.0, 2.0),
    table_y=(-1.5, -1.0, 0.0, 1.0, 1.5),
)


# region: Saturations


def test_tanh_saturation() -> None:
    assert TANH.eval(0.0) == 0.0
    assert TANH.derivative(0.0) == 1.0
    assert TANH.eval(100.0) == pytest.approx(1.0)
    assert TANH.bound == 1.0
    assert TANH.max_slope() == 1.0


def test_asymmetric_logistic_saturation() -> None:
    s = SaturationSpec(SaturationFamily.ASYMMETRIC_LOGISTIC)
    assert (s.k1, s.k2) == (0.8, 1.2)
    assert s.eval(0.0) == pytest.approx(0.0, abs=1e-12)
    assert s.derivative(0.0) == pytest.approx(1.0)
    assert s.eval(-50.0) == pytest.approx(-0.8)
    assert s.eval(50.0) == pytest.approx(1.2)
    assert s.second_derivative_at_zero() > 0.1
    assert s.max_slope() == pytest.approx(4.0 / 3.84)
    assert s.bound == 1.2


def test_odd_part_is_odd() -> None:
    s = SaturationSpec(SaturationFamily.ASYMMETRIC_LOGISTIC, k1=0.5, k2=2.0)
    y = np.linspace(-5, 5, 41)
    assert_allclose(s.odd_eval(-y), -s.odd_eval(y), atol=1e-14)
    assert_allclose(s.odd_derivative(y), s.odd_derivative(-y), atol=1e-14)


def test_custom_table_saturation() -> None:
    s = SYMMETRIC_TABLE
    assert (s.k1, s.k2) == (1.5, 1.5)
    assert float(s.eval(0.0)) == pytest.approx(0.0, abs=1e-15)
    assert float(s.derivative(0.0)) == pytest.approx(1.0)
    assert float(s.eval(5.0)) == pytest.approx(1.5)
    assert float(s.eval(-5.0)) == pytest.approx(-1.5)
    assert float(s.derivative(5.0)) == 0.0
    assert np.all(np.diff(s.eval(np.linspace(-2, 2, 81))) > 0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"family": SaturationFamily.ODD_TANH, "k1": 1.0, "k2": 2.0},
        {"family": SaturationFamily.ASYMMETRIC_LOGISTIC, "k1": -1.0},
        {"family": SaturationFamily.CUSTOM_TABLE, "table_x": (-1.0, 1.0), "table_y": (-1.0, 1.0)},
        {"family": SaturationFamily.CUSTOM_TABLE, "table_x": (-1.0, 0.0, 1.0), "table_y": (-1.0, 0.0, -0.5)},
        # slope 2 at the origin
        {"family": SaturationFamily.CUSTOM_TABLE, "table_x": (-1.0, 0.0, 1.0), "table_y": (-2.0, 0.0, 2.0)},
        # doesn't pass through the origin
        {"family": SaturationFamily.CUSTOM_TABLE, "table_x": (-1.0, 0.0, 1.0), "table_y": (-0.5, 0.5, 1.5)},
    ],
)
def test_invalid_saturations(kwargs: dict) -> None:
    with pytest.raises(ParameterError):
        SaturationSpec(**kwargs)


# endregion
# region: State and parameters


def test_opinion_state_rows_sum_to_zero() -> None:
    state = OpinionState(np.array([[1.0, -1.0], [0.5, -0.5]]))
    assert (state.n_agents, state.n_options) == (2, 2)
    with pytest.raises(ParameterError, match="sum to zero"):
        OpinionState(np.array([[1.0, 0.0]]))
    with pytest.raises(ParameterError, match="two options"):
        OpinionState(np.array([[0.0]]))

    assert_allclose(OpinionState.from_raw([[1.0, 2.0, 3.0]]).z, [[-1.0, 0.0, 1.0]])
    assert_allclose(OpinionState.from_two_option([0.3, -0.2]).z, [[0.3, -0.3], [-0.2, 0.2]])


def test_project_tangent_removes_row_means(rng: np.random.Generator) -> None:
    projected = project_tangent(rng.normal(size=(4, 3)))
    assert_allclose(projected.sum(axis=-1), 0.0, atol=1e-14)


def test_model_params_validation(path3: AdjacencySpec) -> None:
    base = ModelParams.homogeneous(path3, n_options=3, gamma=0.5)
    with pytest.raises(ParameterError, match="resistance"):
        ModelParams.homogeneous(path3, n_options=3, d=-1.0)
    with pytest.raises(ParameterError, match="attention"):
        ModelParams.homogeneous(path3, n_options=3, u=-0.1)
    with pytest.raises(ParameterError, match="diagonal"):
        ModelParams(base.d, base.u, base.alpha, base.beta, np.eye(3), base.delta, base.b_raw)
    with pytest.raises(ParameterError):
        ModelParams(base.d, base.u, base.alpha, base.beta, base.gamma, base.delta, np.zeros((2, 3)))
    with pytest.raises(DimensionError):
        ModelParams(np.ones(2), base.u, base.alpha, base.beta, base.gamma, base.delta, base.b_raw)
    with pytest.raises(ParameterError, match="bounded"):
        ModelParams(base.d, base.u, base.alpha, base.beta, base.gamma, base.delta, base.b_raw, s1=LINEAR)


def test_inputs_are_projected(path3: AdjacencySpec) -> None:
    p = ModelParams.homogeneous(path3, n_options=3, b=[1.0, 2.0, 3.0])
    assert_allclose(p.b, np.tile([-1.0, 0.0, 1.0], (3, 1)))
    assert_allclose(p.b_raw, np.tile([1.0, 2.0, 3.0], (3, 1)))
    assert p.is_homogeneous
    assert not p.with_attention([1.0, 2.0, 1.0]).is_homogeneous
    assert_allclose(p.with_attention(2.0).b, p.b)


def test_two_option_lift(pitchfork_params: TwoOptionParams) -> None:
    p = pitchfork_params.with_inputs([0.2, 0.0, -0.2])
    general = p.to_model_params()
    assert general.n_options == 2
    assert_allclose(general.b, [[0.2, -0.2], [0.0, 0.0], [-0.2, 0.2]])

    linear = signed_consensus_params(build_graph("path", 3), linear=True)
    with pytest.raises(ParameterError):
        linear.to_model_params()


def test_consensus_specializations() -> None:
    star = build_graph("star", 4)
    p = consensus_params(star, u=2.0)
    assert_allclose(p.d, [3.0, 1.0, 1.0, 1.0])
    assert_allclose(p.gamma, star.entries)
    assert_allclose(p.alpha, 0.0)

    signed = AdjacencySpec(np.array([[0.0, 1.0, -1.0], [1.0, 0.0, -1.0], [-1.0, -1.0, 0.0]]))
    with pytest.raises(ParameterError):
        consensus_params(signed)
    q = signed_consensus_params(signed)
    assert_allclose(q.d, [2.0, 2.0, 2.0])
    assert q.s1 is TANH


# endregion
# region: Vector fields


def test_two_option_field_matches_general_field(path3: AdjacencySpec, rng: np.random.Generator) -> None:
    p = TwoOptionParams.homogeneous(path3, u=0.7, alpha=0.3, beta=-0.2, gamma=0.5, delta=-0.4, b=[0.1, 0.0, -0.2])
    for x in rng.normal(size=(5, 3)):
        general = vector_field(OpinionState.from_two_option(x), p.to_model_params())
        assert_allclose(general[:, 0], vector_field_two_option(x, p), atol=1e-13)
        assert_allclose(general[:, 1], -general[:, 0], atol=1e-14)


def test_general_field_is_tangent_and_batched(path3: AdjacencySpec, rng: np.random.Generator) -> None:
    p = ModelParams.homogeneous(path3, n_options=3, u=1.5, alpha=0.2, beta=0.4, gamma=0.7, delta=-0.3, b=[0.3, 0, 0])
    states = project_tangent(rng.normal(size=(4, 3, 3)))
    batched = vector_field(states, p)
    assert batched.shape == (4, 3, 3)
    assert_allclose(batched.sum(axis=-1), 0.0, atol=1e-14)
    for state, derivative in zip(states, batched):
        assert_allclose(vector_field(state, p), derivative, atol=1e-14)

    with pytest.raises(DimensionError):
        vector_field(np.zeros((3, 2)), p)


def test_tensor_field_matches_general_field(rng: np.random.Generator) -> None:
    adjacency = build_graph("cycle", 4)
    p = ModelParams(
        d=rng.uniform(0.5, 1.5, 4),
        u=rng.uniform(0.5, 2.0, 4),
        alpha=rng.normal(size=4),
        beta=rng.normal(size=4),
        gamma=0.4 * adjacency.entries,
        delta=-0.2 * adjacency.entries,
        b=rng.normal(size=(4, 3)),
    )
    tensor = tensor_from_params(p)
    assert tensor.entries.shape == (4, 4, 3, 3)
    assert tensor.entries[1, 1, 0, 0] == p.alpha[1]
    assert tensor.entries[1, 1, 0, 2] == p.beta[1]
    assert tensor.entries[0, 1, 2, 2] == p.gamma[0, 1]
    assert tensor.entries[0, 1, 2, 1] == p.delta[0, 1]

    z = project_tangent(rng.normal(size=(4, 3)))
    assert_allclose(vector_field_tensor(z, tensor, p.d, p.u, p.b_raw), vector_field(z, p), atol=1e-13)


# endregion
# region: Linearization, bounds and maps


def test_jacobian_at_origin_matches_finite_differences(path3: AdjacencySpec) -> None:
    p = ModelParams.homogeneous(path3, n_options=3, d=1.0, u=0.8, alpha=0.5, beta=0.2, gamma=-0.6, delta=0.3)
    jacobian = jacobian_at_origin(p)

    step = 1e-6
    numeric = np.zeros((9, 9))
    for index in range(9):
        offset = np.zeros(9)
        offset[index] = step
        plus = vector_field(offset.reshape(3, 3), p).ravel()
        minus = vector_field(-offset.reshape(3, 3), p).ravel()
        numeric[:, index] = (plus - minus) / (2 * step)
    assert_allclose(jacobian.matrix, numeric, atol=1e-7)


def test_jacobian_spectrum(path3: AdjacencySpec) -> None:
    p = ModelParams.homogeneous(path3, n_options=3, d=1.0, u=1.0, alpha=1.0, gamma=-1.0)
    jacobian = jacobian_at_origin(p)
    root2 = math.sqrt(2)
    assert_allclose(np.sort(jacobian.eigenvalues_on_v.real), [-root2, -root2, 0, 0, root2, root2], atol=1e-12)
    assert jacobian.max_real == pytest.approx(root2)
    assert jacobian.eigenvalues.size == 9


def test_jacobian_hypotheses(path3: AdjacencySpec) -> None:
    with pytest.raises(HypothesisError) as info:
        jacobian_at_origin(ModelParams.homogeneous(path3, n_options=2, b=[1.0, 0.0]))
    assert info.value.failures == [Hypothesis.NONZERO_INPUT]

    # inputs that project to zero are fine
    jacobian_at_origin(ModelParams.homogeneous(path3, n_options=3, b=[1.0, 1.0, 1.0]))

    p = ModelParams.homogeneous(path3, n_options=2).with_attention([1.0, 2.0, 1.0])
    with pytest.raises(HypothesisError) as info:
        jacobian_at_origin(p)
    assert info.value.failures == [Hypothesis.HETEROGENEOUS]


def test_boundedness_radius(path3: AdjacencySpec) -> None:
    p = ModelParams.homogeneous(path3, n_options=2, d=2.0, u=1.0, b=[0.5, -0.5])
    # R = 0.5 + 1.0 * (1.2 + 1.2), radius = 3 * 2 * R / 2
    assert boundedness_radius(p, np.zeros((3, 2))) == pytest.approx(3 * 2 * 2.9 / 2)
    far = np.full((3, 2), 100.0) * [1, -1]
    assert boundedness_radius(p, far) == pytest.approx(np.linalg.norm(far))


def test_to_simplex() -> None:
    z = np.array([[2.0, -1.0, -1.0], [-2.0, 2.0, 0.0]])
    mapped = to_simplex(z, radius=2.0, r=3.0)
    assert_allclose(mapped.sum(axis=-1), 3.0)
    assert np.all(mapped >= 0) and np.all(mapped <= 3.0)
    with pytest.raises(ParameterError):
        to_simplex(z, radius=0.0)


# endregion
