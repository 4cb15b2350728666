import numpy as np
import pytest

from src.figures import RECIPES, FigureResult, get_recipe
from src.figures.base import matches_pattern, signs
from src.figures.cascades import CascadeFrequencies
from src.utils.errors import ChecklistError, ParameterError
from src.utils.scenario import build_scenario

SLOW_RECIPES = sorted(set(RECIPES) - {"fig6", "fig7"})


def test_registry() -> None:
    assert set(RECIPES) == {"fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9_scaled", "fig10"}
    for figure_id, recipe in RECIPES.items():
        assert recipe.figure_id == figure_id
        assert recipe.title
    assert get_recipe("fig3") is RECIPES["fig3"]
    with pytest.raises(ParameterError):
        get_recipe("fig11")


@pytest.mark.parametrize("figure_id", sorted(RECIPES))
def test_recipe_scenarios_build(figure_id: str) -> None:
    configs = RECIPES[figure_id]().scenarios()
    assert configs
    for config in configs.values():
        scenario = build_scenario(config)
        assert np.all(np.isfinite(scenario.initial_state))


def test_all_to_all_weights_are_perturbed() -> None:
    configs = RECIPES["fig1"]().scenarios()
    cooperative = build_scenario(configs["two_options_cooperative"])
    competitive = build_scenario(configs["two_options_competitive"])
    off_diagonal = ~np.eye(8, dtype=bool)
    for scenario in (cooperative, competitive):
        assert not scenario.params.is_homogeneous
        assert np.unique(scenario.params.gamma[off_diagonal]).size > 1
        assert np.all(np.diag(scenario.params.gamma) == 0)
    # smaller noise in the competitive panel
    assert np.std(competitive.params.gamma[off_diagonal]) < np.std(cooperative.params.gamma[off_diagonal])

    replay = build_scenario(configs["two_options_cooperative"])
    np.testing.assert_allclose(replay.params.delta, cooperative.params.delta)


def test_checklist() -> None:
    result = FigureResult("demo")
    result.check("holds", True)
    assert result.passed
    result.raise_for_failures()

    result.check("broken", False, "detail")
    assert result.failed == ["broken"]
    report = result.report()
    assert report["passed"] is False
    assert report["checks"][1] == {"name": "broken", "passed": False, "detail": "detail"}
    with pytest.raises(ChecklistError) as info:
        result.raise_for_failures()
    assert info.value.failed == ["broken"]
    assert info.value.as_record()["figure"] == "demo"


def test_sign_patterns() -> None:
    assert signs(np.array([0.5, -1e-4, -0.2])).tolist() == [1, 0, -1]
    pattern = np.array([1.0, -1.0, 0.0])
    assert matches_pattern(np.array([-0.3, 0.4, 1e-5]), pattern)
    assert not matches_pattern(np.array([0.3, 0.4, 0.0]), pattern)


# region: Reproductions


def test_attention_states() -> None:
    result = RECIPES["fig6"]().run()
    assert result.passed, result.failed
    assert result.records["weak"]["u"] < 0.2
    assert result.records["strong"]["x"] > result.records["strong"]["strong_threshold"]
    assert set(result.tables) == {"weak", "strong"}


def test_attention_hysteresis() -> None:
    result = RECIPES["fig7"]().run()
    assert result.passed, result.failed
    assert result.records["persistent"]["final"] > 0
    assert result.records["flipping"]["final"] < 0
    assert all(record["before_switch"] > 0 for record in result.records.values())


@pytest.mark.slow
@pytest.mark.parametrize("figure_id", SLOW_RECIPES)
def test_full_reproduction(figure_id: str) -> None:
    result = RECIPES[figure_id]().run(workers=1)
    assert result.passed, result.failed
    assert result.tables


@pytest.mark.slow
def test_cascade_frequencies_trial_count() -> None:
    recipe = CascadeFrequencies(trials=20)
    result = recipe.run(workers=1)
    for name in recipe.COUPLINGS:
        frame = result.tables[name]
        assert (frame["trials"] == 20).all()
        assert ((frame["frequency"] >= 0) & (frame["frequency"] <= 1)).all()


# endregion
