from src.figures.base import Check, FigureRecipe, FigureResult
from src.figures.bifurcations import PatternSelection, PitchforkUnfolding
from src.figures.cascades import CascadeFrequencies, TriggeredCascades
from src.figures.comparisons import AllToAllRegimes, ClusteredDissensus, LinearComparison
from src.figures.single_agent import AttentionHysteresis, AttentionStates
from src.figures.transitions import CouplingTransition
from src.utils.errors import ParameterError

RECIPES: dict[str, type[FigureRecipe]] = {
    recipe.figure_id: recipe
    for recipe in (
        AllToAllRegimes,
        LinearComparison,
        ClusteredDissensus,
        PitchforkUnfolding,
        PatternSelection,
        AttentionStates,
        AttentionHysteresis,
        TriggeredCascades,
        CascadeFrequencies,
        CouplingTransition,
    )
}


def get_recipe(figure_id: str) -> type[FigureRecipe]:
    try:
        return RECIPES[figure_id]
    except KeyError:
        raise ParameterError("figure", figure_id, f"known figures are {', '.join(RECIPES)}") from None


__all__ = ["Check", "FigureRecipe", "FigureResult", "RECIPES", "get_recipe"]
