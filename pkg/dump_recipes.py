#!/usr/bin/env python
from pathlib import Path

from src.figures import RECIPES
from src.utils.scenario import dump_scenario

SCENARIO_DIR = Path(__file__).parent / "scenarios"


def main() -> list[Path]:
    written = []
    for figure_id, recipe_type in RECIPES.items():
        for name, config in recipe_type().scenarios().items():
            path = SCENARIO_DIR / f"{figure_id}_{name}.yaml"
            path.parent.mkdir(parents=True, exist_ok=True)
            dump_scenario(config, path)
            written.append(path)
    return written


if __name__ == "__main__":
    for path in main():
        print(path)
