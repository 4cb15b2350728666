from pathlib import Path

import numpy as np
import pytest

from src.graph import AdjacencySpec, build_graph, clustered_graph
from src.model import TwoOptionParams

SCENARIO_DIR = Path(__file__).parent.parent / "scenarios"

FIG3_PARTITION = [[0, 1], [2, 3, 4]]


@pytest.fixture
def path3() -> AdjacencySpec:
    return build_graph("path", 3)


@pytest.fixture
def path5() -> AdjacencySpec:
    return build_graph("path", 5)


@pytest.fixture
def pitchfork_params(path3: AdjacencySpec) -> TwoOptionParams:
    """Three agents on a path with d = alpha = 1 and competitive coupling gamma = -1, critical at u = 1/(1+sqrt 2)."""
    return TwoOptionParams.homogeneous(path3, d=1.0, alpha=1.0, gamma=-1.0)


@pytest.fixture
def clustered_params() -> TwoOptionParams:
    """Antagonistic clusters {0, 1} and {2, 3, 4}: weight -1 within, -2 across, u = 0.5."""
    adjacency = clustered_graph([2, 3], -1.0, -2.0)
    return TwoOptionParams.homogeneous(adjacency, d=1.0, u=0.5, gamma=1.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
