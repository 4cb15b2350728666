import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.dynamics import BranchPoint, InputSchedule, ScheduleSegment, StateLayout, TwoOptionSystem, integrate
from src.graph import AdjacencySpec
from src.model import TwoOptionParams
from src.storage import (
    branch_frame,
    ensure_directory,
    read_record,
    read_table,
    trajectory_frame,
    write_record,
    write_rows,
    write_table,
)
from src.utils.plots import branch_chart, cascade_heatmap, trajectory_chart, write_svg


@pytest.fixture
def trajectory(pitchfork_params: TwoOptionParams):
    schedule = InputSchedule((ScheduleSegment(1.0, b=np.array([0.1, 0.0, 0.0]), tag="nudge"),))
    return integrate(TwoOptionSystem(pitchfork_params), np.array([0.1, -0.2, 0.3]), schedule, t_end=2.0, dt=0.1)


def test_trajectory_table_round_trip(trajectory, tmp_path: Path) -> None:
    frame = trajectory_frame(trajectory)
    assert list(frame.columns) == ["time", "x_1", "x_2", "x_3"]
    assert len(frame) == len(trajectory.times)

    path = write_table(frame, tmp_path / "nested" / "trajectory.csv")
    assert path.exists()
    pd.testing.assert_frame_equal(read_table(path), frame)


def test_branch_frame() -> None:
    layout = StateLayout(2, 2, two_option=True)
    points = [
        BranchPoint("u", 0.5, np.array([0.1, -0.1]), -0.2, True, 1e-12),
        BranchPoint("u", 0.5, np.zeros(2), 0.0, False, 0.0),
    ]
    frame = branch_frame(points, layout)
    assert list(frame.columns) == ["u", "projection", "stable", "residual", "x_1", "x_2"]
    assert frame["stable"].tolist() == [True, False]


def test_records(tmp_path: Path) -> None:
    record = {
        "array": np.array([1.0, 2.0]),
        "scalar": np.float64(0.25),
        "flag": np.bool_(True),
        "eigenvalue": complex(1.0, -2.0),
        "path": tmp_path,
        "u_star": math.inf,
    }
    path = write_record(record, tmp_path / "summary.json")
    loaded = read_record(path)
    assert loaded["array"] == [1.0, 2.0]
    assert loaded["scalar"] == 0.25
    assert loaded["flag"] is True
    assert loaded["eigenvalue"] == {"real": 1.0, "imag": -2.0}
    assert loaded["path"] == str(tmp_path)
    assert loaded["u_star"] == math.inf

    with pytest.raises(TypeError):
        write_record({"value": object()}, tmp_path / "broken.json")


def test_write_rows(tmp_path: Path) -> None:
    frame = pd.DataFrame({"a": [1, 2], "b": [0.5, 1.5]})
    csv = write_rows(frame, tmp_path / "table", "csv")
    assert csv.name == "table.csv"
    pd.testing.assert_frame_equal(read_table(csv), frame)

    json_path = write_rows(frame, tmp_path / "table", "json")
    assert json_path.name == "table.json"
    assert read_record(json_path) == {"rows": [{"a": 1, "b": 0.5}, {"a": 2, "b": 1.5}]}


def test_ensure_directory(tmp_path: Path) -> None:
    directory = ensure_directory(tmp_path / "a" / "b")
    assert directory.is_dir()
    assert ensure_directory(directory) == directory


# region: Plots


def test_trajectory_chart(trajectory, tmp_path: Path) -> None:
    svg = trajectory_chart(trajectory, "three agents <path>")
    assert svg.startswith("<svg")
    assert "three agents &lt;path&gt;" in svg
    assert svg.count("<polyline") == 3
    assert "nudge" in svg

    path = write_svg(svg, tmp_path / "plots" / "trajectory.svg")
    assert path.read_text() == svg


def test_branch_chart() -> None:
    points = [
        BranchPoint("b_scale", 0.1, np.zeros(2), -0.5, True, 0.0),
        BranchPoint("b_scale", 0.1, np.zeros(2), 0.0, False, 0.0),
        BranchPoint("b_scale", 0.2, np.zeros(2), 0.5, True, 0.0),
    ]
    svg = branch_chart(points, "sweep")
    assert svg.count("<circle") == 3
    assert svg.count('r="2.5" fill="white"') == 1
    assert ">b_scale<" in svg


def test_cascade_heatmap() -> None:
    frame = pd.DataFrame(
        {
            "norm_low": [0.0, 0.0],
            "norm_high": [0.1, 0.1],
            "alignment_low": [0.0, 0.5],
            "alignment_high": [0.5, 1.0],
            "trials": [10, 10],
            "cascades": [0, 10],
            "frequency": [0.0, 1.0],
        }
    )
    svg = cascade_heatmap(frame, "cascades")
    assert "0/10 cascades" in svg
    assert "10/10 cascades" in svg
    assert "rgb(139,0,0)" in svg
    assert "rgb(255,255,255)" in svg


def test_empty_chart_still_renders() -> None:
    assert "<svg" in branch_chart([], "nothing converged")
    adjacency = AdjacencySpec(np.zeros((1, 1)))
    system = TwoOptionSystem(TwoOptionParams.homogeneous(adjacency, u=0.0))
    flat = integrate(system, np.zeros(1), t_end=1.0, dt=0.5)
    assert "<polyline" in trajectory_chart(flat, "flat")


# endregion
