"""
Reading and writing run artifacts.

Tables go through pandas as CSV, written with full float precision and read back with the round-trip
parser so values survive a save/load cycle unchanged. Records (summaries, predictions, reports) are JSON.
"""
import json
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from src.dynamics import BranchPoint, StateLayout, Trajectory

log = logging.getLogger(__name__)

PathLike = Union[str, Path]


def ensure_directory(path: PathLike) -> Path:
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
    frame = pd.DataFrame(trajectory.states, columns=trajectory.layout.columns())
    frame.insert(0, "time", trajectory.times)
    return frame


def branch_frame(points: Sequence[BranchPoint], layout: StateLayout) -> pd.DataFrame:
    return pd.DataFrame([point.as_row(layout) for point in points])


def write_table(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    ensure_directory(path.parent)
    frame.to_csv(path, index=False, float_format="%.17g")
    log.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def read_table(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def _jsonable(value: object) -> object:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, complex):
        return {"real": value.real, "imag": value.imag}
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_record(record: dict[str, object], path: PathLike) -> Path:
    path = Path(path)
    ensure_directory(path.parent)
    # non-finite floats (u* = inf) are written as JSON's Infinity extension
    path.write_text(json.dumps(record, indent=2, default=_jsonable) + "\n")
    return path


def read_record(path: PathLike) -> dict[str, object]:
    return json.loads(Path(path).read_text())


def write_rows(frame: pd.DataFrame, path: PathLike, fmt: str = "csv") -> Path:
    """Write a table as CSV or as a JSON list of row records."""
    if fmt == "csv":
        return write_table(frame, Path(path).with_suffix(".csv"))
    return write_record({"rows": frame.to_dict(orient="records")}, Path(path).with_suffix(".json"))
