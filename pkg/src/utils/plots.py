"""Static SVG charts rendered from the Jinja2 templates in src/templates."""
import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader, select_autoescape

from src.constants import Paths
from src.dynamics import BranchPoint, Trajectory

log = logging.getLogger(__name__)

WIDTH, HEIGHT = 720, 420
FRAME = {"left": 70, "right": 600, "top": 35, "bottom": 370}
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22")

_environment = Environment(
    loader=FileSystemLoader(Paths.TEMPLATES),
    autoescape=select_autoescape(["svg.j2"]),
    trim_blocks=True,
    lstrip_blocks=True,
)


def _limits(values: np.ndarray) -> tuple[float, float]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return 0.0, 1.0
    low, high = float(finite.min()), float(finite.max())
    if high - low < 1e-12:
        return low - 1.0, high + 1.0
    return low, high


def _scale(values: np.ndarray, limits: tuple[float, float], pixels: tuple[float, float]) -> np.ndarray:
    low, high = limits
    return pixels[0] + (np.asarray(values, dtype=float) - low) / (high - low) * (pixels[1] - pixels[0])


def _ticks(limits: tuple[float, float], pixels: tuple[float, float], count: int = 5) -> list[dict[str, object]]:
    values = np.linspace(*limits, count)
    return [
        {"pixel": float(pixel), "label": f"{value:.3g}"}
        for value, pixel in zip(values, _scale(values, limits, pixels))
    ]


def line_chart(
    x: np.ndarray,
    series: Mapping[str, np.ndarray],
    *,
    title: str,
    x_label: str,
    y_label: str,
    events: Sequence[tuple[float, str]] = (),
) -> str:
    x = np.asarray(x, dtype=float)
    x_limits = _limits(x)
    y_limits = _limits(np.concatenate([np.ravel(values) for values in series.values()]) if series else np.array([]))
    x_pixels = (FRAME["left"], FRAME["right"])
    y_pixels = (FRAME["bottom"], FRAME["top"])

    xs = _scale(x, x_limits, x_pixels)
    lines = []
    for index, (label, values) in enumerate(series.items()):
        ys = _scale(values, y_limits, y_pixels)
        lines.append(
            {
                "label": label,
                "color": PALETTE[index % len(PALETTE)],
                "points": " ".join(f"{px:.2f},{py:.2f}" for px, py in zip(xs, ys)),
            }
        )
    return _environment.get_template("chart.svg.j2").render(
        width=WIDTH,
        height=HEIGHT,
        frame=FRAME,
        title=title,
        x_label=x_label,
        y_label=y_label,
        x_ticks=_ticks(x_limits, x_pixels),
        y_ticks=_ticks(y_limits, y_pixels),
        events=[{"pixel": float(_scale(np.array(t), x_limits, x_pixels)), "label": tag} for t, tag in events],
        lines=lines,
        markers=[],
        legend=[],
    )


def trajectory_chart(trajectory: Trajectory, title: str) -> str:
    """Opinions over time (x_i, or z_i1 for every agent of a general state)."""
    opinions = trajectory.opinions()
    if opinions.ndim == 3:
        series = {f"z_{i + 1}_1": opinions[:, i, 0] for i in range(opinions.shape[1])}
    else:
        series = {f"x_{i + 1}": opinions[:, i] for i in range(opinions.shape[1])}
    return line_chart(
        trajectory.times, series, title=title, x_label="t", y_label="opinion", events=trajectory.events
    )


def branch_chart(points: Sequence[BranchPoint], title: str) -> str:
    """Bifurcation diagram: filled markers for stable equilibria, hollow ones for unstable equilibria."""
    parameter = points[0].parameter if points else "u"
    values = np.array([point.value for point in points])
    projections = np.array([point.projection for point in points])
    x_limits, y_limits = _limits(values), _limits(projections)
    x_pixels = (FRAME["left"], FRAME["right"])
    y_pixels = (FRAME["bottom"], FRAME["top"])

    markers = [
        {"x": float(px), "y": float(py), "color": PALETTE[0], "fill": PALETTE[0] if point.stable else "white"}
        for point, px, py in zip(points, _scale(values, x_limits, x_pixels), _scale(projections, y_limits, y_pixels))
    ]
    return _environment.get_template("chart.svg.j2").render(
        width=WIDTH,
        height=HEIGHT,
        frame=FRAME,
        title=title,
        x_label=parameter,
        y_label="projection",
        x_ticks=_ticks(x_limits, x_pixels),
        y_ticks=_ticks(y_limits, y_pixels),
        events=[],
        lines=[],
        markers=markers,
        legend=[{"label": "stable", "color": PALETTE[0]}, {"label": "unstable (hollow)", "color": "#444"}],
    )


def _edge_ticks(edges: Sequence[float], limits: tuple[float, float], pixels: tuple[float, float]) -> list[dict]:
    pixel_values = _scale(np.array(edges), limits, pixels)
    return [{"pixel": float(pixel), "label": f"{edge:.3g}"} for edge, pixel in zip(edges, pixel_values)]


def _shade(fraction: float) -> str:
    """Dark red for 0, white for 1, grey for bins without data."""
    if not np.isfinite(fraction):
        return "#bbbbbb"
    fraction = min(max(fraction, 0.0), 1.0)
    red, green, blue = (139 + (255 - 139) * fraction, 255 * fraction, 255 * fraction)
    return f"rgb({red:.0f},{green:.0f},{blue:.0f})"


def cascade_heatmap(frame: pd.DataFrame, title: str) -> str:
    """Cascade frequency over (input norm, alignment) bins as produced by the cascade study."""
    norm_edges = sorted(set(frame["norm_low"]) | set(frame["norm_high"]))
    alignment_edges = sorted(set(frame["alignment_low"]) | set(frame["alignment_high"]))
    x_limits = (norm_edges[0], norm_edges[-1])
    y_limits = (alignment_edges[0], alignment_edges[-1])
    x_pixels = (FRAME["left"], FRAME["right"])
    y_pixels = (FRAME["bottom"], FRAME["top"])

    cells = []
    for row in frame.itertuples(index=False):
        x0, x1 = _scale(np.array([row.norm_low, row.norm_high]), x_limits, x_pixels)
        y0, y1 = _scale(np.array([row.alignment_low, row.alignment_high]), y_limits, y_pixels)
        cells.append(
            {
                "x": float(x0),
                "y": float(y1),
                "width": float(x1 - x0),
                "height": float(y0 - y1),
                "fill": _shade(row.frequency),
                "label": f"{row.cascades}/{row.trials} cascades",
            }
        )
    return _environment.get_template("heatmap.svg.j2").render(
        width=WIDTH,
        height=HEIGHT,
        frame=FRAME,
        title=title,
        x_label="|b|",
        y_label="|cos(b, w)|",
        x_ticks=_edge_ticks(norm_edges, x_limits, x_pixels),
        y_ticks=_edge_ticks(alignment_edges, y_limits, y_pixels),
        cells=cells,
    )


def write_svg(svg: str, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg)
    log.debug(f"Wrote plot {path}")
    return path
