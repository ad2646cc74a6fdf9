"""Flat-file outputs: performance-map CSV, grid CSV and SVG heatmaps.

CSV contract: header ``p_h,p_c,value,count,low_confidence``, decimal
point, UTF-8, LF line endings; one row per grid cell, p_h-major order.
Undefined cells carry an empty value and count 0.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .metrics import (
    LOW_CONFIDENCE_COUNT,
    MapKind,
    MapSource,
    MetricsError,
    PerformanceMap,
    grid_points,
)

MAP_CSV_HEADER = ["p_h", "p_c", "value", "count", "low_confidence"]


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def write_map_csv(path: Path, pm: PerformanceMap) -> None:
    points = grid_points(pm.grid_step)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MAP_CSV_HEADER)
        for i, ph in enumerate(points):
            for j, pc in enumerate(points):
                value = pm.values[i, j]
                writer.writerow(
                    [
                        _fmt(ph),
                        _fmt(pc),
                        "" if np.isnan(value) else _fmt(value),
                        int(pm.counts[i, j]),
                        "true" if pm.counts[i, j] < LOW_CONFIDENCE_COUNT else "false",
                    ]
                )


def read_map_csv(path: Path, kind: MapKind, source: MapSource) -> PerformanceMap:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MAP_CSV_HEADER:
            raise MetricsError(f"{path}: unexpected CSV header {header}")
        rows = list(reader)
    n = round(len(rows) ** 0.5)
    if n * n != len(rows) or n < 2:
        raise MetricsError(f"{path}: row count {len(rows)} is not a square grid")
    grid_step = 1.0 / (n - 1)
    values = np.full((n, n), np.nan)
    counts = np.zeros((n, n), dtype=np.int64)
    points = grid_points(grid_step)
    for idx, row in enumerate(rows):
        i, j = divmod(idx, n)
        ph, pc = float(row[0]), float(row[1])
        if abs(ph - points[i]) > 1e-9 or abs(pc - points[j]) > 1e-9:
            raise MetricsError(f"{path}: unexpected grid point ({ph}, {pc})")
        if row[2] != "":
            values[i, j] = float(row[2])
        counts[i, j] = int(row[3])
    return PerformanceMap(grid_step, values, counts, kind, source)


def write_grid_csv(path: Path, grid_step: float, values: np.ndarray) -> None:
    """Bare p_h,p_c,value grid, used for pointwise divergence maps."""
    points = grid_points(grid_step)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["p_h", "p_c", "value"])
        for i, ph in enumerate(points):
            for j, pc in enumerate(points):
                v = values[i, j]
                writer.writerow([_fmt(ph), _fmt(pc), "" if np.isnan(v) else _fmt(v)])


# Five-anchor blue-to-yellow ramp, linearly interpolated over [0, 1];
# undefined cells render light grey.
_RAMP = [
    (0.00, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.50, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.00, (253, 231, 37)),
]
_UNDEFINED_COLOR = "#dddddd"


def _ramp_color(v: float) -> str:
    v = min(max(v, 0.0), 1.0)
    for (x0, c0), (x1, c1) in zip(_RAMP, _RAMP[1:]):
        if v <= x1:
            f = 0.0 if x1 == x0 else (v - x0) / (x1 - x0)
            rgb = tuple(round(a + f * (b - a)) for a, b in zip(c0, c1))
            return "#%02x%02x%02x" % rgb
    return "#%02x%02x%02x" % _RAMP[-1][1]


def render_heatmap_svg(
    path: Path,
    values: np.ndarray,
    grid_step: float,
    title: str,
    cell_px: int = 12,
) -> None:
    """Self-contained SVG heatmap; x axis is p_h, y axis is p_c (origin
    bottom-left). A pure function of the grid data."""
    n = grid_points(grid_step).size
    margin_left, margin_top, margin_bottom = 46, 34, 40
    bar_w, bar_gap = 18, 14
    plot = n * cell_px
    width = margin_left + plot + bar_gap + bar_w + 46
    height = margin_top + plot + margin_bottom
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="monospace" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{margin_left}" y="18">{title}</text>',
    ]
    for i in range(n):
        for j in range(n):
            v = values[i, j]
            color = _UNDEFINED_COLOR if np.isnan(v) else _ramp_color(float(v))
            x = margin_left + i * cell_px
            y = margin_top + (n - 1 - j) * cell_px
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell_px}" '
                f'height="{cell_px}" fill="{color}"/>'
            )
    # axes labels
    x_mid = margin_left + plot // 2
    y_bot = margin_top + plot
    parts.append(f'<text x="{x_mid - 12}" y="{y_bot + 30}">p_h</text>')
    parts.append(
        f'<text x="14" y="{margin_top + plot // 2}" '
        f'transform="rotate(-90 14 {margin_top + plot // 2})">p_c</text>'
    )
    parts.append(f'<text x="{margin_left - 6}" y="{y_bot + 14}" text-anchor="end">0</text>')
    parts.append(f'<text x="{margin_left + plot}" y="{y_bot + 14}" text-anchor="end">1</text>')
    parts.append(f'<text x="{margin_left - 6}" y="{y_bot}" text-anchor="end">0</text>')
    parts.append(f'<text x="{margin_left - 6}" y="{margin_top + 10}" text-anchor="end">1</text>')
    # colour bar
    bar_x = margin_left + plot + bar_gap
    steps = 50
    seg = plot / steps
    for k in range(steps):
        v = 1.0 - (k + 0.5) / steps
        y = margin_top + k * seg
        parts.append(
            f'<rect x="{bar_x}" y="{y:.2f}" width="{bar_w}" '
            f'height="{seg + 0.5:.2f}" fill="{_ramp_color(v)}"/>'
        )
    parts.append(f'<text x="{bar_x + bar_w + 4}" y="{margin_top + 10}">1.0</text>')
    parts.append(f'<text x="{bar_x + bar_w + 4}" y="{y_bot}">0.0</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
