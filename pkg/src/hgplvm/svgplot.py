"""Static Poincare-disk scatter rendering with deterministic byte output."""

from __future__ import annotations

import numpy as np

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
    "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7",
    "#dbdb8d", "#9edae5",
)

MAX_LEGEND = 20


def color_for_labels(labels, colors=None):
    """Assign one colour per distinct label (sorted order, palette cycles)."""
    unique = sorted(set(int(v) for v in labels))
    mapping = {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(unique)}
    if colors:
        for key, value in colors.items():
            mapping[int(key)] = value
    return mapping


def _f(v):
    return f"{v:.6f}"


def render_poincare_svg(points, labels, path, colors=None):
    """Write an SVG scatter of 2-D Poincare coordinates.

    points: (N, 2) inside the unit disk; labels: (N,) ints used for
    colouring and the legend. Identical inputs produce identical bytes.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("rendering supports exactly two latent dimensions")
    if np.any(np.linalg.norm(points, axis=1) >= 1.0):
        raise ValueError("points must lie strictly inside the unit disk")
    labels = np.asarray(labels, dtype=int)
    mapping = color_for_labels(labels, colors)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" width="640" height="640" '
        'viewBox="-1.32 -1.1 2.64 2.2">',
        '<circle cx="0" cy="0" r="1" fill="none" stroke="#444444" stroke-width="0.004"/>',
    ]
    for (px, py), lab in zip(points, labels):
        # SVG y axis points down; flip for the usual orientation
        lines.append(
            f'<circle class="pt" cx="{_f(px)}" cy="{_f(-py)}" r="0.012" '
            f'fill="{mapping[int(lab)]}" fill-opacity="0.85"/>'
        )
    unique = sorted(mapping)
    for i, lab in enumerate(unique[:MAX_LEGEND]):
        y = -1.0 + 0.07 * i
        lines.append(
            f'<rect x="-1.30" y="{_f(y)}" width="0.045" height="0.045" fill="{mapping[lab]}"/>'
        )
        lines.append(
            f'<text x="-1.245" y="{_f(y + 0.04)}" font-size="0.05" '
            f'font-family="monospace" fill="#222222">{lab}</text>'
        )
    if len(unique) > MAX_LEGEND:
        y = -1.0 + 0.07 * MAX_LEGEND
        lines.append(
            f'<text x="-1.30" y="{_f(y + 0.04)}" font-size="0.05" '
            f'font-family="monospace" fill="#222222">+{len(unique) - MAX_LEGEND} more</text>'
        )
    lines.append("</svg>")
    data = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(data)
    return path
