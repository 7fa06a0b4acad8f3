"""PNG rendering of a decision map.

Cell color is the predicted class color at opacity 1 - H/ln(C), affinely
mapped into [0.15, 1.0] so class identity stays visible even at maximal
uncertainty.  Samples are filled circles in their true-label color; points
the model labels differently are overdrawn with a cross in the model-label
color.
"""

from __future__ import annotations

import io
import math

import numpy as np
from PIL import Image, ImageDraw

from .errors import ParameterError
from .pipeline import DecisionMap

# tab10-style palette; at least 10 visually distinct classes
DEFAULT_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

ALPHA_FLOOR = 0.15


def _hex_to_rgb(color: str) -> np.ndarray:
    color = color.lstrip("#")
    return np.array([int(color[i : i + 2], 16) for i in (0, 2, 4)], dtype=np.float64)


def render_png(decision_map: DecisionMap, palette=DEFAULT_PALETTE, cell_px: int = 6,
               point_radius: int = 4) -> bytes:
    c = decision_map.class_count
    if c > len(palette):
        raise ParameterError(f"palette has {len(palette)} colors for {c} classes")
    colors = np.stack([_hex_to_rgb(p) for p in palette[:c]])
    gw, gh = decision_map.resolution
    ln_c = math.log(c) if c > 1 else 1.0
    alpha = ALPHA_FLOOR + (1.0 - ALPHA_FLOOR) * (
        1.0 - np.clip(decision_map.grid_entropy / ln_c, 0.0, 1.0)
    )
    cell_rgb = colors[decision_map.grid_labels]  # gw x gh x 3
    blended = alpha[..., None] * cell_rgb + (1.0 - alpha[..., None]) * 255.0
    # image rows run top to bottom: row 0 is the highest-y cell row
    img_cells = np.transpose(blended, (1, 0, 2))[::-1]
    pixels = np.kron(img_cells, np.ones((cell_px, cell_px, 1)))
    image = Image.fromarray(np.round(pixels).astype(np.uint8), mode="RGB")
    draw = ImageDraw.Draw(image)

    xmin, xmax, ymin, ymax = decision_map.viewport
    width, height = gw * cell_px, gh * cell_px

    def to_px(x, y):
        return (
            (x - xmin) / (xmax - xmin) * width,
            (ymax - y) / (ymax - ymin) * height,
        )

    for x, y, model_label, true_label in decision_map.scatter:
        px, py = to_px(x, y)
        tru = tuple(int(v) for v in colors[int(true_label)])
        draw.ellipse(
            [px - point_radius, py - point_radius, px + point_radius, py + point_radius],
            fill=tru, outline=(40, 40, 40),
        )
        if int(model_label) != int(true_label):
            mod = tuple(int(v) for v in colors[int(model_label)])
            r = point_radius + 2
            draw.line([px - r, py - r, px + r, py + r], fill=mod, width=2)
            draw.line([px - r, py + r, px + r, py - r], fill=mod, width=2)

    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()
