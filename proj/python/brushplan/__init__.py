"""Stroke-based painting planner.

Canvases are float arrays shaped [3, H, W] in [0, 1]; physical sizes are in meters.
"""

from ._core import (
    CanvasGeometry,
    Plan,
    Stroke,
    StrokeDataset,
    StrokeModel,
    StrokeShape,
    evaluate,
    fit_color_transform,
    fit_homography,
    generate_dataset,
    paint,
    plan,
    render,
    train,
)

__all__ = [
    "CanvasGeometry",
    "Plan",
    "Stroke",
    "StrokeDataset",
    "StrokeModel",
    "StrokeShape",
    "evaluate",
    "fit_color_transform",
    "fit_homography",
    "generate_dataset",
    "paint",
    "plan",
    "render",
    "train",
]
