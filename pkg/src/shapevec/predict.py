"""Raster to SVG prediction.

The built-in predictor reads grid-scene images cell by cell: it segments ink
from the white background, picks the nearest palette color, and tells
rectangles, circles and triangles apart by how much of their bounding box
they fill.  Predictions from any outside model can be plugged in as SVG
files instead.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .core import (
    PALETTE,
    Circle,
    Color,
    RasterImage,
    Rect,
    Rotate,
    Scale,
    Shape,
    ShapeKind,
    SkewX,
    SkewY,
    SvgDocument,
    Translate,
    Triangle,
)
from .parser import parse_svg

BACKGROUND_TOLERANCE = 0.2

IDENTITY_TRANSFORMS = {
    "translate": Translate(0.0, 0.0),
    "scale": Scale(1.0, 1.0),
    "rotate": Rotate(0.0),
    "skewX": SkewX(0.0),
    "skewY": SkewY(0.0),
}

# fill-ratio bands: ink area / ink bounding-box area
RECT_MIN = 0.92
CIRCLE_BAND = (0.68, 0.88)
TRIANGLE_MAX = 0.62


@dataclass(frozen=True)
class CellFeatures:
    """Ink statistics of one image region.  ``bbox`` is ``(x0, y0, x1, y1)``
    in canvas pixel edges; it is ``None`` for empty cells."""

    color: Color | None
    ink_fraction: float
    fill_ratio: float
    bbox: tuple[int, int, int, int] | None

    @property
    def empty(self) -> bool:
        return self.bbox is None


def ink_mask(pixels: np.ndarray, tol: float = BACKGROUND_TOLERANCE) -> np.ndarray:
    """True where a pixel is farther than ``tol`` from white in L-infinity."""
    return np.max(1.0 - pixels, axis=-1) > tol


def nearest_color(rgb: np.ndarray, palette: tuple[Color, ...] = PALETTE) -> Color:
    pal = np.array([c.as_tuple() for c in palette])
    return palette[int(np.argmin(np.sum((pal - rgb) ** 2, axis=1)))]


def region_features(pixels: np.ndarray, x_off: int = 0, y_off: int = 0,
                    palette: tuple[Color, ...] = PALETTE) -> CellFeatures:
    mask = ink_mask(pixels)
    count = int(mask.sum())
    if count == 0:
        return CellFeatures(None, 0.0, 0.0, None)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    y0, y1 = int(rows[0]), int(rows[-1]) + 1
    x0, x1 = int(cols[0]), int(cols[-1]) + 1
    color = nearest_color(pixels[mask].mean(axis=0), palette)
    return CellFeatures(
        color=color,
        ink_fraction=count / mask.size,
        fill_ratio=count / ((x1 - x0) * (y1 - y0)),
        bbox=(x0 + x_off, y0 + y_off, x1 + x_off, y1 + y_off),
    )


def cell_bounds(size: int, parts: int) -> list[tuple[int, int]]:
    edges = [round(i * size / parts) for i in range(parts + 1)]
    return list(zip(edges[:-1], edges[1:]))


def extract_cell_features(img: RasterImage, rows: int = 3, cols: int = 3,
                          palette: tuple[Color, ...] = PALETTE) -> list[CellFeatures]:
    """Features for each grid cell in row-major order."""
    px = img.pixels
    out = []
    for ya, yb in cell_bounds(img.height, rows):
        for xa, xb in cell_bounds(img.width, cols):
            out.append(region_features(px[ya:yb, xa:xb], xa, ya, palette))
    return out


def kind_from_fill_ratio(ratio: float) -> ShapeKind:
    if ratio >= RECT_MIN:
        return ShapeKind.RECTANGLE
    lo, hi = CIRCLE_BAND
    if lo <= ratio <= hi:
        return ShapeKind.CIRCLE
    if ratio < TRIANGLE_MAX:
        return ShapeKind.TRIANGLE
    # gaps go to the nearest band edge
    if ratio < lo:
        return ShapeKind.TRIANGLE if ratio - TRIANGLE_MAX < lo - ratio else ShapeKind.CIRCLE
    return ShapeKind.CIRCLE if ratio - hi < RECT_MIN - ratio else ShapeKind.RECTANGLE


def classify_cell(f: CellFeatures):
    """``(kind, params)`` with geometry read off the ink bounding box, or
    ``None`` for an empty cell."""
    if f.empty:
        return None
    kind = kind_from_fill_ratio(f.fill_ratio)
    x0, y0, x1, y1 = (float(v) for v in f.bbox)
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    if kind is ShapeKind.RECTANGLE:
        return kind, Rect(x0, y0, x1 - x0, y1 - y0)
    if kind is ShapeKind.CIRCLE:
        return kind, Circle(cx, cy, ((x1 - x0) + (y1 - y0)) / 4)
    return kind, Triangle(cx, y0, x0, y1, x1, y1)


# --------------------------------------------------------------------------
# Predictors


@runtime_checkable
class Predictor(Protocol):
    def predict(self, img: RasterImage) -> SvgDocument: ...


@dataclass(frozen=True)
class HeuristicPredictor:
    """Grid-scene reader.  With ``grid=False`` the whole image is treated as
    one shape that receives identity transforms of ``transform_kinds`` (SVG
    names such as ``"rotate"``), so refinement can fit them."""

    rows: int = 3
    cols: int = 3
    grid: bool = True
    transform_kinds: tuple[str, ...] = ()
    palette: tuple[Color, ...] = PALETTE

    def __post_init__(self):
        unknown = [k for k in self.transform_kinds if k not in IDENTITY_TRANSFORMS]
        if unknown:
            raise ValueError(f"unknown transform kinds: {unknown}")

    def predict(self, img: RasterImage) -> SvgDocument:
        if self.grid:
            feats = extract_cell_features(img, self.rows, self.cols, self.palette)
            transforms = ()
        else:
            feats = [region_features(img.pixels, palette=self.palette)]
            transforms = tuple(IDENTITY_TRANSFORMS[k] for k in self.transform_kinds)
        shapes = []
        for f in feats:
            guess = classify_cell(f)
            if guess is not None:
                shapes.append(Shape(guess[1], f.color, transforms))
        return SvgDocument(img.width, img.height, tuple(shapes))


@dataclass(frozen=True)
class ExternalPredictor:
    """Prediction produced elsewhere and stored as an SVG file."""

    path: str | os.PathLike

    def predict(self, img: RasterImage | None = None) -> SvgDocument:
        return parse_svg(Path(self.path).read_text(encoding="utf-8"), lenient=True)


def predict_svg(img: RasterImage, predictor: Predictor | None = None) -> SvgDocument:
    return (predictor or HeuristicPredictor()).predict(img)
