"""Vector-graphics toolkit: synthetic SVG datasets, a differentiable
rasterizer, parameter refinement against raster targets, and evaluation
metrics."""

from .core import (
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
from .parser import ParseError, parse_svg, serialize_svg
from .raster import RenderConfig, render, render_oracle
from .refine import RefineConfig, refine

__version__ = "0.1.0"

__all__ = [
    "Circle", "Color", "RasterImage", "Rect", "Rotate", "Scale", "Shape", "ShapeKind",
    "SkewX", "SkewY", "SvgDocument", "Translate", "Triangle", "ParseError", "parse_svg",
    "serialize_svg", "RenderConfig", "render", "render_oracle", "RefineConfig", "refine",
]
