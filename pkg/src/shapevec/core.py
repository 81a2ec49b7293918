"""Shared value types: shapes, colors, transforms, affine matrices, raster images.

Coordinates follow SVG: x grows rightward, y grows downward, origin at the
top-left corner of the canvas.  Colors are unit-interval floats; 8-bit
conversion only happens at PNG/hex boundaries.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import ClassVar, Sequence

import numpy as np

Point = tuple[float, float]


class InvalidTransformError(ValueError):
    """A transform (or transform list) has no inverse."""


class ShapeKind(enum.Enum):
    CIRCLE = "circle"
    RECTANGLE = "rectangle"
    TRIANGLE = "triangle"


# --------------------------------------------------------------------------
# Colors


@dataclass(frozen=True)
class Color:
    r: float
    g: float
    b: float

    def __post_init__(self):
        for v in (self.r, self.g, self.b):
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"color channel {v!r} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r, self.g, self.b)

    def to_8bit(self) -> tuple[int, int, int]:
        return tuple(int(round(c * 255)) for c in self.as_tuple())  # type: ignore[return-value]

    def to_hex(self) -> str:
        return "#{:02x}{:02x}{:02x}".format(*self.to_8bit())

    @classmethod
    def from_8bit(cls, r: int, g: int, b: int) -> Color:
        return cls(r / 255, g / 255, b / 255)


RED = Color(1.0, 0.0, 0.0)
GREEN = Color(0.0, 1.0, 0.0)
BLUE = Color(0.0, 0.0, 1.0)
WHITE = Color(1.0, 1.0, 1.0)
BLACK = Color(0.0, 0.0, 0.0)

NAMED_COLORS: dict[str, Color] = {
    "red": RED,
    "green": GREEN,
    "blue": BLUE,
    "white": WHITE,
    "black": BLACK,
}
PALETTE: tuple[Color, ...] = (RED, GREEN, BLUE)
PALETTE_NAMES: dict[Color, str] = {c: n for n, c in NAMED_COLORS.items()}


# --------------------------------------------------------------------------
# Affine matrices


@dataclass(frozen=True)
class AffineMatrix:
    """Maps p to (a*px + c*py + e, b*px + d*py + f), like an SVG ``matrix()``."""

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 1.0
    e: float = 0.0
    f: float = 0.0

    @classmethod
    def identity(cls) -> AffineMatrix:
        return cls()

    @classmethod
    def from_array(cls, m: np.ndarray) -> AffineMatrix:
        return cls(float(m[0, 0]), float(m[1, 0]), float(m[0, 1]),
                   float(m[1, 1]), float(m[0, 2]), float(m[1, 2]))

    def to_array(self) -> np.ndarray:
        return np.array([[self.a, self.c, self.e],
                         [self.b, self.d, self.f],
                         [0.0, 0.0, 1.0]])

    def as_tuple(self) -> tuple[float, ...]:
        return (self.a, self.b, self.c, self.d, self.e, self.f)

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: AffineMatrix) -> AffineMatrix:
        """Composition: ``(self @ other)(p) == self(other(p))``."""
        return AffineMatrix(
            self.a * other.a + self.c * other.b,
            self.b * other.a + self.d * other.b,
            self.a * other.c + self.c * other.d,
            self.b * other.c + self.d * other.d,
            self.a * other.e + self.c * other.f + self.e,
            self.b * other.e + self.d * other.f + self.f,
        )

    def inverse(self) -> AffineMatrix:
        det = self.determinant
        if abs(det) < 1e-12:
            raise InvalidTransformError(f"singular matrix (det={det:g})")
        a, b, c, d = self.d / det, -self.b / det, -self.c / det, self.a / det
        return AffineMatrix(a, b, c, d, -(a * self.e + c * self.f), -(b * self.e + d * self.f))

    def apply(self, p: Point) -> Point:
        return apply_affine(self, p)


def apply_affine(m: AffineMatrix, p: Point) -> Point:
    px, py = p
    return (m.a * px + m.c * py + m.e, m.b * px + m.d * py + m.f)


# --------------------------------------------------------------------------
# Transforms


class Transform:
    """Base for the five SVG transform functions in the grammar."""

    name: ClassVar[str]
    param_names: ClassVar[tuple[str, ...]]

    @property
    def params(self) -> tuple[float, ...]:
        return tuple(getattr(self, n) for n in self.param_names)

    def matrix(self) -> AffineMatrix:
        raise NotImplementedError

    def with_params(self, values: Sequence[float]) -> Transform:
        return type(self)(*values)


def _check_skew(deg: float) -> None:
    if not abs(deg) < 90.0:
        raise ValueError(f"skew angle {deg!r} must satisfy |angle| < 90")


@dataclass(frozen=True)
class Translate(Transform):
    tx: float
    ty: float = 0.0
    name: ClassVar[str] = "translate"
    param_names: ClassVar[tuple[str, ...]] = ("tx", "ty")

    def matrix(self) -> AffineMatrix:
        return AffineMatrix(1.0, 0.0, 0.0, 1.0, self.tx, self.ty)


@dataclass(frozen=True)
class Scale(Transform):
    sx: float
    sy: float
    name: ClassVar[str] = "scale"
    param_names: ClassVar[tuple[str, ...]] = ("sx", "sy")

    def __post_init__(self):
        if self.sx == 0 or self.sy == 0:
            raise ValueError("scale factors must be nonzero")

    def matrix(self) -> AffineMatrix:
        return AffineMatrix(self.sx, 0.0, 0.0, self.sy, 0.0, 0.0)


@dataclass(frozen=True)
class Rotate(Transform):
    deg: float
    name: ClassVar[str] = "rotate"
    param_names: ClassVar[tuple[str, ...]] = ("deg",)

    def matrix(self) -> AffineMatrix:
        t = math.radians(self.deg)
        cos, sin = math.cos(t), math.sin(t)
        return AffineMatrix(cos, sin, -sin, cos, 0.0, 0.0)


@dataclass(frozen=True)
class SkewX(Transform):
    deg: float
    name: ClassVar[str] = "skewX"
    param_names: ClassVar[tuple[str, ...]] = ("deg",)

    def __post_init__(self):
        _check_skew(self.deg)

    def matrix(self) -> AffineMatrix:
        return AffineMatrix(1.0, 0.0, math.tan(math.radians(self.deg)), 1.0, 0.0, 0.0)


@dataclass(frozen=True)
class SkewY(Transform):
    deg: float
    name: ClassVar[str] = "skewY"
    param_names: ClassVar[tuple[str, ...]] = ("deg",)

    def __post_init__(self):
        _check_skew(self.deg)

    def matrix(self) -> AffineMatrix:
        return AffineMatrix(1.0, math.tan(math.radians(self.deg)), 0.0, 1.0, 0.0, 0.0)


TRANSFORM_TYPES: dict[str, type[Transform]] = {
    t.name: t for t in (Translate, Scale, Rotate, SkewX, SkewY)
}


def compose_transforms(ts: Sequence[Transform]) -> AffineMatrix:
    """Collapse an SVG transform list into one matrix.

    The leftmost transform is applied last to a point, as in an SVG
    ``transform`` attribute.  Raises :class:`InvalidTransformError` when the
    product is singular.
    """
    m = AffineMatrix.identity()
    for t in ts:
        m = m @ t.matrix()
    if abs(m.determinant) < 1e-12:
        raise InvalidTransformError(f"transform list {list(ts)!r} is singular")
    return m


# --------------------------------------------------------------------------
# Shapes


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float
    kind: ClassVar[ShapeKind] = ShapeKind.CIRCLE
    param_names: ClassVar[tuple[str, ...]] = ("cx", "cy", "r")

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"circle radius must be positive, got {self.r!r}")


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    width: float
    height: float
    kind: ClassVar[ShapeKind] = ShapeKind.RECTANGLE
    param_names: ClassVar[tuple[str, ...]] = ("x", "y", "width", "height")

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"rect size must be positive, got {self.width!r}x{self.height!r}")


@dataclass(frozen=True)
class Triangle:
    x1: float
    y1: float
    x2: float
    y2: float
    x3: float
    y3: float
    kind: ClassVar[ShapeKind] = ShapeKind.TRIANGLE
    param_names: ClassVar[tuple[str, ...]] = ("x1", "y1", "x2", "y2", "x3", "y3")

    def __post_init__(self):
        if not abs(self.signed_area) > 1e-6:
            raise ValueError("triangle vertices are collinear")

    @property
    def vertices(self) -> tuple[Point, Point, Point]:
        return ((self.x1, self.y1), (self.x2, self.y2), (self.x3, self.y3))

    @property
    def signed_area(self) -> float:
        return 0.5 * ((self.x2 - self.x1) * (self.y3 - self.y1)
                      - (self.x3 - self.x1) * (self.y2 - self.y1))


ShapeParams = Circle | Rect | Triangle
PARAM_TYPES: dict[ShapeKind, type] = {
    ShapeKind.CIRCLE: Circle,
    ShapeKind.RECTANGLE: Rect,
    ShapeKind.TRIANGLE: Triangle,
}


def params_values(p: ShapeParams) -> tuple[float, ...]:
    return tuple(getattr(p, n) for n in p.param_names)


@dataclass(frozen=True)
class Shape:
    params: ShapeParams
    fill: Color = BLACK
    transforms: tuple[Transform, ...] = ()

    def __post_init__(self):
        if not isinstance(self.transforms, tuple):
            object.__setattr__(self, "transforms", tuple(self.transforms))

    @property
    def kind(self) -> ShapeKind:
        return self.params.kind

    def matrix(self) -> AffineMatrix:
        return compose_transforms(self.transforms)


def local_centroid(p: ShapeParams) -> Point:
    if isinstance(p, Circle):
        return (p.cx, p.cy)
    if isinstance(p, Rect):
        return (p.x + p.width / 2, p.y + p.height / 2)
    return ((p.x1 + p.x2 + p.x3) / 3, (p.y1 + p.y2 + p.y3) / 3)


def shape_centroid(s: Shape) -> Point:
    """Centroid of the transformed geometry in canvas coordinates."""
    return apply_affine(compose_transforms(s.transforms), local_centroid(s.params))


def local_bounds(p: ShapeParams) -> tuple[float, float, float, float]:
    """Axis-aligned (xmin, ymin, xmax, ymax) of the untransformed geometry."""
    if isinstance(p, Circle):
        return (p.cx - p.r, p.cy - p.r, p.cx + p.r, p.cy + p.r)
    if isinstance(p, Rect):
        return (p.x, p.y, p.x + p.width, p.y + p.height)
    xs, ys = (p.x1, p.x2, p.x3), (p.y1, p.y2, p.y3)
    return (min(xs), min(ys), max(xs), max(ys))


def canvas_bounds(s: Shape) -> tuple[float, float, float, float]:
    """Bounding box of the transformed local bounding box."""
    m = compose_transforms(s.transforms)
    x0, y0, x1, y1 = local_bounds(s.params)
    pts = [apply_affine(m, q) for q in ((x0, y0), (x1, y0), (x0, y1), (x1, y1))]
    xs, ys = [q[0] for q in pts], [q[1] for q in pts]
    return (min(xs), min(ys), max(xs), max(ys))


@dataclass(frozen=True)
class SvgDocument:
    width: int
    height: int
    shapes: tuple[Shape, ...] = ()
    background: Color = WHITE

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("canvas size must be positive")
        if not isinstance(self.shapes, tuple):
            object.__setattr__(self, "shapes", tuple(self.shapes))


# --------------------------------------------------------------------------
# Raster images


@dataclass(frozen=True, eq=False)
class RasterImage:
    """An H x W x 3 float image with channels in [0, 1]."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected an HxWx3 array, got shape {px.shape}")
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise ValueError("pixel channels must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def filled(cls, width: int, height: int, color: Color = WHITE) -> RasterImage:
        return cls(np.broadcast_to(np.array(color.as_tuple()), (height, width, 3)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __repr__(self) -> str:
        return f"RasterImage({self.width}x{self.height})"
