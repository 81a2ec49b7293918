import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shapevec.core import (
    BLACK,
    RED,
    AffineMatrix,
    Circle,
    Color,
    InvalidTransformError,
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
    apply_affine,
    canvas_bounds,
    compose_transforms,
    shape_centroid,
)
from strategies import shapes, transforms


def test_shape_kind_has_three_variants():
    assert {k.value for k in ShapeKind} == {"circle", "rectangle", "triangle"}


@pytest.mark.parametrize("bad", [-0.01, 1.01, math.nan])
def test_color_channel_range(bad):
    with pytest.raises(ValueError):
        Color(bad, 0, 0)


def test_color_hex_and_8bit():
    c = Color.from_8bit(255, 128, 0)
    assert c.to_8bit() == (255, 128, 0)
    assert c.to_hex() == "#ff8000"


@pytest.mark.parametrize("params", [
    lambda: Circle(0, 0, 0),
    lambda: Circle(0, 0, -1),
    lambda: Rect(0, 0, 0, 1),
    lambda: Rect(0, 0, 1, -2),
    lambda: Triangle(0, 0, 1, 1, 2, 2),
    lambda: Scale(0, 1),
    lambda: SkewX(90),
    lambda: SkewY(-95),
])
def test_invariant_violations_raise(params):
    with pytest.raises(ValueError):
        params()


def test_compose_empty_is_identity():
    assert compose_transforms([]).as_tuple() == (1, 0, 0, 1, 0, 0)


def test_compose_translate():
    assert compose_transforms([Translate(10, 20)]).as_tuple() == (1, 0, 0, 1, 10, 20)


def test_rotate_quarter_turn():
    x, y = apply_affine(compose_transforms([Rotate(90)]), (1, 0))
    assert x == pytest.approx(0, abs=1e-9) and y == pytest.approx(1, abs=1e-9)


def test_apply_affine_examples():
    assert apply_affine(AffineMatrix.identity(), (5, 7)) == (5, 7)
    assert apply_affine(AffineMatrix(2, 0, 0, 2, 0, 0), (3, 4)) == (6, 8)


def test_leftmost_transform_applies_last():
    m = compose_transforms([Scale(2, 2), Translate(1, 0)])
    assert apply_affine(m, (0, 0)) == (2, 0)


def test_skew_matrices():
    t = math.tan(math.radians(30))
    assert compose_transforms([SkewX(30)]).as_tuple() == pytest.approx((1, 0, t, 1, 0, 0))
    assert compose_transforms([SkewY(30)]).as_tuple() == pytest.approx((1, t, 0, 1, 0, 0))


def test_singular_composition_raises():
    m = AffineMatrix(1, 2, 2, 4, 0, 0)
    with pytest.raises(InvalidTransformError):
        m.inverse()


@given(st.lists(transforms, max_size=3), st.lists(transforms, max_size=3))
def test_compose_associative_over_concatenation(a, b):
    whole = compose_transforms(a + b).to_array()
    split = compose_transforms(a).to_array() @ compose_transforms(b).to_array()
    np.testing.assert_allclose(whole, split, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(whole).max()))


@given(st.lists(transforms, min_size=1, max_size=3),
       st.tuples(st.floats(-500, 500), st.floats(-500, 500)))
def test_inverse_round_trip(ts, p):
    m = compose_transforms(ts)
    back = apply_affine(m.inverse(), apply_affine(m, p))
    assert back == pytest.approx(p, abs=1e-9)


def test_centroid_examples():
    assert shape_centroid(Shape(Circle(64, 64, 20))) == (64, 64)
    assert shape_centroid(Shape(Rect(0, 0, 10, 20))) == (5, 10)
    tri = Shape(Triangle(0, 0, 6, 0, 0, 6), transforms=(Translate(10, 10),))
    assert shape_centroid(tri) == pytest.approx((12, 12), abs=1e-12)


def test_triangle_centroid_matches_pixel_centroid():
    """Vertex average agrees with the area centroid of a fine raster."""
    tri = Triangle(2, 1, 9, 3, 4, 8)
    n = 2000
    xs = (np.arange(n) + 0.5) / n * 10
    gx, gy = np.meshgrid(xs, xs)
    (x1, y1), (x2, y2), (x3, y3) = tri.vertices

    def side(ax, ay, bx, by):
        return (bx - ax) * (gy - ay) - (by - ay) * (gx - ax)

    s1, s2, s3 = side(x1, y1, x2, y2), side(x2, y2, x3, y3), side(x3, y3, x1, y1)
    inside = ((s1 >= 0) & (s2 >= 0) & (s3 >= 0)) | ((s1 <= 0) & (s2 <= 0) & (s3 <= 0))
    got = (gx[inside].mean(), gy[inside].mean())
    assert got == pytest.approx(shape_centroid(Shape(tri)), abs=5e-3)


@given(shapes, transforms)
def test_centroid_commutes_with_affine(s, t):
    moved = Shape(s.params, s.fill, (t,) + s.transforms)
    want = apply_affine(t.matrix(), shape_centroid(s))
    assert shape_centroid(moved) == pytest.approx(want, abs=1e-9 * max(1.0, *map(abs, want)))


def test_canvas_bounds_of_rotated_square():
    s = Shape(Rect(-1, -1, 2, 2), transforms=(Rotate(45),))
    r = math.sqrt(2)
    assert canvas_bounds(s) == pytest.approx((-r, -r, r, r))


def test_document_validation():
    with pytest.raises(ValueError):
        SvgDocument(0, 10)
    doc = SvgDocument(4, 3, (Shape(Circle(1, 1, 1), RED),))
    assert doc.shapes[0].fill == RED and doc.shapes[0].kind is ShapeKind.CIRCLE


def test_raster_image_validation():
    img = RasterImage.filled(3, 2, BLACK)
    assert (img.width, img.height) == (3, 2)
    assert img.pixels.shape == (2, 3, 3)
    with pytest.raises(ValueError):
        RasterImage(np.full((2, 2, 3), 1.5))
    with pytest.raises(ValueError):
        RasterImage(np.zeros((2, 2)))
    assert img == RasterImage(np.zeros((2, 3, 3)))
    assert not img.pixels.flags.writeable
