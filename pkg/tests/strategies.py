"""Hypothesis strategies for shapes, transforms and documents."""

from hypothesis import strategies as st

from shapevec.core import (
    Circle,
    Color,
    Rect,
    Rotate,
    Scale,
    Shape,
    SkewX,
    SkewY,
    SvgDocument,
    Translate,
    Triangle,
)

coord = st.floats(-200, 600, allow_nan=False).map(lambda v: round(v, 3))
size = st.floats(0.5, 200).map(lambda v: round(v, 3))
unit = st.integers(0, 255).map(lambda v: v / 255)

colors = st.builds(Color, unit, unit, unit)


@st.composite
def triangles(draw):
    while True:
        t = [draw(coord) for _ in range(6)]
        x1, y1, x2, y2, x3, y3 = t
        if abs((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)) > 1.0:
            return Triangle(*t)


geometry = st.one_of(
    st.builds(Circle, coord, coord, size),
    st.builds(Rect, coord, coord, size, size),
    triangles(),
)

nonzero_scale = st.one_of(st.floats(0.2, 3.0), st.floats(-3.0, -0.2)).map(lambda v: round(v, 3))
angle = st.floats(-360, 360).map(lambda v: round(v, 3))
skew = st.floats(-60, 60).map(lambda v: round(v, 3))

transforms = st.one_of(
    st.builds(Translate, coord, coord),
    st.builds(Scale, nonzero_scale, nonzero_scale),
    st.builds(Rotate, angle),
    st.builds(SkewX, skew),
    st.builds(SkewY, skew),
)

shapes = st.builds(Shape, geometry, colors, st.lists(transforms, max_size=3).map(tuple))

documents = st.builds(
    SvgDocument,
    st.integers(1, 512),
    st.integers(1, 512),
    st.lists(shapes, max_size=5).map(tuple),
    colors,
)
