"""Reader and writer for the SVG subset used throughout the toolkit.

The grammar is one root ``<svg>`` holding ``circle``, ``rect`` and 3-point
``polygon`` elements with a ``fill`` color and an optional ``transform``
list.  Anything else is rejected with a :class:`ParseError` carrying the
byte offset of the offending token.
"""

from __future__ import annotations

import re
from typing import Callable

import numpy as np

from .core import (
    NAMED_COLORS,
    PALETTE_NAMES,
    TRANSFORM_TYPES,
    WHITE,
    BLACK,
    Circle,
    Color,
    Rect,
    Rotate,
    Scale,
    Shape,
    SvgDocument,
    Transform,
    Translate,
    Triangle,
)

SVG_NS = "http://www.w3.org/2000/svg"

MALFORMED_XML = "malformed-xml"
UNKNOWN_ELEMENT = "unknown-element"
UNKNOWN_ATTRIBUTE = "unknown-attribute"
BAD_NUMBER = "bad-number"
CONSTRAINT_VIOLATION = "constraint-violation"


class ParseError(ValueError):
    """Raised for any input outside the SVG subset.

    ``offset`` is a byte offset into the UTF-8 encoding of the input and
    ``error_class`` is one of ``malformed-xml``, ``unknown-element``,
    ``unknown-attribute``, ``bad-number`` or ``constraint-violation``.
    """

    def __init__(self, message: str, offset: int, error_class: str):
        super().__init__(f"{error_class} at byte {offset}: {message}")
        self.message = message
        self.offset = offset
        self.error_class = error_class


_ALLOWED_ATTRS = {
    "svg": {"xmlns", "xmlns:xlink", "version", "width", "height", "viewBox", "style"},
    "circle": {"cx", "cy", "r", "fill", "transform"},
    "rect": {"x", "y", "width", "height", "fill", "transform"},
    "polygon": {"points", "fill", "transform"},
}

_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_NUMBER_RE = re.compile(_NUMBER)
_NAME_RE = re.compile(r"[A-Za-z_][-\w.:]*")
_ATTR_RE = re.compile(r"""([A-Za-z_][-\w.:]*)\s*=\s*(?:"([^"]*)"|'([^']*)')""")
_WS_RE = re.compile(r"\s*")
_SEP_RE = re.compile(r"\s*,\s*|\s+")
_TRANSFORM_RE = re.compile(r"\s*([A-Za-z]+)\s*\(([^()]*)\)\s*,?")
_STYLE_RE = re.compile(r"\s*background-color\s*:\s*([#\w]+)\s*;?\s*")
_HEX6_RE = re.compile(r"#([0-9a-fA-F]{6})")
_HEX3_RE = re.compile(r"#([0-9a-fA-F]{3})")


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str, error_class: str, pos: int | None = None) -> ParseError:
        p = self.pos if pos is None else pos
        offset = len(self.text[:p].encode("utf-8"))
        size = len(self.text.encode("utf-8"))
        offset = max(0, min(offset, size - 1))
        return ParseError(message, offset, error_class)

    def skip_ws(self) -> None:
        self.pos = _WS_RE.match(self.text, self.pos).end()

    def skip_misc(self) -> None:
        """Skip whitespace and comments."""
        while True:
            self.skip_ws()
            if self.text.startswith("<!--", self.pos):
                end = self.text.find("-->", self.pos + 4)
                if end < 0:
                    raise self.error("unterminated comment", MALFORMED_XML)
                self.pos = end + 3
            else:
                return

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def expect(self, token: str) -> None:
        if not self.text.startswith(token, self.pos):
            raise self.error(f"expected {token!r}", MALFORMED_XML)
        self.pos += len(token)


class _Element:
    def __init__(self, name: str, offset: int, attrs: dict[str, tuple[str, int]], self_closing: bool):
        self.name = name
        self.offset = offset
        self.attrs = attrs
        self.self_closing = self_closing


def _read_start_tag(sc: _Scanner) -> _Element:
    start = sc.pos
    sc.expect("<")
    m = _NAME_RE.match(sc.text, sc.pos)
    if not m:
        raise sc.error("expected an element name", MALFORMED_XML)
    name = m.group(0)
    sc.pos = m.end()
    attrs: dict[str, tuple[str, int]] = {}
    while True:
        had_ws = sc.pos < len(sc.text) and sc.text[sc.pos].isspace()
        sc.skip_ws()
        if sc.text.startswith("/>", sc.pos):
            sc.pos += 2
            return _Element(name, start, attrs, True)
        if sc.text.startswith(">", sc.pos):
            sc.pos += 1
            return _Element(name, start, attrs, False)
        if sc.at_end():
            raise sc.error(f"unterminated <{name}> tag", MALFORMED_XML)
        m = _ATTR_RE.match(sc.text, sc.pos)
        if not m or not had_ws:
            raise sc.error(f"malformed attribute in <{name}>", MALFORMED_XML)
        key = m.group(1)
        value = m.group(2) if m.group(2) is not None else m.group(3)
        value_pos = m.start(2) if m.group(2) is not None else m.start(3)
        if key in attrs:
            raise sc.error(f"duplicate attribute {key!r}", MALFORMED_XML)
        if "&" in value or "<" in value:
            raise sc.error("entities and markup are not allowed in attribute values",
                           MALFORMED_XML, value_pos)
        attrs[key] = (value, value_pos)
        sc.pos = m.end()


def _read_end_tag(sc: _Scanner, name: str) -> None:
    sc.skip_misc()
    pos = sc.pos
    if not sc.text.startswith("</", pos):
        if sc.at_end():
            raise sc.error(f"missing </{name}>", MALFORMED_XML, max(0, pos - 1))
        raise sc.error(f"unexpected content inside <{name}>", MALFORMED_XML)
    sc.pos += 2
    m = _NAME_RE.match(sc.text, sc.pos)
    if not m or m.group(0) != name:
        raise sc.error(f"mismatched end tag, expected </{name}>", MALFORMED_XML, pos)
    sc.pos = m.end()
    sc.skip_ws()
    sc.expect(">")


# --------------------------------------------------------------------------
# Attribute value parsing


def _number(sc: _Scanner, value: str, pos: int, what: str) -> float:
    s = value.strip()
    m = _NUMBER_RE.fullmatch(s)
    if not m:
        raise sc.error(f"{what}: {value!r} is not a number", BAD_NUMBER, pos)
    return float(s)


def _number_list(sc: _Scanner, value: str, pos: int, what: str) -> list[float]:
    s = value.strip()
    if not s:
        return []
    out = []
    for piece in _SEP_RE.split(s):
        if not _NUMBER_RE.fullmatch(piece):
            raise sc.error(f"{what}: {piece!r} is not a number", BAD_NUMBER, pos)
        out.append(float(piece))
    return out


def _length(sc: _Scanner, value: str, pos: int, what: str) -> float:
    s = value.strip()
    if s.endswith("px"):
        s = s[:-2]
    return _number(sc, s, pos, what)


def parse_color(value: str) -> Color | None:
    """Parse a named palette color or ``#rrggbb``/``#rgb``; None if unsupported."""
    s = value.strip()
    if s.lower() in NAMED_COLORS:
        return NAMED_COLORS[s.lower()]
    m = _HEX6_RE.fullmatch(s)
    if m:
        h = m.group(1)
        return Color.from_8bit(int(h[0:2], 16), int(h[2:4], 16), int(h[4:6], 16))
    m = _HEX3_RE.fullmatch(s)
    if m:
        h = m.group(1)
        return Color.from_8bit(*(int(ch * 2, 16) for ch in h))
    return None


def _color(sc: _Scanner, value: str, pos: int) -> Color:
    c = parse_color(value)
    if c is None:
        raise sc.error(f"unsupported color {value!r}", CONSTRAINT_VIOLATION, pos)
    return c


def _transform_list(sc: _Scanner, value: str, pos: int) -> list[Transform]:
    out: list[Transform] = []
    i = 0
    s = value
    while _WS_RE.match(s, i).end() < len(s):
        m = _TRANSFORM_RE.match(s, i)
        if not m:
            raise sc.error(f"malformed transform list {value!r}", BAD_NUMBER, pos + i)
        name, args_text = m.group(1), m.group(2)
        args = _number_list(sc, args_text, pos + m.start(2), f"{name}()")
        n = len(args)
        try:
            if name == "translate" and n in (1, 2):
                out.append(Translate(args[0], args[1] if n == 2 else 0.0))
            elif name == "scale" and n in (1, 2):
                out.append(Scale(args[0], args[1] if n == 2 else args[0]))
            elif name == "rotate" and n == 1:
                out.append(Rotate(args[0]))
            elif name == "rotate" and n == 3:
                # rotate(a, cx, cy) == translate(cx, cy) rotate(a) translate(-cx, -cy)
                a, cx, cy = args
                out.extend([Translate(cx, cy), Rotate(a), Translate(-cx, -cy)])
            elif name in ("skewX", "skewY") and n == 1:
                out.append(TRANSFORM_TYPES[name](args[0]))
            elif name in TRANSFORM_TYPES or name == "rotate":
                raise sc.error(f"{name}() takes a different number of arguments than {n}",
                               CONSTRAINT_VIOLATION, pos + m.start(1))
            else:
                raise sc.error(f"unsupported transform function {name!r}",
                               CONSTRAINT_VIOLATION, pos + m.start(1))
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise sc.error(str(exc), CONSTRAINT_VIOLATION, pos + m.start(1)) from None
        i = m.end()
    return out


# --------------------------------------------------------------------------
# Elements


def _shape(sc: _Scanner, el: _Element) -> Shape:
    a = el.attrs

    def get(key: str, default: float | None = None) -> float:
        if key not in a:
            if default is None:
                raise sc.error(f"<{el.name}> requires attribute {key!r}",
                               CONSTRAINT_VIOLATION, el.offset)
            return default
        value, pos = a[key]
        return _number(sc, value, pos, key)

    try:
        if el.name == "circle":
            params = Circle(get("cx", 0.0), get("cy", 0.0), get("r"))
        elif el.name == "rect":
            params = Rect(get("x", 0.0), get("y", 0.0), get("width"), get("height"))
        else:
            if "points" not in a:
                raise sc.error("<polygon> requires attribute 'points'",
                               CONSTRAINT_VIOLATION, el.offset)
            value, pos = a["points"]
            pts = _number_list(sc, value, pos, "points")
            if len(pts) % 2:
                raise sc.error("odd number of coordinates in points", BAD_NUMBER, pos)
            if len(pts) != 6:
                raise sc.error(f"polygon must have exactly 3 points, got {len(pts) // 2}",
                               CONSTRAINT_VIOLATION, pos)
            params = Triangle(*pts)
    except ParseError:
        raise
    except ValueError as exc:
        raise sc.error(str(exc), CONSTRAINT_VIOLATION, el.offset) from None

    fill = BLACK
    if "fill" in a:
        fill = _color(sc, *a["fill"])
    transforms: list[Transform] = []
    if "transform" in a:
        transforms = _transform_list(sc, *a["transform"])
    return Shape(params, fill, tuple(transforms))


def _root_size(sc: _Scanner, el: _Element) -> tuple[int, int, Color]:
    a = el.attrs
    width = height = None
    if "width" in a:
        width = _length(sc, *a["width"], "width")
    if "height" in a:
        height = _length(sc, *a["height"], "height")
    if "viewBox" in a:
        value, pos = a["viewBox"]
        vb = _number_list(sc, value, pos, "viewBox")
        if len(vb) != 4:
            raise sc.error("viewBox needs 4 numbers", BAD_NUMBER, pos)
        if vb[0] != 0 or vb[1] != 0:
            raise sc.error("viewBox origin must be 0 0", CONSTRAINT_VIOLATION, pos)
        if width is None:
            width = vb[2]
        if height is None:
            height = vb[3]
        if (width, height) != (vb[2], vb[3]):
            raise sc.error("viewBox size must match width/height", CONSTRAINT_VIOLATION, pos)
    if width is None or height is None:
        raise sc.error("<svg> needs width/height or viewBox", CONSTRAINT_VIOLATION, el.offset)
    for v in (width, height):
        if v <= 0 or v != int(v):
            raise sc.error(f"canvas size {v!r} must be a positive integer",
                           CONSTRAINT_VIOLATION, el.offset)
    background = WHITE
    if "style" in a:
        value, pos = a["style"]
        m = _STYLE_RE.fullmatch(value)
        if not m:
            raise sc.error("only 'background-color' is supported in style",
                           CONSTRAINT_VIOLATION, pos)
        background = _color(sc, m.group(1), pos)
    return int(width), int(height), background


def _check_attrs(sc: _Scanner, el: _Element, lenient: bool) -> None:
    allowed = _ALLOWED_ATTRS[el.name]
    for key in list(el.attrs):
        if key not in allowed:
            if lenient:
                del el.attrs[key]
            else:
                raise sc.error(f"attribute {key!r} not allowed on <{el.name}>",
                               UNKNOWN_ATTRIBUTE, el.attrs[key][1])


def parse_svg(text: str, lenient: bool = False) -> SvgDocument:
    """Parse SVG-subset text into an :class:`SvgDocument`.

    With ``lenient=True`` unknown attributes on known elements are ignored;
    unknown elements are always an error.
    """
    sc = _Scanner(text)
    sc.skip_misc()
    if sc.text.startswith("<?xml", sc.pos):
        end = sc.text.find("?>", sc.pos)
        if end < 0:
            raise sc.error("unterminated XML declaration", MALFORMED_XML)
        sc.pos = end + 2
        sc.skip_misc()
    if sc.text.startswith("<!", sc.pos):
        raise sc.error("DTDs and declarations are not supported", MALFORMED_XML)
    if sc.at_end() or not sc.text.startswith("<", sc.pos):
        raise sc.error("expected <svg> root element", MALFORMED_XML)

    root = _read_start_tag(sc)
    if root.name != "svg":
        raise sc.error(f"unknown element <{root.name}>", UNKNOWN_ELEMENT, root.offset)
    _check_attrs(sc, root, lenient)
    width, height, background = _root_size(sc, root)

    shapes: list[Shape] = []
    if not root.self_closing:
        while True:
            sc.skip_misc()
            if sc.text.startswith("</", sc.pos) or sc.at_end():
                _read_end_tag(sc, "svg")
                break
            if not sc.text.startswith("<", sc.pos):
                raise sc.error("text content is not allowed", MALFORMED_XML)
            el = _read_start_tag(sc)
            if el.name not in ("circle", "rect", "polygon"):
                if el.name == "svg":
                    raise sc.error("nested <svg> is not supported",
                                   CONSTRAINT_VIOLATION, el.offset)
                raise sc.error(f"unknown element <{el.name}>", UNKNOWN_ELEMENT, el.offset)
            _check_attrs(sc, el, lenient)
            if not el.self_closing:
                _read_end_tag(sc, el.name)
            shapes.append(_shape(sc, el))

    sc.skip_misc()
    if not sc.at_end():
        raise sc.error("content after the root element", MALFORMED_XML)
    return SvgDocument(width, height, tuple(shapes), background)


# --------------------------------------------------------------------------
# Serialization


def format_number(x: float, precision: int | None = None) -> str:
    """Shortest positional decimal that reads back as ``x``; never exponent form."""
    x = float(x)
    if precision is not None:
        x = round(x, precision)
    s = np.format_float_positional(x, trim="-")
    return "0" if s == "-0" else s


def format_color(c: Color) -> str:
    return PALETTE_NAMES.get(c) or c.to_hex()


def _format_transforms(ts: tuple[Transform, ...], fmt: Callable[[float], str]) -> str:
    return " ".join(f"{t.name}({','.join(fmt(v) for v in t.params)})" for t in ts)


def serialize_shape(s: Shape, precision: int | None = None) -> str:
    def fmt(v: float) -> str:
        return format_number(v, precision)

    p = s.params
    if isinstance(p, Circle):
        body = f'<circle cx="{fmt(p.cx)}" cy="{fmt(p.cy)}" r="{fmt(p.r)}"'
    elif isinstance(p, Rect):
        body = (f'<rect x="{fmt(p.x)}" y="{fmt(p.y)}" '
                f'width="{fmt(p.width)}" height="{fmt(p.height)}"')
    else:
        pts = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in p.vertices)
        body = f'<polygon points="{pts}"'
    body += f' fill="{format_color(s.fill)}"'
    if s.transforms:
        body += f' transform="{_format_transforms(s.transforms, fmt)}"'
    return body + "/>"


def serialize_svg(doc: SvgDocument, precision: int | None = None) -> str:
    """Emit the canonical text form: one element per line, in paint order."""
    w, h = doc.width, doc.height
    root = f'<svg xmlns="{SVG_NS}" width="{w}" height="{h}" viewBox="0 0 {w} {h}"'
    if doc.background != WHITE:
        root += f' style="background-color:{format_color(doc.background)}"'
    lines = [root + ">"]
    lines.extend(serialize_shape(s, precision) for s in doc.shapes)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
