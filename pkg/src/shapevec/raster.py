"""Soft rasterizer for circles, rectangles and triangles with exact gradients.

Each shape is evaluated in its local (pre-transform) frame: pixel centers are
pulled back through the inverse of the composed transform, the local signed
distance is scaled to canvas units by the smaller singular value of the
transform's linear part, and the distance is turned into opacity with

    coverage(d) = smoothstep(clamp(0.5 - d / (2 * eps), 0, 1))

which is exactly 1 for d <= -eps and exactly 0 for d >= eps.  Shapes are
over-composited in list order onto the background.

:func:`render_with_gradient` returns the refinement loss together with its
gradient w.r.t. every entry of a :class:`ParamVector`, obtained by reverse
accumulation through the compositing chain.  :func:`render_oracle` is an
independent hard-coverage supersampling renderer used as a reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Circle,
    Color,
    InvalidTransformError,
    RasterImage,
    Rect,
    Shape,
    ShapeParams,
    SvgDocument,
    TRANSFORM_TYPES,
    Triangle,
    params_values,
)

_DEG = math.pi / 180.0


class SingularTransformError(InvalidTransformError):
    def __init__(self, shape_index: int, det: float):
        super().__init__(f"shape {shape_index}: transform is not invertible (det={det:g})")
        self.shape_index = shape_index


@dataclass(frozen=True)
class RenderConfig:
    eps: float = 1.0
    supersample: int = 1

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.supersample < 1:
            raise ValueError("supersample must be >= 1")


# --------------------------------------------------------------------------
# Coverage


def coverage(d, eps: float = 1.0):
    """Opacity of a pixel whose center has canvas-space signed distance ``d``."""
    u = np.clip(0.5 - np.asarray(d, dtype=np.float64) / (2.0 * eps), 0.0, 1.0)
    out = u * u * (3.0 - 2.0 * u)
    return float(out) if out.ndim == 0 else out


def coverage_derivative(d, eps: float = 1.0):
    u = np.clip(0.5 - np.asarray(d, dtype=np.float64) / (2.0 * eps), 0.0, 1.0)
    out = -3.0 * u * (1.0 - u) / eps
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Local signed distance functions
#
# Each returns (d, gqx, gqy, [dd/dparam ...]); gradients are only computed
# when ``grad`` is set.


def _sdf_circle(qx, qy, g, grad=False):
    cx, cy, r = g
    dx, dy = qx - cx, qy - cy
    n = np.hypot(dx, dy)
    d = n - r
    if not grad:
        return d, None, None, None
    safe = np.where(n > 0, n, 1.0)
    gx = np.where(n > 0, dx / safe, 0.0)
    gy = np.where(n > 0, dy / safe, 0.0)
    return d, gx, gy, [-gx, -gy, -np.ones_like(d)]


def _sdf_rect(qx, qy, g, grad=False):
    x, y, w, h = g
    hx, hy = 0.5 * w, 0.5 * h
    rx, ry = qx - (x + hx), qy - (y + hy)
    ax, ay = np.abs(rx) - hx, np.abs(ry) - hy
    mx, my = np.maximum(ax, 0.0), np.maximum(ay, 0.0)
    n = np.hypot(mx, my)
    d = n + np.minimum(np.maximum(ax, ay), 0.0)
    if not grad:
        return d, None, None, None
    outside = n > 0
    safe = np.where(outside, n, 1.0)
    inside_x = ax >= ay
    dax = np.where(outside, mx / safe, np.where(inside_x, 1.0, 0.0))
    day = np.where(outside, my / safe, np.where(inside_x, 0.0, 1.0))
    sx = np.where(rx >= 0, 1.0, -1.0)
    sy = np.where(ry >= 0, 1.0, -1.0)
    gx, gy = dax * sx, day * sy
    return d, gx, gy, [-gx, -gy, -0.5 * dax * (sx + 1.0), -0.5 * day * (sy + 1.0)]


def _sdf_triangle(qx, qy, g, grad=False, cutoff=np.inf):
    """Exact triangle SDF.  Outside points whose distance to every edge line
    is at least ``cutoff`` get that (smaller) line distance instead of the
    exact value; callers use it to skip work where coverage is already 0."""
    qx, qy = np.broadcast_arrays(np.asarray(qx, dtype=np.float64), np.asarray(qy, dtype=np.float64))
    vx = (g[0], g[2], g[4])
    vy = (g[1], g[3], g[5])
    area2 = (vx[1] - vx[0]) * (vy[2] - vy[0]) - (vx[2] - vx[0]) * (vy[1] - vy[0])
    orient = 1.0 if area2 > 0 else -1.0
    edges = []
    lines = []
    for i in range(3):
        j = (i + 1) % 3
        ex, ey = vx[j] - vx[i], vy[j] - vy[i]
        el = math.hypot(ex, ey)
        # outward unit normal
        nx, ny = orient * ey / el, -orient * ex / el
        edges.append((i, j, ex, ey, nx, ny))
        lines.append((qx - vx[i]) * nx + (qy - vy[i]) * ny)
    k_line = np.argmax(np.stack(lines), axis=0)
    m = np.maximum(np.maximum(lines[0], lines[1]), lines[2])
    inside = m <= 0
    d = np.array(m, dtype=np.float64)
    near = ~inside & (m < cutoff)
    if near.any():
        sqx, sqy = qx[near], qy[near]
        best = np.full(sqx.shape, np.inf)
        k_seg = np.zeros(sqx.shape, dtype=np.intp)
        t_seg = np.zeros(sqx.shape)
        for idx, (i, j, ex, ey, nx, ny) in enumerate(edges):
            wx, wy = sqx - vx[i], sqy - vy[i]
            t = np.clip((wx * ex + wy * ey) / (ex * ex + ey * ey), 0.0, 1.0)
            dist = np.hypot(wx - t * ex, wy - t * ey)
            closer = dist < best
            best = np.where(closer, dist, best)
            k_seg = np.where(closer, idx, k_seg)
            t_seg = np.where(closer, t, t_seg)
        d[near] = best
    if not grad:
        return d, None, None, None

    # inside and far-outside points: d is the distance to edge line k
    gx = np.zeros_like(d)
    gy = np.zeros_like(d)
    t_all = np.zeros_like(d)
    k_all = np.array(k_line)
    for idx, (i, j, ex, ey, nx, ny) in enumerate(edges):
        sel = k_line == idx
        gx = np.where(sel, nx, gx)
        gy = np.where(sel, ny, gy)
        t_line = ((qx - vx[i]) * ex + (qy - vy[i]) * ey) / (ex * ex + ey * ey)
        t_all = np.where(sel, t_line, t_all)
    if near.any():
        # outside near the boundary: d is the distance to the closest segment point
        sqx, sqy = qx[near], qy[near]
        sgx = np.zeros(sqx.shape)
        sgy = np.zeros(sqx.shape)
        for idx, (i, j, ex, ey, nx, ny) in enumerate(edges):
            sel = k_seg == idx
            dx = sqx - vx[i] - t_seg * ex
            dy = sqy - vy[i] - t_seg * ey
            pos = best > 0
            safe = np.where(pos, best, 1.0)
            sgx = np.where(sel, np.where(pos, dx / safe, nx), sgx)
            sgy = np.where(sel, np.where(pos, dy / safe, ny), sgy)
        gx[near], gy[near] = sgx, sgy
        t_all[near] = t_seg
        k_all[near] = k_seg

    partials = [np.zeros_like(d) for _ in range(6)]
    for idx, (i, j, ex, ey, nx, ny) in enumerate(edges):
        sel = k_all == idx
        wa = np.where(sel, -(1.0 - t_all), 0.0)
        wb = np.where(sel, -t_all, 0.0)
        partials[2 * i] += wa * gx
        partials[2 * i + 1] += wa * gy
        partials[2 * j] += wb * gx
        partials[2 * j + 1] += wb * gy
    return d, gx, gy, partials


_SDF = {"circle": _sdf_circle, "rect": _sdf_rect, "triangle": _sdf_triangle}
_KIND_KEY = {Circle: "circle", Rect: "rect", Triangle: "triangle"}


def sdf(params: ShapeParams, p: tuple[float, float]) -> float:
    """Signed distance from local-space point ``p`` to the untransformed shape."""
    fn = _SDF[_KIND_KEY[type(params)]]
    d, *_ = fn(np.atleast_1d(np.float64(p[0])), np.atleast_1d(np.float64(p[1])),
               params_values(params))
    return float(d[0])


def _local_bounds(key: str, g) -> tuple[float, float, float, float]:
    if key == "circle":
        cx, cy, r = g
        return cx - r, cy - r, cx + r, cy + r
    if key == "rect":
        x, y, w, h = g
        return min(x, x + w), min(y, y + h), max(x, x + w), max(y, y + h)
    xs, ys = g[0::2], g[1::2]
    return min(xs), min(ys), max(xs), max(ys)


# --------------------------------------------------------------------------
# Transform matrices and their parameter derivatives (3x3 homogeneous)


def _transform_mats(name: str, v) -> tuple[np.ndarray, list[np.ndarray]]:
    m = np.eye(3)
    derivs = []
    if name == "translate":
        m[0, 2], m[1, 2] = v
        for idx in ((0, 2), (1, 2)):
            dm = np.zeros((3, 3))
            dm[idx] = 1.0
            derivs.append(dm)
    elif name == "scale":
        m[0, 0], m[1, 1] = v
        for idx in ((0, 0), (1, 1)):
            dm = np.zeros((3, 3))
            dm[idx] = 1.0
            derivs.append(dm)
    elif name == "rotate":
        t = v[0] * _DEG
        c, s = math.cos(t), math.sin(t)
        m[:2, :2] = [[c, -s], [s, c]]
        dm = np.zeros((3, 3))
        dm[:2, :2] = [[-s * _DEG, -c * _DEG], [c * _DEG, -s * _DEG]]
        derivs.append(dm)
    elif name in ("skewX", "skewY"):
        tan = math.tan(v[0] * _DEG)
        idx = (0, 1) if name == "skewX" else (1, 0)
        m[idx] = tan
        dm = np.zeros((3, 3))
        dm[idx] = (1.0 + tan * tan) * _DEG
        derivs.append(dm)
    else:
        raise ValueError(f"unknown transform {name!r}")
    return m, derivs


# --------------------------------------------------------------------------
# Parameter vectors

GEOMETRY, COLOR, TRANSLATE, SCALE, ANGLE = "geometry", "color", "translate", "scale", "angle"
_TRANSFORM_CATEGORY = {"translate": TRANSLATE, "scale": SCALE, "rotate": ANGLE,
                       "skewX": ANGLE, "skewY": ANGLE}


@dataclass(frozen=True)
class _ShapeLayout:
    key: str
    geom: slice
    color: slice
    transforms: tuple[tuple[str, slice], ...]


@dataclass(frozen=True, eq=False)
class ParamVector:
    """All optimizable numbers of a document, flattened.

    Per shape, in paint order: geometry parameters (attribute order of the
    element), fill r, g, b, then each transform's parameters in list order.
    ``index[i]`` names slot ``i`` as ``(shape_index, field)``; ``category[i]``
    is one of geometry / color / translate / scale / angle.
    """

    values: np.ndarray
    index: tuple[tuple[int, str], ...]
    category: tuple[str, ...]
    layout: tuple[_ShapeLayout, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values) -> ParamVector:
        values = np.array(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise ValueError("parameter vector length mismatch")
        return ParamVector(values, self.index, self.category, self.layout)

    def slot(self, shape_index: int, name: str) -> int:
        return self.index.index((shape_index, name))


def flatten(doc: SvgDocument) -> ParamVector:
    values: list[float] = []
    index: list[tuple[int, str]] = []
    category: list[str] = []
    layout = []
    for si, s in enumerate(doc.shapes):
        start = len(values)
        for name in s.params.param_names:
            values.append(float(getattr(s.params, name)))
            index.append((si, name))
            category.append(GEOMETRY)
        geom = slice(start, len(values))
        for ch, v in zip("rgb", s.fill.as_tuple()):
            values.append(float(v))
            index.append((si, f"fill.{ch}"))
            category.append(COLOR)
        color = slice(geom.stop, len(values))
        ts = []
        for ti, t in enumerate(s.transforms):
            start = len(values)
            for name, v in zip(t.param_names, t.params):
                values.append(float(v))
                index.append((si, f"transform[{ti}].{name}"))
                category.append(_TRANSFORM_CATEGORY[t.name])
            ts.append((t.name, slice(start, len(values))))
        layout.append(_ShapeLayout(_KIND_KEY[type(s.params)], geom, color, tuple(ts)))
    return ParamVector(np.array(values, dtype=np.float64), tuple(index), tuple(category),
                       tuple(layout))


def unflatten(doc: SvgDocument, pv: ParamVector) -> SvgDocument:
    """Write the numbers of ``pv`` back into a copy of ``doc``'s structure."""
    v = pv.values
    shapes = []
    for s, lay in zip(doc.shapes, pv.layout):
        params = type(s.params)(*(float(x) for x in v[lay.geom]))
        fill = Color(*(float(x) for x in v[lay.color]))
        ts = tuple(TRANSFORM_TYPES[name](*(float(x) for x in v[sl])) for name, sl in lay.transforms)
        shapes.append(Shape(params, fill, ts))
    return SvgDocument(doc.width, doc.height, tuple(shapes), doc.background)


# --------------------------------------------------------------------------
# Per-shape evaluation


class _Layer:
    """One shape evaluated over the pixel region where it can be visible."""

    def __init__(self, index: int, lay: _ShapeLayout, values: np.ndarray, eps: float,
                 width: int, height: int, hard: bool = False):
        self.index = index
        self.lay = lay
        self.geom = tuple(float(x) for x in values[lay.geom])
        self.fill = values[lay.color].copy()
        self.eps = eps

        mats, dmats = [], []
        for name, sl in lay.transforms:
            m, dm = _transform_mats(name, values[sl])
            mats.append(m)
            dmats.append(dm)
        self.mats, self.dmats = mats, dmats
        m = np.eye(3)
        for t in mats:
            m = m @ t
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if not abs(det) >= 1e-12:
            raise SingularTransformError(index, det)
        self.m = m
        self.minv = np.linalg.inv(m)
        if mats:
            u, s, vt = np.linalg.svd(m[:2, :2])
            self.sigma = float(s[1])
            self._u2, self._v2 = u[:, 1], vt[1, :]
        else:
            self.sigma = 1.0

        # canvas pixel region whose centers (or sample points) can be covered
        margin = 0.0 if hard else eps / self.sigma
        x0, y0, x1, y1 = _local_bounds(lay.key, self.geom)
        corners = np.array([[x0 - margin, x1 + margin, x0 - margin, x1 + margin],
                            [y0 - margin, y0 - margin, y1 + margin, y1 + margin],
                            [1.0, 1.0, 1.0, 1.0]])
        cc = m @ corners
        bx0, bx1 = cc[0].min(), cc[0].max()
        by0, by1 = cc[1].min(), cc[1].max()
        if hard:
            i0, i1 = math.floor(bx0), math.ceil(bx1) - 1
            j0, j1 = math.floor(by0), math.ceil(by1) - 1
        else:
            i0, i1 = math.ceil(bx0 - 0.5), math.floor(bx1 - 0.5)
            j0, j1 = math.ceil(by0 - 0.5), math.floor(by1 - 0.5)
        i0, i1 = max(i0, 0), min(i1, width - 1)
        j0, j1 = max(j0, 0), min(j1, height - 1)
        self.empty = i0 > i1 or j0 > j1
        self.xs = slice(i0, i1 + 1)
        self.ys = slice(j0, j1 + 1)

    def local_coords(self, px, py):
        mi = self.minv
        return mi[0, 0] * px + mi[0, 1] * py + mi[0, 2], mi[1, 0] * px + mi[1, 1] * py + mi[1, 2]

    def _center_sdf(self, cutoff: float):
        px = np.arange(self.xs.start, self.xs.stop, dtype=np.float64)[None, :] + 0.5
        py = np.arange(self.ys.start, self.ys.stop, dtype=np.float64)[:, None] + 0.5
        qx, qy = self.local_coords(px, py)
        qx, qy = np.broadcast_arrays(qx, qy)
        if self.lay.key == "triangle":
            d_loc, *_ = _sdf_triangle(qx, qy, self.geom, cutoff=cutoff)
        else:
            d_loc, *_ = _SDF[self.lay.key](qx, qy, self.geom)
        return d_loc

    def soft_alpha(self):
        self.d = self._center_sdf(self.eps / self.sigma) * self.sigma
        self.alpha = coverage(self.d, self.eps)
        return self.alpha

    def hard_alpha(self, ss: int):
        # The local SDF is 1-Lipschitz and a pixel's samples lie within
        # sqrt(2)/2 canvas units of its center, i.e. within sqrt(2)/(2*sigma)
        # local units: only pixels closer than that to the boundary need
        # supersampling, all others are uniformly inside or outside.
        reach = 0.75 / self.sigma
        d_c = self._center_sdf(reach)
        alpha = (d_c < 0).astype(np.float64)
        jj, ii = np.nonzero(np.abs(d_c) < reach)
        if len(jj) and ss > 1:
            offs = (np.arange(ss, dtype=np.float64) + 0.5) / ss
            ox = np.tile(offs, ss)
            oy = np.repeat(offs, ss)
            chunk = max(1, (1 << 20) // (ss * ss))
            for c0 in range(0, len(jj), chunk):
                cj, ci = jj[c0:c0 + chunk], ii[c0:c0 + chunk]
                sx = (ci + self.xs.start)[:, None] + ox[None, :]
                sy = (cj + self.ys.start)[:, None] + oy[None, :]
                qx, qy = self.local_coords(sx, sy)
                d_loc, *_ = _SDF[self.lay.key](qx, qy, self.geom)
                alpha[cj, ci] = (d_loc < 0).mean(axis=1)
        elif len(jj):
            px = ii + self.xs.start + 0.5
            py = jj + self.ys.start + 0.5
            qx, qy = self.local_coords(px, py)
            d_loc, *_ = _SDF[self.lay.key](qx, qy, self.geom)
            alpha[jj, ii] = (d_loc < 0).astype(np.float64)
        self.alpha = alpha
        return alpha

    def backward(self, g_alpha: np.ndarray, grad: np.ndarray) -> None:
        """Accumulate dL/dparams into ``grad`` given dL/dalpha on the region."""
        band = (self.d > -self.eps) & (self.d < self.eps)
        if not band.any():
            return
        jj, ii = np.nonzero(band)
        px = ii.astype(np.float64) + (self.xs.start + 0.5)
        py = jj.astype(np.float64) + (self.ys.start + 0.5)
        g_d = g_alpha[band] * coverage_derivative(self.d[band], self.eps)
        qx, qy = self.local_coords(px, py)
        d_loc, gqx, gqy, partials = _SDF[self.lay.key](qx, qy, self.geom, grad=True)

        w = g_d * self.sigma
        gs = self.lay.geom
        for k, part in enumerate(partials):
            grad[gs.start + k] += np.dot(w, part)
        if not self.mats:
            return

        # q = M^-1 p, so dq/dtheta = -M^-1 (dM/dtheta) M^-1 p
        wx, wy = w * gqx, w * gqy
        sx = np.array([np.dot(wx, px), np.dot(wx, py), wx.sum()])
        sy = np.array([np.dot(wy, px), np.dot(wy, py), wy.sum()])
        sd = np.dot(g_d, d_loc)
        prefix = [np.eye(3)]
        for t in self.mats:
            prefix.append(prefix[-1] @ t)
        suffix = [np.eye(3)]
        for t in reversed(self.mats):
            suffix.append(t @ suffix[-1])
        suffix = suffix[::-1]
        for ti, (name, sl) in enumerate(self.lay.transforms):
            for k, dm_local in enumerate(self.dmats[ti]):
                dm = prefix[ti] @ dm_local @ suffix[ti + 1]
                kmat = self.minv @ dm @ self.minv
                # d(sigma_min) = u_min^T dL v_min
                dsigma = float(self._u2 @ dm[:2, :2] @ self._v2)
                grad[sl.start + k] += -(kmat[0] @ sx + kmat[1] @ sy) + dsigma * sd


def _layers(doc: SvgDocument, pv: ParamVector, eps: float, hard: bool = False) -> list[_Layer]:
    return [_Layer(i, lay, pv.values, eps, doc.width, doc.height, hard)
            for i, lay in enumerate(pv.layout)]


def _composite(doc: SvgDocument, layers: list[_Layer]) -> np.ndarray:
    out = np.empty((doc.height, doc.width, 3))
    out[:] = doc.background.as_tuple()
    for layer in layers:
        if layer.empty:
            continue
        region = out[layer.ys, layer.xs]
        a = layer.alpha[..., None]
        region *= 1.0 - a
        region += a * layer.fill
    return out


def _clusters(layers: list[_Layer]) -> list[tuple[slice, slice, list[int]]]:
    """Group layers into disjoint pixel boxes (overlapping regions merged)."""
    boxes = [[l.ys.start, l.ys.stop, l.xs.start, l.xs.stop, [l.index]]
             for l in layers if not l.empty]
    merged = True
    while merged:
        merged = False
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                a, b = boxes[i], boxes[j]
                if a[0] < b[1] and b[0] < a[1] and a[2] < b[3] and b[2] < a[3]:
                    boxes[i] = [min(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]),
                                max(a[3], b[3]), sorted(a[4] + b[4])]
                    del boxes[j]
                    merged = True
                    break
            if merged:
                break
    boxes.sort(key=lambda b: b[4][0])
    return [(slice(b[0], b[1]), slice(b[2], b[3]), b[4]) for b in boxes]


# --------------------------------------------------------------------------
# Public entry points


def render(doc: SvgDocument, cfg: RenderConfig | None = None) -> RasterImage:
    """Soft, differentiable-path render of ``doc`` (pixel centers at +0.5)."""
    cfg = cfg or RenderConfig()
    layers = _layers(doc, flatten(doc), cfg.eps)
    for layer in layers:
        if not layer.empty:
            layer.soft_alpha()
    return RasterImage(np.clip(_composite(doc, layers), 0.0, 1.0))


def render_oracle(doc: SvgDocument, supersample: int = 16) -> RasterImage:
    """Hard-coverage reference render: inside iff local SDF < 0, box-averaged
    over ``supersample**2`` samples per pixel, then over-composited."""
    if supersample < 1:
        raise ValueError("supersample must be >= 1")
    layers = [l for l in _layers(doc, flatten(doc), 1.0, hard=True) if not l.empty]
    partial = np.zeros((doc.height, doc.width), dtype=np.int32)
    for layer in layers:
        a = layer.hard_alpha(supersample)
        partial[layer.ys, layer.xs] += (a > 0.0) & (a < 1.0)
    out = _composite(doc, layers)
    # Averaging each shape's coverage before compositing is exact unless two
    # shapes are both partial in one pixel; composite those per sample.
    jj, ii = np.nonzero(partial >= 2)
    if len(jj):
        out[jj, ii] = _sample_composite(doc, layers, jj, ii, supersample)
    return RasterImage(np.clip(out, 0.0, 1.0))


def _sample_composite(doc: SvgDocument, layers: list[_Layer], jj, ii, ss: int) -> np.ndarray:
    offs = (np.arange(ss, dtype=np.float64) + 0.5) / ss
    ox, oy = np.tile(offs, ss), np.repeat(offs, ss)
    result = np.empty((len(jj), 3))
    chunk = max(1, (1 << 18) // (ss * ss))
    for c0 in range(0, len(jj), chunk):
        cj, ci = jj[c0:c0 + chunk], ii[c0:c0 + chunk]
        sx = ci[:, None] + ox[None, :]
        sy = cj[:, None] + oy[None, :]
        col = np.empty(sx.shape + (3,))
        col[:] = doc.background.as_tuple()
        for layer in layers:
            sel = ((ci >= layer.xs.start) & (ci < layer.xs.stop)
                   & (cj >= layer.ys.start) & (cj < layer.ys.stop))
            if not sel.any():
                continue
            qx, qy = layer.local_coords(sx[sel], sy[sel])
            d_loc, *_ = _SDF[layer.lay.key](qx, qy, layer.geom)
            sub = col[sel]
            sub[d_loc < 0] = layer.fill
            col[sel] = sub
        result[c0:c0 + chunk] = col.mean(axis=1)
    return result


def residual_loss(target: np.ndarray, rendered: np.ndarray, alpha: float, beta: float):
    """Return (loss, mean-abs, rms) of ``target - rendered``."""
    r = target - rendered
    n = r.size
    l1 = float(np.abs(r).sum() / n)
    l2 = math.sqrt(float(np.square(r).sum() / n))
    return alpha * l1 + beta * l2, l1, l2


class Objective:
    """Refinement loss for one (document structure, target) pair.

    Residual sums for the bare background are precomputed, so each
    evaluation only touches the pixel boxes that shapes can reach.
    """

    def __init__(self, doc: SvgDocument, target: RasterImage, alpha: float = 1.0,
                 beta: float = 1.0, cfg: RenderConfig | None = None):
        if (target.width, target.height) != (doc.width, doc.height):
            raise ValueError(f"target is {target.width}x{target.height}, "
                             f"document canvas is {doc.width}x{doc.height}")
        self.doc = doc
        self.cfg = cfg or RenderConfig()
        self.alpha, self.beta = float(alpha), float(beta)
        self.target = target.pixels
        self.bg = np.array(doc.background.as_tuple())
        r0 = self.target - self.bg
        self.abs0 = np.abs(r0).sum(axis=2)
        self.sq0 = np.square(r0).sum(axis=2)
        self.abs0_total = float(self.abs0.sum())
        self.sq0_total = float(self.sq0.sum())
        self.n = self.target.size

    def __call__(self, pv: ParamVector, grad: bool = True):
        """Return ``(loss, mean_abs, rms, gradient or None)``."""
        if len(pv.layout) != len(self.doc.shapes):
            raise ValueError("parameter vector does not match the document structure")
        layers = _layers(self.doc, pv, self.cfg.eps)
        for layer in layers:
            if not layer.empty:
                layer.soft_alpha()
        boxes = _clusters(layers)

        abs_sum, sq_sum = self.abs0_total, self.sq0_total
        residuals, saved = [], {}
        for ys, xs, members in boxes:
            out = np.empty((ys.stop - ys.start, xs.stop - xs.start, 3))
            out[:] = self.bg
            for k in members:
                layer = layers[k]
                sub = out[layer.ys.start - ys.start:layer.ys.stop - ys.start,
                          layer.xs.start - xs.start:layer.xs.stop - xs.start]
                if grad:
                    saved[k] = sub.copy()
                a = layer.alpha[..., None]
                sub *= 1.0 - a
                sub += a * layer.fill
            r = self.target[ys, xs] - out
            abs_sum += float(np.abs(r).sum()) - float(self.abs0[ys, xs].sum())
            sq_sum += float(np.square(r).sum()) - float(self.sq0[ys, xs].sum())
            residuals.append(r)

        l1 = max(abs_sum, 0.0) / self.n
        l2 = math.sqrt(max(sq_sum, 0.0) / self.n)
        loss = self.alpha * l1 + self.beta * l2
        if not grad:
            return loss, l1, l2, None

        g = np.zeros(len(pv.values))
        for (ys, xs, members), r in zip(boxes, residuals):
            g_out = np.sign(r) * (-self.alpha / self.n)
            if l2 > 0 and self.beta != 0:
                g_out -= r * (self.beta / (self.n * l2))
            for k in reversed(members):
                layer = layers[k]
                g_reg = g_out[layer.ys.start - ys.start:layer.ys.stop - ys.start,
                              layer.xs.start - xs.start:layer.xs.stop - xs.start]
                a = layer.alpha
                g_alpha = np.einsum("hwc,hwc->hw", g_reg, layer.fill - saved[k])
                g[layer.lay.color] += np.einsum("hwc,hw->c", g_reg, a)
                g_reg *= (1.0 - a)[..., None]
                layer.backward(g_alpha, g)
        return loss, l1, l2, g


def render_with_gradient(pv: ParamVector, doc: SvgDocument, target: RasterImage,
                         alpha: float = 1.0, beta: float = 1.0,
                         cfg: RenderConfig | None = None) -> tuple[float, np.ndarray]:
    """Loss ``alpha*mean|x - x~| + beta*rms(x - x~)`` and its exact gradient.

    ``doc`` supplies structure (kinds, transform kinds, canvas, background);
    all numbers come from ``pv``.
    """
    loss, _, _, g = Objective(doc, target, alpha, beta, cfg)(pv)
    return loss, g


def loss_at(pv: ParamVector, doc: SvgDocument, target: RasterImage,
            alpha: float = 1.0, beta: float = 1.0, cfg: RenderConfig | None = None) -> float:
    """Loss only, from a full-canvas composite (no gradient bookkeeping)."""
    cfg = cfg or RenderConfig()
    layers = _layers(doc, pv, cfg.eps)
    for layer in layers:
        if not layer.empty:
            layer.soft_alpha()
    return residual_loss(target.pixels, _composite(doc, layers), alpha, beta)[0]
