"""Synthetic datasets: grid scenes of primitives, single transformed shapes,
and yes/no questions about them.

Every generator is a pure function of ``(seed, config)``.  Dataset-level
seeds are expanded into per-sample seeds with :class:`numpy.random.SeedSequence`
so samples can be produced in any order or in parallel.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .core import (
    NAMED_COLORS,
    PALETTE,
    PALETTE_NAMES,
    Circle,
    Color,
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
    canvas_bounds,
    compose_transforms,
    shape_centroid,
)
from .io import atomic_write_text, write_png
from .parser import serialize_svg
from .raster import render_oracle

log = logging.getLogger(__name__)

KINDS = (ShapeKind.CIRCLE, ShapeKind.RECTANGLE, ShapeKind.TRIANGLE)
TRANSFORM_KINDS = (Translate, Scale, Rotate, SkewX, SkewY)


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ShapeGenConfig:
    """Grid-scene layout.  ``size_range`` is the shape half-extent as a
    fraction of the cell extent; ``jitter`` bounds the center offset, also as
    a fraction of the cell extent."""

    rows: int = 3
    cols: int = 3
    canvas: int = 384
    palette: tuple[Color, ...] = PALETTE
    size_range: tuple[float, float] = (0.25, 0.45)
    jitter: float = 0.10
    margin: float = 1.0
    decimals: int = 3

    def __post_init__(self):
        lo, hi = self.size_range
        if not (0 < lo <= hi <= 0.5):
            raise ValueError("size_range must lie within (0, 0.5]")


@dataclass(frozen=True)
class TransformGenConfig:
    """Single-shape scenes.  ``size_range`` is the untransformed shape extent
    as a fraction of the canvas."""

    canvas: int = 384
    palette: tuple[Color, ...] = PALETTE
    size_range: tuple[float, float] = (0.15, 0.35)
    count_range: tuple[int, int] = (1, 3)
    translate: float = 96.0
    scale_range: tuple[float, float] = (0.5, 1.5)
    rotate_range: tuple[float, float] = (0.0, 360.0)
    skew_range: tuple[float, float] = (-30.0, 30.0)
    decimals: int = 3
    max_retries: int = 100

    def __post_init__(self):
        lo, hi = self.scale_range
        if lo <= 0 < hi or lo < 0 <= hi:
            raise ValueError("scale range must exclude 0")
        if max(abs(v) for v in self.skew_range) >= 90:
            raise ValueError("skew range must stay within (-90, 90)")
        if not (1 <= self.count_range[0] <= self.count_range[1] <= len(TRANSFORM_KINDS)):
            raise ValueError("count_range must lie within [1, 5]")


def sample_seed(seed: int, index: int) -> int:
    """Per-sample seed derived from the dataset seed and sample index."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _canonical_shape(kind: ShapeKind, cx: float, cy: float, half: float, decimals: int):
    q = lambda v: round(float(v), decimals)  # noqa: E731
    if kind is ShapeKind.CIRCLE:
        return Circle(q(cx), q(cy), q(half))
    if kind is ShapeKind.RECTANGLE:
        return Rect(q(cx - half), q(cy - half), q(2 * half), q(2 * half))
    # vertex-up isosceles triangle inscribed in the square of side 2*half
    return Triangle(q(cx), q(cy - half), q(cx - half), q(cy + half), q(cx + half), q(cy + half))


def gen_shape_sample(seed: int, cfg: ShapeGenConfig = ShapeGenConfig()) -> SvgDocument:
    """One grid scene: a random primitive per cell, in row-major order."""
    rng = np.random.default_rng(seed)
    cw = cfg.canvas / cfg.cols
    ch = cfg.canvas / cfg.rows
    cell = min(cw, ch)
    shapes = []
    for row in range(cfg.rows):
        for col in range(cfg.cols):
            kind = KINDS[rng.integers(len(KINDS))]
            color = cfg.palette[rng.integers(len(cfg.palette))]
            half = round(rng.uniform(*cfg.size_range) * cell, cfg.decimals)
            slack_x = cw / 2 - half - cfg.margin
            slack_y = ch / 2 - half - cfg.margin
            jx = rng.uniform(-1.0, 1.0) * max(0.0, min(cfg.jitter * cw, slack_x))
            jy = rng.uniform(-1.0, 1.0) * max(0.0, min(cfg.jitter * ch, slack_y))
            cx = round((col + 0.5) * cw + jx, cfg.decimals)
            cy = round((row + 0.5) * ch + jy, cfg.decimals)
            shapes.append(Shape(_canonical_shape(kind, cx, cy, half, cfg.decimals), color))
    return SvgDocument(cfg.canvas, cfg.canvas, tuple(shapes))


def _sample_transform(rng: np.random.Generator, cls, cfg: TransformGenConfig):
    q = lambda v: round(float(v), cfg.decimals)  # noqa: E731
    if cls is Translate:
        return Translate(q(rng.uniform(-cfg.translate, cfg.translate)),
                         q(rng.uniform(-cfg.translate, cfg.translate)))
    if cls is Scale:
        return Scale(q(rng.uniform(*cfg.scale_range)), q(rng.uniform(*cfg.scale_range)))
    if cls is Rotate:
        return Rotate(q(rng.uniform(*cfg.rotate_range)))
    return cls(q(rng.uniform(*cfg.skew_range)))


def gen_transform_sample(seed: int, cfg: TransformGenConfig = TransformGenConfig()) -> SvgDocument:
    """One shape with a random list of 1-3 distinct transform kinds.

    The local geometry is placed so that, ignoring translation, the composed
    transform maps its center to the canvas center; a sampled ``translate``
    then displaces it.  Samples whose bounding box misses the canvas are
    redrawn.
    """
    rng = np.random.default_rng(seed)
    size = cfg.canvas
    for _ in range(cfg.max_retries):
        kind = KINDS[rng.integers(len(KINDS))]
        color = cfg.palette[rng.integers(len(cfg.palette))]
        half = rng.uniform(*cfg.size_range) * size / 2
        n = int(rng.integers(cfg.count_range[0], cfg.count_range[1] + 1))
        picks = rng.choice(len(TRANSFORM_KINDS), size=n, replace=False)
        transforms = tuple(_sample_transform(rng, TRANSFORM_KINDS[i], cfg) for i in picks)
        m = compose_transforms(transforms)
        lin = np.array([[m.a, m.c], [m.b, m.d]])
        cx, cy = np.linalg.solve(lin, [size / 2, size / 2])
        shape = Shape(_canonical_shape(kind, cx, cy, half, cfg.decimals), color, transforms)
        x0, y0, x1, y1 = canvas_bounds(shape)
        if x1 > 0 and y1 > 0 and x0 < size and y0 < size:
            return SvgDocument(size, size, (shape,))
    raise GenerationError(f"seed {seed}: no visible sample after {cfg.max_retries} draws")


# --------------------------------------------------------------------------
# Visual question answering

RELATIONS = ("above", "below", "left-of", "right-of")
_RELATION_TEXT = {"above": "above", "below": "below",
                  "left-of": "to the left of", "right-of": "to the right of"}
_KIND_NAMES = {ShapeKind.CIRCLE: "circle", ShapeKind.RECTANGLE: "rectangle",
               ShapeKind.TRIANGLE: "triangle"}
_KIND_BY_NAME = {v: k for k, v in _KIND_NAMES.items()}
EXISTENCE = "existence"
RELATIVE = "relative-position"
DEAD_ZONE = 1.0


@dataclass(frozen=True)
class ExistenceQuery:
    color: str
    kind: str

    def text(self) -> str:
        return f"Is there a {self.color} {self.kind}?"


@dataclass(frozen=True)
class RelativeQuery:
    color1: str
    kind1: str
    relation: str
    color2: str

    def text(self) -> str:
        return (f"Is there a {self.color1} {self.kind1} positioned "
                f"{_RELATION_TEXT[self.relation]} a {self.color2} shape?")


Query = ExistenceQuery | RelativeQuery


@dataclass(frozen=True)
class QaPair:
    question: str
    answer: str
    kind: str
    query: Query

    def to_json(self) -> dict:
        return {"question": self.question, "answer": self.answer, "kind": self.kind,
                "query": asdict(self.query)}

    @classmethod
    def from_json(cls, obj: dict) -> QaPair:
        q = obj["query"]
        query = RelativeQuery(**q) if obj["kind"] == RELATIVE else ExistenceQuery(**q)
        return cls(obj["question"], obj["answer"], obj["kind"], query)


def query_from_json(kind: str, obj: dict) -> Query:
    return RelativeQuery(**obj) if kind == RELATIVE else ExistenceQuery(**obj)


def _matches(shape: Shape, color: str, kind: str | None = None) -> bool:
    if shape.fill != NAMED_COLORS[color]:
        return False
    return kind is None or shape.kind is _KIND_BY_NAME[kind]


def _validate(query: Query) -> None:
    colors = [query.color] if isinstance(query, ExistenceQuery) else [query.color1, query.color2]
    kinds = [query.kind] if isinstance(query, ExistenceQuery) else [query.kind1]
    if isinstance(query, RelativeQuery) and query.relation not in RELATIONS:
        raise ValueError(f"unknown relation {query.relation!r}")
    for c in colors:
        if c not in NAMED_COLORS:
            raise ValueError(f"unknown color {c!r}")
    for k in kinds:
        if k not in _KIND_BY_NAME:
            raise ValueError(f"unknown shape kind {k!r}")


def answer_question(doc: SvgDocument, query: Query) -> str:
    """Ground-truth ``"yes"``/``"no"`` for a query against a document."""
    if not isinstance(query, (ExistenceQuery, RelativeQuery)):
        raise ValueError(f"malformed query {query!r}")
    _validate(query)
    if isinstance(query, ExistenceQuery):
        hit = any(_matches(s, query.color, query.kind) for s in doc.shapes)
        return "yes" if hit else "no"

    cents = [shape_centroid(s) for s in doc.shapes]
    for i, a in enumerate(doc.shapes):
        if not _matches(a, query.color1, query.kind1):
            continue
        ax, ay = cents[i]
        for j, b in enumerate(doc.shapes):
            if j == i or not _matches(b, query.color2):
                continue
            bx, by = cents[j]
            gap = {"above": by - ay, "below": ay - by,
                   "left-of": bx - ax, "right-of": ax - bx}[query.relation]
            if gap > DEAD_ZONE:
                return "yes"
    return "no"


def _palette_names(palette: tuple[Color, ...]) -> list[str]:
    return [PALETTE_NAMES[c] for c in palette]


def existence_queries(palette: tuple[Color, ...] = PALETTE) -> list[ExistenceQuery]:
    return [ExistenceQuery(c, k) for c in _palette_names(palette) for k in _KIND_NAMES.values()]


def relative_queries(palette: tuple[Color, ...] = PALETTE) -> list[RelativeQuery]:
    names = _palette_names(palette)
    return [RelativeQuery(c1, k, rel, c2) for c1 in names for k in _KIND_NAMES.values()
            for rel in RELATIONS for c2 in names]


class VqaBatch(NamedTuple):
    pairs: list[QaPair]
    balanced: bool


def _draw(rng: np.random.Generator, pool: list, n: int) -> list:
    if n <= 0 or not pool:
        return []
    idx = rng.choice(len(pool), size=n, replace=n > len(pool))
    return [pool[i] for i in idx]


def gen_vqa(doc: SvgDocument, seed: int, count: int,
            palette: tuple[Color, ...] = PALETTE) -> VqaBatch:
    """``count`` existence and ``count`` relative-position questions with
    yes/no balanced per kind whenever the document allows it."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    pairs: list[QaPair] = []
    balanced = True
    for kind, pool in ((EXISTENCE, existence_queries(palette)),
                       (RELATIVE, relative_queries(palette))):
        answers = [answer_question(doc, q) for q in pool]
        yes = [q for q, a in zip(pool, answers) if a == "yes"]
        no = [q for q, a in zip(pool, answers) if a == "no"]
        n_yes = count // 2 + (int(rng.integers(2)) if count % 2 else 0)
        if not yes or not no:
            balanced = False
            n_yes = count if yes else 0
        chosen = _draw(rng, yes, n_yes) + _draw(rng, no, count - n_yes)
        order = rng.permutation(len(chosen))
        for i in order:
            q = chosen[i]
            ans = answer_question(doc, q)
            pairs.append(QaPair(q.text(), ans, kind, q))
    if not balanced:
        log.warning("could not balance yes/no answers for this document")
    return VqaBatch(pairs, balanced)


def vqa_jsonl(batch: VqaBatch) -> str:
    lines = []
    for p in batch.pairs:
        obj = p.to_json()
        if not batch.balanced:
            obj["warning"] = "unbalanced"
        lines.append(json.dumps(obj, sort_keys=True))
    return "".join(line + "\n" for line in lines)


# --------------------------------------------------------------------------
# Dataset driver

PAPER_SCALE = {"shape": 50_000, "transform": 500_000}
DESK_SCALE = {"shape": 1_000, "transform": 1_000}
PNG_SUPERSAMPLE = 4


@dataclass(frozen=True)
class _Job:
    index: int
    seed: int
    kind: str
    out: str
    vqa_count: int
    shape_cfg: ShapeGenConfig = field(default_factory=ShapeGenConfig)
    transform_cfg: TransformGenConfig = field(default_factory=TransformGenConfig)


def generate_sample(kind: str, seed: int, shape_cfg: ShapeGenConfig = ShapeGenConfig(),
                    transform_cfg: TransformGenConfig = TransformGenConfig()) -> SvgDocument:
    if kind == "shape":
        return gen_shape_sample(seed, shape_cfg)
    if kind == "transform":
        return gen_transform_sample(seed, transform_cfg)
    raise ValueError(f"unknown dataset kind {kind!r}")


def _run_job(job: _Job) -> dict:
    doc = generate_sample(job.kind, job.seed, job.shape_cfg, job.transform_cfg)
    name = f"{job.index:06d}"
    out = Path(job.out)
    atomic_write_text(out / "svg" / f"{name}.svg", serialize_svg(doc))
    write_png(out / "png" / f"{name}.png", render_oracle(doc, PNG_SUPERSAMPLE))
    entry = {"index": job.index, "seed": job.seed,
             "svg": f"svg/{name}.svg", "png": f"png/{name}.png"}
    if job.vqa_count > 0:
        batch = gen_vqa(doc, job.seed, job.vqa_count, _palette_of(job))
        atomic_write_text(out / "vqa" / f"{name}.jsonl", vqa_jsonl(batch))
        entry["vqa"] = f"vqa/{name}.jsonl"
        entry["vqa_balanced"] = batch.balanced
    return entry


def _palette_of(job: _Job) -> tuple[Color, ...]:
    return job.shape_cfg.palette if job.kind == "shape" else job.transform_cfg.palette


def _cfg_json(cfg) -> dict:
    d = asdict(cfg)
    d["palette"] = [PALETTE_NAMES.get(c) or c.to_hex() for c in cfg.palette]
    return d


def gen_dataset(n: int, seed: int, kind: str, out: str | os.PathLike, *,
                vqa_count: int = 0, workers: int = 1,
                shape_cfg: ShapeGenConfig = ShapeGenConfig(),
                transform_cfg: TransformGenConfig = TransformGenConfig()) -> dict:
    """Write ``n`` svg/png pairs (and optional VQA files) plus ``manifest.json``.

    Output bytes depend only on the arguments, never on ``workers``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind not in ("shape", "transform"):
        raise ValueError(f"unknown dataset kind {kind!r}")
    jobs = [_Job(i, sample_seed(seed, i), kind, str(out), vqa_count, shape_cfg, transform_cfg)
            for i in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_run_job, jobs, chunksize=max(1, n // (4 * workers))))
    else:
        entries = [_run_job(j) for j in jobs]
    cfg = shape_cfg if kind == "shape" else transform_cfg
    manifest = {
        "kind": kind,
        "n": n,
        "seed": seed,
        "png_supersample": PNG_SUPERSAMPLE,
        "vqa_count": vqa_count,
        "config": _cfg_json(cfg),
        "samples": entries,
    }
    atomic_write_text(Path(out) / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return manifest
