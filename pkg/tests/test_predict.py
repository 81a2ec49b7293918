import math

import numpy as np
import pytest

from shapevec.core import BLUE, GREEN, RED, Circle, RasterImage, Rect, Shape, ShapeKind, SvgDocument, Triangle
from shapevec.datagen import gen_shape_sample, gen_transform_sample
from shapevec.parser import ParseError, parse_svg, serialize_svg
from shapevec.predict import (
    CellFeatures,
    ExternalPredictor,
    HeuristicPredictor,
    Predictor,
    classify_cell,
    extract_cell_features,
    kind_from_fill_ratio,
    predict_svg,
)
from shapevec.raster import render_oracle
from shapevec.refine import RefineConfig, refine


def test_blank_image():
    img = RasterImage.filled(384, 384)
    feats = extract_cell_features(img)
    assert len(feats) == 9 and all(f.empty for f in feats)
    assert predict_svg(img).shapes == ()


def test_rect_cell_features():
    img = render_oracle(SvgDocument(384, 384, (Shape(Rect(150, 20, 60, 80), RED),)), 4)
    f = extract_cell_features(img)[1]
    assert f.color == RED
    assert abs(f.fill_ratio - 1.0) <= 0.05
    assert f.bbox == (150, 20, 210, 100)
    assert 0 <= f.ink_fraction <= 1


@pytest.mark.parametrize("r", [32.0, 41.7, 50.2, 57.5])
def test_circle_fill_ratio(r):
    img = render_oracle(SvgDocument(384, 384, (Shape(Circle(192.3, 191.6, r), GREEN),)), 4)
    f = extract_cell_features(img)[4]
    assert f.color == GREEN
    assert abs(f.fill_ratio - math.pi / 4) <= 0.05


@pytest.mark.parametrize("ratio,kind", [
    (0.99, ShapeKind.RECTANGLE), (0.92, ShapeKind.RECTANGLE), (0.785, ShapeKind.CIRCLE),
    (0.68, ShapeKind.CIRCLE), (0.88, ShapeKind.CIRCLE), (0.5, ShapeKind.TRIANGLE),
    (0.61, ShapeKind.TRIANGLE), (0.64, ShapeKind.TRIANGLE), (0.66, ShapeKind.CIRCLE),
    (0.89, ShapeKind.CIRCLE), (0.91, ShapeKind.RECTANGLE),
])
def test_fill_ratio_bands(ratio, kind):
    assert kind_from_fill_ratio(ratio) is kind


def test_classify_geometry_from_bbox():
    f = CellFeatures(BLUE, 0.1, 0.5, (10, 20, 50, 60))
    kind, p = classify_cell(f)
    assert kind is ShapeKind.TRIANGLE and p == Triangle(30, 20, 10, 60, 50, 60)
    kind, p = classify_cell(CellFeatures(BLUE, 0.1, 0.78, (10, 20, 50, 60)))
    assert p == Circle(30, 40, 20)
    kind, p = classify_cell(CellFeatures(BLUE, 0.1, 0.97, (10, 20, 50, 60)))
    assert p == Rect(10, 20, 40, 40)
    assert classify_cell(CellFeatures(None, 0.0, 0.0, None)) is None


def test_grid_prediction_matches_ground_truth():
    hits = total = 0
    for seed in range(10):
        gt = gen_shape_sample(seed)
        pred = predict_svg(render_oracle(gt, 4))
        assert len(pred.shapes) == 9
        for a, b in zip(gt.shapes, pred.shapes):
            total += 1
            hits += a.kind is b.kind and a.fill == b.fill
    assert hits / total >= 0.95


def test_deterministic():
    img = render_oracle(gen_shape_sample(2), 4)
    assert predict_svg(img) == predict_svg(img)


def test_noise_image_gives_usable_document():
    rng = np.random.default_rng(0)
    img = RasterImage(rng.random((384, 384, 3)))
    doc = predict_svg(img)
    assert parse_svg(serialize_svg(doc)) == doc
    out, trace = refine(doc, img, RefineConfig(max_iters=3))
    assert len(out.shapes) == len(doc.shapes)


def test_global_mode_for_transformed_shape():
    gt = gen_transform_sample(4)
    img = render_oracle(gt, 4)
    kinds = tuple(t.name for t in gt.shapes[0].transforms)
    doc = HeuristicPredictor(grid=False, transform_kinds=kinds).predict(img)
    (s,) = doc.shapes
    assert tuple(t.name for t in s.transforms) == kinds
    assert all(t.matrix().as_tuple() == (1, 0, 0, 1, 0, 0) for t in s.transforms)
    with pytest.raises(ValueError):
        HeuristicPredictor(transform_kinds=("shear",))


def test_external_predictor(tmp_path):
    path = tmp_path / "pred.svg"
    text = serialize_svg(gen_shape_sample(1))
    path.write_text(text)
    pred = ExternalPredictor(path)
    assert isinstance(pred, Predictor)
    assert predict_svg(RasterImage.filled(384, 384), pred) == parse_svg(text)
    path.write_text(text.replace("<circle", '<circle stroke="red"'))
    assert predict_svg(RasterImage.filled(384, 384), pred) == parse_svg(text)
    path.write_text("<svg><path/></svg>")
    with pytest.raises(ParseError):
        predict_svg(RasterImage.filled(384, 384), pred)
