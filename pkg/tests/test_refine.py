import importlib
import math

import numpy as np
import pytest

from shapevec.core import BLUE, RED, Circle, RasterImage, Rect, Rotate, Scale, Shape, SkewX, SvgDocument, Translate
from shapevec.datagen import gen_shape_sample
from shapevec.raster import SingularTransformError, flatten, render, render_oracle
from shapevec.refine import BUDGET, CONVERGED, DIVERGED, RefineConfig, loss, refine
from gradcheck import perturbed_shape_config

refine_mod = importlib.import_module("shapevec.refine")


def _structure(doc):
    return [(type(s.params), len(s.transforms), tuple(t.name for t in s.transforms)) for s in doc.shapes]


def test_loss_examples():
    a = np.zeros((2, 2, 3))
    b = a.copy()
    b[0, 1, 2] = 0.5
    ia, ib = RasterImage(a), RasterImage(b)
    assert loss(ia, ia, 0.7, 0.3) == 0
    assert loss(ia, ib, 1, 0) == pytest.approx(0.5 / 12, rel=1e-15)
    assert loss(ia, ib, 0, 1) == pytest.approx(math.sqrt(0.25 / 12), rel=1e-15)
    assert loss(ia, ib, 1, 1) == pytest.approx(0.5 / 12 + math.sqrt(0.25 / 12))


def test_loss_size_mismatch():
    with pytest.raises(ValueError):
        loss(RasterImage.filled(2, 2), RasterImage.filled(3, 2))


@pytest.mark.parametrize("kw", [dict(alpha=-1), dict(alpha=0, beta=0), dict(max_iters=-1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        RefineConfig(**kw)


def test_zero_iterations_returns_input():
    doc, target = perturbed_shape_config(1)
    out, trace = refine(doc, target, RefineConfig(max_iters=0))
    assert out is doc
    assert trace.iterations == 0 and len(trace.losses) == 1 and trace.reason == BUDGET


def test_ground_truth_is_fixed_point():
    gt = gen_shape_sample(3)
    target = render(gt)
    out, trace = refine(gt, target, RefineConfig(max_iters=50))
    assert loss(target, render(out)) == loss(target, render(gt))
    assert trace.losses[0] == pytest.approx(0, abs=1e-12)
    moved = np.abs(flatten(out).values - flatten(gt).values).max()
    assert moved <= 1e-3


def test_refinement_improves_and_preserves_structure():
    doc, target = perturbed_shape_config(6)
    cfg = RefineConfig(max_iters=60)
    out, trace = refine(doc, target, cfg)
    assert _structure(out) == _structure(doc)
    assert len(trace.losses) == trace.iterations + 1
    final = loss(target, render(out))
    assert final <= trace.losses[0]
    assert final == pytest.approx(min(trace.losses), rel=1e-9)
    assert final < 0.5 * trace.losses[0]


def test_bounds_hold_exactly():
    # target wants a tiny, saturated-red circle: size and color bounds bind
    target = render(SvgDocument(32, 32, (Shape(Circle(16, 16, 0.3), RED),)))
    doc = SvgDocument(32, 32, (Shape(Circle(16, 16, 3), RED.__class__(0.9, 0.05, 0.05)),
                               Shape(Rect(40, 40, 2, 2), BLUE, (SkewX(88.5), Scale(0.002, 1)))))
    cfg = RefineConfig(max_iters=80, lr_geometry=2.0, lr_angle=5.0, lr_scale=0.05, lr_color=0.1)
    seen = []
    out, trace = refine(doc, target, cfg, callback=lambda it, l, pv: seen.append(pv.values.copy()))
    pv = flatten(out)
    r = pv.values[pv.slot(0, "r")]
    assert r >= cfg.min_size
    for vals in seen:
        cols = vals[[i for i, c in enumerate(pv.category) if c == "color"]]
        assert cols.min() >= 0.0 and cols.max() <= 1.0
        assert vals[pv.slot(0, "r")] >= 0.5
        assert abs(vals[pv.slot(1, "transform[0].deg")]) <= cfg.max_skew
        assert vals[pv.slot(1, "transform[1].sx")] >= cfg.min_abs_scale
    assert len(seen) == trace.iterations + 1


def test_deterministic():
    doc, target = perturbed_shape_config(8)
    cfg = RefineConfig(max_iters=25)
    a, ta = refine(doc, target, cfg)
    b, tb = refine(doc, target, cfg)
    assert a == b and ta == tb


def test_converges_on_easy_problem():
    target = render(SvgDocument(48, 48, (Shape(Circle(24, 22, 9), RED),)))
    doc = SvgDocument(48, 48, (Shape(Circle(22, 25, 7), RED),))
    out, trace = refine(doc, target)
    assert trace.reason == CONVERGED and trace.iterations < 500
    c = out.shapes[0].params
    assert abs(c.cx - 24) < 0.05 and abs(c.cy - 22) < 0.05 and abs(c.r - 9) < 0.05


def test_transform_parameters_are_fitted():
    truth = Shape(Rect(-10, -6, 20, 12), BLUE, (Translate(30, 28), Rotate(20), Scale(1.2, 0.9)))
    target = render_oracle(SvgDocument(64, 64, (truth,)), 8)
    start = Shape(truth.params, BLUE, (Translate(28, 30), Rotate(14), Scale(1.1, 1.0)))
    out, trace = refine(SvgDocument(64, 64, (start,)), target, RefineConfig(max_iters=300))
    rot = out.shapes[0].transforms[1].deg
    assert abs(rot - 20) < 1.0
    assert min(trace.losses) < 0.2 * trace.losses[0]


def test_singular_initial_transform_raises():
    doc = SvgDocument(16, 16, (Shape(Circle(5, 5, 2), transforms=(Scale(1e-7, 1e-7),)),))
    with pytest.raises(SingularTransformError):
        refine(doc, RasterImage.filled(16, 16))


def test_target_size_mismatch_raises():
    with pytest.raises(ValueError):
        refine(SvgDocument(16, 16), RasterImage.filled(8, 8))


def test_nan_loss_diverges_with_best_so_far(monkeypatch):
    real = refine_mod.Objective

    class Flaky(real):
        calls = 0

        def __call__(self, pv, grad=True):
            Flaky.calls += 1
            res = super().__call__(pv, grad)
            if Flaky.calls > 4:
                return (math.nan,) + res[1:]
            return res

    monkeypatch.setattr(refine_mod, "Objective", Flaky)
    doc, target = perturbed_shape_config(2)
    out, trace = refine(doc, target, RefineConfig(max_iters=50))
    assert trace.reason == DIVERGED
    assert trace.iterations == 4 and len(trace.losses) == 5 and math.isnan(trace.losses[-1])
    assert loss(target, render(out)) == pytest.approx(min(trace.losses[:4]), rel=1e-9)
