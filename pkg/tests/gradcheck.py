"""Central finite-difference check of the refinement gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shapevec.core import RasterImage, SvgDocument
from shapevec.datagen import gen_shape_sample
from shapevec.raster import ANGLE, COLOR, GEOMETRY, SCALE, TRANSLATE, Objective, flatten, unflatten

# step per parameter category.  Small steps keep pixels whose residual or SDF
# switches branch inside the stencil rare; truncation error is negligible here.
FD_STEP = {GEOMETRY: 1e-5, TRANSLATE: 1e-5, COLOR: 1e-6, SCALE: 1e-7, ANGLE: 1e-6}
REL_TOL = 1e-3
ABS_TOL = 1e-6


@dataclass
class GradCheck:
    analytic: np.ndarray
    numeric: np.ndarray
    names: list[str]

    @property
    def failures(self) -> list[int]:
        diff = np.abs(self.analytic - self.numeric)
        scale = np.maximum(np.abs(self.analytic), np.abs(self.numeric))
        ok = (diff <= ABS_TOL) | (diff <= REL_TOL * scale)
        return [int(i) for i in np.flatnonzero(~ok)]


def check_gradient(doc: SvgDocument, target: RasterImage, alpha=1.0, beta=1.0) -> GradCheck:
    obj = Objective(doc, target, alpha, beta)
    pv = flatten(doc)
    _, _, _, g = obj(pv)
    num = np.empty_like(g)
    for i, cat in enumerate(pv.category):
        h = FD_STEP[cat]
        x = pv.values.copy()
        x[i] += h
        up = obj(pv.with_values(x), grad=False)[0]
        x[i] -= 2 * h
        down = obj(pv.with_values(x), grad=False)[0]
        num[i] = (up - down) / (2 * h)
    names = [f"{s}:{n}" for s, n in pv.index]
    return GradCheck(g, num, names)


def perturbed_shape_config(seed: int, target_ss: int = 4):
    """A grid scene with every coordinate moved off the ground truth.

    Colors are kept inside [0.05, 0.95] so no rendered channel ties the
    target exactly; at a tie the L1 term has a kink that central differences
    average away.
    """
    from shapevec.raster import render_oracle

    gt = gen_shape_sample(seed)
    rng = np.random.default_rng(seed + 1_000_000)
    pv = flatten(gt)
    x = pv.values.copy()
    cat = np.array(pv.category)
    geo, col = cat == GEOMETRY, cat == COLOR
    x[geo] += rng.uniform(-5, 5, geo.sum())
    x[col] = np.clip(x[col] + rng.uniform(-0.1, 0.1, col.sum()), 0.05, 0.95)
    return unflatten(gt, pv.with_values(x)), render_oracle(gt, target_ss)
