"""Gradient-based refinement of shape parameters against a target raster."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import RasterImage, SvgDocument
from .raster import (
    ANGLE,
    COLOR,
    GEOMETRY,
    SCALE,
    TRANSLATE,
    Objective,
    ParamVector,
    RenderConfig,
    SingularTransformError,
    flatten,
    unflatten,
)
from .raster import residual_loss

CONVERGED = "converged"
BUDGET = "budget"
DIVERGED = "diverged"


@dataclass(frozen=True)
class RefineConfig:
    alpha: float = 1.0
    beta: float = 1.0
    max_iters: int = 500
    # base step sizes per parameter category
    lr_geometry: float = 0.5
    lr_color: float = 0.01
    lr_angle: float = 0.5
    lr_scale: float = 0.01
    # step size multiplier reached (geometrically) at the last iteration
    lr_final_ratio: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    tol: float = 1e-5
    window: int = 20
    min_size: float = 0.5
    max_skew: float = 89.0
    min_abs_scale: float = 1e-3
    render: RenderConfig = field(default_factory=RenderConfig)

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or not self.alpha + self.beta > 0:
            raise ValueError("alpha and beta must be nonnegative with a positive sum")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass
class RefineTrace:
    losses: list[float]
    iterations: int
    reason: str


def loss(target: RasterImage, rendered: RasterImage, alpha: float = 1.0, beta: float = 1.0) -> float:
    """``alpha * mean|target - rendered| + beta * rms(target - rendered)``."""
    if target.pixels.shape != rendered.pixels.shape:
        raise ValueError(f"image sizes differ: {target.pixels.shape} vs {rendered.pixels.shape}")
    return residual_loss(target.pixels, rendered.pixels, alpha, beta)[0]


def _steps_and_bounds(pv: ParamVector, cfg: RefineConfig):
    n = len(pv)
    lr = np.empty(n)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    base = {GEOMETRY: cfg.lr_geometry, TRANSLATE: cfg.lr_geometry, COLOR: cfg.lr_color,
            ANGLE: cfg.lr_angle, SCALE: cfg.lr_scale}
    for i, ((_, name), cat) in enumerate(zip(pv.index, pv.category)):
        lr[i] = base[cat]
        if cat == COLOR:
            lo[i], hi[i] = 0.0, 1.0
        elif cat == GEOMETRY and name in ("r", "width", "height"):
            lo[i] = cfg.min_size
        elif cat == ANGLE and name.endswith(".deg") and ("skew" in _transform_name(pv, i)):
            lo[i], hi[i] = -cfg.max_skew, cfg.max_skew
        elif cat == SCALE:
            if pv.values[i] >= 0:
                lo[i] = cfg.min_abs_scale
            else:
                hi[i] = -cfg.min_abs_scale
    return lr, lo, hi


def _transform_name(pv: ParamVector, slot: int) -> str:
    shape_index = pv.index[slot][0]
    for name, sl in pv.layout[shape_index].transforms:
        if sl.start <= slot < sl.stop:
            return name.lower()
    return ""


def refine(initial: SvgDocument, target: RasterImage, cfg: RefineConfig = RefineConfig(),
           callback: Callable[[int, float, ParamVector], None] | None = None,
           ) -> tuple[SvgDocument, RefineTrace]:
    """Adam descent on every numeric parameter of ``initial``.

    Returns the best iterate seen (never worse than ``initial``) and the loss
    path.  ``callback(iteration, loss, params)`` is invoked after every
    evaluation, including the initial one.
    """
    objective = Objective(initial, target, cfg.alpha, cfg.beta, cfg.render)
    pv = flatten(initial)
    x = pv.values.copy()
    loss0, _, _, g = objective(pv)
    losses = [loss0]
    if callback:
        callback(0, loss0, pv)
    if not math.isfinite(loss0):
        return initial, RefineTrace(losses, 0, DIVERGED)
    if cfg.max_iters == 0:
        return initial, RefineTrace(losses, 0, BUDGET)
    if loss0 == 0.0:
        return initial, RefineTrace(losses, 0, CONVERGED)

    lr, lo, hi = _steps_and_bounds(pv, cfg)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    best_loss, best_x = loss0, None
    best_hist = [loss0]
    reason = BUDGET
    t = 0
    for t in range(1, cfg.max_iters + 1):
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        m_hat = m / (1.0 - cfg.beta1 ** t)
        v_hat = v / (1.0 - cfg.beta2 ** t)
        decay = cfg.lr_final_ratio ** ((t - 1) / max(1, cfg.max_iters - 1))
        x = np.clip(x - lr * decay * m_hat / (np.sqrt(v_hat) + cfg.adam_eps), lo, hi)
        cur = pv.with_values(x)
        try:
            cur_loss, _, _, g = objective(cur)
        except SingularTransformError:
            cur_loss = math.nan
        losses.append(cur_loss)
        if callback:
            callback(t, cur_loss, cur)
        if not math.isfinite(cur_loss) or not np.all(np.isfinite(g)):
            reason = DIVERGED
            break
        if cur_loss < best_loss:
            best_loss, best_x = cur_loss, x.copy()
        best_hist.append(best_loss)
        if best_loss == 0.0:
            reason = CONVERGED
            break
        if t >= cfg.window:
            prev = best_hist[t - cfg.window]
            if prev - best_loss <= cfg.tol * prev:
                reason = CONVERGED
                break

    trace = RefineTrace(losses, t, reason)
    if best_x is None:
        return initial, trace
    return unflatten(initial, pv.with_values(best_x)), trace
