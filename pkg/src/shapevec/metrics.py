"""Image-quality metrics and SVG size/token statistics."""

from __future__ import annotations

import math
import os
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import RasterImage
from .raster import residual_loss

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a: RasterImage, b: RasterImage) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(f"image sizes differ: {a.pixels.shape} vs {b.pixels.shape}")


def l1_metric(a: RasterImage, b: RasterImage) -> float:
    """Mean absolute difference over all pixel channels."""
    _check_pair(a, b)
    return residual_loss(a.pixels, b.pixels, 1.0, 0.0)[1]


def l2_metric(a: RasterImage, b: RasterImage) -> float:
    """Root-mean-square difference over all pixel channels."""
    _check_pair(a, b)
    return residual_loss(a.pixels, b.pixels, 0.0, 1.0)[2]


def gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian taps; the 2-D window is their outer product."""
    k = np.arange(size) - (size - 1) / 2
    w = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return w / w.sum()


def _filter_valid(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable correlation of a 2-D array, keeping only full windows."""
    n = len(taps)
    rows = sliding_window_view(x, n, axis=0) @ taps
    return sliding_window_view(rows, n, axis=1) @ taps


def ssim_map(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> np.ndarray:
    """Per-window SSIM of two single-channel images (valid windows only)."""
    taps = gaussian_kernel()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a = _filter_valid(a, taps)
    mu_b = _filter_valid(b, taps)
    var_a = _filter_valid(a * a, taps) - mu_a * mu_a
    var_b = _filter_valid(b * b, taps) - mu_b * mu_b
    cov = _filter_valid(a * b, taps) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a: RasterImage, b: RasterImage) -> float:
    """Gaussian-window SSIM, averaged over windows and then over channels."""
    _check_pair(a, b)
    if min(a.width, a.height) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    vals = [float(ssim_map(a.pixels[..., c], b.pixels[..., c]).mean()) for c in range(3)]
    return sum(vals) / 3.0


def _mean_std(xs: Sequence[float]) -> tuple[float, float]:
    if not xs:
        return math.nan, math.nan
    arr = np.asarray(xs, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0


def _table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    rows = [list(header)] + [list(r) for r in rows]
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


@dataclass
class PairMetrics:
    name: str
    l1: float
    l2: float
    ssim: float
    lpips: float | None = None


def evaluate_pair(name: str, a: RasterImage, b: RasterImage) -> PairMetrics:
    return PairMetrics(name, l1_metric(a, b), l2_metric(a, b), ssim(a, b))


@dataclass
class MetricReport:
    """Per-pair image metrics.  ``lpips`` is never computed here; it is kept
    so values produced by other tools can be merged in."""

    rows: list[PairMetrics] = field(default_factory=list)

    def aggregate(self) -> dict[str, dict[str, float | None]]:
        out = {}
        for key in ("l1", "l2", "ssim", "lpips"):
            vals = [getattr(r, key) for r in self.rows if getattr(r, key) is not None]
            if vals:
                mean, std = _mean_std(vals)
                out[key] = {"mean": mean, "std": std}
            else:
                out[key] = {"mean": None, "std": None}
        return out

    def to_json(self) -> dict:
        return {"count": len(self.rows), "rows": [asdict(r) for r in self.rows],
                "aggregate": self.aggregate()}

    def to_table(self) -> str:
        agg = self.aggregate()
        fmt = lambda v: "-" if v is None else f"{v:.5f}"  # noqa: E731
        rows = [[k.upper(), fmt(agg[k]["mean"]), fmt(agg[k]["std"])]
                for k in ("l1", "l2", "ssim", "lpips")]
        return _table(["Metric", "Mean", "Std"], rows)


# --------------------------------------------------------------------------
# Complexity

_TOKEN = re.compile(r"""</|/>|<|>|=|"([^"]*)"|'([^']*)'|[^\s<>="'/]+|/""")
_VALUE_SPLIT = re.compile(r"[\s,]+")


def tokenize(text: str) -> list[str]:
    """Lexical tokens of SVG markup.

    Tag and attribute names, punctuation (``<``, ``>``, ``</``, ``/>``,
    ``=``) and the pieces of each attribute value split on whitespace and
    commas.  This is a grammar-level count, unrelated to any language-model
    tokenizer.
    """
    out = []
    for m in _TOKEN.finditer(text):
        quoted = m.group(1) if m.group(1) is not None else m.group(2)
        if quoted is None:
            out.append(m.group(0))
        else:
            out.extend(t for t in _VALUE_SPLIT.split(quoted) if t)
    return out


@dataclass
class ComplexityReport:
    names: list[str]
    sizes: list[int]
    tokens: list[int]

    def aggregate(self) -> dict[str, dict[str, float]]:
        out = {}
        for key, vals in (("bytes", self.sizes), ("tokens", self.tokens)):
            mean, std = _mean_std(vals)
            out[key] = {"mean": mean, "std": std}
        return out

    def to_json(self) -> dict:
        rows = [{"name": n, "bytes": s, "tokens": t}
                for n, s, t in zip(self.names, self.sizes, self.tokens)]
        return {"count": len(rows), "rows": rows, "aggregate": self.aggregate()}

    def to_table(self) -> str:
        agg = self.aggregate()
        rows = [[k, f"{agg[k]['mean']:.3f}", f"{agg[k]['std']:.3f}"] for k in ("bytes", "tokens")]
        return _table(["Quantity", "Mean", "Std"], rows)


def complexity_stats(sources: Iterable[str | os.PathLike]) -> ComplexityReport:
    """Byte sizes and token counts.  ``Path`` items are read from disk; plain
    strings are taken as SVG text."""
    names, sizes, tokens = [], [], []
    for i, src in enumerate(sources):
        if isinstance(src, str):
            data, name = src.encode("utf-8"), f"<text {i}>"
        else:
            data, name = Path(src).read_bytes(), str(src)
        names.append(name)
        sizes.append(len(data))
        tokens.append(len(tokenize(data.decode("utf-8"))))
    return ComplexityReport(names, sizes, tokens)
