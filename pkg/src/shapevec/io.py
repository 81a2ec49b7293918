"""PNG I/O for raster images and atomic file writes."""

from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .core import RasterImage


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def to_uint8(img: RasterImage) -> np.ndarray:
    return np.round(img.pixels * 255.0).astype(np.uint8)


def png_bytes(img: RasterImage) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def write_png(path: str | os.PathLike, img: RasterImage) -> None:
    atomic_write_bytes(path, png_bytes(img))


def read_png(path: str | os.PathLike) -> RasterImage:
    """Load an image as RGB; transparent images are flattened onto white."""
    with Image.open(path) as im:
        if im.mode in ("RGBA", "LA", "PA") or "transparency" in im.info:
            rgba = im.convert("RGBA")
            im = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
            im.alpha_composite(rgba)
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return RasterImage(arr)
