import os

import numpy as np
from PIL import Image

from shapevec.core import RasterImage
from shapevec.io import atomic_write_text, read_png, to_uint8, write_png


def test_png_round_trip_quantization(tmp_path):
    rng = np.random.default_rng(0)
    img = RasterImage(rng.random((13, 17, 3)))
    write_png(tmp_path / "x.png", img)
    back = read_png(tmp_path / "x.png")
    assert back.pixels.shape == img.pixels.shape
    assert np.abs(back.pixels - img.pixels).max() <= 0.5 / 255 + 1e-12
    with Image.open(tmp_path / "x.png") as im:
        assert im.mode == "RGB"


def test_to_uint8_rounds():
    img = RasterImage(np.array([[[0.0, 0.5, 1.0]]]))
    assert to_uint8(img).tolist() == [[[0, 128, 255]]]


def test_alpha_is_flattened_on_white(tmp_path):
    rgba = np.zeros((2, 2, 4), dtype=np.uint8)
    rgba[0, 0] = (255, 0, 0, 255)
    Image.fromarray(rgba, mode="RGBA").save(tmp_path / "a.png")
    px = read_png(tmp_path / "a.png").pixels
    assert px[0, 0].tolist() == [1.0, 0.0, 0.0]
    assert px[1, 1].tolist() == [1.0, 1.0, 1.0]


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "f.txt"
    atomic_write_text(target, "one")
    atomic_write_text(target, "two")
    assert target.read_text() == "two"
    assert os.listdir(target.parent) == ["f.txt"]
