import numpy as np
import pytest
from PIL import Image

from tmla.image_io import ImageError, as_image, diff_map, gray_levels, load_image, quantize, save_image, to_grayscale


@pytest.mark.parametrize("suffix, channels", [(".png", 3), (".png", 1), (".ppm", 3), (".pgm", 1)])
def test_roundtrip_is_exact_on_the_8bit_grid(tmp_path, rng, suffix, channels):
    x = quantize(rng.random((channels, 7, 5))) / 255.0
    path = save_image(x, tmp_path / f"img{suffix}")
    np.testing.assert_array_equal(load_image(path), x)


def test_rgba_and_palette_load_as_rgb(tmp_path):
    Image.new("RGBA", (4, 3), (10, 20, 30, 40)).save(tmp_path / "a.png")
    img = load_image(tmp_path / "a.png")
    assert img.shape == (3, 3, 4)
    assert img[2, 0, 0] == pytest.approx(30 / 255)


def test_sixteen_bit_rejected(tmp_path):
    Image.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(tmp_path / "d.png")
    with pytest.raises(ImageError, match="bit depth"):
        load_image(tmp_path / "d.png")


def test_unreadable(tmp_path):
    (tmp_path / "x.png").write_bytes(b"not an image")
    with pytest.raises(ImageError):
        load_image(tmp_path / "x.png")


def test_as_image_validation():
    assert as_image(np.zeros((4, 4))).shape == (1, 4, 4)
    with pytest.raises(ImageError):
        as_image(np.zeros((2, 4, 4)))
    with pytest.raises(ImageError):
        as_image(np.full((1, 2, 2), 1.5))
    with pytest.raises(ImageError):
        as_image(np.zeros((1, 0, 3)))


def test_grayscale_weights():
    x = np.stack([np.full((2, 2), v) for v in (1.0, 0.0, 0.0)])
    assert to_grayscale(x)[0, 0, 0] == pytest.approx(0.299)
    assert gray_levels(np.full((1, 2, 2), 0.5)).dtype == np.uint8


def test_diff_map():
    a = np.zeros((1, 2, 2))
    b = a + 0.01
    np.testing.assert_allclose(diff_map(a, b), 0.5)
    np.testing.assert_allclose(diff_map(a, b, gain=500), 1.0)
    with pytest.raises(ValueError):
        diff_map(a, b, gain=0)
    with pytest.raises(ImageError):
        diff_map(a, np.zeros((1, 3, 3)))
