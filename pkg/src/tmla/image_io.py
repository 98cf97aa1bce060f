"""Image loading, saving and simple conversions.

Images are float64 numpy arrays in planar channel-major layout ``(C, H, W)``
with samples in ``[0, 1]``. ``C`` is 1 (grayscale) or 3 (RGB).
"""

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

DEFAULT_DIFF_GAIN = 50.0


class ImageError(ValueError):
    pass


def as_image(data, copy=False):
    """Validate ``data`` as a planar image and return it as float64 ``(C, H, W)``.

    2-D arrays are promoted to a single channel.
    """
    arr = np.array(data, dtype=np.float64, copy=copy)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] not in (1, 3):
        raise ImageError(f"expected (C, H, W) with C in (1, 3), got shape {arr.shape}")
    if arr.shape[1] == 0 or arr.shape[2] == 0:
        raise ImageError("zero-size image")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ImageError("image samples must be finite and lie in [0, 1]")
    return arr


def load_image(path):
    """Read an 8-bit PNG or binary PPM/PGM file into a planar float image."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I", "F"):
                raise ImageError(f"unsupported bit depth (mode {mode}) in {path}")
            if mode in ("1", "L"):
                arr = np.asarray(im.convert("L"), dtype=np.uint8)[None]
            elif mode == "LA":
                arr = np.asarray(im.convert("L"), dtype=np.uint8)[None]
            elif mode in ("RGB", "RGBA", "P", "CMYK", "YCbCr"):
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8).transpose(2, 0, 1)
            else:
                raise ImageError(f"unsupported image mode {mode} in {path}")
    except (OSError, SyntaxError) as exc:
        raise ImageError(f"cannot read image {path}: {exc}") from exc
    if arr.shape[1] == 0 or arr.shape[2] == 0:
        raise ImageError(f"zero-size image {path}")
    return arr.astype(np.float64) / 255.0


def quantize(img):
    """Round samples to the 8-bit grid, returned as uint8 ``(C, H, W)``."""
    img = np.asarray(img, dtype=np.float64)
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def save_image(img, path):
    """Write ``img`` as 8-bit PNG/PPM/PGM; the format follows the file suffix."""
    img = as_image(img)
    q = quantize(img)
    if q.shape[0] == 1:
        pil = PILImage.fromarray(q[0], mode="L")
    else:
        pil = PILImage.fromarray(q.transpose(1, 2, 0), mode="RGB")
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm", ".pnm"):
        pil.save(path, format="PPM")
    else:
        pil.save(path, format="PNG")
    return path


def to_grayscale(img):
    """Luma (BT.601) of an RGB image; single-channel input is returned unchanged."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img[None]
    if img.shape[0] == 1:
        return img
    if img.shape[0] != 3:
        raise ImageError(f"expected 1 or 3 channels, got {img.shape[0]}")
    return np.tensordot(LUMA_WEIGHTS, img, axes=1)[None]


def gray_levels(img):
    """Grayscale view discretized to integer levels 0..255 (uint8, ``(H, W)``)."""
    return quantize(to_grayscale(img))[0]


def diff_map(a, b, gain=DEFAULT_DIFF_GAIN):
    """Amplified absolute difference ``clip(gain * |a - b|, 0, 1)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ImageError(f"shape mismatch: {a.shape} vs {b.shape}")
    if gain <= 0:
        raise ValueError("gain must be positive")
    return np.clip(gain * np.abs(a - b), 0.0, 1.0)
