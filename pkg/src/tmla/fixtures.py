"""Seeded synthetic images used by tests, demos and the CLI fixtures.

No natural-image datasets ship with the package, so these generators stand in
for them: smooth shading with edges and textured regions (``scene``),
power-law spectral noise (``power_law_noise``), and a manifest of scenes with
graded texture content (``mixed_entropy_set``).
"""

import numpy as np
from scipy import ndimage

FINE_EXPONENT = 2.5
FINE_AMPLITUDE = 0.3
EDGE_BLUR = 0.8


def power_law_noise(shape, exponent=2.0, seed=0):
    """Gaussian field with power spectrum ~ 1/f**exponent, rescaled to [0, 1].

    ``shape`` is (C, H, W) or (H, W).
    """
    rng = np.random.default_rng(seed)
    if len(shape) == 2:
        shape = (1,) + tuple(shape)
    c, h, w = shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.rfftfreq(w)[None, :]
    f = np.hypot(fy, fx)
    f[0, 0] = 1.0
    amp = f ** (-exponent / 2.0)
    amp[0, 0] = 0.0
    out = np.empty(shape)
    for ch in range(c):
        spec = (rng.standard_normal(amp.shape) + 1j * rng.standard_normal(amp.shape)) * amp
        field = np.fft.irfft2(spec, s=(h, w))
        field -= field.min()
        out[ch] = field / max(field.max(), 1e-12)
    return out


def scene(size=64, texture=0.5, seed=0, channels=3, grain=0.004, amplitude=FINE_AMPLITUDE, shading=1.0):
    """Smooth shaded background, a few hard edges, and textured patches.

    ``texture`` in [0, 1] sets the share of the frame covered by fine texture
    and thus the image's local-entropy level. ``grain`` is the std of the
    additive sensor noise, ``amplitude`` the texture contrast and ``shading``
    scales the smooth background ramp.
    """
    rng = np.random.default_rng(seed)
    h = w = size
    yy, xx = np.mgrid[0:h, 0:w] / size
    base = 0.35 + shading * (0.25 * xx + 0.15 * yy + 0.08 * np.sin(2 * np.pi * (xx * rng.uniform(0.5, 1.5) + yy)))
    # a bright disc and a dark bar for edges
    cy, cx = rng.uniform(0.3, 0.7, size=2)
    disc = (yy - cy) ** 2 + (xx - cx) ** 2 < rng.uniform(0.02, 0.05)
    base = np.where(disc, base + 0.2, base)
    bar = (np.abs(xx - rng.uniform(0.2, 0.8)) < 0.06) & (yy > 0.2)
    base = np.where(bar, base - 0.2, base)
    # anti-alias the edges, as a downsampled photograph would be
    base = ndimage.gaussian_filter(base, EDGE_BLUR, mode="nearest")

    # texture mask made of blocky patches so coverage is controllable
    cells = max(size // 16, 1)
    mask_cells = rng.random((cells, cells)) < texture
    mask = np.kron(mask_cells, np.ones((size // cells, size // cells)))[:h, :w].astype(bool)
    fine = power_law_noise((h, w), exponent=FINE_EXPONENT, seed=seed + 1000)[0] - 0.5

    img = np.empty((channels, h, w))
    tint = rng.uniform(-0.05, 0.05, size=channels)
    for ch in range(channels):
        img[ch] = base + tint[ch] + np.where(mask, amplitude * fine, 0.0)
    img += grain * rng.standard_normal(img.shape)
    return np.clip(img, 0.0, 1.0)


def attack_fixture_set(size=64, seed=0):
    """The three synthetic scenes used for the end-to-end attack checks."""
    return [scene(size, texture=t, seed=seed + i) for i, t in enumerate((0.35, 0.5, 0.65))]


def mixed_entropy_set(count=8, size=64, seed=100):
    """Scenes graded from flat and clean to busy and grainy.

    Texture coverage, texture contrast, background shading and grain all rise
    together so the mean local entropy spans a wide range.
    """
    levels = np.linspace(0.0, 1.0, count)
    return [
        scene(size, texture=float(t), seed=seed + i, grain=0.006 * t, amplitude=0.1 + 0.3 * t, shading=0.1 + 0.9 * t)
        for i, t in enumerate(levels)
    ]


def checkerboard(size=16, cell=1, low=0.25, high=0.75):
    """Two-level checkerboard (grayscale)."""
    yy, xx = np.mgrid[0:size, 0:size] // cell
    return np.where((yy + xx) % 2 == 0, low, high)[None].astype(np.float64)
