"""Full-reference quality metrics: MSE, PSNR (with its VJP), SSIM and pixel VIF.

All metrics take planar ``(C, H, W)`` arrays with data range 1.
"""

from dataclasses import asdict, dataclass
from math import log

import numpy as np
from scipy import ndimage, signal

from .image_io import to_grayscale

PSNR_CAP = 100.0

_PSNR_SCALE = 10.0 / log(10.0)


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    vif: float
    mse: float

    def as_dict(self):
        return asdict(self)


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[None], b[None]
    return a, b


def mse(a, b):
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b):
    """10 log10(1 / MSE) in dB, capped at 100 dB (identical images hit the cap)."""
    m = mse(a, b)
    if m <= 0.0:
        return PSNR_CAP
    return min(10.0 * np.log10(1.0 / m), PSNR_CAP)


def psnr_vjp(a, b, cotangent=1.0):
    """Gradient of ``cotangent * psnr(a, b)`` with respect to ``a``.

    Zero where PSNR is capped (including MSE = 0), where it is undefined.
    """
    a, b = _pair(a, b)
    m = float(np.mean((a - b) ** 2))
    if m <= 0.0 or 10.0 * np.log10(1.0 / m) >= PSNR_CAP:
        return np.zeros_like(a)
    return cotangent * (-_PSNR_SCALE / m) * (2.0 / a.size) * (a - b)


def _gaussian_1d(size, sigma):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _valid_filter(x, kernel_1d):
    r = (len(kernel_1d) - 1) // 2
    y = ndimage.correlate1d(x, kernel_1d, axis=-1, mode="reflect")
    y = ndimage.correlate1d(y, kernel_1d, axis=-2, mode="reflect")
    return y[r : y.shape[0] - r, r : y.shape[1] - r]


def ssim(a, b, win_size=11, sigma=1.5, k1=0.01, k2=0.03):
    """Single-scale SSIM, Gaussian window, mean over valid positions, channel-averaged."""
    a, b = _pair(a, b)
    if min(a.shape[-2:]) < win_size:
        raise ValueError(f"image smaller than the {win_size}x{win_size} SSIM window")
    g = _gaussian_1d(win_size, sigma)
    c1, c2 = k1**2, k2**2
    vals = []
    for x, y in zip(a, b):
        mx, my = _valid_filter(x, g), _valid_filter(y, g)
        sxx = _valid_filter(x * x, g) - mx * mx
        syy = _valid_filter(y * y, g) - my * my
        sxy = _valid_filter(x * y, g) - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def _vif_window(n):
    sigma = n / 5.0
    x, y = np.mgrid[-(n // 2) : n // 2 + 1, -(n // 2) : n // 2 + 1]
    g = np.exp(-(x**2 + y**2) / (2.0 * sigma**2))
    g[g < np.finfo(g.dtype).eps * g.max()] = 0
    return g / g.sum()


def vif(a, b, sigma_nsq=2.0, eps=1e-10):
    """Pixel-domain VIF over 4 Gaussian-pyramid scales on the 0-255 luma scale.

    ``a`` is the reference. Identical inputs give 1; contrast enhancement of
    ``b`` can push the value above 1.
    """
    a, b = _pair(a, b)
    ref = to_grayscale(a)[0] * 255.0
    dist = to_grayscale(b)[0] * 255.0
    num = den = 0.0
    for scale in range(1, 5):
        n = 2 ** (4 - scale + 1) + 1
        win = _vif_window(n)
        if scale > 1:
            ref = signal.convolve2d(ref, win, mode="valid")[::2, ::2]
            dist = signal.convolve2d(dist, win, mode="valid")[::2, ::2]
        if min(ref.shape) < n:
            raise ValueError("image too small for 4-scale VIF")
        mu1 = signal.convolve2d(ref, win, mode="valid")
        mu2 = signal.convolve2d(dist, win, mode="valid")
        s1 = signal.convolve2d(ref * ref, win, mode="valid") - mu1 * mu1
        s2 = signal.convolve2d(dist * dist, win, mode="valid") - mu2 * mu2
        s12 = signal.convolve2d(ref * dist, win, mode="valid") - mu1 * mu2
        s1[s1 < 0] = 0
        s2[s2 < 0] = 0

        g = s12 / (s1 + eps)
        sv = s2 - g * s12
        flat_ref = s1 < eps
        g[flat_ref] = 0
        sv[flat_ref] = s2[flat_ref]
        s1[flat_ref] = 0
        flat_dist = s2 < eps
        g[flat_dist] = 0
        sv[flat_dist] = 0
        neg = g < 0
        sv[neg] = s2[neg]
        g[neg] = 0
        sv[sv <= eps] = eps

        num += np.sum(np.log10(1.0 + g * g * s1 / (sv + sigma_nsq)))
        den += np.sum(np.log10(1.0 + s1 / sigma_nsq))
    if den == 0.0:
        # flat reference carries no information; identical-signal convention
        return 1.0 if np.array_equal(a, b) else 0.0
    return float(num / den)


def relative_vif_drop(stealth_vif, attack_vif):
    """Stealth VIF minus attack VIF."""
    return stealth_vif - attack_vif


def report(reference, test):
    """All four metrics of ``test`` against ``reference``."""
    return MetricReport(psnr=psnr(test, reference), ssim=ssim(reference, test), vif=vif(reference, test), mse=mse(reference, test))
