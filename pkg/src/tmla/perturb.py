"""Log-exp subband perturbation and scale-adaptive noise budgets."""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoisePyramid",
    "budget_schedule",
    "log_exp_apply",
    "log_exp_vjp",
    "first_order_approx",
    "clip_noise",
    "sgn",
]


def sgn(w):
    """Sign with sgn(0) = +1, so zero coefficients can still be perturbed."""
    return np.where(np.asarray(w) >= 0, 1.0, -1.0)


def budget_schedule(delta, alpha, levels):
    """Per-band l-inf bounds ``delta * alpha**(S - k)`` for k = 1..S+1.

    Index S+1 is the approximation band and gets ``delta / alpha``.
    """
    if delta <= 0 or alpha <= 0:
        raise ValueError("delta and alpha must be positive")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    return [delta * alpha ** (levels - k) for k in range(1, levels + 2)]


def log_exp_apply(w, n):
    """p(w, n) = sgn(w) * log(exp(|w|) + n), elementwise.

    Evaluated as sgn(w) * (|w| + log1p(n * exp(-|w|))): no overflow for large
    |w|, and n = 0 returns ``w`` bit-for-bit.
    """
    w = np.asarray(w, dtype=np.float64)
    aw = np.abs(w)
    ratio = n * np.exp(-aw)
    if np.any(ratio <= -1.0):
        raise FloatingPointError("log-exp argument non-positive; noise outside its budget")
    return sgn(w) * (aw + np.log1p(ratio))


def log_exp_vjp(w, n, cotangent):
    """Cotangent times dp/dn = sgn(w) / (exp(|w|) + n)."""
    w = np.asarray(w, dtype=np.float64)
    decay = np.exp(-np.abs(w))
    denom = 1.0 + n * decay
    if np.any(denom <= 0):
        raise FloatingPointError("log-exp argument non-positive; noise outside its budget")
    return cotangent * sgn(w) * decay / denom


def first_order_approx(w, n):
    """Linearization w + sgn(w) * n * exp(-|w|), valid for n << exp(|w|)."""
    w = np.asarray(w, dtype=np.float64)
    return w + sgn(w) * n * np.exp(-np.abs(w))


@dataclass
class NoisePyramid:
    """Noise planes congruent to a pyramid's bands (fine-to-coarse) and their bounds.

    With ``levels == 0`` there is a single pixel-domain plane.
    """

    bands: list
    bounds: list

    def __post_init__(self):
        if len(self.bands) != len(self.bounds):
            raise ValueError("one bound per band required")

    @property
    def levels(self):
        return len(self.bands) - 1

    @classmethod
    def zeros_like(cls, pyramid_bands, bounds):
        return cls([np.zeros_like(b) for b in pyramid_bands], list(bounds))

    @classmethod
    def gaussian(cls, pyramid_bands, bounds, rng):
        """N_k ~ Normal(0, std = delta_k), unclipped."""
        return cls([rng.standard_normal(b.shape) * d for b, d in zip(pyramid_bands, bounds)], list(bounds))

    def copy(self):
        return NoisePyramid([b.copy() for b in self.bands], list(self.bounds))

    def max_abs(self):
        return [float(np.max(np.abs(b))) if b.size else 0.0 for b in self.bands]

    def l1(self):
        return float(sum(np.sum(np.abs(b)) for b in self.bands))

    def within_bounds(self):
        return all(m <= d for m, d in zip(self.max_abs(), self.bounds))


def clip_noise(noise):
    """Clip every band into [-delta_k, delta_k]."""
    return NoisePyramid([np.clip(b, -d, d) for b, d in zip(noise.bands, noise.bounds)], list(noise.bounds))
