"""Multilevel separable 2-D discrete wavelet transform.

Haar uses the closed-form 2x2 block formulas (factor 1/2). The other presets
(db2, sym2, coif2, bior1.1) go through a generic periodized orthonormal
filter bank. Analysis filters are applied by correlation,

    lo[n] = sum_k h[k] x[(2n + k) mod N],

and synthesis is the exact transpose of that operator, so every preset is an
orthonormal transform on even-sized planes.

Odd-sized planes are padded by one row/column (edge replication) before
analysis and cropped after synthesis.
"""

from dataclasses import dataclass, field
from itertools import product
from math import comb, sqrt

import numpy as np
from scipy.optimize import least_squares

__all__ = [
    "FilterSpec",
    "WaveletPyramid",
    "get_filter",
    "FILTER_NAMES",
    "dwt2",
    "idwt2",
    "dwt2_adjoint",
    "combined_detail_magnitude",
    "plane_shapes",
]

ORIENTATIONS = ("LH", "HL", "HH")


@dataclass(frozen=True)
class FilterSpec:
    """Two-channel orthonormal filter bank.

    ``dec_lo``/``dec_hi`` are analysis filters (correlation); ``rec_lo``/``rec_hi``
    are synthesis filters (convolution). For orthonormal banks they coincide.
    """

    name: str
    dec_lo: tuple
    dec_hi: tuple
    rec_lo: tuple
    rec_hi: tuple

    def __post_init__(self):
        lo = np.asarray(self.dec_lo)
        if abs(np.sum(lo**2) - 1.0) > 1e-10:
            raise ValueError(f"{self.name}: lowpass energy {np.sum(lo**2)!r} != 1")
        rng = np.random.default_rng(0)
        x = rng.standard_normal((3, 2 * max(len(lo), 8)))
        a, d = _analyze(x, np.asarray(self.dec_lo), np.asarray(self.dec_hi))
        y = _synthesize(a, d, np.asarray(self.rec_lo), np.asarray(self.rec_hi))
        err = np.max(np.abs(y - x))
        if err > 1e-10:
            raise ValueError(f"{self.name}: perfect reconstruction fails (error {err:.3g})")

    @property
    def length(self):
        return len(self.dec_lo)

    @classmethod
    def orthonormal(cls, name, lowpass):
        lo = np.asarray(lowpass, dtype=np.float64)
        hi = quadrature_mirror(lo)
        return cls(name, tuple(lo), tuple(hi), tuple(lo), tuple(hi))


def quadrature_mirror(lo):
    """Highpass partner g[k] = (-1)^k h[L-1-k]."""
    lo = np.asarray(lo, dtype=np.float64)
    signs = (-1.0) ** np.arange(len(lo))
    return signs * lo[::-1]


# -- filter design ---------------------------------------------------------


def _daubechies_roots(n_moments):
    """z-roots of the non-(1+z^-1) part of the Daubechies half-band product, grouped."""
    # P(y) = sum_k C(N-1+k, k) y^k with y = (2 - z - 1/z) / 4
    coeffs = [comb(n_moments - 1 + k, k) for k in range(n_moments)]
    y_roots = np.roots(coeffs[::-1]) if n_moments > 1 else np.array([])
    groups = []
    used = np.zeros(len(y_roots), dtype=bool)
    for i, y in enumerate(y_roots):
        if used[i]:
            continue
        used[i] = True
        # z^2 - (2 - 4y) z + 1 = 0 ; roots z and 1/z
        zs = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        inside = zs[np.argmin(np.abs(zs))]
        if abs(y.imag) > 1e-12:
            # conjugate partner travels with y
            j = next(j for j in range(len(y_roots)) if not used[j] and abs(y_roots[j] - np.conj(y)) < 1e-9)
            used[j] = True
            groups.append([inside, np.conj(inside)])
        else:
            groups.append([inside.real])
    return groups


def _lowpass_from_roots(n_moments, roots):
    poly = np.poly(np.concatenate([-np.ones(n_moments), np.asarray(roots, dtype=complex)]))
    h = np.real(poly)
    return h * (sqrt(2.0) / h.sum())


def daubechies_lowpass(n_moments):
    """Minimum-phase Daubechies lowpass with ``n_moments`` vanishing moments."""
    groups = _daubechies_roots(n_moments)
    roots = [z for g in groups for z in g]
    return _lowpass_from_roots(n_moments, roots)


def symlet_lowpass(n_moments):
    """Least-asymmetric spectral factor: pick root set minimizing phase nonlinearity."""
    groups = _daubechies_roots(n_moments)
    best, best_score = None, np.inf
    w = np.linspace(0.0, np.pi * 0.95, 256)
    for choice in product((False, True), repeat=len(groups)):
        roots = []
        for flip, g in zip(choice, groups):
            roots.extend([1.0 / np.conj(z) if flip else z for z in g])
        h = _lowpass_from_roots(n_moments, roots)
        resp = np.polyval(h[::-1], np.exp(-1j * w))
        phase = np.unwrap(np.angle(resp))
        lin = np.polyfit(w, phase, 1)
        score = np.max(np.abs(phase - np.polyval(lin, w)))
        if score < best_score - 1e-12:
            best, best_score = h, score
    return best


def coiflet_lowpass(order, seed=None):
    """Coiflet lowpass of length 6*order, solved from its defining conditions.

    Conditions (taps indexed k = -2K .. 4K-1): sum h = sqrt(2); double-shift
    orthonormality; 2K vanishing wavelet moments; 2K-1 vanishing scaling
    moments about k = 0. Solved by nonlinear least squares from ``seed``.
    """
    K = order
    L = 6 * K
    k = np.arange(-2 * K, 4 * K, dtype=np.float64)
    alt = (-1.0) ** np.arange(L)

    def residuals(h):
        res = [h.sum() - sqrt(2.0)]
        for m in range(L // 2):
            res.append(np.dot(h[: L - 2 * m], h[2 * m :]) - (1.0 if m == 0 else 0.0))
        for j in range(1, 2 * K):
            res.append(np.dot(alt * k**j, h))
        for j in range(1, 2 * K):
            res.append(np.dot(k**j, h))
        return np.array(res)

    if seed is None:
        raise ValueError("coiflet design needs a starting point")
    sol = least_squares(residuals, np.asarray(seed, dtype=np.float64), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if np.max(np.abs(residuals(sol.x))) > 1e-12:
        raise RuntimeError("coiflet conditions not satisfied")
    return sol.x


# coarse 2-decimal starting point for the order-2 coiflet root
_COIF2_SEED = [0.02, -0.04, -0.07, 0.39, 0.81, 0.42, -0.08, -0.06, 0.02, 0.01, 0.0, 0.0]

_FILTER_CACHE = {}

FILTER_NAMES = ("haar", "bior1.1", "db2", "sym2", "coif2")


def get_filter(name):
    """Return the :class:`FilterSpec` preset called ``name``."""
    if isinstance(name, FilterSpec):
        return name
    key = name.lower()
    if key in _FILTER_CACHE:
        return _FILTER_CACHE[key]
    if key == "haar":
        lo = np.array([1.0, 1.0]) / sqrt(2.0)
    elif key == "bior1.1":
        # bior1.1 analysis and synthesis pairs are both the Haar pair
        lo = np.array([1.0, 1.0]) / sqrt(2.0)
    elif key == "db2":
        lo = daubechies_lowpass(2)
    elif key == "sym2":
        lo = symlet_lowpass(2)
    elif key == "coif2":
        lo = coiflet_lowpass(2, seed=_COIF2_SEED)
    else:
        raise ValueError(f"unknown wavelet {name!r}; choose from {FILTER_NAMES}")
    spec = FilterSpec.orthonormal(key, lo)
    _FILTER_CACHE[key] = spec
    return spec


# -- 1-D periodized filter bank along the last axis ------------------------


def _analyze(x, lo, hi):
    n = x.shape[-1]
    half = 2 * np.arange(n // 2)
    a = np.zeros(x.shape[:-1] + (n // 2,))
    d = np.zeros_like(a)
    for k in range(len(lo)):
        xs = x[..., (half + k) % n]
        a += lo[k] * xs
        d += hi[k] * xs
    return a, d


def _synthesize(a, d, lo, hi):
    n = 2 * a.shape[-1]
    half = 2 * np.arange(n // 2)
    x = np.zeros(a.shape[:-1] + (n,))
    for k in range(len(lo)):
        # (half + k) % n has no repeats, so fancy-index += is safe
        x[..., (half + k) % n] += lo[k] * a + hi[k] * d
    return x


def _analyze2(x, spec):
    """One level on even-sized planes ``(..., H, W)`` -> LL, (LH, HL, HH)."""
    if spec.name in ("haar", "bior1.1"):
        p = x[..., 0::2, 0::2]
        q = x[..., 0::2, 1::2]
        r = x[..., 1::2, 0::2]
        s = x[..., 1::2, 1::2]
        ll = 0.5 * (p + q + r + s)
        lh = 0.5 * (p - q + r - s)
        hl = 0.5 * (p + q - r - s)
        hh = 0.5 * (p - q - r + s)
        return ll, np.stack([lh, hl, hh])
    lo, hi = np.asarray(spec.dec_lo), np.asarray(spec.dec_hi)
    row_lo, row_hi = _analyze(x, lo, hi)  # along W
    ll, hl = _analyze(np.swapaxes(row_lo, -1, -2), lo, hi)
    lh, hh = _analyze(np.swapaxes(row_hi, -1, -2), lo, hi)
    sw = lambda t: np.swapaxes(t, -1, -2)  # noqa: E731
    return sw(ll), np.stack([sw(lh), sw(hl), sw(hh)])


def _synthesize2(ll, details, spec):
    lh, hl, hh = details
    if spec.name in ("haar", "bior1.1"):
        shape = ll.shape[:-2] + (2 * ll.shape[-2], 2 * ll.shape[-1])
        x = np.empty(shape)
        x[..., 0::2, 0::2] = 0.5 * (ll + lh + hl + hh)
        x[..., 0::2, 1::2] = 0.5 * (ll - lh + hl - hh)
        x[..., 1::2, 0::2] = 0.5 * (ll + lh - hl - hh)
        x[..., 1::2, 1::2] = 0.5 * (ll - lh - hl + hh)
        return x
    lo, hi = np.asarray(spec.rec_lo), np.asarray(spec.rec_hi)
    sw = lambda t: np.swapaxes(t, -1, -2)  # noqa: E731
    row_lo = sw(_synthesize(sw(ll), sw(hl), lo, hi))
    row_hi = sw(_synthesize(sw(lh), sw(hh), lo, hi))
    return _synthesize(row_lo, row_hi, lo, hi)


# -- pyramid ---------------------------------------------------------------


@dataclass
class WaveletPyramid:
    """S-level decomposition of a planar image.

    ``details[k-1]`` holds the (LH, HL, HH) planes of scale k stacked as
    ``(3, C, h_k, w_k)``; ``approx`` is the coarsest approximation ``(C, h_S, w_S)``.
    ``shapes[k-1]`` is the (H, W) of the plane that level k decomposed.
    """

    approx: np.ndarray
    details: list
    filter: FilterSpec
    shapes: list = field(default_factory=list)

    @property
    def levels(self):
        return len(self.details)

    def bands(self, order="fine_to_coarse"):
        """Subband arrays as a list.

        ``fine_to_coarse``: [H_1, ..., H_S, L_S] (index k = 1..S+1).
        ``coarse_to_fine``: [L_S, H_S, ..., H_1].
        """
        fine = list(self.details) + [self.approx]
        if order == "fine_to_coarse":
            return fine
        if order == "coarse_to_fine":
            return [self.approx] + list(self.details[::-1])
        raise ValueError(f"unknown band order {order!r}")

    def with_bands(self, bands):
        """New pyramid with the same geometry and ``bands`` in fine-to-coarse order."""
        if len(bands) != self.levels + 1:
            raise ValueError("band count does not match pyramid depth")
        for old, new in zip(self.bands(), bands):
            if np.shape(new) != old.shape:
                raise ValueError(f"band shape {np.shape(new)} != {old.shape}")
        return WaveletPyramid(np.asarray(bands[-1]), [np.asarray(b) for b in bands[:-1]], self.filter, list(self.shapes))

    def map(self, fn):
        return self.with_bands([fn(b) for b in self.bands()])

    def vdot(self, other):
        return float(sum(np.vdot(a, b) for a, b in zip(self.bands(), other.bands())))

    def energy(self):
        return float(sum(np.sum(b**2) for b in self.bands()))

    def detail(self, k, orientation):
        return self.details[k - 1][ORIENTATIONS.index(orientation)]


def plane_shapes(height, width, levels):
    """Subband plane sizes per scale: ceil(H / 2^k) x ceil(W / 2^k)."""
    return [(-(-height // 2**k), -(-width // 2**k)) for k in range(1, levels + 1)]


def _check_levels(shape, levels):
    if levels < 1:
        raise ValueError("levels must be >= 1")
    h, w = shape
    for k in range(levels):
        if h < 2 or w < 2:
            raise ValueError(f"{levels} levels too deep for a {shape[0]}x{shape[1]} image")
        h, w = -(-h // 2), -(-w // 2)


def _pad_even(x, mode):
    h, w = x.shape[-2:]
    ph, pw = h % 2, w % 2
    if not (ph or pw):
        return x
    widths = [(0, 0)] * (x.ndim - 2) + [(0, ph), (0, pw)]
    return np.pad(x, widths, mode=mode)


def _decompose(img, spec, levels, pad_mode):
    x = np.asarray(img, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    _check_levels(x.shape[-2:], levels)
    details, shapes = [], []
    for _ in range(levels):
        shapes.append(x.shape[-2:])
        x, d = _analyze2(_pad_even(x, pad_mode), spec)
        details.append(d)
    return WaveletPyramid(x, details, spec, shapes)


def dwt2(img, spec="haar", levels=1):
    """Forward ``levels``-level 2-D DWT of a ``(C, H, W)`` (or ``(H, W)``) array."""
    return _decompose(img, get_filter(spec), levels, "edge")


def dwt2_adjoint(cotangent, spec="haar", levels=1):
    """Adjoint of :func:`idwt2` applied to an image-shaped cotangent.

    Identical to :func:`dwt2` except that odd planes are zero-padded (the
    adjoint of cropping); on even sizes the two coincide for orthonormal banks.
    """
    return _decompose(cotangent, get_filter(spec), levels, "constant")


def idwt2(pyr):
    """Inverse transform; exact reconstruction of the pre-transform planes."""
    spec = pyr.filter
    x = pyr.approx
    for k in range(pyr.levels, 0, -1):
        d = pyr.details[k - 1]
        if d.shape[0] != 3 or d.shape[1:] != x.shape:
            raise ValueError(f"inconsistent plane shapes at scale {k}: {d.shape} vs approx {x.shape}")
        x = _synthesize2(x, d, spec)
        if pyr.shapes:
            h, w = pyr.shapes[k - 1]
            x = x[..., :h, :w]
    return x


def combined_detail_magnitude(pyr, k):
    """|LH_k| + |HL_k| + |HH_k| elementwise, shape ``(C, h_k, w_k)``."""
    if not 1 <= k <= pyr.levels:
        raise ValueError(f"scale {k} outside 1..{pyr.levels}")
    return np.abs(pyr.details[k - 1]).sum(axis=0)
