"""Adam, the composite attack loss, and its hand-composed gradient chain.

The backward pass mirrors the forward pipeline

    N -> log-exp(W, N) -> synthesis (iDWT) -> clip[0,1] -> codec -> PSNR terms

and is assembled from the individual VJPs:

    |.|' -> psnr_vjp -> codec.vjp (output term only) -> clip_vjp
         -> synthesis adjoint -> log_exp_vjp  (+ lambda * sign(N)).
"""

from dataclasses import dataclass

import numpy as np

from .codec import clip_vjp
from .metrics import psnr, psnr_vjp
from .perturb import NoisePyramid, log_exp_apply, log_exp_vjp
from .wavelet import dwt2_adjoint, idwt2


class Adam:
    """Bias-corrected Adam for a list of arrays (minimization)."""

    def __init__(self, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params, grads):
        if len(params) != len(grads):
            raise ValueError("params/grads length mismatch")
        for p, g in zip(params, grads):
            if np.shape(p) != np.shape(g):
                raise ValueError(f"shape mismatch {np.shape(p)} vs {np.shape(g)}")
        if self.m is None:
            self.m = [np.zeros_like(p, dtype=np.float64) for p in params]
            self.v = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            out.append(p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


class SGD:
    """Plain gradient step p <- p - lr * g."""

    def __init__(self, lr=1e-2):
        self.lr = lr
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        return [p - self.lr * g for p, g in zip(params, grads)]


def make_optimizer(kind, lr):
    if kind == "adam":
        return Adam(lr)
    if kind == "sgd":
        return SGD(lr)
    raise ValueError(f"unknown optimizer {kind!r}")


def _abs_grad(z):
    # subgradient of |z| at 0 taken as 0
    return float(np.sign(z))


# -- perturbation domains ----------------------------------------------------


class WaveletDomain:
    """Perturb the subbands of an S-level DWT of ``x``."""

    def __init__(self, x, spec, levels):
        from .wavelet import dwt2

        self.pyramid = dwt2(x, spec, levels)
        self.levels = levels

    @property
    def bands(self):
        return self.pyramid.bands()

    def synthesize(self, bands):
        return idwt2(self.pyramid.with_bands(bands))

    def synthesize_adjoint(self, cotangent):
        return dwt2_adjoint(cotangent, self.pyramid.filter, self.levels).bands()


class PixelDomain:
    """Perturb pixel values directly (a single 'band', no transform)."""

    levels = 0

    def __init__(self, x):
        self._x = np.asarray(x, dtype=np.float64)

    @property
    def bands(self):
        return [self._x]

    def synthesize(self, bands):
        return bands[0]

    def synthesize_adjoint(self, cotangent):
        return [cotangent]


# -- loss ----------------------------------------------------------------------


@dataclass
class LossState:
    x_adv_raw: np.ndarray
    x_adv: np.ndarray
    x_hat: np.ndarray
    bpp: float
    psnr_in: float
    psnr_out: float
    loss: float


def tmla_loss(x, x_adv, x_hat, noise, cfg):
    """|PSNR(x_hat, x) - Q_out| + |PSNR(x_adv, x) - Q_in| + lambda * sum ||N_k||_1."""
    return abs(psnr(x_hat, x) - cfg.q_out) + abs(psnr(x_adv, x) - cfg.q_in) + cfg.lam * noise.l1()


def tmla_forward(x, domain, noise, codec, cfg):
    bands = [log_exp_apply(w, n) for w, n in zip(domain.bands, noise.bands)]
    x_adv_raw = domain.synthesize(bands)
    x_adv = np.clip(x_adv_raw, 0.0, 1.0)
    x_hat, bpp = codec.forward(x_adv)
    p_in, p_out = psnr(x_adv, x), psnr(x_hat, x)
    loss = abs(p_out - cfg.q_out) + abs(p_in - cfg.q_in) + cfg.lam * noise.l1()
    return LossState(x_adv_raw, x_adv, x_hat, bpp, p_in, p_out, loss)


def tmla_grad(x, domain, noise, codec, cfg, codec_weight=1.0, state=None):
    """Loss state and exact (sub)gradient of the loss w.r.t. every noise band.

    ``codec_weight`` scales the output-PSNR term; 0 drops the codec path.
    """
    if state is None:
        state = tmla_forward(x, domain, noise, codec, cfg)
    # d loss / d x_adv, both PSNR terms seeded in one cotangent
    g_img = psnr_vjp(state.x_adv, x, _abs_grad(state.psnr_in - cfg.q_in))
    if codec_weight:
        c_out = codec_weight * _abs_grad(state.psnr_out - cfg.q_out)
        if c_out:
            g_hat = psnr_vjp(state.x_hat, x, c_out)
            g_img = g_img + codec.vjp(state.x_adv, g_hat)
    g_raw = clip_vjp(state.x_adv_raw, g_img)
    g_bands = domain.synthesize_adjoint(g_raw)
    grads = []
    for w, n, gb in zip(domain.bands, noise.bands, g_bands):
        grads.append(log_exp_vjp(w, n, gb) + cfg.lam * np.sign(n))
    return state, NoisePyramid(grads, list(noise.bounds))


# -- finite-difference checking -------------------------------------------------


def central_difference(fn, x, index, h):
    xp = x.copy()
    xm = x.copy()
    xp[index] += h
    xm[index] -= h
    return (fn(xp) - fn(xm)) / (2 * h)


def relative_error(a, b, floor=1e-12):
    return abs(a - b) / max(abs(a), abs(b), floor)


def check_gradient(fn, x, grad, n_coords=50, h=1e-6, rng=None, floor=1e-12):
    """Compare ``grad`` with central differences of scalar ``fn`` at random coordinates.

    Returns an array of relative errors, one per sampled coordinate.
    """
    rng = np.random.default_rng(rng)
    x = np.asarray(x, dtype=np.float64)
    flat = rng.choice(x.size, size=min(n_coords, x.size), replace=False)
    errs = []
    for f in flat:
        idx = np.unravel_index(f, x.shape)
        fd = central_difference(fn, x, idx, h)
        errs.append(relative_error(float(grad[idx]), fd, floor))
    return np.array(errs)
