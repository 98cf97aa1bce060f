"""Attack drivers: the multiscale log-exp attack and its two baselines.

* ``run_tmla`` -- log-exp noise on every DWT subband with scale-adaptive
  budgets, optimized with Adam against the two-sided PSNR loss.
* ``run_pixel_logexp`` -- the same loss and optimizer, perturbing pixels
  directly under a single budget (no transform).
* ``run_pgd`` -- l-inf projected sign-gradient ascent on output distortion.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .metrics import MetricReport, psnr, psnr_vjp, report
from .optim import PixelDomain, WaveletDomain, make_optimizer, tmla_forward, tmla_grad
from .perturb import NoisePyramid, budget_schedule, clip_noise
from .wavelet import FILTER_NAMES

METHODS = ("tmla", "pixel_logexp", "pgd")


@dataclass(frozen=True)
class AttackConfig:
    """Attack hyperparameters.

    ``q_out_offset``, when set, overrides ``q_out`` per image with
    ``PSNR(codec(x), x) - q_out_offset``.
    """

    q_in: float = 55.0
    q_out: float = 25.0
    q_out_offset: float | None = None
    tol_in: float = 2.0
    tol_out: float = 2.0
    levels: int = 3
    wavelet: str = "haar"
    delta: float = 0.03
    alpha: float = 1.8
    lr: float = 1e-2
    lam: float = 1e-4
    max_iters: int = 2000
    optimizer: str = "adam"
    init: str = "gaussian"
    seed: int = 0
    pgd_iters: int = 200
    pgd_step: float | None = None

    def validate(self):
        errors = []
        if self.levels < 1:
            errors.append("levels must be >= 1")
        if not self.delta >= 0:
            errors.append("delta must be non-negative (0 is an empty budget)")
        if not self.alpha > 0:
            errors.append("alpha must be positive")
        elif self.delta > 0 and self.levels >= 1 and not self.delta * self.alpha ** (self.levels - 1) < 1:
            errors.append(
                f"finest budget delta*alpha**(S-1) = {self.delta * self.alpha ** (self.levels - 1):.4g} must be < 1"
            )
        if not self.lr > 0:
            errors.append("lr must be positive")
        if self.lam < 0:
            errors.append("lam must be non-negative")
        if self.max_iters < 0 or self.pgd_iters < 0:
            errors.append("iteration counts must be non-negative")
        if not (self.tol_in > 0 and self.tol_out > 0):
            errors.append("tolerances must be positive")
        if self.wavelet not in FILTER_NAMES:
            errors.append(f"unknown wavelet {self.wavelet!r}; choose from {FILTER_NAMES}")
        if self.optimizer not in ("adam", "sgd"):
            errors.append("optimizer must be 'adam' or 'sgd'")
        if self.init not in ("gaussian", "zeros"):
            errors.append("init must be 'gaussian' or 'zeros'")
        if self.pgd_step is not None and not self.pgd_step > 0:
            errors.append("pgd_step must be positive")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    def as_dict(self):
        return asdict(self)


@dataclass
class AttackResult:
    method: str
    x: np.ndarray
    x_adv: np.ndarray
    x_hat: np.ndarray
    stealth: MetricReport
    success: MetricReport
    bpp: float
    q_in: float
    q_out: float
    iterations: int
    converged: bool
    best_iteration: int
    loss: float
    loss_trace: list = field(default_factory=list)
    noise: NoisePyramid | None = None
    final_stealth_psnr: float = math.nan
    final_success_psnr: float = math.nan
    clean_psnr: float = math.nan

    def summary(self):
        return {
            "method": self.method,
            "stealth_psnr": self.stealth.psnr,
            "stealth_ssim": self.stealth.ssim,
            "stealth_vif": self.stealth.vif,
            "atk_psnr": self.success.psnr,
            "atk_ssim": self.success.ssim,
            "atk_vif": self.success.vif,
            "bpp": self.bpp,
            "iterations": self.iterations,
            "converged": self.converged,
            "loss": self.loss,
            "final_stealth_psnr": self.final_stealth_psnr,
            "final_atk_psnr": self.final_success_psnr,
            "clean_psnr": self.clean_psnr,
            "q_in": self.q_in,
            "q_out": self.q_out,
        }


def _targets(x, codec, cfg):
    clean = psnr(codec.forward(x)[0], x)
    q_out = cfg.q_out if cfg.q_out_offset is None else clean - cfg.q_out_offset
    return replace(cfg, q_out=q_out), clean


def _in_band(state, cfg):
    return abs(state.psnr_in - cfg.q_in) <= cfg.tol_in and abs(state.psnr_out - cfg.q_out) <= cfg.tol_out


def _finish(method, x, best, cfg, iterations, converged, trace, final_state, clean):
    state, noise, it = best
    return AttackResult(
        method=method,
        x=x,
        x_adv=state.x_adv,
        x_hat=state.x_hat,
        stealth=report(x, state.x_adv),
        success=report(x, state.x_hat),
        bpp=state.bpp,
        q_in=cfg.q_in,
        q_out=cfg.q_out,
        iterations=iterations,
        converged=converged,
        best_iteration=it,
        loss=state.loss,
        loss_trace=trace,
        noise=noise,
        final_stealth_psnr=final_state.psnr_in,
        final_success_psnr=final_state.psnr_out,
        clean_psnr=clean,
    )


def _optimize(method, x, domain, bounds, codec, cfg, select="loss"):
    """Shared loop of the log-exp attacks.

    ``select="loss"`` returns the lowest-loss iterate and stops once that
    iterate is inside both tolerance bands. ``select="stealth"`` runs all
    ``max_iters`` steps and returns the stealthiest iterate whose output PSNR
    is within ``tol_out`` of ``q_out`` (falling back to the lowest loss).
    """
    if select not in ("loss", "stealth"):
        raise ValueError("select must be 'loss' or 'stealth'")
    cfg, clean = _targets(x, codec, cfg)
    rng = np.random.default_rng(cfg.seed)
    bands = domain.bands
    if cfg.init == "gaussian":
        noise = NoisePyramid.gaussian(bands, bounds, rng)
    else:
        noise = NoisePyramid.zeros_like(bands, bounds)
    opt = make_optimizer(cfg.optimizer, cfg.lr)
    best = matched = None
    trace = []
    converged = False
    t = 0
    while True:
        noise = clip_noise(noise)
        state = tmla_forward(x, domain, noise, codec, cfg)
        trace.append((state.loss, state.psnr_in, state.psnr_out))
        is_best = best is None or state.loss <= best[0].loss
        if is_best:
            best = (state, noise.copy(), t)
        if abs(state.psnr_out - cfg.q_out) <= cfg.tol_out and (matched is None or state.psnr_in > matched[0].psnr_in):
            matched = (state, noise.copy(), t)
        # stop once an in-band iterate is also the best so far
        if select == "loss" and is_best and _in_band(state, cfg):
            converged = True
            break
        if t >= cfg.max_iters:
            break
        _, grad = tmla_grad(x, domain, noise, codec, cfg, state=state)
        noise = NoisePyramid(opt.step(noise.bands, grad.bands), noise.bounds)
        t += 1
    if select == "stealth":
        converged = matched is not None
        best = matched or best
    return _finish(method, x, best, cfg, t, converged, trace, state, clean)


def run_tmla(x, codec, cfg=None, select="loss"):
    """Multiscale log-exp attack on image ``x`` (C, H, W) against ``codec``."""
    cfg = (cfg or AttackConfig()).validate()
    x = np.asarray(x, dtype=np.float64)
    domain = WaveletDomain(x, cfg.wavelet, cfg.levels)
    bounds = budget_schedule(cfg.delta, cfg.alpha, cfg.levels)
    return _optimize("tmla", x, domain, bounds, codec, cfg, select)


def run_pixel_logexp(x, codec, cfg=None, select="loss"):
    """Log-exp attack in the pixel domain with the single budget ``delta``."""
    cfg = (cfg or AttackConfig()).validate()
    x = np.asarray(x, dtype=np.float64)
    return _optimize("pixel_logexp", x, PixelDomain(x), [cfg.delta], codec, cfg, select)


def run_pgd(x, codec, cfg=None):
    """l-inf PGD that lowers PSNR(codec(x_adv), x) under ||x_adv - x||_inf <= delta.

    Steps of size ``pgd_step`` (default delta / 10) along the gradient sign.
    Stops early once the output PSNR reaches the ``q_out + tol_out`` band,
    so its stealth can be compared at matched attack strength.
    """
    cfg = (cfg or AttackConfig()).validate()
    x = np.asarray(x, dtype=np.float64)
    cfg, clean = _targets(x, codec, cfg)
    step = cfg.pgd_step if cfg.pgd_step is not None else cfg.delta / 10.0
    x_adv = x.copy()
    trace = []
    converged = False
    t = 0
    while True:
        x_hat, bpp = codec.forward(x_adv)
        p_out = psnr(x_hat, x)
        trace.append(p_out)
        if p_out <= cfg.q_out + cfg.tol_out:
            converged = True
            break
        if t >= cfg.pgd_iters:
            break
        # ascend distortion = descend output PSNR
        g = codec.vjp(x_adv, psnr_vjp(x_hat, x, -1.0))
        x_adv = np.clip(x + np.clip(x_adv + step * np.sign(g) - x, -cfg.delta, cfg.delta), 0.0, 1.0)
        t += 1
    stealth = report(x, x_adv)
    success = report(x, x_hat)
    return AttackResult(
        method="pgd",
        x=x,
        x_adv=x_adv,
        x_hat=x_hat,
        stealth=stealth,
        success=success,
        bpp=bpp,
        q_in=cfg.q_in,
        q_out=cfg.q_out,
        iterations=t,
        converged=converged,
        best_iteration=t,
        loss=math.nan,
        loss_trace=trace,
        final_stealth_psnr=stealth.psnr,
        final_success_psnr=success.psnr,
        clean_psnr=clean,
    )


RUNNERS = {"tmla": run_tmla, "pixel_logexp": run_pixel_logexp, "pgd": run_pgd}


def run_attack(method, x, codec, cfg=None):
    try:
        runner = RUNNERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}") from None
    return runner(x, codec, cfg)


def _batch_item(args):
    method, x, codec, cfg = args
    try:
        return run_attack(method, x, codec, cfg)
    except Exception as exc:  # recorded per image, the batch goes on
        return exc


def batch_attack(images, codec, cfg=None, method="tmla", jobs=1):
    """Attack every image; image ``i`` uses seed ``cfg.seed + i``.

    Returns a list holding an ``AttackResult`` or the raised exception per image.
    """
    cfg = (cfg or AttackConfig()).validate()
    tasks = [(method, x, codec, replace(cfg, seed=cfg.seed + i)) for i, x in enumerate(images)]
    if jobs <= 1 or len(tasks) <= 1:
        return [_batch_item(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_batch_item, tasks))
