"""Counter-perturbation defense: learn a small pixel noise that restores codec fidelity.

The defender only sees the (possibly attacked) image ``x`` and searches for
``n`` with ``||n||_inf <= delta`` such that ``codec(x + n)`` stays close to
``x``. Updates descend the fidelity loss. The budget can shrink linearly from
``delta`` to ``final_budget * delta`` over the run, so early iterates have room
to pull blocks back into fine quantization and later ones trim the defense
noise itself.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .codec import clip_vjp
from .metrics import psnr, psnr_vjp
from .optim import make_optimizer


@dataclass(frozen=True)
class DefenseConfig:
    delta: float = 0.05
    lr: float = 1e-3
    iters: int = 300
    loss: str = "mse"
    optimizer: str = "adam"
    init: str = "zeros"
    final_budget: float = 1.0
    seed: int = 0

    def validate(self):
        errors = []
        if not 0.0 <= self.final_budget <= 1.0:
            errors.append("final_budget must lie in [0, 1]")
        if self.delta < 0:
            errors.append("delta must be non-negative")
        if not self.lr > 0:
            errors.append("lr must be positive")
        if self.iters < 1:
            errors.append("iters must be >= 1")
        if self.loss not in LOSSES:
            errors.append(f"loss must be one of {sorted(LOSSES)}")
        if self.optimizer not in ("sgd", "adam"):
            errors.append("optimizer must be 'sgd' or 'adam'")
        if self.init not in ("gaussian", "zeros"):
            errors.append("init must be 'gaussian' or 'zeros'")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    def as_dict(self):
        return asdict(self)


def _mse_loss(x_hat, x):
    d = x_hat - x
    return float(np.mean(d * d)), 2.0 * d / d.size


def _neg_psnr_loss(x_hat, x):
    return -psnr(x_hat, x), psnr_vjp(x_hat, x, -1.0)


LOSSES = {"mse": _mse_loss, "neg_psnr": _neg_psnr_loss}


@dataclass
class DefenseResult:
    x_defended: np.ndarray
    x_hat_defended: np.ndarray
    noise: np.ndarray
    objective: float
    initial_objective: float
    best_iteration: int
    trace: list

    def __iter__(self):
        yield from (self.x_defended, self.x_hat_defended, self.noise)


def defense_objective(x, n, codec, loss="mse"):
    x_in = np.clip(x + n, 0.0, 1.0)
    x_hat, _ = codec.forward(x_in)
    return LOSSES[loss](x_hat, x)[0]


def run_defense(x_attacked, codec, cfg=None):
    """Learn ``n`` (``||n||_inf <= delta``) minimizing loss(codec(x + n), x)."""
    cfg = (cfg or DefenseConfig()).validate()
    x = np.asarray(x_attacked, dtype=np.float64)
    loss_fn = LOSSES[cfg.loss]
    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "gaussian" and cfg.delta > 0:
        n = rng.standard_normal(x.shape) * cfg.delta
    else:
        n = np.zeros_like(x)
    opt = make_optimizer(cfg.optimizer, cfg.lr)
    best = None
    trace = []
    for t in range(cfg.iters + 1):
        bound = cfg.delta * (1.0 - (1.0 - cfg.final_budget) * t / cfg.iters)
        n = np.clip(n, -bound, bound)
        x_raw = x + n
        x_in = np.clip(x_raw, 0.0, 1.0)
        x_hat, _ = codec.forward(x_in)
        value, g_hat = loss_fn(x_hat, x)
        if not np.isfinite(value):
            raise FloatingPointError(f"non-finite defense objective at iteration {t}")
        trace.append(value)
        if best is None or value < best[0]:
            best = (value, n.copy(), x_in, x_hat, t)
        if t == cfg.iters:
            break
        grad = clip_vjp(x_raw, codec.vjp(x_in, g_hat))
        (n,) = opt.step([n], [grad])
    value, n_best, x_def, x_hat_def, it = best
    return DefenseResult(
        x_defended=x_def,
        x_hat_defended=x_hat_def,
        noise=n_best,
        objective=value,
        initial_objective=trace[0],
        best_iteration=it,
        trace=trace,
    )


def defense_gain(x_attacked, x_hat_attacked, result):
    """PSNR gain (dB) of the defended reconstruction over the attacked one, both against ``x_attacked``."""
    return psnr(result.x_hat_defended, x_attacked) - psnr(x_hat_attacked, x_attacked)


__all__ = ["DefenseConfig", "DefenseResult", "run_defense", "defense_objective", "defense_gain"]
