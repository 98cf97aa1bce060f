"""Targeted multiscale log-exp attacks on a differentiable surrogate image codec."""

__version__ = "0.1.0"

from .attack import AttackConfig, AttackResult, batch_attack, run_pgd, run_pixel_logexp, run_tmla
from .codec import SurrogateCodec, SurrogateCodecParams
from .defense import DefenseConfig, run_defense
from .metrics import MetricReport, psnr, ssim, vif
from .wavelet import dwt2, idwt2

__all__ = [
    "AttackConfig",
    "AttackResult",
    "DefenseConfig",
    "MetricReport",
    "SurrogateCodec",
    "SurrogateCodecParams",
    "batch_attack",
    "dwt2",
    "idwt2",
    "psnr",
    "run_defense",
    "run_pgd",
    "run_pixel_logexp",
    "run_tmla",
    "ssim",
    "vif",
]
