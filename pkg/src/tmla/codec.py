"""Differentiable codec contract, the surrogate codec, and an external-codec bridge.

A codec is any object exposing

* ``forward(x) -> (x_hat, bpp)``
* ``vjp(x, cotangent) -> gradient`` (gradient of <cotangent, x_hat(x)> w.r.t. x)
* ``descriptor`` -- a string naming the codec and digesting its parameters

The surrogate is a blockwise DCT coder whose quantizer step is switched by a
smooth activity gate: blocks whose mean high-frequency magnitude crosses a
threshold fall into coarse quantization. Small input changes near the
threshold therefore cause large reconstruction errors, which is the kind of
sensitivity a learned entropy model exposes to an attacker.
"""

import hashlib
import json
import shutil
import subprocess
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .image_io import load_image, save_image


_KINK_EPS = 1e-12


class CodecError(RuntimeError):
    pass


def dct_matrix(n):
    """Orthonormal DCT-II matrix (rows are basis vectors)."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    d = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    d[0] /= np.sqrt(2.0)
    return d


def softround(z):
    """Smooth rounding surrogate z - sin(2 pi z) / (2 pi); exact at integers."""
    return z - np.sin(2 * np.pi * z) / (2 * np.pi)


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def clip_vjp(x, cotangent, lo=0.0, hi=1.0):
    """Subgradient of clip: 1 inside, 0 outside, 0.5 on the boundary."""
    mask = np.where((x > lo) & (x < hi), 1.0, 0.0)
    mask[(x == lo) | (x == hi)] = 0.5
    return cotangent * mask


def symbol_entropy_bits(symbols):
    """Total Shannon information (bits) of a symbol stream under its own histogram."""
    _, counts = np.unique(np.asarray(symbols).ravel(), return_counts=True)
    p = counts / counts.sum()
    return float(-(counts * np.log2(p)).sum())


@dataclass(frozen=True)
class SurrogateCodecParams:
    block: int = 8
    q_fine: float = 0.05
    q_coarse: float = 2.0
    tau: float = 0.018
    sharpness: float = 800.0
    hf_cut: int = 12
    seed: int = 0

    def validate(self):
        errors = []
        if self.block < 2:
            errors.append("block must be >= 2")
        if not self.q_fine > 0:
            errors.append("q_fine must be positive")
        if not self.q_fine < self.q_coarse:
            errors.append("q_fine must be smaller than q_coarse")
        if not self.sharpness > 0:
            errors.append("sharpness must be positive")
        if not 1 <= self.hf_cut <= 2 * self.block - 2:
            errors.append("hf_cut must lie in [1, 2 * block - 2]")
        if errors:
            raise ValueError("; ".join(errors))
        return self


class SurrogateCodec:
    """Activity-gated blockwise DCT quantizer with an exact VJP."""

    def __init__(self, params=None, **overrides):
        params = params or SurrogateCodecParams()
        if overrides:
            params = SurrogateCodecParams(**{**asdict(params), **overrides})
        self.params = params.validate()
        self._dct = dct_matrix(params.block)
        u, v = np.mgrid[0 : params.block, 0 : params.block]
        # activity band: DCT coefficients with u + v >= hf_cut
        self._hf = (u + v >= params.hf_cut).astype(np.float64)

    @property
    def descriptor(self):
        blob = json.dumps(asdict(self.params), sort_keys=True).encode()
        return f"surrogate-dct-gate:{hashlib.sha256(blob).hexdigest()[:16]}"

    # -- geometry ----------------------------------------------------------

    def _padded_index(self, n):
        b = self.params.block
        m = -(-n // b) * b
        return np.minimum(np.arange(m), n - 1)

    def _to_blocks(self, x):
        c, h, w = x.shape
        b = self.params.block
        return x.reshape(c, h // b, b, w // b, b).transpose(0, 1, 3, 2, 4)

    def _from_blocks(self, blocks):
        c, nh, nw, b, _ = blocks.shape
        return blocks.transpose(0, 1, 3, 2, 4).reshape(c, nh * b, nw * b)

    # -- forward -----------------------------------------------------------

    def _forward_parts(self, x):
        p = self.params
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        ri, ci = self._padded_index(x.shape[1]), self._padded_index(x.shape[2])
        xp = x[:, ri][:, :, ci]
        d = self._dct
        y = np.einsum("ij,...jk,lk->...il", d, self._to_blocks(xp), d)
        activity = np.sum(np.abs(y) * self._hf, axis=(-2, -1)) / self._hf.sum()
        gate = _sigmoid(p.sharpness * (activity - p.tau))
        q = (p.q_fine + gate * (p.q_coarse - p.q_fine))[..., None, None]
        z = y / q
        y_q = q * softround(z)
        rec_blocks = np.einsum("ji,...jk,kl->...il", d, y_q, d)
        rec = self._from_blocks(rec_blocks)[:, : x.shape[1], : x.shape[2]]
        return dict(x=x, ri=ri, ci=ci, y=y, gate=gate, q=q, z=z, rec=rec)

    def forward(self, x):
        """Reconstruction in [0, 1] and entropy-estimated bits per pixel."""
        parts = self._forward_parts(x)
        x_hat = np.clip(parts["rec"], 0.0, 1.0)
        symbols = np.rint(parts["z"])
        h, w = parts["x"].shape[1:]
        bpp = symbol_entropy_bits(symbols) / (h * w)
        return x_hat, bpp

    def reconstruct(self, x):
        return self.forward(x)[0]

    def block_gates(self, x):
        return self._forward_parts(x)["gate"]

    # -- backward ----------------------------------------------------------

    def vjp(self, x, cotangent):
        """Gradient of <cotangent, forward(x)[0]> with respect to ``x``."""
        p = self.params
        parts = self._forward_parts(x)
        xs = parts["x"]
        g_rec = clip_vjp(parts["rec"], np.asarray(cotangent, dtype=np.float64).reshape(xs.shape))
        # un-crop into the padded frame
        hp, wp = len(parts["ri"]), len(parts["ci"])
        g_pad = np.zeros((xs.shape[0], hp, wp))
        g_pad[:, : xs.shape[1], : xs.shape[2]] = g_rec
        d = self._dct
        g_yq = np.einsum("ij,...jk,lk->...il", d, self._to_blocks(g_pad), d)
        y, q, z, gate = parts["y"], parts["q"], parts["z"], parts["gate"]
        two_pi_z = 2 * np.pi * z
        g_y = g_yq * (1.0 - np.cos(two_pi_z))
        # d(q * softround(y / q)) / dq = softround(z) - z * softround'(z)
        dq = softround(z) - z * (1.0 - np.cos(two_pi_z))
        g_q = np.sum(g_yq * dq, axis=(-2, -1))
        g_act = g_q * (p.q_coarse - p.q_fine) * p.sharpness * gate * (1.0 - gate)
        # |y| subgradient; coefficients at rounding-noise level count as exact zeros
        sign_y = np.where(np.abs(y) > _KINK_EPS, np.sign(y), 0.0)
        g_y = g_y + g_act[..., None, None] * sign_y * self._hf / self._hf.sum()
        g_xp = self._from_blocks(np.einsum("ji,...jk,kl->...il", d, g_y, d))
        # adjoint of edge-replicating pad: accumulate into source rows/cols
        g_rows = np.zeros((xs.shape[0], xs.shape[1], wp))
        np.add.at(g_rows, (slice(None), parts["ri"]), g_xp)
        g_x = np.zeros_like(xs)
        np.add.at(g_x, (slice(None), slice(None), parts["ci"]), g_rows)
        return g_x


class ExternalCodec:
    """Evaluation-only bridge to an external codec process.

    The command is called as ``command input.png output.png`` and must print
    the bitrate (bits per pixel, decimal) on standard output.
    """

    def __init__(self, command, timeout=300.0):
        if isinstance(command, str):
            command = command.split()
        self.command = list(command)
        self.timeout = timeout

    @property
    def descriptor(self):
        return "external:" + " ".join(self.command)

    def forward(self, x):
        return external_codec_eval(x, self.command, timeout=self.timeout)

    def vjp(self, x, cotangent):
        raise NotImplementedError("external codecs provide no gradients; use them for evaluation only")


def external_codec_eval(x, command, timeout=300.0):
    """Run an external codec on ``x``; returns ``(x_hat, bpp)``."""
    if isinstance(command, str):
        command = command.split()
    if not command or shutil.which(command[0]) is None and not Path(command[0]).exists():
        raise CodecError(f"codec command not found: {command[:1]}")
    with tempfile.TemporaryDirectory(prefix="tmla-codec-") as tmp:
        src = Path(tmp) / "input.png"
        dst = Path(tmp) / "output.png"
        save_image(x, src)
        try:
            proc = subprocess.run(
                [*command, str(src), str(dst)], capture_output=True, text=True, timeout=timeout, check=False
            )
        except subprocess.TimeoutExpired as exc:
            raise CodecError(f"codec timed out after {timeout}s") from exc
        if proc.returncode != 0:
            raise CodecError(f"codec exited with status {proc.returncode}: {proc.stderr.strip()}")
        try:
            bpp = float(proc.stdout.strip().split()[-1])
        except (ValueError, IndexError) as exc:
            raise CodecError(f"codec printed no bpp value: {proc.stdout!r}") from exc
        if not dst.exists():
            raise CodecError("codec wrote no reconstruction")
        x_hat = load_image(dst)
    if x_hat.shape != np.shape(x):
        raise CodecError(f"reconstruction shape {x_hat.shape} != input {np.shape(x)}")
    return x_hat, bpp
