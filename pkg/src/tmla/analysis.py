"""Scale-factor estimation, entropy/vulnerability studies and result tables."""

import csv
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .entropy import correlation
from .metrics import psnr, relative_vif_drop, report
from .wavelet import dwt2

SUMMARY_COLUMNS = ("method", "model", "stealth_psnr", "stealth_vif", "atk_psnr", "atk_ssim", "atk_vif", "bpp")
METRIC_COLUMNS = SUMMARY_COLUMNS[2:]
RESULT_COLUMNS = (
    "image",
    "method",
    "model",
    "stealth_psnr",
    "stealth_ssim",
    "stealth_vif",
    "atk_psnr",
    "atk_ssim",
    "atk_vif",
    "bpp",
    "clean_psnr",
    "q_in",
    "q_out",
    "iterations",
    "converged",
    "final_stealth_psnr",
    "final_atk_psnr",
    "status",
)


# -- alpha ------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaEstimate:
    """Per-image median scale ratios and their dataset mean."""

    rho: list
    mean: float
    levels: int
    maxima: list


def subband_maxima(pyr):
    """[m_1 .. m_S, m_{S+1}]: max |coefficient| per detail scale (orientations and
    channels pooled), then the approximation band."""
    out = [float(np.max(np.abs(d))) for d in pyr.details]
    out.append(float(np.max(np.abs(pyr.approx))))
    return out


def scale_ratios(maxima):
    """r_k = m_{k+1} / m_k, skipping scales whose maximum is zero."""
    ratios = []
    for k in range(len(maxima) - 1):
        if maxima[k] == 0.0:
            warnings.warn(f"flat subband at scale {k + 1}; ratio skipped", stacklevel=2)
            continue
        ratios.append(maxima[k + 1] / maxima[k])
    return ratios


def estimate_alpha(images, levels=5, spec="haar"):
    """Empirical inter-scale growth factor of Haar coefficient maxima."""
    rho, maxima = [], []
    for img in images:
        m = subband_maxima(dwt2(img, spec, levels))
        r = scale_ratios(m)
        if not r:
            raise ValueError("image has no usable scale ratio")
        maxima.append(m)
        rho.append(float(np.median(r)))
    if not rho:
        raise ValueError("empty image list")
    return AlphaEstimate(rho=rho, mean=float(np.mean(rho)), levels=levels, maxima=maxima)


# -- entropy vs. vulnerability ---------------------------------------------------------


@dataclass(frozen=True)
class StudyReport:
    entropy: list
    vif_drop: list
    correlation: object


def vif_drop_study(results, entropy_scores, scatter_path=None):
    """Correlate per-image relative VIF drop with mean local entropy."""
    if len(results) != len(entropy_scores):
        raise ValueError("results and entropy scores differ in length")
    drops = [relative_vif_drop(r.stealth.vif, r.success.vif) for r in results]
    scores = [float(s) for s in entropy_scores]
    corr = correlation(scores, drops)
    if scatter_path is not None:
        write_csv(scatter_path, ("mu_e", "vif_drop"), [dict(mu_e=s, vif_drop=d) for s, d in zip(scores, drops)])
    return StudyReport(entropy=scores, vif_drop=drops, correlation=corr)


# -- tables ---------------------------------------------------------------------------


def result_row(image, model, result=None, error=None):
    """One results.csv row; ``error`` marks a failed image."""
    row = OrderedDict((c, "") for c in RESULT_COLUMNS)
    row["image"] = image
    row["model"] = model
    if result is None:
        row["status"] = f"error: {error}"
        return row
    row.update({k: v for k, v in result.summary().items() if k in row})
    row["status"] = "ok"
    return row


def transfer_row(image, model, result, x_hat, bpp, x_hat_clean):
    """Row for an attack crafted on one codec and evaluated on another.

    Stealth metrics carry over; success metrics, bpp and the clean
    reconstruction PSNR come from the evaluation codec's outputs.
    """
    row = result_row(image, model, result)
    success = report(result.x_adv, x_hat)
    row.update(
        atk_psnr=success.psnr,
        atk_ssim=success.ssim,
        atk_vif=success.vif,
        bpp=bpp,
        clean_psnr=psnr(x_hat_clean, result.x),
        final_stealth_psnr="",
        final_atk_psnr="",
    )
    return row


def summary_table(rows, group_by=("method", "model")):
    """Mean and population std per group of the table metrics.

    Emits two rows per group (``stat`` = mean, std) with the fixed column order
    method, model, stealth_psnr, stealth_vif, atk_psnr, atk_ssim, atk_vif, bpp.
    """
    rows = [r for r in rows if r.get("status", "ok") == "ok"]
    if not rows:
        raise ValueError("no rows to summarize")
    groups = OrderedDict()
    for r in rows:
        groups.setdefault(tuple(r.get(k, "") for k in group_by), []).append(r)
    out = []
    for key, members in groups.items():
        ident = dict(zip(group_by, key))
        values = {c: np.array([float(m[c]) for m in members]) for c in METRIC_COLUMNS}
        for stat, fn in (("mean", np.mean), ("std", np.std)):
            row = OrderedDict((c, ident.get(c, "")) for c in SUMMARY_COLUMNS[:2])
            row.update((c, float(fn(values[c]))) for c in METRIC_COLUMNS)
            row["stat"] = stat
            row["n"] = len(members)
            out.append(row)
    return out


def format_value(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        return f"{float(v):.6g}"
    return str(v)


def write_csv(path, columns, rows, comment=None):
    """UTF-8 CSV with a header row; floats at 6 significant digits."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(r.get(c, "")) for c in columns])
    return path


def write_summary(path, rows):
    return write_csv(path, SUMMARY_COLUMNS + ("stat", "n"), rows, comment="std is the population standard deviation (divisor N)")


def read_csv(path):
    with Path(path).open(encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
