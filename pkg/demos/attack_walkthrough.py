"""Attack one synthetic scene three ways and compare stealth at matched strength.

Usage: python3 demos/attack_walkthrough.py [OUT_DIR]
"""

import sys
from dataclasses import replace
from pathlib import Path

from tmla import AttackConfig, SurrogateCodec, run_pgd, run_pixel_logexp, run_tmla
from tmla.fixtures import scene
from tmla.image_io import diff_map, save_image


def main(out=None):
    x = scene(64, seed=0)
    codec = SurrogateCodec()
    cfg = AttackConfig(q_in=50.0, q_out_offset=15.0, lr=3e-3, max_iters=400)
    runs = {
        "tmla": run_tmla(x, codec, cfg, select="stealth"),
        "pixel_logexp": run_pixel_logexp(x, codec, cfg, select="stealth"),
        "pgd": run_pgd(x, codec, replace(cfg, delta=0.02)),
    }
    first = next(iter(runs.values()))
    print(f"clean reconstruction {first.clean_psnr:.2f} dB, target {first.q_out:.2f} dB")
    print(f"{'method':<14}{'stealth dB':>11}{'stealth VIF':>12}{'output dB':>10}{'bpp':>7}")
    for name, r in runs.items():
        print(f"{name:<14}{r.stealth.psnr:>11.2f}{r.stealth.vif:>12.3f}{r.success.psnr:>10.2f}{r.bpp:>7.3f}")
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        save_image(x, out / "clean.png")
        for name, r in runs.items():
            save_image(r.x_adv, out / f"{name}_adv.png")
            save_image(r.x_hat, out / f"{name}_recon.png")
            save_image(diff_map(r.x_adv, x), out / f"{name}_diff.png")
        print(f"images written to {out}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
