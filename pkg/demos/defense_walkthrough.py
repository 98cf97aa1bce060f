"""Attack a scene, then learn a small counter-perturbation that restores the codec output.

Usage: python3 demos/defense_walkthrough.py
"""

from tmla import AttackConfig, DefenseConfig, SurrogateCodec, run_defense, run_tmla
from tmla.defense import defense_gain
from tmla.fixtures import scene
from tmla.metrics import psnr


def main():
    x = scene(64, seed=1)
    codec = SurrogateCodec()
    attacked = run_tmla(x, codec, AttackConfig(q_in=50.0, q_out_offset=15.0, lr=3e-3))
    x_adv = attacked.x_adv
    x_hat_adv, _ = codec.forward(x_adv)
    cfg = DefenseConfig()
    res = run_defense(x_adv, codec, cfg)
    print(f"attack: stealth {attacked.stealth.psnr:.2f} dB, output {attacked.success.psnr:.2f} dB vs clean input")
    print(f"codec fidelity to the attacked input: {psnr(x_hat_adv, x_adv):.2f} dB before defense")
    print(f"after defense (|n| <= {cfg.delta}): {psnr(res.x_hat_defended, x_adv):.2f} dB")
    print(f"gain {defense_gain(x_adv, x_hat_adv, res):.2f} dB, noise l-inf {abs(res.noise).max():.4f}")


if __name__ == "__main__":
    main()
