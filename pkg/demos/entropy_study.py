"""Local entropy versus VIF drop over a synthetic set spanning smooth to busy scenes.

Usage: python3 demos/entropy_study.py [MAX_ITERS]
"""

import sys

from tmla import AttackConfig, SurrogateCodec, batch_attack
from tmla.analysis import vif_drop_study
from tmla.entropy import mean_entropy
from tmla.fixtures import mixed_entropy_set


def main(max_iters=300):
    images = mixed_entropy_set()
    codec = SurrogateCodec()
    cfg = AttackConfig(q_in=50.0, q_out_offset=15.0, lr=3e-3, max_iters=max_iters)
    results = batch_attack(images, codec, cfg)
    scores = [mean_entropy(x) for x in images]
    rep = vif_drop_study(results, scores)
    print(f"{'mu_E':>6}{'VIF drop':>10}")
    for s, d in zip(rep.entropy, rep.vif_drop):
        print(f"{s:>6.3f}{d:>10.3f}")
    c = rep.correlation
    print(f"pearson r = {c.pearson:.3f} (p = {c.p_value:.3g}), spearman rho = {c.spearman:.3f}, n = {c.n}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 300)
