from dataclasses import replace

import numpy as np
import pytest

from tmla.attack import AttackConfig, run_tmla
from tmla.codec import SurrogateCodec
from tmla.defense import DefenseConfig, defense_gain, defense_objective, run_defense
from tmla.fixtures import scene

QUICK = DefenseConfig(iters=20)


@pytest.fixture(scope="module")
def small():
    return scene(48, texture=0.6, seed=4)


def test_config_validation():
    with pytest.raises(ValueError) as exc:
        DefenseConfig(delta=-0.1, lr=0.0, iters=0, loss="l1", optimizer="rmsprop", init="uniform").validate()
    for key in ("delta", "lr", "iters", "loss", "optimizer", "init"):
        assert key in str(exc.value)
    assert DefenseConfig(delta=0.0).validate()


def test_zero_noise_single_step_matches_clean_reconstruction(small):
    codec = SurrogateCodec()
    res = run_defense(small, codec, DefenseConfig(delta=0.0, iters=1))
    np.testing.assert_array_equal(res.x_hat_defended, codec.forward(small)[0])
    np.testing.assert_array_equal(res.noise, 0.0)


def test_zero_budget_is_a_no_op(small):
    codec = SurrogateCodec()
    x_def, x_hat, n = run_defense(small, codec, DefenseConfig(delta=0.0, iters=5, init="gaussian"))
    np.testing.assert_array_equal(x_def, small)
    np.testing.assert_array_equal(x_hat, codec.forward(small)[0])
    assert not n.any()


@pytest.mark.parametrize("cfg", [QUICK, replace(QUICK, optimizer="sgd", lr=1e3, init="gaussian"), replace(QUICK, loss="neg_psnr")])
def test_invariants(small, cfg):
    codec = SurrogateCodec()
    res = run_defense(small, codec, cfg)
    assert np.max(np.abs(res.noise)) <= cfg.delta
    assert 0.0 <= res.x_defended.min() and res.x_defended.max() <= 1.0
    assert res.objective <= res.initial_objective
    assert res.objective == pytest.approx(min(res.trace))
    assert len(res.trace) == cfg.iters + 1
    assert res.objective == pytest.approx(defense_objective(small, res.noise, codec, cfg.loss))


def test_defense_recovers_fidelity_after_attack():
    codec = SurrogateCodec()
    x = scene(48, texture=0.6, seed=4)
    atk = run_tmla(x, codec, AttackConfig(q_in=50.0, q_out_offset=10.0, lr=3e-3, max_iters=400))
    res = run_defense(atk.x_adv, codec, DefenseConfig(iters=80))
    assert defense_gain(atk.x_adv, atk.x_hat, res) > 1.0


def test_deterministic(small):
    codec = SurrogateCodec()
    cfg = replace(QUICK, init="gaussian")
    a, b = run_defense(small, codec, cfg), run_defense(small, codec, cfg)
    np.testing.assert_array_equal(a.noise, b.noise)


def test_shrinking_budget(small):
    codec = SurrogateCodec()
    cfg = replace(QUICK, final_budget=0.25, init="gaussian")
    res = run_defense(small, codec, cfg)
    t = res.best_iteration
    assert np.max(np.abs(res.noise)) <= cfg.delta * (1 - 0.75 * t / cfg.iters) + 1e-15
    with pytest.raises(ValueError, match="final_budget"):
        DefenseConfig(final_budget=1.5).validate()
