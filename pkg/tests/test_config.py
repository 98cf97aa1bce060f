from pathlib import Path

import pytest

from tmla.attack import AttackConfig
from tmla.config import ConfigError, dump_config, load_config, parse_lines


def test_defaults_without_sources():
    cfg = load_config()
    assert cfg["attack"] == AttackConfig()
    assert set(cfg) == {"attack", "defense", "codec"}


def test_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nattack.q_in = 50  # trailing\nattack.q_out_offset = 15\ncodec.block = 16\n")
    cfg = load_config(path, ["attack.q_in=48", "defense.init=gaussian"])
    assert cfg["attack"].q_in == 48.0
    assert cfg["attack"].q_out_offset == 15.0
    assert cfg["codec"].block == 16
    assert cfg["defense"].init == "gaussian"


def test_optional_none():
    assert load_config(overrides=["attack.q_out_offset = None"])["attack"].q_out_offset is None


def test_errors_are_consolidated(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("no equals sign\nnodot = 3\nattack.bogus = 1\nvideo.fps = 30\nattack.levels = many\n")
    with pytest.raises(ConfigError) as exc:
        load_config(path, ["attack.lr = -1"])
    errors = exc.value.errors
    assert len(errors) == 6
    text = str(exc.value)
    for needle in ("expected", "section prefix", "unknown key attack.bogus", "unknown section", "attack.levels", "lr must be positive"):
        assert needle in text


def test_validation_errors_each_listed():
    with pytest.raises(ConfigError) as exc:
        load_config(overrides=["codec.q_fine = 5", "defense.iters = 0"])
    assert any("codec:" in e for e in exc.value.errors)
    assert any("defense:" in e for e in exc.value.errors)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.cfg")


def test_dump_roundtrip(tmp_path):
    cfg = load_config(overrides=["attack.q_out_offset=12.5", "attack.wavelet=db2", "codec.tau=0.02"])
    path = tmp_path / "dump.cfg"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_parse_lines_keeps_last():
    entries, errors = parse_lines(["a.b = 1", "a.b = 2"])
    assert entries == {("a", "b"): "2"} and errors == []


def test_shipped_config_files():
    root = Path(__file__).resolve().parents[1] / "configs"
    assert load_config(root / "default.cfg") == load_config()
    surrogate = load_config(root / "surrogate.cfg")["attack"]
    assert (surrogate.q_in, surrogate.q_out_offset, surrogate.lr) == (50.0, 15.0, 3e-3)
