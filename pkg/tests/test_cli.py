import json
import sys

import numpy as np
import pytest

from tmla import __version__, cli
from tmla.analysis import RESULT_COLUMNS, SUMMARY_COLUMNS, read_csv
from tmla.fixtures import scene
from tmla.image_io import save_image

FAST = ["--set", "attack.max_iters=5", "--set", "attack.pgd_iters=3"]


@pytest.fixture
def manifest(tmp_path):
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    save_image(scene(48, seed=1), img_dir / "one.png")
    (img_dir / "broken.png").write_bytes(b"garbage")
    path = tmp_path / "manifest.txt"
    path.write_text("# test manifest\nimgs/one.png\nfixture:powerlaw:2:48\n")
    return path


def _run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["attack"], ["attack", "--manifest", "m", "--mode", "fgsm"]])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 1


def test_attack_outputs(tmp_path, manifest, capsys):
    out = tmp_path / "run"
    code, stdout, _ = _run(["attack", "--manifest", str(manifest), "--out", str(out), *FAST], capsys)
    assert code == 0
    assert "2/2 images attacked" in stdout
    rows = read_csv(out / "results.csv")
    assert list(rows[0]) == list(RESULT_COLUMNS)
    assert [r["image"] for r in rows] == ["one", "fixture-powerlaw-2-48"]
    assert all(r["status"] == "ok" and r["method"] == "tmla" for r in rows)
    summary = read_csv(out / "summary.csv")
    assert list(summary[0])[: len(SUMMARY_COLUMNS)] == list(SUMMARY_COLUMNS)
    assert [s["stat"] for s in summary] == ["mean", "std"]
    for suffix in ("adv.png", "recon.png", "diff.png", "trace.csv"):
        assert (out / "images" / f"one_{suffix}").exists()
    record = json.loads((out / "run.json").read_text())
    assert record["command"] == "attack" and record["version"] == __version__
    assert record["config"]["attack"]["max_iters"] == 5
    assert record["codec"].startswith("surrogate-dct-gate:")
    assert len(record["inputs"][0]["digest"]) == 64
    assert record["inputs"][1]["digest"] == "fixture:powerlaw:2:48"


def test_partial_failure_exit_2(tmp_path, manifest, capsys):
    manifest.write_text(manifest.read_text() + "imgs/broken.png\nimgs/missing.png\n")
    out = tmp_path / "run"
    code, _, err = _run(["attack", "--manifest", str(manifest), "--out", str(out), "--mode", "pgd", "--no-artifacts", *FAST], capsys)
    assert code == 2
    rows = read_csv(out / "results.csv")
    assert [r["status"].split(":")[0] for r in rows] == ["ok", "ok", "error", "error"]
    assert "broken: failed" in err
    assert not (out / "images").exists()
    assert len(read_csv(out / "summary.csv")) == 2


def test_config_errors_exit_1(tmp_path, manifest, capsys):
    code, _, err = _run(
        ["attack", "--manifest", str(manifest), "--out", str(tmp_path / "r"), "--set", "attack.lr=-1", "--set", "codec.blok=4"],
        capsys,
    )
    assert code == 1
    assert "lr must be positive" in err and "unknown key codec.blok" in err
    assert not (tmp_path / "r").exists()


def test_existing_output_needs_force(tmp_path, manifest, capsys):
    out = tmp_path / "run"
    out.mkdir()
    argv = ["alpha", "--manifest", str(manifest), "--out", str(out), "--levels", "2"]
    code, _, err = _run(argv, capsys)
    assert code == 1 and "--force" in err
    code, stdout, _ = _run(argv + ["--force"], capsys)
    assert code == 0 and stdout.startswith("alpha_emp\t")
    rows = read_csv(out / "alpha.csv")
    assert rows[-1]["image"] == "mean"


def test_default_output_root(tmp_path, manifest, capsys, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    code, stdout, _ = _run(["alpha", "--manifest", str(manifest), "--levels", "2"], capsys)
    assert code == 0
    (run_dir,) = (tmp_path / "root").iterdir()
    assert run_dir.name.startswith("alpha-")


@pytest.mark.parametrize("body, message", [(None, "not found"), ("# nothing\n", "empty"), ("fixture:nope:1\n", "unknown fixture")])
def test_manifest_problems(tmp_path, capsys, body, message):
    path = tmp_path / "m.txt"
    if body is not None:
        path.write_text(body)
    code, _, err = _run(["alpha", "--manifest", str(path), "--out", str(tmp_path / "o")], capsys)
    assert code == 1 and message in err


def test_metrics(tmp_path, capsys):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    x = scene(48, seed=5)
    save_image(x, a)
    save_image(np.clip(x + 0.02, 0, 1), b)
    code, stdout, _ = _run(["metrics", str(a), str(b), "--out", str(tmp_path / "m.csv")], capsys)
    assert code == 0
    header, row = stdout.strip().splitlines()
    assert header == "psnr,ssim,vif,mse"
    assert float(row.split(",")[0]) > 30
    assert read_csv(tmp_path / "m.csv")[0]["psnr"] == row.split(",")[0]
    code, _, err = _run(["metrics", str(a), str(tmp_path / "none.png")], capsys)
    assert code == 1


def test_entropy(tmp_path, capsys):
    img = tmp_path / "flat.png"
    save_image(np.full((1, 24, 24), 0.5), img)
    code, stdout, _ = _run(["entropy", str(img), "fixture:mixed:7", "--radius", "3"], capsys)
    assert code == 0
    lines = stdout.strip().splitlines()
    assert lines[0] == "flat\t0"
    assert not any(tmp_path.glob("entropy-*"))
    out = tmp_path / "heat"
    code, _, _ = _run(["entropy", str(img), str(tmp_path / "missing.png"), "--out", str(out)], capsys)
    assert code == 2
    assert (out / "flat_entropy.png").exists() and (out / "flat_entropy.csv").exists()
    assert [r["image"] for r in read_csv(out / "entropy.csv")] == ["flat"]
    code, _, _ = _run(["entropy", str(img), "--radius", "0"], capsys)
    assert code == 1


def test_defend_attack_first(tmp_path, manifest, capsys):
    out = tmp_path / "def"
    code, stdout, _ = _run(
        ["defend", "--manifest", str(manifest), "--out", str(out), "--attack-first", "pgd", *FAST, "--set", "defense.iters=3"],
        capsys,
    )
    assert code == 0
    rows = read_csv(out / "defense.csv")
    assert rows[0]["status"] == "ok"
    assert float(rows[0]["defense_linf"]) <= 0.05
    assert float(rows[0]["gain_db"]) == pytest.approx(float(rows[0]["recon_psnr_after"]) - float(rows[0]["recon_psnr_before"]), abs=1e-4)
    assert (out / "one_defended.png").exists()


def test_study(tmp_path, capsys):
    path = tmp_path / "m.txt"
    path.write_text("".join(f"fixture:mixed:{i}\n" for i in range(0, 8, 2)))
    out = tmp_path / "study"
    code, stdout, _ = _run(["study", "--manifest", str(path), "--out", str(out), *FAST, "--radius", "4"], capsys)
    assert code == 0 and stdout.startswith("n=4 ")
    corr = read_csv(out / "correlation.csv")[0]
    assert -1.0 <= float(corr["pearson_r"]) <= 1.0
    assert len(read_csv(out / "scatter.csv")) == 4


def test_codec_check(capsys):
    code, stdout, _ = _run(["codec-check", "--size", "16", "--coords", "20"], capsys)
    assert code == 0 and "(pass)" in stdout
    code, stdout, _ = _run(["codec-check", "--size", "16", "--coords", "5", "--tol", "1e-30"], capsys)
    assert code == 2 and "FAIL" in stdout


def test_replay_rejects_foreign_records(tmp_path, capsys):
    rec = tmp_path / "run.json"
    rec.write_text(json.dumps({"tool": "other"}))
    code, _, err = _run(["replay", str(rec), "--out", str(tmp_path / "o")], capsys)
    assert code == 1 and "not a tmla" in err


def test_replay_ignores_a_changed_config_file(tmp_path, manifest, capsys):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("attack.max_iters = 4\n")
    first = tmp_path / "first"
    assert cli.main(["attack", "--manifest", str(manifest), "--out", str(first), "--config", str(cfg), "--no-artifacts"]) == 0
    cfg.write_text("attack.max_iters = 9\n")
    again = tmp_path / "again"
    assert cli.main(["replay", str(first / "run.json"), "--out", str(again)]) == 0
    capsys.readouterr()
    assert (first / "results.csv").read_bytes() == (again / "results.csv").read_bytes()
    assert not list(tmp_path.glob("*.replay.cfg"))


JPEG_CODEC = """
import io, sys
from PIL import Image
img = Image.open(sys.argv[1])
buf = io.BytesIO()
img.save(buf, format="JPEG", quality=30)
Image.open(io.BytesIO(buf.getvalue())).save(sys.argv[2])
print(8 * buf.tell() / (img.width * img.height))
"""


def test_attack_with_external_evaluation_codec(tmp_path, manifest, capsys):
    script = tmp_path / "jpeg.py"
    script.write_text(JPEG_CODEC)
    out = tmp_path / "run"
    argv = ["attack", "--manifest", str(manifest), "--out", str(out), "--no-artifacts", *FAST]
    code, _, _ = _run([*argv, "--eval-codec", f"{sys.executable} {script}"], capsys)
    assert code == 0
    rows = read_csv(out / "results.csv")
    assert [(r["image"], r["model"]) for r in rows] == [
        ("one", "surrogate"),
        ("one", "external"),
        ("fixture-powerlaw-2-48", "surrogate"),
        ("fixture-powerlaw-2-48", "external"),
    ]
    sur, ext = rows[0], rows[1]
    assert ext["stealth_psnr"] == sur["stealth_psnr"] and ext["status"] == "ok"
    assert float(ext["bpp"]) > 0 and float(ext["atk_psnr"]) < float(ext["clean_psnr"]) + 1.0
    assert {s["model"] for s in read_csv(out / "summary.csv")} == {"surrogate", "external"}
    code, _, err = _run([*argv, "--force", "--eval-codec", "no-such-codec-binary"], capsys)
    assert code == 2 and "external codec failed" in err
    assert [r["status"].split(":")[0] for r in read_csv(out / "results.csv")][1] == "error"


def test_pgd_mode_same_schema(tmp_path, manifest, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["attack", "--manifest", str(manifest), "--no-artifacts", *FAST]
    assert _run([*base, "--out", str(a)], capsys)[0] == 0
    assert _run([*base, "--out", str(b), "--mode", "pgd"], capsys)[0] == 0
    ra, rb = read_csv(a / "results.csv"), read_csv(b / "results.csv")
    assert list(ra[0]) == list(rb[0])
    assert {r["method"] for r in ra} == {"tmla"} and {r["method"] for r in rb} == {"pgd"}


def test_missing_manifest_creates_nothing(tmp_path, capsys):
    out = tmp_path / "never"
    code, _, _ = _run(["attack", "--manifest", str(tmp_path / "nope.txt"), "--out", str(out)], capsys)
    assert code == 1 and not out.exists()
