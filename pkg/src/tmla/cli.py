"""Command-line entry point: ``tmla <command> ...``.

Exit status: 0 on success, 2 when some images failed, 1 on configuration or
usage errors. Every run directory receives a ``run.json`` provenance record;
``tmla replay run.json --out DIR`` repeats the run from it.
"""

import argparse
import hashlib
import json
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    RESULT_COLUMNS,
    estimate_alpha,
    result_row,
    transfer_row,
    summary_table,
    vif_drop_study,
    write_csv,
    write_summary,
)
from .attack import METHODS, run_attack
from .codec import SurrogateCodec, external_codec_eval
from .config import ConfigError, dump_config, load_config
from .defense import run_defense
from .entropy import local_entropy_map
from .fixtures import attack_fixture_set, mixed_entropy_set, power_law_noise
from .image_io import ImageError, diff_map, load_image, save_image
from .metrics import psnr, report
from .optim import check_gradient

OUTPUT_ROOT_ENV = "TMLA_OUTPUT_ROOT"

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# -- manifests ---------------------------------------------------------------------

_FIXTURE_SETS = {
    "attack": lambda: attack_fixture_set(),
    "mixed": lambda: mixed_entropy_set(),
}


def _fixture(entry):
    # fixture:attack:0, fixture:mixed:3, fixture:powerlaw:<seed>[:<size>]
    parts = entry.split(":")
    if len(parts) < 3:
        raise ImageError(f"malformed fixture entry {entry!r}")
    kind = parts[1]
    try:
        idx = int(parts[2])
        if kind == "powerlaw":
            size = int(parts[3]) if len(parts) > 3 else 256
            return power_law_noise((3, size, size), exponent=2.0, seed=idx)
        return _FIXTURE_SETS[kind]()[idx]
    except (KeyError, IndexError, ValueError) as exc:
        raise ImageError(f"unknown fixture {entry!r}") from exc


def read_manifest(path):
    """Manifest lines: image paths (relative to the manifest) or ``fixture:`` entries."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"manifest not found: {path}")
    entries = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            entries.append(line if line.startswith("fixture:") else str((path.parent / line).resolve()))
    if not entries:
        raise UsageError(f"manifest is empty: {path}")
    return entries


def entry_name(entry):
    if entry.startswith("fixture:"):
        return entry.replace(":", "-")
    return Path(entry).stem


def load_entry(entry):
    return _fixture(entry) if entry.startswith("fixture:") else load_image(entry)


def entry_digest(entry):
    if entry.startswith("fixture:"):
        return entry
    path = Path(entry)
    if not path.is_file():
        return None  # reported per image when loading fails
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- run directories and provenance -----------------------------------------------------


def resolve_out(args, tag):
    if args.out:
        return Path(args.out)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    return root / f"{args.command}-{tag}"


def prepare_out(out, force):
    if out.exists():
        if not force:
            raise UsageError(f"output directory exists: {out} (use --force to overwrite)")
        shutil.rmtree(out)
    out.mkdir(parents=True)
    return out


def write_provenance(out, args, resolved=None, codec=None, entries=()):
    record = {
        "tool": "tmla",
        "version": __version__,
        "command": args.command,
        "args": {k: v for k, v in vars(args).items() if k not in ("func", "out", "force", "jobs")},
        "config": {k: asdict(v) for k, v in (resolved or {}).items()},
        "config_text": dump_config(resolved) if resolved else "",
        "codec": codec.descriptor if codec is not None else None,
        "inputs": [{"entry": e, "digest": entry_digest(e)} for e in entries],
    }
    (out / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return record


def _config_tag(*parts):
    return hashlib.sha256(json.dumps(parts, sort_keys=True, default=str).encode()).hexdigest()[:10]


def _resolve(args):
    overrides = list(args.set or [])
    return load_config(args.config, overrides)


def _default_jobs(args):
    return args.jobs if args.jobs else (os.cpu_count() or 1)


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- attack ---------------------------------------------------------------------------------


def _attack_one(task):
    entry, mode, codec_params, cfg, index, eval_codec = task
    try:
        x = load_entry(entry)
        codec = SurrogateCodec(codec_params)
        res = run_attack(mode, x, codec, replace(cfg, seed=cfg.seed + index))
    except Exception as exc:  # per-image failure, batch continues
        return None, f"{type(exc).__name__}: {exc}", None
    ext = None
    if eval_codec:
        try:
            x_hat, bpp = external_codec_eval(res.x_adv, eval_codec)
            ext = (x_hat, bpp, external_codec_eval(x, eval_codec)[0])
        except Exception as exc:
            ext = f"{type(exc).__name__}: {exc}"
    return res, None, ext


def _save_artifacts(out, name, result):
    d = out / "images"
    d.mkdir(exist_ok=True)
    save_image(result.x_adv, d / f"{name}_adv.png")
    save_image(result.x_hat, d / f"{name}_recon.png")
    save_image(diff_map(result.x_adv, result.x), d / f"{name}_diff.png")
    trace = [dict(iteration=i, value=v if np.isscalar(v) else v[0]) for i, v in enumerate(result.loss_trace)]
    write_csv(d / f"{name}_trace.csv", ("iteration", "value"), trace)


def cmd_attack(args):
    resolved = _resolve(args)
    entries = read_manifest(args.manifest)
    cfg, params = resolved["attack"], resolved["codec"]
    codec = SurrogateCodec(params)
    out = prepare_out(resolve_out(args, _config_tag(args.mode, entries, dump_config(resolved))), args.force)
    write_provenance(out, args, resolved, codec, entries)
    tasks = [(e, args.mode, params, cfg, i, getattr(args, "eval_codec", None)) for i, e in enumerate(entries)]
    results = _map(_attack_one, tasks, _default_jobs(args))
    rows, failures = [], 0
    for entry, (res, err, ext) in zip(entries, results):
        name = entry_name(entry)
        rows.append(result_row(name, "surrogate", res, err))
        if res is None:
            failures += 1
            print(f"{name}: failed: {err}", file=sys.stderr)
            continue
        if not args.no_artifacts:
            _save_artifacts(out, name, res)
        if isinstance(ext, str):
            failures += 1
            rows.append(result_row(name, "external", error=ext))
            print(f"{name}: external codec failed: {ext}", file=sys.stderr)
        elif ext is not None:
            rows.append(transfer_row(name, "external", res, *ext))
    write_csv(out / "results.csv", RESULT_COLUMNS, rows)
    ok_rows = [r for r in rows if r["status"] == "ok"]
    if ok_rows:
        write_summary(out / "summary.csv", summary_table(ok_rows))
    print(f"{len(ok_rows)}/{len(rows)} images attacked; results in {out}")
    return EXIT_PARTIAL if failures else EXIT_OK


# -- defend ---------------------------------------------------------------------------------


def _defend_one(task):
    entry, codec_params, attack_cfg, defense_cfg, attack_mode, index = task
    try:
        codec = SurrogateCodec(codec_params)
        x = load_entry(entry)
        if attack_mode:
            x = run_attack(attack_mode, x, codec, replace(attack_cfg, seed=attack_cfg.seed + index)).x_adv
        x_hat_att, _ = codec.forward(x)
        res = run_defense(x, codec, replace(defense_cfg, seed=defense_cfg.seed + index))
        return (x, x_hat_att, res), None
    except Exception as exc:
        return None, f"{type(exc).__name__}: {exc}"


DEFENSE_COLUMNS = ("image", "recon_psnr_before", "recon_psnr_after", "gain_db", "defense_linf", "objective", "status")


def cmd_defend(args):
    resolved = _resolve(args)
    entries = read_manifest(args.manifest)
    params = resolved["codec"]
    codec = SurrogateCodec(params)
    tag = _config_tag(args.attack_first, entries, dump_config(resolved))
    out = prepare_out(resolve_out(args, tag), args.force)
    write_provenance(out, args, resolved, codec, entries)
    tasks = [(e, params, resolved["attack"], resolved["defense"], args.attack_first, i) for i, e in enumerate(entries)]
    rows, failures = [], 0
    for entry, (res, err) in zip(entries, _map(_defend_one, tasks, _default_jobs(args))):
        name = entry_name(entry)
        if res is None:
            failures += 1
            rows.append(dict(image=name, status=f"error: {err}"))
            continue
        x, x_hat_att, d = res
        before, after = psnr(x_hat_att, x), psnr(d.x_hat_defended, x)
        rows.append(
            dict(
                image=name,
                recon_psnr_before=before,
                recon_psnr_after=after,
                gain_db=after - before,
                defense_linf=float(np.max(np.abs(d.noise))),
                objective=d.objective,
                status="ok",
            )
        )
        save_image(d.x_defended, out / f"{name}_defended.png")
        save_image(d.x_hat_defended, out / f"{name}_defended_recon.png")
    write_csv(out / "defense.csv", DEFENSE_COLUMNS, rows)
    print(f"{len(rows) - failures}/{len(rows)} images defended; results in {out}")
    return EXIT_PARTIAL if failures else EXIT_OK


# -- entropy / alpha / metrics ----------------------------------------------------------


def cmd_entropy(args):
    if args.radius < 1:
        raise UsageError("--radius must be >= 1")
    entries = [str(Path(p).resolve()) if not p.startswith("fixture:") else p for p in args.images]
    out = None
    if args.out or args.heatmaps:
        out = prepare_out(resolve_out(args, _config_tag(entries, args.radius)), args.force)
        write_provenance(out, args, entries=entries)
    rows, failures = [], 0
    for entry in entries:
        name = entry_name(entry)
        try:
            emap = local_entropy_map(load_entry(entry), args.radius)
        except (ImageError, OSError, ValueError) as exc:
            failures += 1
            print(f"{name}: failed: {exc}", file=sys.stderr)
            continue
        print(f"{name}\t{emap.mean:.6g}")
        rows.append(dict(image=name, radius=args.radius, mu_e=emap.mean))
        if out is not None:
            save_image(emap.plane[None], out / f"{name}_entropy.png")
            np.savetxt(out / f"{name}_entropy.csv", emap.plane, delimiter=",", fmt="%.6g")
    if out is not None:
        write_csv(out / "entropy.csv", ("image", "radius", "mu_e"), rows)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_alpha(args):
    entries = read_manifest(args.manifest)
    out = prepare_out(resolve_out(args, _config_tag(entries, args.levels)), args.force)
    write_provenance(out, args, entries=entries)
    est = estimate_alpha([load_entry(e) for e in entries], levels=args.levels)
    rows = [dict(image=entry_name(e), rho=r) for e, r in zip(entries, est.rho)]
    write_csv(out / "alpha.csv", ("image", "rho"), rows + [dict(image="mean", rho=est.mean)])
    print(f"alpha_emp\t{est.mean:.6g}")
    return EXIT_OK


METRIC_COLUMNS = ("psnr", "ssim", "vif", "mse")


def cmd_metrics(args):
    a, b = load_image(args.reference), load_image(args.test)
    r = report(a, b)
    row = {k: getattr(r, k) for k in METRIC_COLUMNS}
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_csv(out, METRIC_COLUMNS, [row])
    print(",".join(METRIC_COLUMNS))
    print(",".join(f"{row[k]:.6g}" for k in METRIC_COLUMNS))
    return EXIT_OK


# -- study ----------------------------------------------------------------------------------


def cmd_study(args):
    resolved = _resolve(args)
    entries = read_manifest(args.manifest)
    cfg, params = resolved["attack"], resolved["codec"]
    codec = SurrogateCodec(params)
    out = prepare_out(resolve_out(args, _config_tag(args.mode, entries, dump_config(resolved), args.radius)), args.force)
    write_provenance(out, args, resolved, codec, entries)
    tasks = [(e, args.mode, params, cfg, i, None) for i, e in enumerate(entries)]
    results = _map(_attack_one, tasks, _default_jobs(args))
    kept, scores, rows, failures = [], [], [], 0
    for entry, (res, err, _) in zip(entries, results):
        name = entry_name(entry)
        rows.append(result_row(name, "surrogate", res, err))
        if res is None:
            failures += 1
            continue
        mu = local_entropy_map(res.x, args.radius).mean
        drop = res.stealth.vif - res.success.vif
        if args.exclude_outliers and mu < 0.6 and drop < 0.1:
            continue
        kept.append(res)
        scores.append(mu)
    write_csv(out / "results.csv", RESULT_COLUMNS, rows)
    study = vif_drop_study(kept, scores, scatter_path=out / "scatter.csv")
    c = study.correlation
    write_csv(
        out / "correlation.csv",
        ("n", "pearson_r", "spearman_rho", "p_value"),
        [dict(n=c.n, pearson_r=c.pearson, spearman_rho=c.spearman, p_value=c.p_value)],
    )
    print(f"n={c.n} pearson_r={c.pearson:.4f} spearman_rho={c.spearman:.4f} p={c.p_value:.3g}")
    return EXIT_PARTIAL if failures else EXIT_OK


# -- codec self-test ----------------------------------------------------------------------------


def cmd_codec_check(args):
    resolved = _resolve(args)
    codec = SurrogateCodec(resolved["codec"])
    rng = np.random.default_rng(args.seed)
    x = 0.2 + 0.6 * rng.random((3, args.size, args.size))
    cot = rng.standard_normal(x.shape)
    grad = codec.vjp(x, cot)

    def f(z):
        return float(np.sum(cot * codec.forward(z)[0]))

    errs = check_gradient(f, x, grad, n_coords=args.coords, h=1e-6, rng=args.seed, floor=1e-8)
    worst = float(errs.max())
    status = "pass" if worst <= args.tol else "FAIL"
    print(f"codec {codec.descriptor}: max relative VJP error {worst:.3e} over {errs.size} coordinates ({status})")
    return EXIT_OK if worst <= args.tol else EXIT_PARTIAL


# -- replay -----------------------------------------------------------------------------------------


def cmd_replay(args):
    record = json.loads(Path(args.record).read_text(encoding="utf-8"))
    if record.get("tool") != "tmla":
        raise UsageError("not a tmla provenance record")
    saved = dict(record["args"])
    command = saved.pop("command")
    cfg_file = Path(args.out).with_suffix(".replay.cfg") if record.get("config_text") else None
    ns = argparse.Namespace(**saved)
    ns.command = command
    ns.out = args.out
    ns.force = args.force
    ns.jobs = args.jobs
    if cfg_file is not None:
        # the record carries the fully resolved config; use it instead of the original file
        cfg_file.parent.mkdir(parents=True, exist_ok=True)
        cfg_file.write_text(record["config_text"], encoding="utf-8")
        ns.config = str(cfg_file)
        ns.set = []
    try:
        return COMMANDS[command](ns)
    finally:
        if cfg_file is not None and cfg_file.exists():
            cfg_file.unlink()


COMMANDS = {
    "attack": cmd_attack,
    "defend": cmd_defend,
    "entropy": cmd_entropy,
    "alpha": cmd_alpha,
    "metrics": cmd_metrics,
    "study": cmd_study,
    "codec-check": cmd_codec_check,
    "replay": cmd_replay,
}


def build_parser():
    p = _Parser(prog="tmla", description="Multiscale log-exp attacks on a differentiable surrogate codec.")
    p.add_argument("--version", action="version", version=f"tmla {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True, jobs=False):
        sp.add_argument("--out", help=f"output directory (default: ${OUTPUT_ROOT_ENV} or ./runs)")
        sp.add_argument("--force", action="store_true", help="overwrite an existing output directory")
        if config:
            sp.add_argument("--config", help="key=value config file")
            sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="config override")
        if jobs:
            sp.add_argument("--jobs", type=int, default=0, help="worker processes (default: all cores)")

    sp = sub.add_parser("attack", help="attack every image of a manifest")
    sp.add_argument("--mode", choices=METHODS, default="tmla")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--no-artifacts", action="store_true", help="skip per-image PNG/trace outputs")
    sp.add_argument(
        "--eval-codec", metavar="CMD", help="also evaluate each attacked image with an external codec command (transfer rows)"
    )
    common(sp, jobs=True)

    sp = sub.add_parser("defend", help="learn defensive counter-noise for every image of a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--attack-first", choices=METHODS, default=None, help="attack each image before defending it")
    common(sp, jobs=True)

    sp = sub.add_parser("entropy", help="local entropy heatmaps and mean entropy scores")
    sp.add_argument("images", nargs="+")
    sp.add_argument("--radius", type=int, default=10)
    sp.add_argument("--heatmaps", action="store_true", help="write heatmaps even without --out")
    common(sp, config=False)

    sp = sub.add_parser("alpha", help="empirical inter-scale growth factor")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--levels", type=int, default=5)
    common(sp, config=False)

    sp = sub.add_parser("metrics", help="PSNR/SSIM/VIF/MSE of two images")
    sp.add_argument("reference")
    sp.add_argument("test")
    sp.add_argument("--out", help="also write the row to this CSV file")

    sp = sub.add_parser("study", help="entropy vs. VIF-drop correlation over an attacked manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--mode", choices=METHODS, default="tmla")
    sp.add_argument("--radius", type=int, default=10)
    sp.add_argument("--exclude-outliers", action="store_true", help="drop rows with mu_E < 0.6 and VIF drop < 0.1")
    common(sp, jobs=True)

    sp = sub.add_parser("codec-check", help="finite-difference self-test of the codec VJP")
    sp.add_argument("--size", type=int, default=16)
    sp.add_argument("--coords", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--config")
    sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")

    sp = sub.add_parser("replay", help="repeat a run from its run.json record")
    sp.add_argument("record")
    sp.add_argument("--out", required=True)
    sp.add_argument("--force", action="store_true")
    sp.add_argument("--jobs", type=int, default=0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (UsageError, ImageError, FileNotFoundError) as exc:
        print(f"tmla {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
