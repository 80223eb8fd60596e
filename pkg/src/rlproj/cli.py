"""Command-line entry point.

Subcommands: gen-data (synthetic datasets to disk), train (one configured
run), ablate (a grid of runs plus a merged summary), verify (randomized
property checks), reconstruct (side-by-side graymap dumps from saved
checkpoints).

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .batching import balanced_batches, write_batchset
from .config import (
    build_datasets,
    build_model,
    load_yaml,
    make_train_config,
    resolve_run,
    write_manifest,
)
from .data import gen_glyph_images, gen_linear, gen_moons, gen_nonlinear, save_table, write_idx_images, load_images
from .errors import ConfigError, DataError, NumericError, RlprojError, ShapeError, VerificationError
from .model import forward, load_checkpoint, save_checkpoint
from .pgm import side_by_side, write_pgm
from .theory import run_all_checks, write_reports
from .trainer import train, write_metrics_csv


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", help="output directory (overrides run.out)")
    p.add_argument("--seed", type=int, help="run seed (overrides run.seed)")
    p.add_argument("--update-mode", choices=["per_epoch", "per_batch"], dest="update_mode")
    p.add_argument("--probe-mode", choices=["resample", "frozen"], dest="probe_mode")


def _overrides(args) -> dict:
    ov = {}
    if getattr(args, "out", None):
        ov["run.out"] = args.out
    if getattr(args, "seed", None) is not None:
        ov["run.seed"] = args.seed
    if getattr(args, "update_mode", None):
        ov["train.update"] = args.update_mode
    if getattr(args, "probe_mode", None):
        ov["train.probe_mode"] = args.probe_mode
    return ov


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.name == "linear":
        save_table(out, gen_linear(args.n, args.seed))
    elif args.name == "nonlinear":
        save_table(out, gen_nonlinear(args.n, args.seed))
    elif args.name == "moons":
        save_table(out, gen_moons(args.n, args.noise_level, args.seed))
    elif args.name == "glyphs":
        write_idx_images(out, gen_glyph_images(args.n, args.seed))
    else:
        raise ConfigError(f"unknown dataset name {args.name!r}")
    print(f"wrote {args.name} dataset (n={args.n}, seed={args.seed}) to {out}")
    return 0


def _run_one(resolved: dict, out_dir: Path, command: str, dump_batches: bool = False) -> list:
    out_dir.mkdir(parents=True, exist_ok=True)
    train_ds, test_ds = build_datasets(resolved)
    params = build_model(resolved, train_ds.d)
    tcfg = make_train_config(resolved)
    started = time.time()
    manifest_path = out_dir / "manifest.json"
    write_manifest(manifest_path, command, resolved, tcfg.config_hash(), started)
    params, records = train(tcfg, params, train_ds, test_ds, run_dir=out_dir)
    write_metrics_csv(out_dir / "metrics.csv", records)
    save_checkpoint(out_dir / "checkpoint.bin", params)
    if dump_batches and tcfg.loss in ("rlp", "rlp_mixup"):
        M = tcfg.resolved_batch_size(train_ds.n, train_ds.d)
        write_batchset(out_dir / "batches.txt", balanced_batches(train_ds.n, M, tcfg.batch_count, tcfg.seed))
    write_manifest(manifest_path, command, resolved, tcfg.config_hash(), started, finished=time.time())
    return records


def cmd_train(args) -> int:
    resolved = resolve_run(load_yaml(args.config), _overrides(args))
    out_dir = Path(resolved["run"]["out"])
    records = _run_one(resolved, out_dir, "train", dump_batches=args.dump_batches)
    if records:
        last = records[-1]
        print(
            f"{resolved['run']['name']}: epoch {last.epoch} "
            f"train_loss={last.train_loss:.6g} test_mse={last.test_mse:.6g} "
            f"test_rlp={last.test_rlp:.6g}"
        )
    print(f"outputs in {out_dir}")
    return 0


_AXIS_KEY = {
    "gamma": ("split", "gamma"),
    "beta": ("noise", "beta"),
    "train_count": ("split", "train_count"),
}


def _cell_jobs(raw: dict, overrides: dict) -> list:
    base = resolve_run(copy.deepcopy(raw), overrides)
    ab = base["ablate"]
    axis = ab.get("axis")
    values = ab.get("values") or []
    losses = ab.get("losses") or []
    if values and axis not in _AXIS_KEY:
        raise ConfigError(f"ablate.axis must be one of {sorted(_AXIS_KEY)}, got {axis!r}")
    jobs = []
    for value in values:
        for loss in losses:
            cell_raw = copy.deepcopy(raw)
            section, key = _AXIS_KEY[axis]
            cell_raw.setdefault(section, {})[key] = value
            if axis == "gamma":
                cell_raw["split"]["mode"] = "biased"
            cell_raw.setdefault("train", {})["loss"] = loss
            resolved = resolve_run(cell_raw, overrides)
            jobs.append({"axis": axis, "value": value, "loss": loss, "resolved": resolved})
    return jobs


def _run_cell(job: dict) -> dict:
    resolved = job["resolved"]
    train_ds, test_ds = build_datasets(resolved)
    params = build_model(resolved, train_ds.d)
    tcfg = make_train_config(resolved)
    params, records = train(tcfg, params, train_ds, test_ds)
    write_metrics_csv(job["csv_path"], records)
    final = asdict(records[-1]) if records else {}
    return {"axis": job["axis"], "value": job["value"], "loss": job["loss"], "final": final}


def cmd_ablate(args) -> int:
    raw = load_yaml(args.config)
    resolved = resolve_run(copy.deepcopy(raw), _overrides(args))
    out_dir = Path(resolved["run"]["out"])
    cells_dir = out_dir / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    write_manifest(out_dir / "manifest.json", "ablate", resolved, make_train_config(resolved).config_hash(), started)
    jobs = _cell_jobs(raw, _overrides(args))
    for job in jobs:
        job["csv_path"] = str(cells_dir / f"metrics_{job['axis']}-{job['value']}_{job['loss']}.csv")
    if args.jobs > 1 and jobs:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(job) for job in jobs]
    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w") as fh:
        fh.write("axis,value,loss,epoch,train_loss,test_mse,test_rlp,accuracy,f1,config_hash\n")
        for r in results:
            f = r["final"]
            fh.write(
                f"{r['axis']},{r['value']},{r['loss']},{f.get('epoch', '')},"
                f"{f.get('train_loss', '')},{f.get('test_mse', '')},{f.get('test_rlp', '')},"
                f"{f.get('accuracy', '')},{f.get('f1', '')},{f.get('config_hash', '')}\n"
            )
    write_manifest(out_dir / "manifest.json", "ablate", resolved, make_train_config(resolved).config_hash(), started, finished=time.time())
    print(f"{len(results)} cells -> {summary_path}")
    return 0


def cmd_verify(args) -> int:
    out_dir = Path(args.out or "runs/verify")
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = run_all_checks(
        seed=args.seed, nonneg_trials=args.nonneg_trials, convexity_trials=args.convexity_trials
    )
    write_reports(out_dir / "check_reports.json", reports)
    failed = False
    for rep in reports:
        print(f"{rep.name}: {rep.status} (trials={rep.trials}, violations={rep.violations}, worst={rep.worst_margin:.3g})")
        failed = failed or rep.status == "fail"
    if failed:
        raise VerificationError("one or more property checks failed")
    return 0


def _as_image(row: np.ndarray) -> np.ndarray:
    d = row.size
    side = int(round(d**0.5))
    if side * side == d:
        return row.reshape(side, side)
    if d % 3 == 0:  # channel-planar color record: average to grayscale
        side = int(round((d // 3) ** 0.5))
        if side * side * 3 == d:
            return row.reshape(3, side, side).mean(axis=0)
    raise DataError(f"cannot render a length-{d} row as a square image")


def cmd_reconstruct(args) -> int:
    ds = load_images(args.dataset, limit=args.count)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    epochs = [int(e) for e in args.epochs.split(",") if e.strip()]
    ckpt_dir = Path(args.checkpoint_dir)
    for e in epochs:
        path = ckpt_dir / f"checkpoint_epoch{e}.bin"
        if not path.exists():
            raise DataError(f"missing checkpoint {path}")
        params = load_checkpoint(path)
        H, _ = forward(params, ds.features)
        for i in range(min(args.count, ds.n)):
            panel = side_by_side(_as_image(ds.features[i]), _as_image(H[i]))
            write_pgm(out_dir / f"epoch{e}_img{i}.pgm", panel)
    print(f"wrote {len(epochs) * min(args.count, ds.n)} graymaps to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rlproj", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset to disk")
    p.add_argument("name", choices=["linear", "nonlinear", "moons", "glyphs"])
    p.add_argument("--n", type=int, default=6000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-level", type=float, default=0.1, dest="noise_level")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="run one training configuration")
    _add_common_flags(p)
    p.add_argument("--dump-batches", action="store_true", dest="dump_batches")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="run a grid of training cells plus a summary")
    _add_common_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("verify", help="run the randomized property checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--nonneg-trials", type=int, default=10000, dest="nonneg_trials")
    p.add_argument("--convexity-trials", type=int, default=1000, dest="convexity_trials")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reconstruct", help="dump original/reconstruction graymaps")
    p.add_argument("--checkpoint-dir", required=True, dest="checkpoint_dir")
    p.add_argument("--dataset", required=True, help="IDX file or batch directory")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", default="5,10,50", help="comma-separated checkpoint epochs")
    p.add_argument("--count", type=int, default=8, help="images per epoch")
    p.set_defaults(func=cmd_reconstruct)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ShapeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except VerificationError as e:
        print(f"verification failure: {e}", file=sys.stderr)
        return 4
    except RlprojError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
