import json
import os
from pathlib import Path

import numpy as np
import pytest

import rlproj.cli as cli
from rlproj.cli import main
from rlproj.data import load_images, load_table
from rlproj.pgm import read_pgm
from rlproj.theory import CheckReport
from rlproj.trainer import read_metrics_csv


def write_yaml(path, text):
    Path(path).write_text(text)
    return str(path)


def test_gen_data_linear_roundtrip(tmp_path):
    out = tmp_path / "lin.csv"
    assert main(["gen-data", "linear", "--n", "40", "--seed", "3", "--out", str(out)]) == 0
    ds = load_table(out, [f"x{i+1}" for i in range(5)], "y")
    assert ds.n == 40 and ds.d == 5


def test_gen_data_all_names(tmp_path):
    for name, nargs in (("nonlinear", 7), ("moons", 2)):
        out = tmp_path / f"{name}.csv"
        assert main(["gen-data", name, "--n", "20", "--out", str(out)]) == 0
        header = out.read_text().splitlines()[0]
        assert header.startswith("x1,")
    idx = tmp_path / "g-idx3-ubyte"
    assert main(["gen-data", "glyphs", "--n", "6", "--out", str(idx)]) == 0
    assert load_images(idx).n == 6


def test_train_outputs_and_idempotence(tmp_path):
    cfg = write_yaml(tmp_path / "r.yaml", f"""
run: {{name: t, seed: 0, out: {tmp_path}/t}}
data: {{source: linear, n: 120}}
train: {{loss: rlp, epochs: 3, batch_count: 10, update: per_batch, lr: 0.001,
        eval_every: 3, eval_batches: 5}}
""")
    assert main(["train", "--config", cfg]) == 0
    out = tmp_path / "t"
    for f in ("manifest.json", "metrics.csv", "checkpoint.bin", "checkpoint.bin.json"):
        assert (out / f).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    records = read_metrics_csv(out / "metrics.csv")
    assert manifest["config_hash"] == records[-1].config_hash
    assert manifest["finished"] is not None
    first = [(r.epoch, r.train_loss, r.test_mse) for r in records]
    # rerun into the same (now non-empty) directory: identical metric values
    assert main(["train", "--config", cfg]) == 0
    second = [(r.epoch, r.train_loss, r.test_mse) for r in read_metrics_csv(out / "metrics.csv")]
    assert first == second


def test_train_flag_overrides_change_hash(tmp_path):
    cfg = write_yaml(tmp_path / "r.yaml", f"""
run: {{name: t, seed: 0, out: {tmp_path}/a}}
data: {{source: linear, n: 80}}
train: {{loss: rlp, epochs: 2, batch_count: 5, eval_every: 0, eval_batches: 5}}
""")
    assert main(["train", "--config", cfg]) == 0
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "b"),
                 "--update-mode", "per_batch", "--probe-mode", "frozen"]) == 0
    ra = read_metrics_csv(tmp_path / "a" / "metrics.csv")
    rb = read_metrics_csv(tmp_path / "b" / "metrics.csv")
    assert ra[-1].config_hash != rb[-1].config_hash


def test_exit_codes(tmp_path):
    assert main(["train", "--config", str(tmp_path / "missing.yaml")]) == 1
    bad = write_yaml(tmp_path / "bad.yaml", "unknown_section: {a: 1}\n")
    assert main(["train", "--config", bad]) == 1
    nodata = write_yaml(tmp_path / "nodata.yaml", f"""
run: {{name: x, out: {tmp_path}/x}}
data: {{source: mnist, path: {tmp_path}/nope-idx3-ubyte}}
train: {{epochs: 1, batch_count: 2, eval_every: 0}}
""")
    assert main(["train", "--config", nodata]) == 2
    # batch plan larger than the number of distinct subsets: data error
    exhaust = write_yaml(tmp_path / "ex.yaml", f"""
run: {{name: x, out: {tmp_path}/ex}}
data: {{source: linear, n: 8}}
split: {{train_fraction: 0.5}}
train: {{loss: rlp, batch_size: 4, batch_count: 5, epochs: 1, eval_every: 0, eval_batches: 2}}
""")
    assert main(["train", "--config", exhaust]) == 2


def test_ablate_grid_counts_and_summary_crosscheck(tmp_path):
    cfg = write_yaml(tmp_path / "ab.yaml", f"""
run: {{name: ab, seed: 1, out: {tmp_path}/ab}}
data: {{source: nonlinear, n: 150}}
train: {{epochs: 2, batch_count: 8, update: per_batch, lr: 0.001, eval_every: 0, eval_batches: 5}}
ablate: {{axis: beta, values: [0.1, 0.5, 0.9], losses: [mse, rlp]}}
""")
    assert main(["ablate", "--config", cfg]) == 0
    out = tmp_path / "ab"
    cells = sorted((out / "cells").glob("*.csv"))
    assert len(cells) == 6  # 3 values x 2 losses
    summary = (out / "summary.csv").read_text().strip().splitlines()
    assert len(summary) == 1 + 6
    # each summary row repeats the final record of its cell metrics file
    header = summary[0].split(",")
    for line in summary[1:]:
        row = dict(zip(header, line.split(",")))
        cell_csv = out / "cells" / f"metrics_{row['axis']}-{row['value']}_{row['loss']}.csv"
        final = read_metrics_csv(cell_csv)[-1]
        assert float(row["test_mse"]) == pytest.approx(final.test_mse, rel=1e-12)
        assert int(row["epoch"]) == final.epoch


def test_ablate_empty_grid(tmp_path):
    cfg = write_yaml(tmp_path / "ab0.yaml", f"""
run: {{name: ab0, out: {tmp_path}/ab0}}
data: {{source: linear, n: 60}}
train: {{epochs: 1, batch_count: 3, eval_every: 0, eval_batches: 3}}
ablate: {{axis: beta, values: [], losses: [mse]}}
""")
    assert main(["ablate", "--config", cfg]) == 0
    out = tmp_path / "ab0"
    assert not list((out / "cells").glob("*.csv"))
    assert (out / "summary.csv").read_text().startswith("axis,")


def test_ablate_parallel_matches_serial(tmp_path):
    body = f"""
run: {{name: abp, seed: 2, out: {tmp_path}/OUT}}
data: {{source: linear, n: 100}}
train: {{epochs: 2, batch_count: 5, update: per_batch, lr: 0.001, eval_every: 0, eval_batches: 5}}
ablate: {{axis: train_count, values: [20, 40], losses: [rlp]}}
"""
    cfg1 = write_yaml(tmp_path / "s.yaml", body.replace("OUT", "ser"))
    cfg2 = write_yaml(tmp_path / "p.yaml", body.replace("OUT", "par"))
    assert main(["ablate", "--config", cfg1]) == 0
    assert main(["ablate", "--config", cfg2, "--jobs", "2"]) == 0
    s = (tmp_path / "ser" / "summary.csv").read_text()
    p = (tmp_path / "par" / "summary.csv").read_text()
    assert s == p


def test_verify_exit_codes(tmp_path, monkeypatch, capsys):
    assert main(["verify", "--seed", "0", "--out", str(tmp_path / "v"),
                 "--nonneg-trials", "100", "--convexity-trials", "20"]) == 0
    reports = json.loads((tmp_path / "v" / "check_reports.json").read_text())
    assert all(r["status"] in ("pass", "not_applicable") for r in reports)

    def fake_checks(**kwargs):
        return [CheckReport(name="forced", trials=1, violations=1, worst_margin=1.0, status="fail")]

    monkeypatch.setattr(cli, "run_all_checks", fake_checks)
    assert main(["verify", "--out", str(tmp_path / "v2")]) == 4


def test_reconstruct_pipeline(tmp_path):
    idx = tmp_path / "imgs-idx3-ubyte"
    assert main(["gen-data", "glyphs", "--n", "30", "--seed", "4", "--out", str(idx)]) == 0
    cfg = write_yaml(tmp_path / "g.yaml", f"""
run: {{name: g, seed: 0, out: {tmp_path}/g}}
data: {{source: glyphs, path: {idx}}}
split: {{train_count: 20}}
train: {{loss: rlp, epochs: 4, batch_size: 6, batch_count: 10, update: per_batch,
        eval_every: 0, eval_batches: 5, checkpoint_epochs: [2, 4]}}
""")
    assert main(["train", "--config", cfg]) == 0
    assert main(["reconstruct", "--checkpoint-dir", str(tmp_path / "g"),
                 "--dataset", str(idx), "--out", str(tmp_path / "rec"),
                 "--epochs", "2,4", "--count", "2"]) == 0
    files = sorted(os.listdir(tmp_path / "rec"))
    assert files == ["epoch2_img0.pgm", "epoch2_img1.pgm", "epoch4_img0.pgm", "epoch4_img1.pgm"]
    panel = read_pgm(tmp_path / "rec" / "epoch4_img0.pgm")
    assert panel.shape == (28, 28 * 2 + 2)
    # left half must be the original image
    orig = load_images(idx).features[0].reshape(28, 28)
    assert np.max(np.abs(panel[:, :28] - orig)) <= 1 / 255 + 1e-9
    # missing checkpoint epoch: data error
    assert main(["reconstruct", "--checkpoint-dir", str(tmp_path / "g"),
                 "--dataset", str(idx), "--out", str(tmp_path / "rec2"),
                 "--epochs", "99"]) == 2
