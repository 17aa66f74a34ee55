import json
from pathlib import Path

import numpy as np
import pytest

from medirl.cli import main
from medirl.config import RunConfig, config_hash, from_text

SMALL_CONFIG = """
grid.height = 24
grid.width = 24
gen.n_train = 3
gen.n_test = 2
gen.demos_per_scenario = 3
gen.collisions_per_scenario = 3
gen.max_len = 14
gen.min_dist = 4
gen.features.wall = 1
gen.features.bollard = 1
gen.features.grass = 1
gen.features.slope = 1
gen.features.stairs = 1
gen.features.underpass = 1
train.pretrain_epochs = 3
train.finetune_epochs = 3
train.early_stop_patience = 3
eval.n_thresholds = 21
eval.samples_per_demo = 3
seed = 11
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "config.txt"
    cfg_path.write_text(SMALL_CONFIG)
    data = root / "data"
    assert main(["gen", "--config", str(cfg_path), "--out", str(data)]) == 0
    return root, cfg_path, data


def test_gen_layout_and_manifest(workdir):
    root, cfg_path, data = workdir
    manifest = json.loads((data / "manifest.json").read_text())
    cfg = from_text(cfg_path.read_text())
    assert manifest["config_hash"] == config_hash(cfg)
    assert manifest["seed"] == 11
    for rel in manifest["files"]:
        assert (data / rel).exists(), rel
    assert len(list((data / "train").glob("scenario_*.bin"))) == 3
    assert len(list((data / "test").glob("scenario_*.bin"))) == 2
    assert (data / "corner" / "scenario_000.bin").exists()
    listed = {rel for rel in manifest["files"]}
    on_disk = {
        str(p.relative_to(data))
        for p in data.rglob("*")
        if p.is_file() and p.name != "manifest.json"
    }
    assert listed == on_disk


def test_gen_deterministic(workdir, tmp_path):
    root, cfg_path, data = workdir
    other = tmp_path / "data2"
    assert main(["gen", "--config", str(cfg_path), "--out", str(other)]) == 0
    for rel in json.loads((data / "manifest.json").read_text())["files"]:
        assert (data / rel).read_bytes() == (other / rel).read_bytes(), rel
    assert (data / "manifest.json").read_bytes() == (other / "manifest.json").read_bytes()


def test_full_pipeline(workdir, tmp_path):
    root, cfg_path, data = workdir
    run_w = tmp_path / "with"
    run_wo = tmp_path / "without"
    assert main(["train", "--config", str(cfg_path), "--data", str(data), "--out", str(run_w)]) == 0
    assert (run_w / "model.ckpt").exists()
    assert (run_w / "pretrain.ckpt").exists()
    assert main([
        "train", "--config", str(cfg_path), "--data", str(data),
        "--out", str(run_wo), "--no-pretrain",
    ]) == 0
    assert not (run_wo / "pretrain.ckpt").exists()

    report = tmp_path / "report"
    assert main([
        "eval", "--config", str(cfg_path), "--data", str(data),
        "--model-pretrained", str(run_w / "model.ckpt"),
        "--model-scratch", str(run_wo / "model.ckpt"),
        "--out", str(report),
    ]) == 0
    metrics = (report / "metrics.csv").read_text().splitlines()
    rows = [ln.split(",")[0] for ln in metrics if ln and not ln.startswith("#")]
    assert rows == ["source", "manual", "wo_pretrain", "w_pretrain"]
    assert any("reference_nll" in ln for ln in metrics)
    for name in ("manual", "wo_pretrain", "w_pretrain"):
        assert (report / f"pr_{name}.csv").exists()
        assert (report / "renders" / f"corner_{name}.ppm").exists()

    images = tmp_path / "imgs"
    assert main([
        "render", "--config", str(cfg_path), "--data", str(data),
        "--model-pretrained", str(run_w / "model.ckpt"),
        "--model-scratch", str(run_wo / "model.ckpt"),
        "--out", str(images),
    ]) == 0
    ppms = list(images.glob("*.ppm"))
    assert len(ppms) == (2 + 1) * 3  # (test + corner scenarios) x sources
    header = ppms[0].read_text().splitlines()
    assert header[0] == "P3" and header[1] == "24 24"


def test_pretrain_command(workdir, tmp_path):
    root, cfg_path, data = workdir
    out = tmp_path / "pre"
    assert main(["pretrain", "--config", str(cfg_path), "--data", str(data), "--out", str(out)]) == 0
    assert (out / "pretrain.ckpt").exists()
    report = json.loads((out / "pretrain_report.json").read_text())
    assert report["phase"] == "pretrain"


def test_train_resume_from_pretrain_checkpoint(workdir, tmp_path):
    root, cfg_path, data = workdir
    pre = tmp_path / "pre"
    assert main(["pretrain", "--config", str(cfg_path), "--data", str(data), "--out", str(pre)]) == 0
    run = tmp_path / "resumed"
    assert main([
        "train", "--config", str(cfg_path), "--data", str(data),
        "--out", str(run), "--init", str(pre / "pretrain.ckpt"),
    ]) == 0
    assert (run / "model.ckpt").exists()
    assert not (run / "pretrain.ckpt").exists()  # phase skipped when resuming


def test_missing_data_dir_exit_code(workdir, tmp_path):
    root, cfg_path, data = workdir
    code = main([
        "train", "--config", str(cfg_path), "--data", str(tmp_path / "nope"),
        "--out", str(tmp_path / "out"),
    ])
    assert code == 3


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("grid.banana = 1\n")
    code = main(["gen", "--config", str(bad), "--out", str(tmp_path / "d")])
    assert code == 2


def test_seed_override_changes_outputs(workdir, tmp_path):
    root, cfg_path, data = workdir
    other = tmp_path / "seeded"
    assert main(["gen", "--config", str(cfg_path), "--seed", "99", "--out", str(other)]) == 0
    manifest = json.loads((other / "manifest.json").read_text())
    assert manifest["seed"] == 99
    a = (data / "train" / "scenario_000.bin").read_bytes()
    b = (other / "train" / "scenario_000.bin").read_bytes()
    assert a != b
