"""Command-line pipeline: gen | pretrain | train | eval | render.

Every run is reproducible from (config file, seed); the data manifest
records the config hash and every emitted file. Exit codes: 0 success,
2 config error, 3 data error, 4 numerical failure. Set MEDIRL_LOG to a
logging level name (DEBUG, INFO, ...) to change verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, config_hash, from_text, to_text, with_seed
from .grid import DemonstrationSet, load_trajectories, save_trajectories
from .network import load_params, save_params
from .prior import manual_cost
from .report import compare_report, cost_sources
from .solver import InfeasibleDemonstrationError
from .images import write_ppm
from .training import NumericalError, run_pipeline, pretrain as run_pretrain
from .network import init_params
from .worlds import (
    PlacementError,
    Scenario,
    corner_case_scenario,
    generate_collision_trajectories,
    generate_demos,
    generate_scenario,
    load_scenario,
    save_scenario,
)

log = logging.getLogger("medirl")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def derive_seed(master: int, *parts: int) -> int:
    return int(np.random.SeedSequence((master, *parts)).generate_state(1)[0])


def load_config(path: str | None, seed_override: int | None) -> RunConfig:
    if path is None:
        cfg = RunConfig()
    else:
        cfg = from_text(Path(path).read_text())
    if seed_override is not None:
        cfg = with_seed(cfg, seed_override)
    return cfg


# ---------------------------------------------------------------------------
# data set handling


def scenario_stem(index: int) -> str:
    return f"scenario_{index:03d}"


def cmd_gen(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []
    seeds: dict[str, int] = {}

    def emit_split(split: str, n: int, stream: int, with_collisions: bool):
        split_dir = out / split
        split_dir.mkdir(exist_ok=True)
        for i in range(n):
            seed = derive_seed(cfg.seed, stream, i)
            scenario = generate_scenario(seed, cfg.grid, cfg.gen.mix())
            stem = scenario_stem(i)
            seeds[f"{split}/{stem}"] = seed
            _emit_scenario(split_dir, stem, scenario, cfg, files, split, with_collisions)

    def _emit_scenario(split_dir, stem, scenario, cfg, files, split, with_collisions):
        save_scenario(scenario, split_dir / f"{stem}.bin")
        files.append(f"{split}/{stem}.bin")
        demos = generate_demos(
            scenario,
            count=cfg.gen.demos_per_scenario,
            max_len=cfg.gen.max_len,
            seed=derive_seed(scenario.seed, 0xD),
            n_goals=cfg.gen.demo_goals,
            sharpness=cfg.gen.demo_sharpness,
            min_dist=cfg.gen.min_dist,
        )
        save_trajectories(demos, split_dir / f"{stem}.demos.txt")
        files.append(f"{split}/{stem}.demos.txt")
        if with_collisions:
            hits = generate_collision_trajectories(
                scenario, cfg.gen.collisions_per_scenario, seed=derive_seed(scenario.seed, 0xC)
            )
            save_trajectories(hits, split_dir / f"{stem}.collisions.txt")
            files.append(f"{split}/{stem}.collisions.txt")

    emit_split("train", cfg.gen.n_train, 1, with_collisions=True)
    emit_split("test", cfg.gen.n_test, 2, with_collisions=True)

    corner_dir = out / "corner"
    corner_dir.mkdir(exist_ok=True)
    corner_seed = derive_seed(cfg.seed, 3)
    corner = corner_case_scenario(corner_seed, cfg.grid, cfg.rules)
    seeds["corner/scenario_000"] = corner_seed
    _emit_scenario(corner_dir, scenario_stem(0), corner, cfg, files, "corner", True)

    (out / "config.txt").write_text(to_text(cfg))
    files.append("config.txt")
    manifest = {
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "files": sorted(files),
        "scenario_seeds": dict(sorted(seeds.items())),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    log.info("wrote %d files to %s", len(files) + 1, out)
    return EXIT_OK


def load_split(data_dir: Path, split: str, with_collisions: bool):
    split_dir = data_dir / split
    if not split_dir.is_dir():
        raise FileNotFoundError(f"missing data split: {split_dir}")
    scenarios: list[Scenario] = []
    demos: list[DemonstrationSet] = []
    collisions: list[DemonstrationSet] = []
    for path in sorted(split_dir.glob("scenario_*.bin")):
        scenarios.append(load_scenario(path))
        demos.append(load_trajectories(path.with_suffix("").parent / f"{path.stem}.demos.txt"))
        if with_collisions:
            collisions.append(
                load_trajectories(path.with_suffix("").parent / f"{path.stem}.collisions.txt")
            )
    if not scenarios:
        raise FileNotFoundError(f"no scenarios found under {split_dir}")
    return scenarios, demos, collisions


def cmd_pretrain(args) -> int:
    cfg = load_config(args.config, args.seed)
    scenarios, _, _ = load_split(Path(args.data), "train", with_collisions=False)
    params = init_params(cfg.train.seed, cfg.net)
    params, report = run_pretrain(params, scenarios, cfg.train, cfg.rules)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_params(params, out / "pretrain.ckpt")
    (out / "pretrain_report.json").write_text(report.to_json() + "\n")
    log.info("pretraining finished: final MSE %.6f", report.final_train_loss)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.seed)
    if args.no_pretrain:
        train_cfg = cfg.train.__class__(
            pretrain=False,
            pretrain_epochs=cfg.train.pretrain_epochs,
            finetune_epochs=cfg.train.finetune_epochs,
            pretrain_lr=cfg.train.pretrain_lr,
            finetune_lr=cfg.train.finetune_lr,
            l2_coeff=cfg.train.l2_coeff,
            early_stop_patience=cfg.train.early_stop_patience,
            val_fraction=cfg.train.val_fraction,
            seed=cfg.train.seed,
        )
    else:
        train_cfg = cfg.train
    scenarios, demos, _ = load_split(Path(args.data), "train", with_collisions=False)
    init = load_params(args.init) if args.init else None
    artifacts = run_pipeline(
        scenarios,
        demos,
        train_cfg,
        args.out,
        rules=cfg.rules,
        horizon=cfg.gen.max_len,
        net_config=cfg.net,
        init=init,
    )
    log.info("training finished: %s", artifacts.model_path)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config, args.seed)
    data_dir = Path(args.data)
    scenarios, demos, collisions = load_split(data_dir, "test", with_collisions=True)
    corner, _, _ = load_split(data_dir, "corner", with_collisions=False)
    scratch = load_params(args.model_scratch)
    pretrained = load_params(args.model_pretrained)
    results = compare_report(
        scenarios,
        demos,
        collisions,
        corner[0],
        cfg.rules,
        scratch,
        pretrained,
        cfg.eval,
        cfg.gen.max_len,
        cfg.seed,
        args.out,
    )
    for name, r in results.items():
        log.info(
            "%s: NLL %.3f MHD %.3f PR-AUC %.3f", name, r["nll"], r["mhd"], r["pr_auc"]
        )
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = load_config(args.config, args.seed)
    data_dir = Path(args.data)
    test, _, _ = load_split(data_dir, "test", with_collisions=False)
    corner, _, _ = load_split(data_dir, "corner", with_collisions=False)
    scratch = load_params(args.model_scratch)
    pretrained = load_params(args.model_pretrained)
    sources = cost_sources(cfg.rules, scratch, pretrained)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for split, scenarios in (("test", test), ("corner", corner)):
        for i, scenario in enumerate(scenarios):
            for name, fn in sources.items():
                write_ppm(fn(scenario).values, out / f"{split}_{i:03d}_{name}.ppm")
    log.info("rendered %d cost maps", (len(test) + len(corner)) * len(sources))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medirl",
        description="maximum entropy deep IRL for grid navigation cost maps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False, models=False):
        p.add_argument("--config", help="run configuration file (key = value lines)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", required=True, help="output directory")
        if data:
            p.add_argument("--data", required=True, help="data directory from `gen`")
        if models:
            p.add_argument("--model-pretrained", required=True, help="checkpoint trained with pretraining")
            p.add_argument("--model-scratch", required=True, help="checkpoint trained from random init")

    common(sub.add_parser("gen", help="generate synthetic scenarios and demonstrations"))
    common(sub.add_parser("pretrain", help="regression pretraining to the manual prior"), data=True)
    train = sub.add_parser("train", help="run the training pipeline")
    common(train, data=True)
    train.add_argument("--no-pretrain", action="store_true", help="skip the pretraining phase")
    train.add_argument("--init", help="start fine-tuning from this checkpoint")
    common(sub.add_parser("eval", help="compare manual/scratch/pretrained cost maps"), data=True, models=True)
    common(sub.add_parser("render", help="render cost maps as PPM images"), data=True, models=True)
    return parser


COMMANDS = {
    "gen": cmd_gen,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "render": cmd_render,
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MEDIRL_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        log.error("config error: %s", err)
        return EXIT_CONFIG
    except (FileNotFoundError, PlacementError, InfeasibleDemonstrationError, ValueError) as err:
        log.error("data error: %s", err)
        return EXIT_DATA
    except NumericalError as err:
        log.error("numerical failure: %s", err)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
