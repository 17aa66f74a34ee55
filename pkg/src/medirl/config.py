"""Plain-text run configuration: dotted key=value lines.

One file drives the whole pipeline. Unknown keys are rejected so typos
fail loudly, and the canonical serialization hashes into the manifest
for reproducibility checks.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .grid import GridSpec
from .network import NetConfig
from .prior import ManualRules
from .training import TrainConfig
from .worlds import DEFAULT_MIX, FeatureKind


class ConfigError(ValueError):
    """Malformed or unknown configuration input."""


@dataclass(frozen=True)
class GenConfig:
    n_train: int = 40
    n_test: int = 10
    demos_per_scenario: int = 6
    collisions_per_scenario: int = 6
    max_len: int = 26
    demo_goals: int = 2
    demo_sharpness: float = 15.0
    min_dist: int = 6
    feature_mix: tuple[tuple[str, int], ...] = tuple(
        sorted((k.value, v) for k, v in DEFAULT_MIX.items())
    )

    def mix(self) -> dict[FeatureKind, int]:
        return {FeatureKind(name): count for name, count in self.feature_mix}


@dataclass(frozen=True)
class EvalConfig:
    samples_per_demo: int = 10
    n_thresholds: int = 101
    threshold: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = GridSpec(32, 32, 0.5)
    rules: ManualRules = ManualRules()
    net: NetConfig = NetConfig()
    train: TrainConfig = TrainConfig()
    gen: GenConfig = GenConfig()
    eval: EvalConfig = EvalConfig()
    seed: int = 0


_BOOL = {"true": True, "false": False}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def to_text(cfg: RunConfig) -> str:
    """Canonical key=value serialization (sorted keys)."""
    items = {
        "grid.height": cfg.grid.height,
        "grid.width": cfg.grid.width,
        "grid.cell_size": cfg.grid.cell_size,
        "rules.height_range_threshold": cfg.rules.height_range_threshold,
        "rules.dilation_radius": cfg.rules.dilation_radius,
        "rules.obstacle_cost": cfg.rules.obstacle_cost,
        "rules.free_cost": cfg.rules.free_cost,
        "net.main_channels": cfg.net.main_channels,
        "net.scale_channels": cfg.net.scale_channels,
        "train.pretrain": cfg.train.pretrain,
        "train.pretrain_epochs": cfg.train.pretrain_epochs,
        "train.finetune_epochs": cfg.train.finetune_epochs,
        "train.pretrain_lr": cfg.train.pretrain_lr,
        "train.finetune_lr": cfg.train.finetune_lr,
        "train.l2_coeff": cfg.train.l2_coeff,
        "train.early_stop_patience": cfg.train.early_stop_patience,
        "train.val_fraction": cfg.train.val_fraction,
        "gen.n_train": cfg.gen.n_train,
        "gen.n_test": cfg.gen.n_test,
        "gen.demos_per_scenario": cfg.gen.demos_per_scenario,
        "gen.collisions_per_scenario": cfg.gen.collisions_per_scenario,
        "gen.max_len": cfg.gen.max_len,
        "gen.demo_goals": cfg.gen.demo_goals,
        "gen.demo_sharpness": cfg.gen.demo_sharpness,
        "gen.min_dist": cfg.gen.min_dist,
        "eval.samples_per_demo": cfg.eval.samples_per_demo,
        "eval.n_thresholds": cfg.eval.n_thresholds,
        "eval.threshold": cfg.eval.threshold,
        "seed": cfg.seed,
    }
    for name, count in cfg.gen.feature_mix:
        items[f"gen.features.{name}"] = count
    return "\n".join(f"{k} = {_format(v)}" for k, v in sorted(items.items())) + "\n"


def from_text(text: str) -> RunConfig:
    """Parse key=value lines; '#' starts a comment; unknown keys are rejected."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = val

    defaults = RunConfig()

    def take(key: str, kind, fallback):
        if key not in values:
            return fallback
        raw = values.pop(key)
        try:
            if kind is bool:
                return _BOOL[raw.lower()]
            return kind(raw)
        except (ValueError, KeyError) as err:
            raise ConfigError(f"{key}: cannot parse {raw!r}") from err

    try:
        grid = GridSpec(
            take("grid.height", int, defaults.grid.height),
            take("grid.width", int, defaults.grid.width),
            take("grid.cell_size", float, defaults.grid.cell_size),
        )
        rules = ManualRules(
            take("rules.height_range_threshold", float, defaults.rules.height_range_threshold),
            take("rules.dilation_radius", int, defaults.rules.dilation_radius),
            take("rules.obstacle_cost", float, defaults.rules.obstacle_cost),
            take("rules.free_cost", float, defaults.rules.free_cost),
        )
        net = NetConfig(
            main_channels=take("net.main_channels", int, defaults.net.main_channels),
            scale_channels=take("net.scale_channels", int, defaults.net.scale_channels),
        )
        seed = take("seed", int, defaults.seed)
        train = TrainConfig(
            pretrain=take("train.pretrain", bool, defaults.train.pretrain),
            pretrain_epochs=take("train.pretrain_epochs", int, defaults.train.pretrain_epochs),
            finetune_epochs=take("train.finetune_epochs", int, defaults.train.finetune_epochs),
            pretrain_lr=take("train.pretrain_lr", float, defaults.train.pretrain_lr),
            finetune_lr=take("train.finetune_lr", float, defaults.train.finetune_lr),
            l2_coeff=take("train.l2_coeff", float, defaults.train.l2_coeff),
            early_stop_patience=take(
                "train.early_stop_patience", int, defaults.train.early_stop_patience
            ),
            val_fraction=take("train.val_fraction", float, defaults.train.val_fraction),
            seed=seed,
        )
        mix = []
        for kind in FeatureKind:
            key = f"gen.features.{kind.value}"
            fallback = dict(defaults.gen.feature_mix).get(kind.value, 0)
            mix.append((kind.value, take(key, int, fallback)))
        gen = GenConfig(
            n_train=take("gen.n_train", int, defaults.gen.n_train),
            n_test=take("gen.n_test", int, defaults.gen.n_test),
            demos_per_scenario=take(
                "gen.demos_per_scenario", int, defaults.gen.demos_per_scenario
            ),
            collisions_per_scenario=take(
                "gen.collisions_per_scenario", int, defaults.gen.collisions_per_scenario
            ),
            max_len=take("gen.max_len", int, defaults.gen.max_len),
            demo_goals=take("gen.demo_goals", int, defaults.gen.demo_goals),
            demo_sharpness=take("gen.demo_sharpness", float, defaults.gen.demo_sharpness),
            min_dist=take("gen.min_dist", int, defaults.gen.min_dist),
            feature_mix=tuple(sorted(mix)),
        )
        eval_cfg = EvalConfig(
            samples_per_demo=take("eval.samples_per_demo", int, defaults.eval.samples_per_demo),
            n_thresholds=take("eval.n_thresholds", int, defaults.eval.n_thresholds),
            threshold=take("eval.threshold", float, defaults.eval.threshold),
        )
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from err

    if values:
        raise ConfigError(f"unknown keys: {', '.join(sorted(values))}")
    return RunConfig(grid, rules, net, train, gen, eval_cfg, seed)


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    train = TrainConfig(
        pretrain=cfg.train.pretrain,
        pretrain_epochs=cfg.train.pretrain_epochs,
        finetune_epochs=cfg.train.finetune_epochs,
        pretrain_lr=cfg.train.pretrain_lr,
        finetune_lr=cfg.train.finetune_lr,
        l2_coeff=cfg.train.l2_coeff,
        early_stop_patience=cfg.train.early_stop_patience,
        val_fraction=cfg.train.val_fraction,
        seed=seed,
    )
    return RunConfig(cfg.grid, cfg.rules, cfg.net, train, cfg.gen, cfg.eval, seed)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(to_text(cfg).encode("ascii")).hexdigest()
