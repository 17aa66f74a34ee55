"""Two-phase training: regression to the manual prior, then IRL fine-tuning.

Pretraining regresses the network onto the handcrafted cost map, which
feeds a gradient to every cell and plants the human prior in the
weights. Fine-tuning then runs the full IRL loop per scenario: forward
pass, solve the MDP for the current reward, match state visitation
frequencies against the demonstrations, and backpropagate the
difference. Fine-tuning early-stops on validation NLL and returns the
best-validation parameters.

Both phases use full-batch Adam: with sigmoid units everywhere, plain
gradient descent stalls far above the attainable loss at any stable
rate, while Adam fits the prior faithfully within a couple hundred
epochs.

Everything is a pure function of (config, seed, data): accumulation
runs in scenario index order and all randomness is derived from the
config seed, so identical inputs give byte-identical checkpoints.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .grid import DemonstrationSet, Mdp
from .maps import CostMap
from .network import (
    NetConfig,
    NetworkParams,
    add_params,
    backward,
    forward,
    init_params,
    regression_loss_and_grad,
    save_params,
    unflatten,
)
from .prior import ManualRules, manual_cost
from .solver import RewardMap, data_loss_and_grad
from .worlds import Scenario


class NumericalError(RuntimeError):
    """Training produced a non-finite loss or gradient."""


@dataclass
class _Adam:
    """Full-batch Adam state; one step per epoch."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_size(cls, n: int) -> "_Adam":
        return cls(np.zeros(n), np.zeros(n))

    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return theta - lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    pretrain: bool = True
    pretrain_epochs: int = 200
    finetune_epochs: int = 40
    pretrain_lr: float = 0.03
    finetune_lr: float = 0.01
    l2_coeff: float = 1e-4
    early_stop_patience: int = 5
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.pretrain_lr <= 0 or self.finetune_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.l2_coeff < 0:
            raise ValueError("l2_coeff must be nonnegative")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.pretrain_epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch budgets must be nonnegative")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float | None
    reg: float
    grad_norm: float

    @property
    def total_loss(self) -> float:
        return self.train_loss + self.reg


@dataclass(frozen=True)
class TrainReport:
    phase: str
    records: tuple[EpochRecord, ...]
    stopped_at: int
    best_epoch: int

    def __post_init__(self) -> None:
        epochs = [r.epoch for r in self.records]
        if epochs != sorted(epochs):
            raise ValueError("epoch records out of order")

    @property
    def final_train_loss(self) -> float:
        return self.records[-1].train_loss if self.records else float("nan")

    def to_json(self) -> str:
        body = {
            "phase": self.phase,
            "stopped_at": self.stopped_at,
            "best_epoch": self.best_epoch,
            "records": [asdict(r) for r in self.records],
        }
        return json.dumps(body, sort_keys=True, indent=2)


def _l2_value(params: NetworkParams, coeff: float) -> float:
    vec = params.flatten()
    return 0.5 * coeff * float(vec @ vec)


def pretrain(
    params: NetworkParams,
    scenarios: list[Scenario],
    cfg: TrainConfig,
    rules: ManualRules = ManualRules(),
) -> tuple[NetworkParams, TrainReport]:
    """Full-batch descent of the MSE against manual prior targets."""
    targets = [manual_cost(s.grid, rules) for s in scenarios]
    records = []
    opt = _Adam.for_size(params.n_params)
    for epoch in range(cfg.pretrain_epochs):
        total_loss = 0.0
        grad_vec = np.zeros(params.n_params)
        for scenario, target in zip(scenarios, targets):
            loss, grads = regression_loss_and_grad(params, scenario.grid, target)
            total_loss += loss
            grad_vec += grads.flatten()
        total_loss /= len(scenarios)
        grad_vec /= len(scenarios)
        if not np.isfinite(total_loss) or not np.all(np.isfinite(grad_vec)):
            raise NumericalError(f"pretraining diverged at epoch {epoch}")
        params = unflatten(
            params.config, opt.step(params.flatten(), grad_vec, cfg.pretrain_lr)
        )
        records.append(
            EpochRecord(epoch, total_loss, None, 0.0, float(np.linalg.norm(grad_vec)))
        )
    report = TrainReport(
        "pretrain",
        tuple(records),
        stopped_at=len(records),
        best_epoch=len(records) - 1 if records else 0,
    )
    return params, report


def _scenario_nll(
    params: NetworkParams, scenario: Scenario, demos: DemonstrationSet, horizon: int
) -> float:
    cost, _ = forward(params, scenario.grid)
    reward = RewardMap(-cost.values)
    loss, _ = data_loss_and_grad(
        reward, demos, Mdp(scenario.spec, 1.0, None, horizon)
    )
    return loss


def validation_nll(
    params: NetworkParams,
    scenarios: list[Scenario],
    demos: list[DemonstrationSet],
    horizon: int,
) -> float:
    return float(
        np.mean([_scenario_nll(params, s, d, horizon) for s, d in zip(scenarios, demos)])
    )


def split_validation(
    n: int, val_fraction: float, seed: int
) -> tuple[list[int], list[int]]:
    """Deterministic train/validation split at scenario granularity."""
    if n == 1:
        return [0], [0]
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5B117)))
    perm = rng.permutation(n)
    n_val = min(n - 1, max(1, int(round(val_fraction * n))))
    val = sorted(int(i) for i in perm[:n_val])
    train = sorted(int(i) for i in perm[n_val:])
    return train, val


def finetune(
    params: NetworkParams,
    scenarios: list[Scenario],
    demos: list[DemonstrationSet],
    cfg: TrainConfig,
    horizon: int = 26,
) -> tuple[NetworkParams, TrainReport]:
    """IRL fine-tuning with visitation matching and early stopping.

    Per epoch and training scenario: forward pass -> r = -cost -> solve
    -> visitation difference -> backprop; the mean parameter gradient
    plus the L2 term drives one descent step. Validation NLL decides
    early stopping with the configured patience, and the returned
    parameters are the best-validation checkpoint.
    """
    if len(scenarios) != len(demos):
        raise ValueError("need one demonstration set per scenario")
    if any(len(d) < 1 for d in demos):
        raise ValueError("every scenario needs at least one demonstration")
    train_idx, val_idx = split_validation(len(scenarios), cfg.val_fraction, cfg.seed)
    val_scenarios = [scenarios[i] for i in val_idx]
    val_demos = [demos[i] for i in val_idx]

    best_params = params
    best_val = np.inf
    best_epoch = -1
    bad_epochs = 0
    records = []
    stopped_at = 0
    opt = _Adam.for_size(params.n_params)

    for epoch in range(cfg.finetune_epochs):
        total_nll = 0.0
        grad_vec = np.zeros(params.n_params)
        for i in train_idx:
            scenario = scenarios[i]
            cost, tape = forward(params, scenario.grid)
            reward = RewardMap(-cost.values)
            nll, grad_r = data_loss_and_grad(
                reward, demos[i], Mdp(scenario.spec, 1.0, None, horizon)
            )
            grads, _ = backward(tape, -grad_r)  # d loss / d cost = -d loss / d r
            total_nll += nll
            grad_vec += grads.flatten()
        total_nll /= len(train_idx)
        grad_vec /= len(train_idx)
        theta = params.flatten()
        grad_vec += cfg.l2_coeff * theta
        if not np.isfinite(total_nll) or not np.all(np.isfinite(grad_vec)):
            raise NumericalError(f"fine-tuning diverged at epoch {epoch}")
        reg = _l2_value(params, cfg.l2_coeff)
        params = unflatten(params.config, opt.step(theta, grad_vec, cfg.finetune_lr))

        val = validation_nll(params, val_scenarios, val_demos, horizon)
        records.append(
            EpochRecord(epoch, total_nll, val, reg, float(np.linalg.norm(grad_vec)))
        )
        stopped_at = epoch + 1
        if val < best_val:
            best_val = val
            best_params = params
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.early_stop_patience:
                break

    report = TrainReport("finetune", tuple(records), stopped_at, max(best_epoch, 0))
    return best_params, report


@dataclass(frozen=True)
class PipelineArtifacts:
    model_path: Path
    pretrain_path: Path | None
    report_paths: tuple[Path, ...]
    reports: tuple[TrainReport, ...]


def run_pipeline(
    scenarios: list[Scenario],
    demos: list[DemonstrationSet],
    cfg: TrainConfig,
    out_dir,
    rules: ManualRules = ManualRules(),
    horizon: int = 26,
    net_config: NetConfig = NetConfig(),
    init: NetworkParams | None = None,
) -> PipelineArtifacts:
    """Run (optional) pretraining then fine-tuning; persist checkpoints and reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = init if init is not None else init_params(cfg.seed, net_config)

    reports: list[TrainReport] = []
    report_paths: list[Path] = []
    pretrain_path = None
    if cfg.pretrain and init is None:
        params, report = pretrain(params, scenarios, cfg, rules)
        pretrain_path = out / "pretrain.ckpt"
        save_params(params, pretrain_path)
        path = out / "pretrain_report.json"
        path.write_text(report.to_json() + "\n")
        reports.append(report)
        report_paths.append(path)

    params, report = finetune(params, scenarios, demos, cfg, horizon)
    model_path = out / "model.ckpt"
    save_params(params, model_path)
    path = out / "finetune_report.json"
    path.write_text(report.to_json() + "\n")
    reports.append(report)
    report_paths.append(path)

    return PipelineArtifacts(model_path, pretrain_path, tuple(report_paths), tuple(reports))
