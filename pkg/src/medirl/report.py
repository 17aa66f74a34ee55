"""Comparison reports across manual, scratch-trained and pretrained models.

Emits one metric table (NLL, MHD, PR-AUC plus the operating point at the
configured threshold), a PR curve CSV per source, and rendered cost
maps of the corner-case scenario. Reference values from the original
real-vehicle evaluation are embedded as comments for context; they come
from a private dataset and are never asserted against.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import EvalConfig
from .grid import DemonstrationSet
from .images import write_ppm
from .maps import CostMap
from .metrics import eval_mhd, eval_nll, trajectory_score
from .network import NetworkParams, forward
from .prior import ManualRules, manual_cost
from .worlds import Scenario

SOURCE_NAMES = ("manual", "wo_pretrain", "w_pretrain")

# real-vehicle urban-driving reference (not reproducible on synthetic worlds)
REFERENCE_NLL = {"manual": 56.402, "wo_pretrain": 47.535, "w_pretrain": 46.767}
REFERENCE_MHD = {"manual": 0.286, "wo_pretrain": 0.218, "w_pretrain": 0.182}


def cost_sources(
    rules: ManualRules,
    scratch: NetworkParams,
    pretrained: NetworkParams,
) -> dict[str, callable]:
    """The three cost-map providers compared throughout the reports."""
    return {
        "manual": lambda scenario: manual_cost(scenario.grid, rules),
        "wo_pretrain": lambda scenario: forward(scratch, scenario.grid)[0],
        "w_pretrain": lambda scenario: forward(pretrained, scenario.grid)[0],
    }


def evaluate_source(
    cost_fn,
    scenarios: list[Scenario],
    demos: list[DemonstrationSet],
    collisions: list[DemonstrationSet],
    eval_cfg: EvalConfig,
    horizon: int,
    seed: int,
) -> dict:
    """Pooled NLL/MHD and classification metrics for one cost source."""
    nlls, mhds = [], []
    pos_scores, neg_scores = [], []
    for i, scenario in enumerate(scenarios):
        cost = cost_fn(scenario)
        nlls.append(eval_nll(cost, demos[i], horizon))
        mhds.append(
            eval_mhd(
                cost,
                demos[i],
                samples_per_demo=eval_cfg.samples_per_demo,
                seed=int(np.random.SeedSequence((seed, i)).generate_state(1)[0]),
                horizon=horizon,
            )
        )
        spec = scenario.spec
        pos_scores += [trajectory_score(cost, t, spec) for t in demos[i]]
        neg_scores += [trajectory_score(cost, t, spec) for t in collisions[i]]

    pos_scores = np.array(pos_scores)
    neg_scores = np.array(neg_scores)
    thresholds = np.linspace(0.0, 1.0, eval_cfg.n_thresholds)
    precision, recall = _curve_from_scores(pos_scores, neg_scores, thresholds)
    op_precision, op_recall = _point_from_scores(
        pos_scores, neg_scores, eval_cfg.threshold
    )
    return {
        "nll": float(np.mean(nlls)),
        "mhd": float(np.mean(mhds)),
        "per_scenario_nll": nlls,
        "per_scenario_mhd": mhds,
        "thresholds": thresholds,
        "precision": precision,
        "recall": recall,
        "pr_auc": _step_auc(recall, precision),
        "precision_at_threshold": op_precision,
        "recall_at_threshold": op_recall,
    }


def _point_from_scores(pos: np.ndarray, neg: np.ndarray, t: float):
    tp = int((pos < t).sum())
    fp = int((neg < t).sum())
    fn = len(pos) - tp
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall


def _curve_from_scores(pos: np.ndarray, neg: np.ndarray, thresholds: np.ndarray):
    precision, recall = [], []
    for t in thresholds:
        p, r = _point_from_scores(pos, neg, float(t))
        precision.append(p)
        recall.append(r)
    return np.array(precision), np.array(recall)


def _step_auc(recall: np.ndarray, precision: np.ndarray) -> float:
    order = np.argsort(recall, kind="stable")
    prev_r = 0.0
    auc = 0.0
    for r, p in zip(recall[order], precision[order]):
        auc += (r - prev_r) * p
        prev_r = r
    return float(auc)


def compare_report(
    scenarios: list[Scenario],
    demos: list[DemonstrationSet],
    collisions: list[DemonstrationSet],
    corner: Scenario,
    rules: ManualRules,
    scratch: NetworkParams,
    pretrained: NetworkParams,
    eval_cfg: EvalConfig,
    horizon: int,
    seed: int,
    out_dir,
) -> dict[str, dict]:
    """Write metrics.csv, per-source PR curves and corner-case renders."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sources = cost_sources(rules, scratch, pretrained)
    results = {}
    for name in SOURCE_NAMES:
        results[name] = evaluate_source(
            sources[name], scenarios, demos, collisions, eval_cfg, horizon, seed
        )

    lines = [
        "# reference (real-vehicle urban dataset, not reproducible on synthetic worlds):",
        "# reference_nll "
        + " ".join(f"{k}={v}" for k, v in REFERENCE_NLL.items()),
        "# reference_mhd "
        + " ".join(f"{k}={v}" for k, v in REFERENCE_MHD.items()),
        "source,nll,mhd,pr_auc,precision,recall",
    ]
    for name in SOURCE_NAMES:
        r = results[name]
        lines.append(
            f"{name},{r['nll']!r},{r['mhd']!r},{r['pr_auc']!r},"
            f"{r['precision_at_threshold']!r},{r['recall_at_threshold']!r}"
        )
    (out / "metrics.csv").write_text("\n".join(lines) + "\n")

    for name in SOURCE_NAMES:
        r = results[name]
        rows = ["threshold,precision,recall"]
        rows += [
            f"{t!r},{p!r},{rc!r}"
            for t, p, rc in zip(r["thresholds"], r["precision"], r["recall"])
        ]
        (out / f"pr_{name}.csv").write_text("\n".join(rows) + "\n")

    render_dir = out / "renders"
    render_dir.mkdir(exist_ok=True)
    for name in SOURCE_NAMES:
        cost = sources[name](corner)
        write_ppm(cost.values, render_dir / f"corner_{name}.ppm")
    truth_cost = CostMap(corner.truth_cost)
    write_ppm(truth_cost.values, render_dir / "corner_truth.ppm")
    return results
