"""Evaluation: demonstration likelihood, spatial closeness, classification.

NLL measures how likely held-out demonstrations are under the MaxEnt
model induced by a cost map. MHD compares demonstrations against
trajectories sampled from that model between the same endpoints. The
classification view scores each trajectory by its maximum cell cost
(one untraversable cell makes a path infeasible) and sweeps the
traversability threshold into a precision-recall curve; traversable is
the positive class, so a conservative cost function shows high
precision and low recall.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Cell, DemonstrationSet, GridSpec, Trajectory
from .maps import CostMap
from .solver import (
    GroupedSolver,
    RewardMap,
    sample_trajectories,
    trajectory_log_prob,
)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 1.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0


@dataclass(frozen=True)
class PrCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    auc: float

    def __post_init__(self) -> None:
        t = np.asarray(self.thresholds, dtype=np.float64)
        if t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("thresholds must be strictly increasing, >= 2 of them")
        for arr in (self.precision, self.recall):
            if np.any(arr < 0) or np.any(arr > 1):
                raise ValueError("precision/recall must lie in [0, 1]")

    def precision_at_recall(self, recall: float) -> float:
        """Best precision among operating points reaching at least `recall`."""
        ok = self.recall >= recall
        return float(self.precision[ok].max()) if ok.any() else 0.0

    def max_recall_at_precision(self, precision: float) -> float:
        """Best recall among operating points with at least `precision`."""
        ok = self.precision >= precision
        return float(self.recall[ok].max()) if ok.any() else 0.0

    def operating_points(self) -> list[tuple[float, float]]:
        """Distinct (precision, recall) pairs, in threshold order."""
        seen: list[tuple[float, float]] = []
        for p, r in zip(self.precision, self.recall):
            if not seen or seen[-1] != (p, r):
                seen.append((float(p), float(r)))
        return seen


@dataclass(frozen=True)
class MetricReport:
    nll: float
    mhd: float
    per_scenario_nll: tuple[float, ...]
    per_scenario_mhd: tuple[float, ...]

    def __post_init__(self) -> None:
        if not np.isfinite(self.nll):
            raise ValueError("NLL must be finite")
        if self.mhd < 0:
            raise ValueError("MHD must be nonnegative")


def trajectory_nlls(cost: CostMap, demos: DemonstrationSet, horizon: int) -> np.ndarray:
    """Per-demonstration negative log-likelihoods under r = -cost.

    Each demonstration conditions on its own endpoints and step count.
    """
    solver = GroupedSolver(RewardMap(-cost.values), demos.spec, horizon, demos)
    out = np.empty(len(demos))
    for i, traj in enumerate(demos):
        values, _, offset = solver.lookup(traj)
        lp = trajectory_log_prob(values, traj, offset)
        if not np.isfinite(lp):
            raise ValueError(f"demonstration {i} is infeasible under this cost map")
        out[i] = -lp
    return out


def eval_nll(cost: CostMap, demos: DemonstrationSet, horizon: int) -> float:
    """Mean per-trajectory NLL of the demonstrations given the cost map."""
    return float(trajectory_nlls(cost, demos, horizon).mean())


def modified_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """max of the two directed mean-min Euclidean distances between point sets."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != 2 or b.shape[1] != 2:
        raise ValueError("point sets must have shape (n, 2)")
    if len(a) == 0 or len(b) == 0:
        raise ValueError("point sets must be non-empty")
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return float(max(d.min(axis=1).mean(), d.min(axis=0).mean()))


def _cell_points(cells) -> np.ndarray:
    return np.unique(np.asarray(sorted(set(cells)), dtype=np.float64), axis=0)


def eval_mhd(
    cost: CostMap,
    demos: DemonstrationSet,
    samples_per_demo: int = 10,
    seed: int = 0,
    horizon: int = 26,
) -> float:
    """Mean MHD between each demonstration and model samples sharing its endpoints."""
    if samples_per_demo < 1:
        raise ValueError("samples_per_demo must be >= 1")
    solver = GroupedSolver(RewardMap(-cost.values), demos.spec, horizon, demos)
    spec = demos.spec
    totals = []
    for i, traj in enumerate(demos):
        _, policy, offset = solver.lookup(traj)
        sub_seed = int(np.random.SeedSequence((seed, i)).generate_state(1)[0])
        samples = sample_trajectories(
            policy, policy.mdp, traj.start, samples_per_demo, sub_seed, offset
        )
        demo_pts = _cell_points(traj.visited(spec))
        sample_pts = _cell_points(
            [c for s in samples for c in s.visited(spec)]
        )
        totals.append(modified_hausdorff(demo_pts, sample_pts))
    return float(np.mean(totals))


def trajectory_score(cost: CostMap, traj: Trajectory, spec: GridSpec) -> float:
    """Max cell cost along the trajectory; one bad cell makes a path infeasible."""
    return float(max(cost.values[c] for c in traj.visited(spec)))


def classify_trajectories(
    cost: CostMap,
    positives: DemonstrationSet,
    negatives: DemonstrationSet,
    threshold: float,
) -> Confusion:
    """Classify trajectories as traversable iff their max cell cost < threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    spec = positives.spec
    tp = sum(1 for t in positives if trajectory_score(cost, t, spec) < threshold)
    fp = sum(1 for t in negatives if trajectory_score(cost, t, spec) < threshold)
    return Confusion(tp=tp, fp=fp, tn=len(negatives) - fp, fn=len(positives) - tp)


def pr_sweep(
    cost: CostMap,
    positives: DemonstrationSet,
    negatives: DemonstrationSet,
    thresholds,
) -> PrCurve:
    """Precision/recall over a threshold sweep, with a step-integral AUC."""
    thresholds = np.asarray(sorted(thresholds), dtype=np.float64)
    if thresholds.size < 2:
        raise ValueError("need at least 2 thresholds")
    precision, recall = [], []
    for t in thresholds:
        c = classify_trajectories(cost, positives, negatives, float(t))
        precision.append(c.precision)
        recall.append(c.recall)
    precision = np.array(precision)
    recall = np.array(recall)
    order = np.argsort(recall, kind="stable")
    r_sorted = recall[order]
    p_sorted = precision[order]
    prev_r = 0.0
    auc = 0.0
    for r, p in zip(r_sorted, p_sorted):
        auc += (r - prev_r) * p
        prev_r = r
    return PrCurve(thresholds, precision, recall, float(auc))
