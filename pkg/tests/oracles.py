"""Independent brute-force oracles used to pin expected test values.

These deliberately avoid the production code paths: paths are enumerated
explicitly and normalized with plain exp/sum arithmetic, dilation is a
double loop, and the point-set distance is computed pairwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from medirl.grid import Action, GridSpec
from medirl.solver import successor_table


@dataclass
class PathBucket:
    """All enumerated goal-terminated paths with `n_actions` actions each."""

    n_actions: int
    cells: np.ndarray  # (n_paths, n_actions) flat acting cells
    actions: np.ndarray  # (n_paths, n_actions)
    scores: np.ndarray  # (n_paths,) cumulative reward over acting cells


@dataclass
class Enumeration:
    spec: GridSpec
    goal_flat: int
    buckets: list[PathBucket]
    log_partition: float
    probs: list[np.ndarray]  # per bucket, aligned with bucket rows

    @property
    def n_paths(self) -> int:
        return sum(len(p) for p in self.probs)


def enumerate_paths(
    reward: np.ndarray, spec: GridSpec, start, goal, horizon: int
) -> Enumeration:
    """Every action sequence from `start` that first reaches `goal` within
    `horizon` actions, scored by the cumulative reward of its acting cells."""
    r_flat = np.asarray(reward, dtype=np.float64).ravel()
    succ = successor_table(spec)
    start_flat, goal_flat = spec.to_flat(start), spec.to_flat(goal)

    cur = np.array([start_flat], dtype=np.int64)
    score = np.zeros(1)
    cells = np.zeros((1, 0), dtype=np.int64)
    acts = np.zeros((1, 0), dtype=np.int64)
    buckets: list[PathBucket] = []

    for depth in range(horizon):
        new_cur, new_score, new_cells, new_acts = [], [], [], []
        fin_cells, fin_acts, fin_scores = [], [], []
        for a in range(len(Action)):
            nxt = succ[cur, a]
            ok = nxt >= 0
            if not ok.any():
                continue
            ext_cells = np.hstack([cells[ok], cur[ok, None]])
            ext_acts = np.hstack([acts[ok], np.full((ok.sum(), 1), a, dtype=np.int64)])
            ext_score = score[ok] + r_flat[cur[ok]]
            done = nxt[ok] == goal_flat
            if done.any():
                fin_cells.append(ext_cells[done])
                fin_acts.append(ext_acts[done])
                fin_scores.append(ext_score[done])
            if (~done).any():
                new_cur.append(nxt[ok][~done])
                new_score.append(ext_score[~done])
                new_cells.append(ext_cells[~done])
                new_acts.append(ext_acts[~done])
        if fin_scores:
            buckets.append(
                PathBucket(
                    depth + 1,
                    np.vstack(fin_cells),
                    np.vstack(fin_acts),
                    np.hstack(fin_scores),
                )
            )
        if not new_cur:
            break
        cur = np.hstack(new_cur)
        score = np.hstack(new_score)
        cells = np.vstack(new_cells)
        acts = np.vstack(new_acts)

    all_scores = np.hstack([b.scores for b in buckets]) if buckets else np.array([])
    if all_scores.size == 0:
        raise ValueError("no goal-terminated path within the horizon")
    m = all_scores.max()
    z = m + np.log(np.exp(all_scores - m).sum())
    probs = [np.exp(b.scores - z) for b in buckets]
    return Enumeration(spec, goal_flat, buckets, z, probs)


def enumeration_visitation(enum: Enumeration) -> np.ndarray:
    """Probability-weighted expected visit counts (acting cells + goal arrival)."""
    n = enum.spec.n_cells
    mu = np.zeros(n)
    for bucket, p in zip(enum.buckets, enum.probs):
        if bucket.cells.size:
            mu += np.bincount(
                bucket.cells.ravel(),
                weights=np.repeat(p, bucket.n_actions),
                minlength=n,
            )
        mu[enum.goal_flat] += p.sum()
    return mu


def chebyshev_dilate_bruteforce(mask: np.ndarray, radius: int) -> np.ndarray:
    """Reference Minkowski dilation of a boolean mask by a Chebyshev ball."""
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w:
                        out[yy, xx] = True
    return out


def mhd_bruteforce(a: np.ndarray, b: np.ndarray) -> float:
    """Modified Hausdorff distance between two point sets via double loops."""

    def directed(p, q):
        total = 0.0
        for pt in p:
            best = min(float(np.hypot(pt[0] - qt[0], pt[1] - qt[1])) for qt in q)
            total += best
        return total / len(p)

    return max(directed(a, b), directed(b, a))


def central_difference_grad(fn, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function over a flat array."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = fn(x)
        flat[i] = orig - eps
        lo = fn(x)
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * eps)
    return g


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """Max elementwise |a-b| / max(|a|, |b|, floor)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())
