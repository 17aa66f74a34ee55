"""Maximum-entropy trajectory model over grid MDPs.

Soft (log-sum-exp) backward value iteration yields a time-indexed policy
under which the probability of a path between fixed endpoints is
proportional to the exponential of its cumulative reward. The forward
pass propagates start mass through that policy to obtain expected state
visitation frequencies; matching them against demonstration frequencies
gives the exact gradient of the demonstration negative log-likelihood
with respect to the reward map.

Timing conventions, fixed throughout:
  * reward is collected at each state an action is taken from, not at
    the arrival cell of the final action;
  * the goal absorbs from step 1 onward (paths end on arrival), while
    the start cell always acts at step 0, so degenerate loops that start
    and end on the same cell remain well-defined;
  * visitation counts cover every cell a trajectory touches, including
    the final arrival. Both conventions together keep the visitation
    difference equal to the loss gradient.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import Action, Cell, DemonstrationSet, GridSpec, Mdp, Trajectory

N_ACTIONS = len(Action)


class InfeasibleDemonstrationError(ValueError):
    """A demonstration has zero probability under the current model."""


@dataclass(frozen=True)
class RewardMap:
    """Per-cell reward r(s); reward = -cost for cost maps."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"reward must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("reward entries must be finite")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SoftValues:
    """Soft state values v[t, s] and action values q[t, s, a], flat-indexed.

    v[t, s] equals logsumexp over q[t, s, :] wherever the cell acts; the
    absorbing goal is pinned to v = 0 (and q = -inf) for t >= 1.
    """

    v: np.ndarray
    q: np.ndarray
    mdp: Mdp

    @property
    def log_partition(self) -> np.ndarray:
        return self.v[0]


@dataclass(frozen=True)
class Policy:
    """Time-indexed action probabilities pi[t, s, a]; zero rows are out of support."""

    pi: np.ndarray
    mdp: Mdp


@dataclass(frozen=True)
class VisitationMap:
    """Expected (or empirical mean) per-cell visit counts."""

    mu: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mu, dtype=np.float64)
        if np.any(m < 0):
            raise ValueError("visitation frequencies must be nonnegative")
        object.__setattr__(self, "mu", m)


def _logsumexp_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp with -inf rows mapped to -inf, never NaN."""
    m = x.max(axis=1)
    finite = np.isfinite(m)
    out = np.full(m.shape, -np.inf)
    if finite.any():
        shifted = x[finite] - m[finite, None]
        out[finite] = m[finite] + np.log(np.exp(shifted).sum(axis=1))
    return out


_SUCC_CACHE: dict[tuple[int, int], np.ndarray] = {}


def successor_table(spec: GridSpec) -> np.ndarray:
    """(n_cells, n_actions) flat successor indices; -1 marks off-grid moves."""
    key = (spec.height, spec.width)
    cached = _SUCC_CACHE.get(key)
    if cached is not None:
        return cached
    ys, xs = np.divmod(np.arange(spec.n_cells), spec.width)
    succ = np.empty((spec.n_cells, N_ACTIONS), dtype=np.int64)
    for a in Action:
        dy, dx = a.offset
        ny, nx = ys + dy, xs + dx
        ok = (ny >= 0) & (ny < spec.height) & (nx >= 0) & (nx < spec.width)
        succ[:, a] = np.where(ok, ny * spec.width + nx, -1)
    succ.setflags(write=False)
    if len(_SUCC_CACHE) < 64:
        _SUCC_CACHE[key] = succ
    return succ


def soft_value_iteration(reward: RewardMap, mdp: Mdp) -> tuple[SoftValues, Policy]:
    """Backward recursion q[t] = r + gamma * v[t+1][succ], v = logsumexp(q).

    The induced policy pi = exp(q - v) makes the probability of any path
    to the goal proportional to exp(sum of rewards along it), among all
    paths of at most `horizon` actions.
    """
    spec = mdp.spec
    r = reward.values
    if r.shape != (spec.height, spec.width):
        raise ValueError(f"reward shape {r.shape} does not match grid {spec.height}x{spec.width}")
    r_flat = r.ravel()

    n, horizon = spec.n_cells, mdp.horizon
    succ = successor_table(spec)
    succ_padded = np.where(succ >= 0, succ, n)
    goal_flat = None if mdp.goal is None else spec.to_flat(mdp.goal)

    v = np.empty((horizon + 1, n))
    q = np.empty((horizon, n, N_ACTIONS))
    pi = np.empty((horizon, n, N_ACTIONS))

    if goal_flat is None:
        v[horizon, :] = 0.0
    else:
        v[horizon, :] = -np.inf
        v[horizon, goal_flat] = 0.0

    v_next = np.empty(n + 1)
    v_next[n] = -np.inf
    for t in range(horizon - 1, -1, -1):
        v_next[:n] = v[t + 1] if mdp.gamma == 1.0 else mdp.gamma * v[t + 1]
        q_t = v_next[succ_padded]
        q_t += r_flat[:, None]
        row = _logsumexp_rows(q_t)
        with np.errstate(invalid="ignore"):
            pi_t = np.exp(q_t - row[:, None])
        pi_t[~np.isfinite(row)] = 0.0
        q[t], pi[t], v[t] = q_t, pi_t, row
        if goal_flat is not None and t >= 1:
            v[t, goal_flat] = 0.0
            q[t, goal_flat, :] = -np.inf
            pi[t, goal_flat, :] = 0.0

    return SoftValues(v, q, mdp), Policy(pi, mdp)


def trajectory_log_prob(values: SoftValues, traj: Trajectory, offset: int = 0) -> float:
    """Log-probability of a trajectory under the soft policy; -inf off-support.

    Computed in log space as the sum of q - v along the taken pairs,
    which telescopes to (cumulative reward - log partition) for gamma=1.
    `offset` shifts the time index: values solved for horizon T scored
    from step `offset` equal a dedicated solve for horizon T - offset,
    because soft values depend only on time-to-go.
    """
    mdp = values.mdp
    if offset < 0 or len(traj) + offset > mdp.horizon:
        return -np.inf
    spec = mdp.spec
    goal_flat = None if mdp.goal is None else spec.to_flat(mdp.goal)
    total = 0.0
    for t, (state, action) in enumerate(traj.steps):
        s = spec.to_flat(state)
        if t >= 1 and s == goal_flat:
            return -np.inf
        lp = values.q[offset + t, s, action] - values.v[offset + t, s]
        if not np.isfinite(lp):
            return -np.inf
        total += lp
    return total


def occupancy(policy: Policy, start: Cell, offset: int = 0) -> np.ndarray:
    """(steps+1, n_cells) distribution of active mass per timestep.

    Mass entering the goal is recorded at its arrival step and then
    leaves the active process, so each slice sums to at most 1. With an
    `offset` the walk starts at that time index, i.e. with a shortened
    time-to-go (see trajectory_log_prob).
    """
    mdp = policy.mdp
    spec = mdp.spec
    if not spec.in_bounds(start):
        raise ValueError(f"start {start} is out of bounds")
    if not 0 <= offset <= mdp.horizon:
        raise ValueError(f"offset {offset} outside horizon {mdp.horizon}")
    succ = successor_table(spec)
    valid = succ >= 0
    idx = succ[valid]

    steps = mdp.horizon - offset
    occ = np.zeros((steps + 1, spec.n_cells))
    occ[0, spec.to_flat(start)] = 1.0
    mass = occ[0]
    for t in range(steps):
        flow = mass[:, None] * policy.pi[offset + t]
        mass = np.bincount(idx, weights=flow[valid], minlength=spec.n_cells)
        occ[t + 1] = mass
        if not mass.any():
            break
    return occ


def expected_svf(policy: Policy, mdp: Mdp, start: Cell) -> VisitationMap:
    """Expected visit counts under the policy, accumulated over timesteps."""
    occ = occupancy(policy, start)
    spec = mdp.spec
    return VisitationMap(occ.sum(axis=0).reshape(spec.height, spec.width))


def demo_svf(demos: DemonstrationSet, spec: GridSpec) -> VisitationMap:
    """Mean per-demonstration visit counts over every touched cell."""
    mu = np.zeros(spec.n_cells)
    for traj in demos:
        for cell in traj.visited(spec):
            mu[spec.to_flat(cell)] += 1.0
    mu /= len(demos)
    return VisitationMap(mu.reshape(spec.height, spec.width))


def demo_mdp(traj: Trajectory, spec: GridSpec, horizon_cap: int) -> Mdp:
    """The per-demonstration MDP: its own start/goal, horizon = its length.

    Conditioning each trajectory on paths of at most its own step count
    keeps the support's length distribution tied to the demonstration
    (trajectory length bounds the effective horizon). A longer shared
    horizon lets path counts explode with length, and at bounded cost
    scale the only NLL optimum is then a saturated uniform map.
    """
    if len(traj) > horizon_cap:
        raise InfeasibleDemonstrationError(
            f"demonstration has {len(traj)} steps, above the horizon cap {horizon_cap}"
        )
    return Mdp(spec, 1.0, traj.end(spec), len(traj))


def data_loss_and_grad(
    reward: RewardMap, demos: DemonstrationSet, mdp: Mdp
) -> tuple[float, np.ndarray]:
    """Mean demonstration NLL and its exact gradient with respect to r(s).

    Each demonstration is conditioned on its own start, arrival cell and
    length (see demo_mdp); the gradient is -(mu_D - E[mu]) with both
    visitation maps averaged over demonstrations. Requires gamma = 1
    (the visitation-difference identity does not hold for discounted
    values).
    """
    if mdp.gamma != 1.0:
        raise ValueError("visitation-matching gradient requires gamma = 1")
    spec = mdp.spec
    n = len(demos)
    mu_demo = np.zeros(spec.n_cells)
    mu_model = np.zeros(spec.n_cells)
    total_nll = 0.0

    solver = GroupedSolver(reward, spec, mdp.horizon, demos)
    for i, traj in enumerate(demos):
        values, policy, offset = solver.lookup(traj)
        logp = trajectory_log_prob(values, traj, offset)
        if not np.isfinite(logp):
            raise InfeasibleDemonstrationError(
                f"trajectory {i} has zero probability under the current reward "
                f"(start {traj.start}, goal {traj.end(spec)}, {len(traj)} steps)"
            )
        total_nll -= logp
        for cell in traj.visited(spec):
            mu_demo[spec.to_flat(cell)] += 1.0
        mu_model += occupancy(policy, traj.start, offset).sum(axis=0)

    loss = total_nll / n
    grad = -(mu_demo - mu_model) / n
    return loss, grad.reshape(spec.height, spec.width)


class GroupedSolver:
    """Per-demonstration soft values with one solve per distinct goal.

    Values depend only on time-to-go, so demonstrations sharing a goal
    read the same backward pass at a time offset matching their length.
    Degenerate loops (start equal to goal) act from the goal at their
    own step 0 and need a dedicated solve at their exact horizon.
    """

    def __init__(
        self, reward: RewardMap, spec: GridSpec, horizon_cap: int, demos: DemonstrationSet
    ):
        self.reward = reward
        self.spec = spec
        self.cap = horizon_cap
        self.max_len: dict[Cell, int] = {}
        for traj in demos:
            sub = demo_mdp(traj, spec, horizon_cap)
            goal = sub.goal
            self.max_len[goal] = max(self.max_len.get(goal, 0), sub.horizon)
        self.shared: dict[Cell, tuple[SoftValues, Policy]] = {}
        self.exact: dict[tuple[Cell, int], tuple[SoftValues, Policy]] = {}

    def lookup(self, traj: Trajectory) -> tuple[SoftValues, Policy, int]:
        sub = demo_mdp(traj, self.spec, self.cap)
        goal = sub.goal
        if traj.start == goal:
            key = (goal, sub.horizon)
            if key not in self.exact:
                self.exact[key] = soft_value_iteration(self.reward, sub)
            values, policy = self.exact[key]
            return values, policy, 0
        if goal not in self.shared:
            self.shared[goal] = soft_value_iteration(
                self.reward, Mdp(self.spec, 1.0, goal, self.max_len[goal])
            )
        values, policy = self.shared[goal]
        return values, policy, self.max_len[goal] - sub.horizon


def sample_trajectories(
    policy: Policy, mdp: Mdp, start: Cell, count: int, rng_seed: int, offset: int = 0
) -> DemonstrationSet:
    """Draw `count` i.i.d. policy rollouts from `start`; deterministic per seed."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    spec = mdp.spec
    if not spec.in_bounds(start):
        raise ValueError(f"start {start} is out of bounds")
    succ = successor_table(spec)
    goal_flat = None if mdp.goal is None else spec.to_flat(mdp.goal)
    rng = np.random.default_rng(rng_seed)

    trajs = []
    for _ in range(count):
        steps: list[tuple[Cell, Action]] = []
        s = spec.to_flat(start)
        for t in range(offset, mdp.horizon):
            if goal_flat is not None and s == goal_flat and t > offset:
                break
            probs = policy.pi[t, s]
            total = probs.sum()
            if total <= 0.0:
                raise InfeasibleDemonstrationError(
                    f"no feasible action at {spec.to_cell(s)} (t={t}) when sampling"
                )
            cdf = np.cumsum(probs)
            a = int(np.searchsorted(cdf, rng.random() * total, side="right"))
            a = min(a, N_ACTIONS - 1)
            steps.append((spec.to_cell(s), Action(a)))
            s = succ[s, a]
        trajs.append(Trajectory(tuple(steps)))
    return DemonstrationSet(tuple(trajs), spec)
