"""Grid MDP primitives: cells, actions, trajectories, demonstration sets.

States are cells of a 2D occupancy grid, addressed as (row, col) tuples.
Motion is 8-connected plus STAY; moves that would leave the grid are
invalid rather than clamped, so every action string maps to at most one
trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional

Cell = tuple[int, int]


class Action(IntEnum):
    """The nine grid moves. Integer values are the wire encoding."""

    N = 0
    NE = 1
    E = 2
    SE = 3
    S = 4
    SW = 5
    W = 6
    NW = 7
    STAY = 8

    @property
    def offset(self) -> tuple[int, int]:
        return _OFFSETS[self]

    @property
    def opposite(self) -> "Action":
        if self is Action.STAY:
            return Action.STAY
        return Action((self.value + 4) % 8)


_OFFSETS: dict[Action, tuple[int, int]] = {
    Action.N: (-1, 0),
    Action.NE: (-1, 1),
    Action.E: (0, 1),
    Action.SE: (1, 1),
    Action.S: (1, 0),
    Action.SW: (1, -1),
    Action.W: (0, -1),
    Action.NW: (-1, -1),
    Action.STAY: (0, 0),
}


@dataclass(frozen=True)
class GridSpec:
    """Dimensions of the state space: an height x width grid of square cells."""

    height: int
    width: int
    cell_size: float = 0.5

    def __post_init__(self) -> None:
        if self.height < 2 or self.width < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.height}x{self.width}")
        if self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")

    @property
    def n_cells(self) -> int:
        return self.height * self.width

    def in_bounds(self, cell: Cell) -> bool:
        y, x = cell
        return 0 <= y < self.height and 0 <= x < self.width

    def to_flat(self, cell: Cell) -> int:
        return cell[0] * self.width + cell[1]

    def to_cell(self, flat: int) -> Cell:
        return divmod(flat, self.width)


@dataclass(frozen=True)
class Mdp:
    """Deterministic finite-horizon MDP over a grid.

    `goal`, when set, is absorbing: trajectories end on arrival and no
    further reward accrues there. `horizon` bounds the number of actions
    a trajectory may take.
    """

    spec: GridSpec
    gamma: float = 1.0
    goal: Optional[Cell] = None
    horizon: int = 26

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.goal is not None and not self.spec.in_bounds(self.goal):
            raise ValueError(f"goal {self.goal} is out of bounds")

    def transition(self, state: Cell, action: Action) -> Optional[Cell]:
        return transition(state, action, self.spec, goal=self.goal)


def transition(
    state: Cell, action: Action, spec: GridSpec, goal: Optional[Cell] = None
) -> Optional[Cell]:
    """Apply `action` at `state`; None encodes an invalid (off-grid) move.

    A terminal `goal` cell is absorbing and maps to itself under every
    action.
    """
    if goal is not None and state == goal:
        return state
    dy, dx = action.offset
    nxt = (state[0] + dy, state[1] + dx)
    return nxt if spec.in_bounds(nxt) else None


@dataclass(frozen=True)
class Trajectory:
    """A sequence of (state, action) pairs.

    Each pair records an action taken at a state; the cell reached by the
    final action is the trajectory's endpoint and is not itself a pair.
    """

    steps: tuple[tuple[Cell, Action], ...]

    def __post_init__(self) -> None:
        if len(self.steps) < 1:
            raise ValueError("trajectory must contain at least one step")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def start(self) -> Cell:
        return self.steps[0][0]

    @property
    def states(self) -> list[Cell]:
        """States at which actions are taken (one per step)."""
        return [s for s, _ in self.steps]

    def end(self, spec: GridSpec) -> Cell:
        """The arrival cell of the final action."""
        last_state, last_action = self.steps[-1]
        nxt = transition(last_state, last_action, spec)
        if nxt is None:
            raise ValueError("final action leaves the grid")
        return nxt

    def visited(self, spec: GridSpec) -> list[Cell]:
        """All cells touched in order: acting states plus the arrival cell."""
        return self.states + [self.end(spec)]


def make_trajectory(steps: Iterable[tuple[Cell, Action]]) -> Trajectory:
    return Trajectory(tuple((tuple(s), Action(a)) for s, a in steps))


@dataclass(frozen=True)
class DemonstrationSet:
    """A non-empty collection of trajectories over a shared grid."""

    trajectories: tuple[Trajectory, ...]
    spec: GridSpec

    def __post_init__(self) -> None:
        if len(self.trajectories) == 0:
            raise ValueError("demonstration set must be non-empty")
        for i, traj in enumerate(self.trajectories):
            for state, _ in traj.steps:
                if not self.spec.in_bounds(state):
                    raise ValueError(f"trajectory {i} leaves the grid at {state}")

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)


def validate_trajectory(traj: Trajectory, mdp: Mdp) -> bool:
    """True iff `traj` is transition-consistent, in-bounds and within horizon.

    The trajectory is validated against the bare grid: goal absorption is
    a solver-side concept and does not excuse off-grid moves here.
    """
    if len(traj) > mdp.horizon:
        return False
    spec = mdp.spec
    for i, (state, action) in enumerate(traj.steps):
        if not spec.in_bounds(state):
            return False
        nxt = transition(state, action, spec)
        if nxt is None:
            return False
        if i + 1 < len(traj) and nxt != traj.steps[i + 1][0]:
            return False
    return True


def crop_trajectories(demos: DemonstrationSet, max_len: int) -> DemonstrationSet:
    """Split every trajectory into consecutive segments of at most `max_len` steps.

    The total step count and the multiset of acting states are preserved.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    out: list[Trajectory] = []
    for traj in demos:
        for lo in range(0, len(traj), max_len):
            out.append(Trajectory(traj.steps[lo : lo + max_len]))
    return DemonstrationSet(tuple(out), demos.spec)


def save_trajectories(demos: DemonstrationSet, path) -> None:
    """Write one trajectory per line as `y0,x0,a0;y1,x1,a1;...`."""
    spec = demos.spec
    lines = [f"#grid {spec.height} {spec.width} {spec.cell_size!r}"]
    for traj in demos:
        lines.append(";".join(f"{y},{x},{int(a)}" for (y, x), a in traj.steps))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_trajectories(path) -> DemonstrationSet:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("#grid "):
        raise ValueError(f"{path}: missing '#grid H W cell_size' header")
    _, h, w, cs = lines[0].split()
    spec = GridSpec(int(h), int(w), float(cs))
    trajs: list[Trajectory] = []
    for ln in lines[1:]:
        steps = []
        for tok in ln.split(";"):
            y, x, a = tok.split(",")
            steps.append(((int(y), int(x)), Action(int(a))))
        trajs.append(make_trajectory(steps))
    return DemonstrationSet(tuple(trajs), spec)
