"""Synthetic navigation worlds with ground-truth traversability.

Each scenario is an occupancy grid containing a mix of obstacle classes
chosen so the handcrafted cost rules fail in known ways: slopes and
underpasses trip the height-range threshold despite being drivable,
shallow stairs and grass slip under it despite being obstacles, and
bollards get over-expanded by the dilation margin. LIDAR sparsity is
modeled by a point-count channel that decays with Chebyshev distance
from the vehicle and attenuates the observed height range, so the same
obstacle looks weaker far from the sensor.

Demonstrations are sampled from the maximum-entropy model of a
demonstrator driven by the ground-truth behaviour cost: purposeful but
not perfectly optimal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import struct

import numpy as np

from .grid import (
    Action,
    Cell,
    DemonstrationSet,
    GridSpec,
    Mdp,
    Trajectory,
    crop_trajectories,
    make_trajectory,
    transition,
    validate_trajectory,
)
from .maps import OccupancyGrid
from .prior import ManualRules, chebyshev_dilate, manual_obstacle_mask
from .solver import RewardMap, sample_trajectories, soft_value_iteration

SCENARIO_MAGIC = b"MEDIRLSC"

GROUND_RANGE = 0.02
FREE_COST = 0.1
OBSTACLE_COST = 0.9
GRASS_COST = 0.8

POINT_DECAY = 0.15
POINT_FLOOR = 0.1


class PlacementError(RuntimeError):
    """Feature placement failed after bounded retries."""


class FeatureKind(Enum):
    BOLLARD = "bollard"
    GRASS = "grass"
    SLOPE = "slope"
    STAIRS = "stairs"
    UNDERPASS = "underpass"
    WALL = "wall"


# raw (unattenuated) height range and ground-truth traversability per kind
KIND_RANGE = {
    FeatureKind.BOLLARD: 1.0,
    FeatureKind.GRASS: 0.05,
    FeatureKind.SLOPE: 0.2,
    FeatureKind.STAIRS: 0.12,
    FeatureKind.UNDERPASS: 2.5,
    FeatureKind.WALL: 2.0,
}
KIND_TRAVERSABLE = {
    FeatureKind.BOLLARD: False,
    FeatureKind.GRASS: False,
    FeatureKind.SLOPE: True,
    FeatureKind.STAIRS: False,
    FeatureKind.UNDERPASS: True,
    FeatureKind.WALL: False,
}

DEFAULT_MIX = {
    FeatureKind.WALL: 2,
    FeatureKind.BOLLARD: 2,
    FeatureKind.GRASS: 1,
    FeatureKind.STAIRS: 1,
    FeatureKind.SLOPE: 1,
    FeatureKind.UNDERPASS: 1,
}


@dataclass(frozen=True)
class Feature:
    kind: FeatureKind
    footprint: tuple[Cell, ...]
    params: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class Scenario:
    """An occupancy grid plus the ground truth used to score it."""

    grid: OccupancyGrid
    truth: np.ndarray  # True where traversable
    truth_cost: np.ndarray
    vehicle_pos: Cell
    features: tuple[Feature, ...]
    seed: int
    spec: GridSpec

    def __post_init__(self) -> None:
        h, w = self.grid.shape
        if self.truth.shape != (h, w) or self.truth_cost.shape != (h, w):
            raise ValueError("truth arrays must match the grid shape")
        if np.any(self.truth_cost[self.truth] >= 0.5):
            raise ValueError("traversable cells need truth_cost < 0.5")
        if np.any(self.truth_cost[~self.truth] < 0.5):
            raise ValueError("untraversable cells need truth_cost >= 0.5")
        if not self.truth[self.vehicle_pos]:
            raise ValueError("vehicle position must be traversable")


def point_count_channel(spec: GridSpec, vehicle: Cell) -> np.ndarray:
    """Normalized point density: max(0.1, 1 / (1 + 0.15 d)) at Chebyshev distance d."""
    ys = np.abs(np.arange(spec.height) - vehicle[0])
    xs = np.abs(np.arange(spec.width) - vehicle[1])
    d = np.maximum(ys[:, None], xs[None, :])
    return np.maximum(POINT_FLOOR, 1.0 / (1.0 + POINT_DECAY * d))


def _rect_cells(y0: int, x0: int, h: int, w: int) -> tuple[Cell, ...]:
    return tuple((y, x) for y in range(y0, y0 + h) for x in range(x0, x0 + w))


def _kind_size(kind: FeatureKind, rng: np.random.Generator) -> tuple[int, int]:
    if kind is FeatureKind.BOLLARD:
        return 1, 1
    if kind is FeatureKind.WALL:
        length = int(rng.integers(5, 9))
        return (1, length) if rng.integers(2) else (length, 1)
    if kind is FeatureKind.SLOPE:
        return 2, 2
    return int(rng.integers(3, 5)), int(rng.integers(3, 5))


@dataclass
class _Builder:
    spec: GridSpec
    vehicle: Cell
    rng: np.random.Generator
    gap: int
    vehicle_gap: int = 2
    mean_height: np.ndarray = field(init=False)
    raw_range: np.ndarray = field(init=False)
    truth: np.ndarray = field(init=False)
    truth_cost: np.ndarray = field(init=False)
    blocked: np.ndarray = field(init=False)
    features: list[Feature] = field(init=False)

    def __post_init__(self) -> None:
        h, w = self.spec.height, self.spec.width
        self.mean_height = np.zeros((h, w))
        self.raw_range = np.full((h, w), GROUND_RANGE)
        self.truth = np.ones((h, w), dtype=bool)
        self.truth_cost = np.full((h, w), FREE_COST)
        self.blocked = np.zeros((h, w), dtype=bool)
        vy, vx = self.vehicle
        g = self.vehicle_gap
        self.blocked[max(0, vy - g) : vy + g + 1, max(0, vx - g) : vx + g + 1] = True
        self.features = []

    def try_place(self, kind: FeatureKind, cells: tuple[Cell, ...]) -> bool:
        zone = np.zeros_like(self.blocked)
        for c in cells:
            zone[c] = True
        if kind is FeatureKind.BOLLARD:
            zone = chebyshev_dilate(zone, 1)  # reserve the truth ring too
        if np.any(zone & self.blocked):
            return False
        self.stamp(kind, cells, zone)
        return True

    def stamp(self, kind: FeatureKind, cells: tuple[Cell, ...], zone: np.ndarray) -> None:
        params = []
        ys = [c[0] for c in cells]
        xs = [c[1] for c in cells]
        for y, x in cells:
            self.raw_range[y, x] = KIND_RANGE[kind]
        if kind is FeatureKind.BOLLARD:
            y, x = cells[0]
            self.mean_height[y, x] = 0.5
            self.truth[zone] = False
            self.truth_cost[zone] = OBSTACLE_COST
        elif kind is FeatureKind.WALL:
            for y, x in cells:
                self.mean_height[y, x] = 1.0
        elif kind is FeatureKind.UNDERPASS:
            for y, x in cells:
                self.mean_height[y, x] = 1.25
        elif kind is FeatureKind.GRASS:
            for y, x in cells:
                self.mean_height[y, x] = 0.03
        elif kind is FeatureKind.SLOPE:
            rise = 0.2
            params.append(("rise_per_cell", rise))
            for y, x in cells:
                self.mean_height[y, x] = 0.1 + rise * (x - min(xs))
        elif kind is FeatureKind.STAIRS:
            rise = 0.12
            params.append(("rise_per_cell", rise))
            for y, x in cells:
                self.mean_height[y, x] = rise * (1 + x - min(xs))
        if kind not in (FeatureKind.BOLLARD,) and not KIND_TRAVERSABLE[kind]:
            for y, x in cells:
                self.truth[y, x] = False
                self.truth_cost[y, x] = GRASS_COST if kind is FeatureKind.GRASS else OBSTACLE_COST
        self.blocked |= chebyshev_dilate(zone, self.gap)
        self.features.append(Feature(kind, tuple(sorted(cells)), tuple(params)))

    def place_random(self, kind: FeatureKind, retries: int = 200) -> None:
        h, w = self.spec.height, self.spec.width
        for _ in range(retries):
            fh, fw = _kind_size(kind, self.rng)
            if fh + 2 > h or fw + 2 > w:
                continue
            y0 = int(self.rng.integers(1, h - fh))
            x0 = int(self.rng.integers(1, w - fw))
            if self.try_place(kind, _rect_cells(y0, x0, fh, fw)):
                return
        raise PlacementError(f"could not place {kind.value} after {retries} attempts")

    def finish(self, seed: int) -> Scenario:
        pc = point_count_channel(self.spec, self.vehicle)
        channels = np.stack([self.mean_height, self.raw_range * pc, pc])
        return Scenario(
            grid=OccupancyGrid(channels),
            truth=self.truth,
            truth_cost=self.truth_cost,
            vehicle_pos=self.vehicle,
            features=tuple(self.features),
            seed=seed,
            spec=self.spec,
        )


def generate_scenario(
    seed: int,
    spec: GridSpec = GridSpec(32, 32, 0.5),
    feature_mix: dict[FeatureKind, int] | None = None,
    gap: int = 3,
) -> Scenario:
    """Random scenario with the requested number of features of each kind."""
    mix = DEFAULT_MIX if feature_mix is None else feature_mix
    margin = max(1, min(4, spec.height // 4, spec.width // 4))
    last_error = None
    for attempt in range(20):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5CE, attempt)))
        vehicle = (
            int(rng.integers(margin, spec.height - margin)),
            int(rng.integers(margin, spec.width - margin)),
        )
        builder = _Builder(spec, vehicle, rng, gap)
        try:
            for kind in FeatureKind:  # fixed order for determinism
                for _ in range(mix.get(kind, 0)):
                    builder.place_random(kind)
        except PlacementError as err:
            last_error = err
            continue
        return builder.finish(seed)
    raise PlacementError(f"seed {seed}: {last_error}")


def corner_case_scenario(
    seed: int = 0,
    spec: GridSpec = GridSpec(32, 32, 0.5),
    rules: ManualRules = ManualRules(),
) -> Scenario:
    """One feature of every kind, placed so each class shows its signature
    confusion against the manual rules.

    The slope sits right next to the vehicle: beyond Chebyshev distance 2
    the point-count attenuation would pull its observed height range
    under the threshold and hide the false positive this scenario is
    meant to exhibit. The remaining features go to fixed quadrants
    (jittered by the seed) separated by more than twice the dilation
    radius, so the manual-cost region of each class stays distinct.
    """
    h, w = spec.height, spec.width
    if h < 24 or w < 24:
        raise ValueError("corner-case scenario needs at least a 24x24 grid")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC04)))
    vehicle = (h // 2, w // 2)
    builder = _Builder(spec, vehicle, rng, gap=2 * rules.dilation_radius, vehicle_gap=0)

    vy, vx = vehicle
    slope_cells = _rect_cells(vy - 1, vx + 1, 2, 2)
    if not builder.try_place(FeatureKind.SLOPE, slope_cells):
        raise PlacementError("slope does not fit next to the vehicle")

    def jitter(lo, hi):
        return int(rng.integers(lo, hi + 1))

    # anchors keep every pair of footprints at Chebyshev distance >= 5
    # (more than twice the default dilation radius) for any grid >= 24x24
    placements = [
        (FeatureKind.WALL, jitter(vy - 2, vy - 1), 2, 1, 6),
        (FeatureKind.BOLLARD, jitter(3, 4), jitter(vx - 2, vx), 1, 1),
        (FeatureKind.GRASS, jitter(2, 3), jitter(w - 6, w - 5), 3, 3),
        (FeatureKind.UNDERPASS, jitter(h - 8, h - 7), jitter(3, 4), 3, 4),
        (FeatureKind.STAIRS, jitter(h - 7, h - 6), jitter(w - 7, w - 6), 3, 3),
    ]
    for kind, y0, x0, fh, fw in placements:
        if not builder.try_place(kind, _rect_cells(y0, x0, fh, fw)):
            raise PlacementError(f"{kind.value} does not fit its quadrant")
    return builder.finish(seed)


def manual_confusion(
    scenario: Scenario, rules: ManualRules = ManualRules()
) -> tuple[np.ndarray, np.ndarray]:
    """(false positives, false negatives) of the manual rules against truth.

    Cells within the dilation radius of a true obstacle are planning
    margin, not misclassification, so they are excluded from the false
    positive set.
    """
    manual = manual_obstacle_mask(scenario.grid, rules)
    truth_obstacles = ~scenario.truth
    margin = chebyshev_dilate(truth_obstacles, rules.dilation_radius)
    false_pos = manual & ~margin
    false_neg = truth_obstacles & ~manual
    return false_pos, false_neg


def _traversable_cells(scenario: Scenario) -> list[Cell]:
    ys, xs = np.nonzero(scenario.truth)
    return [(int(y), int(x)) for y, x in zip(ys, xs)]


def generate_demos(
    scenario: Scenario,
    count: int,
    max_len: int,
    seed: int,
    n_goals: int = 2,
    sharpness: float = 15.0,
    min_dist: int = 6,
    horizon_slack: int = 2,
    retries: int = 60,
) -> DemonstrationSet:
    """Sample demonstrations from the MaxEnt model of the true behaviour cost.

    Trajectories run between random traversable endpoint pairs, never
    enter a truth-untraversable cell (offending samples are rejected and
    redrawn) and are cropped to `max_len` steps. `sharpness` scales the
    behaviour cost so the demonstrator strongly avoids true obstacles;
    the sampling horizon of Chebyshev distance + `horizon_slack` keeps
    routes purposeful (path counts grow so fast with length that no
    reasonable step penalty can bound wandering on its own).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    spec = scenario.spec
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xDE30)))
    cells = _traversable_cells(scenario)
    reward = RewardMap(-sharpness * scenario.truth_cost)
    max_dist = min(max_len - horizon_slack, max(spec.height, spec.width) - 2)

    def draw_pair():
        for _ in range(200):
            goal = cells[int(rng.integers(len(cells)))]
            start = cells[int(rng.integers(len(cells)))]
            d = max(abs(goal[0] - start[0]), abs(goal[1] - start[1]))
            if min_dist <= d <= max_dist:
                return start, goal, d
        raise PlacementError("no traversable start/goal pair found")

    per_goal = int(np.ceil(count / n_goals))
    collected: list[Trajectory] = []
    while len(collected) < count:
        start, goal, d = draw_pair()
        horizon = min(max_len, d + horizon_slack)
        mdp = Mdp(spec, 1.0, goal, horizon)
        _, policy = soft_value_iteration(reward, mdp)
        needed = min(per_goal, count - len(collected))
        got = 0
        for _ in range(retries * needed):
            traj = sample_trajectories(
                policy, mdp, start, 1, int(rng.integers(2**31))
            ).trajectories[0]
            if _demo_ok(traj, scenario, max_len):
                collected.append(traj)
                got += 1
                if got >= needed:
                    break
        # if this endpoint pair keeps failing, fall through and redraw

    demos = DemonstrationSet(tuple(collected), spec)
    return crop_trajectories(demos, max_len)


def _demo_ok(traj: Trajectory, scenario: Scenario, max_len: int) -> bool:
    cells = traj.visited(scenario.spec)
    if any(not scenario.truth[c] for c in cells):
        return False
    # crop segments must not re-enter their own endpoint: such
    # demonstrations have zero probability under the absorbing model
    for lo in range(0, len(traj), max_len):
        seg = cells[lo : lo + max_len + 1]
        if seg[-1] in seg[:-1]:
            return False
    return True


def generate_collision_trajectories(
    scenario: Scenario, count: int, seed: int, reach: int = 6
) -> DemonstrationSet:
    """Straight-line walks routed through a truth-untraversable cell."""
    spec = scenario.spec
    obstacles = [tuple(map(int, c)) for c in zip(*np.nonzero(~scenario.truth))]
    if not obstacles:
        raise ValueError("scenario has no untraversable cells")
    free = _traversable_cells(scenario)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0111)))

    def near(center, limit):
        picks = [
            c
            for c in free
            if max(abs(c[0] - center[0]), abs(c[1] - center[1])) <= limit
            and c != center
        ]
        return picks

    trajs: list[Trajectory] = []
    attempts = 0
    while len(trajs) < count:
        attempts += 1
        if attempts > 200 * count:
            raise PlacementError("could not construct collision trajectories")
        obstacle = obstacles[int(rng.integers(len(obstacles)))]
        nearby = near(obstacle, reach)
        if len(nearby) < 2:
            continue
        start = nearby[int(rng.integers(len(nearby)))]
        end = nearby[int(rng.integers(len(nearby)))]
        if end == start:
            continue
        steps = _greedy_walk(start, obstacle, end)
        if steps is None:
            continue
        traj = make_trajectory(steps)
        cells = traj.visited(spec)
        if len(set(cells)) != len(cells):
            continue
        if not any(not scenario.truth[c] for c in cells):
            continue
        trajs.append(traj)
    return DemonstrationSet(tuple(trajs), spec)


def _greedy_walk(start: Cell, via: Cell, end: Cell):
    """Chebyshev-greedy 8-connected path start -> via -> end, as (cell, action) pairs."""
    steps = []
    cur = start
    for target in (via, end):
        while cur != target:
            dy = int(np.sign(target[0] - cur[0]))
            dx = int(np.sign(target[1] - cur[1]))
            action = _OFFSET_TO_ACTION[(dy, dx)]
            steps.append((cur, action))
            cur = (cur[0] + dy, cur[1] + dx)
    if not steps:
        return None
    return steps


_OFFSET_TO_ACTION = {a.offset: a for a in Action}


# ---------------------------------------------------------------------------
# scenario files


def save_scenario(scenario: Scenario, path) -> None:
    """Flat binary: header + channels + truth mask + truth cost, bit-exact."""
    spec = scenario.spec
    with open(path, "wb") as fh:
        fh.write(SCENARIO_MAGIC)
        fh.write(
            struct.pack(
                "<IIIdqII",
                1,
                spec.height,
                spec.width,
                spec.cell_size,
                scenario.seed,
                scenario.vehicle_pos[0],
                scenario.vehicle_pos[1],
            )
        )
        fh.write(scenario.grid.channels.astype("<f8").tobytes())
        fh.write(scenario.truth.astype("u1").tobytes())
        fh.write(scenario.truth_cost.astype("<f8").tobytes())


def load_scenario(path) -> Scenario:
    """Read a scenario file; placed-feature records are not persisted."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != SCENARIO_MAGIC:
        raise ValueError(f"{path}: not a medirl scenario file")
    version, h, w, cell_size, seed, vy, vx = struct.unpack("<IIIdqII", blob[8:44])
    if version != 1:
        raise ValueError(f"{path}: unsupported scenario version {version}")
    spec = GridSpec(h, w, cell_size)
    pos = 44
    n = h * w
    channels = np.frombuffer(blob[pos : pos + 3 * n * 8], dtype="<f8").reshape(3, h, w)
    pos += 3 * n * 8
    truth = np.frombuffer(blob[pos : pos + n], dtype="u1").reshape(h, w).astype(bool)
    pos += n
    truth_cost = np.frombuffer(blob[pos : pos + n * 8], dtype="<f8").reshape(h, w)
    return Scenario(
        grid=OccupancyGrid(channels.copy()),
        truth=truth,
        truth_cost=truth_cost.copy(),
        vehicle_pos=(int(vy), int(vx)),
        features=(),
        seed=int(seed),
        spec=spec,
    )
