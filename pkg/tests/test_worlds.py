import numpy as np
import pytest

from medirl.grid import GridSpec, Mdp, validate_trajectory
from medirl.prior import ManualRules, chebyshev_dilate, manual_obstacle_mask
from medirl.worlds import (
    FeatureKind,
    KIND_RANGE,
    KIND_TRAVERSABLE,
    corner_case_scenario,
    generate_collision_trajectories,
    generate_demos,
    generate_scenario,
    load_scenario,
    manual_confusion,
    point_count_channel,
    save_scenario,
)

RULES = ManualRules()


def scenario_equal(a, b, with_features=True):
    assert np.array_equal(a.grid.channels, b.grid.channels)
    assert np.array_equal(a.truth, b.truth)
    assert np.array_equal(a.truth_cost, b.truth_cost)
    assert a.vehicle_pos == b.vehicle_pos
    assert a.seed == b.seed
    if with_features:
        assert a.features == b.features


def test_generate_scenario_deterministic():
    a = generate_scenario(42)
    b = generate_scenario(42)
    scenario_equal(a, b)
    c = generate_scenario(43)
    assert not np.array_equal(a.grid.channels, c.grid.channels)


def test_point_count_decay_formula():
    spec = GridSpec(32, 32)
    pc = point_count_channel(spec, (16, 16))
    assert pc[16, 16] == 1.0
    assert pc[16, 26] == pytest.approx(1.0 / 2.5)  # Chebyshev distance 10 -> 0.4
    assert pc[6, 26] == pytest.approx(1.0 / 2.5)
    assert np.all(pc >= 0.1)


def test_feature_signatures_on_footprints():
    scenario = generate_scenario(7)
    pc = point_count_channel(scenario.spec, scenario.vehicle_pos)
    seen = set()
    for feature in scenario.features:
        seen.add(feature.kind)
        for cell in feature.footprint:
            raw = KIND_RANGE[feature.kind]
            assert scenario.grid.channels[1][cell] == pytest.approx(raw * pc[cell])
            assert scenario.truth[cell] == KIND_TRAVERSABLE[feature.kind]
    assert seen == set(FeatureKind)


def test_stairs_slip_under_threshold_but_block():
    scenario = corner_case_scenario(0)
    stairs = next(f for f in scenario.features if f.kind is FeatureKind.STAIRS)
    for cell in stairs.footprint:
        assert scenario.grid.channels[1][cell] < RULES.height_range_threshold
        assert not scenario.truth[cell]


def test_grass_looks_free_but_costs():
    scenario = corner_case_scenario(0)
    grass = next(f for f in scenario.features if f.kind is FeatureKind.GRASS)
    for cell in grass.footprint:
        assert scenario.grid.channels[1][cell] < RULES.height_range_threshold
        assert not scenario.truth[cell]
        assert scenario.truth_cost[cell] == pytest.approx(0.8)


def test_bollard_truth_ring():
    scenario = corner_case_scenario(0)
    bollard = next(f for f in scenario.features if f.kind is FeatureKind.BOLLARD)
    (y, x) = bollard.footprint[0]
    ring = scenario.truth[y - 1 : y + 2, x - 1 : x + 2]
    assert not ring.any()  # 3x3 truth obstacle


def test_corner_case_confusion_structure():
    scenario = corner_case_scenario(0)
    false_pos, false_neg = manual_confusion(scenario, RULES)

    def footprint_mask(*kinds):
        mask = np.zeros_like(scenario.truth)
        for f in scenario.features:
            if f.kind in kinds:
                for c in f.footprint:
                    mask[c] = True
        return mask

    expected_fp = chebyshev_dilate(
        footprint_mask(FeatureKind.SLOPE, FeatureKind.UNDERPASS), RULES.dilation_radius
    )
    expected_fn = footprint_mask(FeatureKind.STAIRS, FeatureKind.GRASS)
    assert np.array_equal(false_pos, expected_fp)
    assert np.array_equal(false_neg, expected_fn)


def test_manual_detects_walls_and_bollards():
    scenario = corner_case_scenario(0)
    manual = manual_obstacle_mask(scenario.grid, RULES)
    for f in scenario.features:
        if f.kind in (FeatureKind.WALL, FeatureKind.BOLLARD):
            for cell in f.footprint:
                assert manual[cell]


def test_demos_valid_and_traversable():
    scenario = generate_scenario(11)
    demos = generate_demos(scenario, count=6, max_len=26, seed=3)
    assert len(demos) >= 6
    mdp = Mdp(scenario.spec, horizon=26)
    for traj in demos:
        assert validate_trajectory(traj, mdp)
        for cell in traj.visited(scenario.spec):
            assert scenario.truth[cell]


def test_demos_deterministic():
    scenario = generate_scenario(11)
    a = generate_demos(scenario, count=5, max_len=26, seed=9)
    b = generate_demos(scenario, count=5, max_len=26, seed=9)
    assert a.trajectories == b.trajectories


def test_demos_near_shortest_on_open_world():
    scenario = generate_scenario(1, feature_mix={})
    demos = generate_demos(scenario, count=40, max_len=26, seed=5)
    near = 0
    for traj in demos:
        start = traj.start
        end = traj.end(scenario.spec)
        d = max(abs(end[0] - start[0]), abs(end[1] - start[1]))
        if len(traj) <= d + 2:
            near += 1
    assert near / len(demos) >= 0.9


def test_collision_trajectories_hit_obstacles():
    scenario = generate_scenario(13)
    hits = generate_collision_trajectories(scenario, count=8, seed=2)
    mdp = Mdp(scenario.spec, horizon=100)
    for traj in hits:
        assert validate_trajectory(traj, mdp)
        assert any(not scenario.truth[c] for c in traj.visited(scenario.spec))


def test_collision_trajectories_deterministic():
    scenario = generate_scenario(13)
    a = generate_collision_trajectories(scenario, count=5, seed=8)
    b = generate_collision_trajectories(scenario, count=5, seed=8)
    assert a.trajectories == b.trajectories


def test_wall_scenario_collisions_cross_wall():
    scenario = generate_scenario(3, feature_mix={FeatureKind.WALL: 1})
    wall = next(f for f in scenario.features if f.kind is FeatureKind.WALL)
    hits = generate_collision_trajectories(scenario, count=6, seed=4)
    footprint = set(wall.footprint)
    crossing = sum(
        1 for t in hits if footprint & set(t.visited(scenario.spec))
    )
    assert crossing == len(hits)


def test_scenario_file_round_trip(tmp_path):
    scenario = generate_scenario(21)
    path = tmp_path / "scenario.bin"
    save_scenario(scenario, path)
    loaded = load_scenario(path)
    scenario_equal(scenario, loaded, with_features=False)
    blob = path.read_bytes()
    save_scenario(loaded, path)
    assert path.read_bytes() == blob


def test_scenario_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        load_scenario(path)
