"""Handcrafted cost function: height-range threshold plus obstacle dilation.

A cell is an obstacle when the observed height range of its LIDAR points
exceeds a fixed threshold; the obstacle mask is then expanded by the
vehicle size (a Chebyshev radius, matching 8-connected motion) so a
point-sized planner keeps clearance. The two-valued output doubles as
the regression target for network pretraining and as the evaluation
baseline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .maps import CostMap, OccupancyGrid


@dataclass(frozen=True)
class ManualRules:
    height_range_threshold: float = 0.15
    dilation_radius: int = 2
    obstacle_cost: float = 0.9
    free_cost: float = 0.1

    def __post_init__(self) -> None:
        if self.height_range_threshold <= 0:
            raise ValueError("height range threshold must be positive")
        if self.dilation_radius < 0:
            raise ValueError("dilation radius must be nonnegative")
        if not 0 <= self.free_cost < self.obstacle_cost <= 1:
            raise ValueError("need free_cost < obstacle_cost within [0, 1]")


def chebyshev_dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Minkowski dilation of a boolean mask by a (2r+1)-square ball."""
    if radius == 0:
        return mask.copy()
    padded = np.pad(mask, radius, constant_values=False)
    windows = sliding_window_view(padded, (2 * radius + 1, 2 * radius + 1))
    return windows.any(axis=(2, 3))


def manual_obstacle_mask(grid: OccupancyGrid, rules: ManualRules) -> np.ndarray:
    """Dilated boolean mask of cells whose height range exceeds the threshold."""
    raw = grid.channels[1] > rules.height_range_threshold
    return chebyshev_dilate(raw, rules.dilation_radius)


def manual_cost(grid: OccupancyGrid, rules: ManualRules = ManualRules()) -> CostMap:
    """Two-valued cost map: obstacle_cost on the dilated mask, free_cost elsewhere."""
    mask = manual_obstacle_mask(grid, rules)
    values = np.where(mask, rules.obstacle_cost, rules.free_cost)
    return CostMap(values)
