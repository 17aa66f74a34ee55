"""Grid-shaped data carriers: occupancy grids and cost maps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_CHANNELS = 3  # mean height, height range, normalized point count


@dataclass(frozen=True)
class OccupancyGrid:
    """Per-cell LIDAR statistics over an HxW grid.

    Channel 0 is mean point height (m), channel 1 the height range within
    the cell (m), channel 2 a point count normalized to [0, 1]. Cells
    without any points carry zeros in all channels.
    """

    channels: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.channels, dtype=np.float64)
        if c.ndim != 3 or c.shape[0] != N_CHANNELS:
            raise ValueError(f"expected ({N_CHANNELS}, H, W) channels, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("occupancy grid must be finite")
        if np.any(c[1] < 0):
            raise ValueError("height range channel must be nonnegative")
        empty = c[2] == 0
        if np.any(c[0][empty] != 0) or np.any(c[1][empty] != 0):
            raise ValueError("cells with zero points must be all-zero")
        object.__setattr__(self, "channels", c)

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels.shape[1:]


@dataclass(frozen=True)
class CostMap:
    """Per-cell traversal cost in (0, 1); 1 is untraversable, 0 free."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"cost map must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("cost map must be finite")
        if np.any(v <= 0) or np.any(v >= 1):
            raise ValueError("cost values must lie strictly inside (0, 1)")
        object.__setattr__(self, "values", v)
