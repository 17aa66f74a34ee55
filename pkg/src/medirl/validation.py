"""Input coercion and validation helpers for the estimator-facing API."""
from __future__ import annotations

import numpy as np

from .maps import OccupancyGrid
from .worlds import Scenario


def as_occupancy_grid(obj) -> OccupancyGrid:
    """Accept an OccupancyGrid, a Scenario, or a raw (3, H, W) array."""
    if isinstance(obj, OccupancyGrid):
        return obj
    if isinstance(obj, Scenario):
        return obj.grid
    arr = np.asarray(obj, dtype=np.float64)
    return OccupancyGrid(arr)


def as_grid_list(X) -> list[OccupancyGrid]:
    """Coerce a sequence (or a lone grid) into a list of occupancy grids."""
    if isinstance(X, (OccupancyGrid, Scenario)):
        return [as_occupancy_grid(X)]
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return [as_occupancy_grid(X)]
    if isinstance(X, np.ndarray) and X.ndim == 4:
        return [as_occupancy_grid(x) for x in X]
    try:
        items = list(X)
    except TypeError:
        raise TypeError(f"cannot interpret {type(X).__name__} as occupancy grids")
    if not items:
        raise ValueError("need at least one occupancy grid")
    return [as_occupancy_grid(x) for x in items]


def check_same_shape(grids: list[OccupancyGrid]) -> tuple[int, int]:
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        raise ValueError(f"grids have mixed shapes: {sorted(shapes)}")
    return shapes.pop()
