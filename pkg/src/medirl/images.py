"""Plain-text PGM/PPM writers for rendered cost maps.

Cost maps render with the blue-to-yellow orientation used throughout
the reports: blue marks obstacles (cost 1), yellow traversable terrain
(cost 0).
"""
from __future__ import annotations

import numpy as np

YELLOW = np.array([255, 255, 0], dtype=np.float64)
BLUE = np.array([0, 0, 255], dtype=np.float64)


def _scaled(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError("image values must be 2-D")
    if np.any(v < 0) or np.any(v > 1):
        raise ValueError("image values must lie in [0, 1]")
    return v


def write_pgm(values: np.ndarray, path) -> None:
    """P2 grayscale image of values in [0, 1], scaled to 0-255."""
    v = _scaled(values)
    gray = np.rint(v * 255).astype(int)
    lines = [f"P2", f"{v.shape[1]} {v.shape[0]}", "255"]
    lines += [" ".join(str(x) for x in row) for row in gray]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_ppm(values: np.ndarray, path) -> None:
    """P3 color image: cost 0 renders yellow, cost 1 blue."""
    v = _scaled(values)
    rgb = np.rint(
        (1.0 - v)[..., None] * YELLOW[None, None, :] + v[..., None] * BLUE[None, None, :]
    ).astype(int)
    lines = [f"P3", f"{v.shape[1]} {v.shape[0]}", "255"]
    for row in rgb:
        lines.append(" ".join(" ".join(str(c) for c in px) for px in row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
