"""Axis-aligned boxes and cell-center grids shared by the quadrature code."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Hard cap on the total number of grid cells a single raster may allocate.
MAX_CELLS = 1 << 24


class ResolutionError(ValueError):
    """Requested grid would exceed the cell cap."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by per-axis (low, high) bounds."""

    lows: tuple
    highs: tuple

    def __post_init__(self):
        if len(self.lows) != len(self.highs):
            raise ValueError("lows and highs must have equal length")
        if any(hi <= lo for lo, hi in zip(self.lows, self.highs)):
            raise ValueError("each axis needs high > low")
        object.__setattr__(self, "lows", tuple(float(v) for v in self.lows))
        object.__setattr__(self, "highs", tuple(float(v) for v in self.highs))

    @property
    def dim(self) -> int:
        return len(self.lows)

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in zip(self.lows, self.highs)]))

    def widths(self) -> np.ndarray:
        return np.asarray(self.highs) - np.asarray(self.lows)

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo = np.asarray(self.lows)
        hi = np.asarray(self.highs)
        return np.all((x >= lo) & (x <= hi), axis=1)


def unit_box(d: int) -> Box:
    return Box((0.0,) * d, (1.0,) * d)


def cell_centers(box: Box, resolution: int) -> tuple[np.ndarray, float]:
    """Cell centers of the regular grid with `resolution` cells per axis.

    Returns the (resolution**d, d) array of centers and the volume of one
    cell. Guarded by MAX_CELLS to keep rasters desk-sized.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    d = box.dim
    if resolution**d > MAX_CELLS:
        raise ResolutionError(
            f"{resolution}^{d} cells exceeds the cap of {MAX_CELLS}"
        )
    axes = []
    for lo, hi in zip(box.lows, box.highs):
        w = (hi - lo) / resolution
        axes.append(lo + w * (np.arange(resolution) + 0.5))
    if d == 1:
        centers = axes[0][:, None]
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([m.ravel() for m in mesh], axis=1)
    cell_volume = box.volume / resolution**d
    return centers, cell_volume
