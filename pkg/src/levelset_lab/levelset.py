"""Plug-in level-set estimators with offset, and grid rasterization.

The estimate is the upper level set {p_hat >= lam + ell} of a density
estimator. The strict/closed asymmetry is deliberate: the estimation
target uses the strict inequality while the plug-in uses >=, so cell
centers landing exactly on the threshold resolve to members.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .boxes import Box, cell_centers


@dataclass(frozen=True)
class FunctionEstimator:
    """Adapter giving a vectorized function the estimator interface.

    Used for synthetic perturbed estimators and analytic oracles where no
    sample is involved.
    """

    fn: Callable[[np.ndarray], np.ndarray]

    def eval_many(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.fn(x), dtype=float)


@dataclass(frozen=True)
class LevelSetEstimate:
    source: object  # anything with eval_many(x) -> values
    lam: float
    ell: float

    def member(self, x: np.ndarray) -> np.ndarray:
        return self.source.eval_many(x) >= self.lam + self.ell

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.member(x)


def plugin_estimate(est, lam: float, ell: float = 0.0) -> LevelSetEstimate:
    """Threshold a density estimator at lam + ell.

    ell = 0 is the plain plug-in estimator up to the >=/> boundary
    convention; positive offsets target the open level set, negative ones
    the closed variant.
    """
    return LevelSetEstimate(source=est, lam=float(lam), ell=float(ell))


@dataclass(frozen=True)
class GridRaster:
    """Membership bits at the cell centers of a regular grid."""

    box: Box
    resolution: int
    bits: np.ndarray  # boolean, shape (resolution,) * dim
    cell_volume: float

    @property
    def dim(self) -> int:
        return self.box.dim

    def measure(self) -> float:
        """Lebesgue-measure estimate: member cells times cell volume."""
        return float(np.count_nonzero(self.bits)) * self.cell_volume

    def as_predicate(self) -> Callable[[np.ndarray], np.ndarray]:
        """Nearest-cell membership lookup (points outside the box are out)."""
        lows = np.asarray(self.box.lows)
        widths = self.box.widths() / self.resolution

        def member(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            idx = np.floor((x - lows) / widths).astype(int)
            ok = np.all((idx >= 0) & (idx < self.resolution), axis=1)
            idx = np.clip(idx, 0, self.resolution - 1)
            flat = np.ravel_multi_index(idx.T, self.bits.shape)
            return self.bits.ravel()[flat] & ok

        return member

    def to_csv(self, path) -> None:
        """Flat export: cell index, center coordinates, membership bit."""
        centers, _ = cell_centers(self.box, self.resolution)
        flat = self.bits.ravel()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["cell"] + [f"x{j}" for j in range(self.dim)] + ["bit"]
            )
            for i, (center, bit) in enumerate(zip(centers, flat)):
                writer.writerow([i] + [repr(float(c)) for c in center] + [int(bit)])


def rasterize(set_member: Callable[[np.ndarray], np.ndarray], box: Box, resolution: int) -> GridRaster:
    """Evaluate a membership predicate at cell centers.

    Deterministic; the cell cap in boxes.cell_centers guards against
    runaway resolutions.
    """
    centers, cellvol = cell_centers(box, resolution)
    bits = np.asarray(set_member(centers), dtype=bool)
    shape = (resolution,) * box.dim
    return GridRaster(
        box=box, resolution=resolution, bits=bits.reshape(shape), cell_volume=cellvol
    )
