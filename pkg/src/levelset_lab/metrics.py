"""Performance measures for level-set estimates.

Two pseudo-distances drive everything: the plain Lebesgue measure of the
symmetric difference, and its |p - lam|-weighted variant, which equals
the excess-mass deficit. All integrals are cell-center quadrature on a
regular grid over the model domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boxes import Box, cell_centers
from .densities import DensityModel


@dataclass(frozen=True)
class MetricReport:
    d_delta: float
    d_h: float
    excess_mass_deficit: float
    quadrature_cells: int
    est_error: float

    def to_dict(self) -> dict:
        return {
            "d_delta": self.d_delta,
            "d_h": self.d_h,
            "excess_mass_deficit": self.excess_mass_deficit,
            "quadrature_cells": self.quadrature_cells,
            "est_error": self.est_error,
        }


def _boundary_cell_count(mask: np.ndarray, shape: tuple) -> int:
    """Cells adjacent to a membership flip along any axis."""
    grid = mask.reshape(shape)
    boundary = np.zeros(shape, dtype=bool)
    for axis in range(grid.ndim):
        flips = np.diff(grid.astype(np.int8), axis=axis) != 0
        lead = [slice(None)] * grid.ndim
        lag = [slice(None)] * grid.ndim
        lead[axis] = slice(0, -1)
        lag[axis] = slice(1, None)
        boundary[tuple(lead)] |= flips
        boundary[tuple(lag)] |= flips
    return int(np.count_nonzero(boundary))


def sym_diff(a, b, box: Box, resolution: int) -> float:
    """Lebesgue measure of the symmetric difference of two predicates."""
    centers, cellvol = cell_centers(box, resolution)
    xor = np.asarray(a(centers), bool) ^ np.asarray(b(centers), bool)
    return float(np.count_nonzero(xor)) * cellvol


def excess_mass(g, model: DensityModel, lam: float, resolution: int) -> float:
    """H(g) = int_g p dQ - lam * Leb(g) over the model domain."""
    centers, cellvol = cell_centers(model.domain, resolution)
    inside = np.asarray(g(centers), bool)
    pvals = model.pdf(centers)
    return float(np.sum(pvals[inside]) * cellvol - lam * np.count_nonzero(inside) * cellvol)


def d_h(g, model: DensityModel, lam: float, resolution: int) -> float:
    """Weighted symmetric difference int_{g XOR Gamma} |p - lam| dQ.

    The comparison set is the model's open level set at lam; the value is
    unchanged if the closed variant is used because the weight vanishes
    exactly where they differ.
    """
    centers, cellvol = cell_centers(model.domain, resolution)
    xor = np.asarray(g(centers), bool) ^ model.true_set(centers, lam)
    pvals = model.pdf(centers)
    return float(np.sum(np.abs(pvals[xor] - lam)) * cellvol)


def metric_report(g, model: DensityModel, lam: float, resolution: int) -> MetricReport:
    """Evaluate one estimate against the true level set on a shared grid."""
    centers, cellvol = cell_centers(model.domain, resolution)
    gm = np.asarray(g(centers), bool)
    truth = model.true_set(centers, lam)
    pvals = model.pdf(centers)
    xor = gm ^ truth
    dd = float(np.count_nonzero(xor)) * cellvol
    dh = float(np.sum(np.abs(pvals[xor] - lam)) * cellvol)
    h_true = float(np.sum(pvals[truth]) * cellvol - lam * np.count_nonzero(truth) * cellvol)
    h_g = float(np.sum(pvals[gm]) * cellvol - lam * np.count_nonzero(gm) * cellvol)
    shape = (resolution,) * model.dim
    est_error = _boundary_cell_count(xor, shape) * cellvol
    return MetricReport(
        d_delta=dd,
        d_h=dh,
        excess_mass_deficit=h_true - h_g,
        quadrature_cells=resolution**model.dim,
        est_error=est_error,
    )


@dataclass(frozen=True)
class Prop21Result:
    lhs: float
    rhs: float  # the d_h value before the gamma/(1+gamma) power
    flat_term: float
    holds: bool
    fitted_C: float

    @property
    def slack(self) -> float:
        """lhs minus the flat term; what the fitted constant must cover."""
        return self.lhs - self.flat_term


def prop21_check(g1, g2, model: DensityModel, lam: float, gamma: float, resolution: int) -> Prop21Result:
    """Evaluate d_delta <= Q(sym-diff on the flat part) + C * d_h^(g/(1+g)).

    fitted_C is the smallest constant making this pair satisfy the
    inequality; it is infinite only when the weighted distance vanishes
    while the unweighted one exceeds the flat-part term.
    """
    centers, cellvol = cell_centers(model.domain, resolution)
    a = np.asarray(g1(centers), bool)
    b = np.asarray(g2(centers), bool)
    xor = a ^ b
    pvals = model.pdf(centers)
    lhs = float(np.count_nonzero(xor)) * cellvol
    flat = float(np.count_nonzero(xor & (pvals == lam))) * cellvol
    dh = float(np.sum(np.abs(pvals[xor] - lam)) * cellvol)
    need = lhs - flat
    if dh > 0:
        fitted = max(0.0, need) / dh ** (gamma / (1.0 + gamma))
    else:
        fitted = 0.0 if need <= 1e-12 else float("inf")
    return Prop21Result(lhs=lhs, rhs=dh, flat_term=flat, holds=np.isfinite(fitted), fitted_C=fitted)


@dataclass(frozen=True)
class PropA1Report:
    fitted_c_prime: float
    fitted_c_prime_refined: float
    forward_constant: float  # (c')^(1+gamma), comparable to the margin c0
    n_sets: int
    per_set_ratios: np.ndarray

    @property
    def stable(self) -> bool:
        ref = max(abs(self.fitted_c_prime), 1e-12)
        return abs(self.fitted_c_prime - self.fitted_c_prime_refined) <= 0.2 * ref


def random_box_union(rng: np.random.Generator, box: Box, n_components: int = 3, scale: float = 0.2):
    """Union of random axis-aligned sub-boxes; a test-suite workhorse."""
    lo = np.asarray(box.lows)
    wid = box.widths()
    comps = []
    for _ in range(n_components):
        a = lo + wid * rng.random(box.dim)
        half = wid * scale * rng.random(box.dim) / 2.0
        comps.append((a - half, a + half))

    def member(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0], dtype=bool)
        for a, b in comps:
            out |= np.all((x >= a) & (x <= b), axis=1)
        return out

    return member


def propA1_check(
    model: DensityModel,
    lam: float,
    gamma: float,
    n_random_sets: int = 30,
    seed: int = 0,
    resolution: int = 4096,
    L_Q: float | None = None,
) -> PropA1Report:
    """Fit the smallest c' with Q(G) <= c' (int_G |p-lam|)^(g/(1+g)).

    The random sets are unions of boxes intersected with {p != lam}
    (flat parts excluded by exact equality on the analytic pdf) and
    trimmed to Q(G) <= L_Q. Stability is assessed by refining the grid.
    """
    if L_Q is None:
        L_Q = 2.0 / lam  # M + 1/lam with M = 1/lam for a unit-l1 kernel

    def fitted(res: int) -> tuple[float, np.ndarray]:
        rng = np.random.default_rng(seed)
        centers, cellvol = cell_centers(model.domain, res)
        pvals = model.pdf(centers)
        off_level = pvals != lam
        gap = np.abs(pvals - lam)
        masks = []
        for _ in range(n_random_sets):
            base = random_box_union(rng, model.domain, n_components=int(rng.integers(1, 4)))
            masks.append(np.asarray(base(centers), bool) & off_level)
        # Level-hugging strips are the extremal sets for (A.7); probing them
        # keeps the fitted constant comparable to the margin constant.
        for eps in (0.05, 0.1, 0.2):
            masks.append(off_level & (gap <= eps))
        ratios = []
        for mask in masks:
            qg = float(np.count_nonzero(mask)) * cellvol
            if qg == 0.0 or qg > L_Q:
                continue
            ig = float(np.sum(gap[mask]) * cellvol)
            if ig <= 0:
                continue
            ratios.append(qg / ig ** (gamma / (1.0 + gamma)))
        if not ratios:
            return 0.0, np.array([])
        return max(ratios), np.asarray(ratios)

    c1, ratios = fitted(resolution)
    c2, _ = fitted(2 * resolution)
    return PropA1Report(
        fitted_c_prime=c1,
        fitted_c_prime_refined=c2,
        forward_constant=c1 ** (1.0 + gamma),
        n_sets=len(ratios),
        per_set_ratios=ratios,
    )
