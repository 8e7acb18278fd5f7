"""Compactly supported kernels with vanishing moments up to a target order.

The one-dimensional construction projects the Dirac mass at 0 onto the
orthonormal Legendre basis on [-1, 1]:

    K(u) = sum_{m=0}^{M} phi_m(0) phi_m(u),   M = floor(beta),

which integrates to one and has vanishing moments of orders 1..M.
Odd-degree basis functions vanish at 0, so the construction depends on
beta only through the bucket {2k, 2k+1} containing floor(beta).
Multivariate kernels are coordinatewise products on [-1, 1]^d.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as iter_product

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly

# Moments of the polynomial kernels are integrated exactly by Gauss-Legendre
# quadrature (n nodes are exact up to degree 2n-1), so the tolerance only
# absorbs float rounding.
MOMENT_TOL = 1e-10


@dataclass(frozen=True)
class Kernel1D:
    """Polynomial kernel on [-1, 1] with vanishing moments up to order_floor."""

    order_floor: int
    coefficients: np.ndarray  # power-basis coefficients, ascending degree
    support: tuple = (-1.0, 1.0)

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        vals = nppoly.polyval(u, self.coefficients)
        return np.where(np.abs(u) <= 1.0, vals, 0.0)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


@dataclass(frozen=True)
class KernelD:
    """Product kernel K(x) = prod_j factor(x_j) on [-1, 1]^d."""

    dim: int
    factor: Kernel1D

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}")
        inside = np.all(np.abs(x) <= 1.0, axis=1)
        vals = np.prod(nppoly.polyval(x, self.factor.coefficients), axis=1)
        return np.where(inside, vals, 0.0)

    @property
    def order_floor(self) -> int:
        return self.factor.order_floor


@dataclass(frozen=True)
class KernelValidityReport:
    integral_one_error: float
    violated_moments: list = field(default_factory=list)
    beta_norm: float = 0.0
    sup_norm: float = 0.0
    l2_norm_sq: float = 0.0
    l1_norm: float = 0.0
    signed_beta_moment: float = 0.0
    quadrature_nodes: int = 0

    @property
    def valid(self) -> bool:
        return abs(self.integral_one_error) <= MOMENT_TOL and not self.violated_moments

    def to_dict(self) -> dict:
        return {
            "integral_one_error": self.integral_one_error,
            "violated_moments": [list(s) for s in self.violated_moments],
            "beta_norm": self.beta_norm,
            "sup_norm": self.sup_norm,
            "l2_norm_sq": self.l2_norm_sq,
            "l1_norm": self.l1_norm,
            "signed_beta_moment": self.signed_beta_moment,
            "quadrature_nodes": self.quadrature_nodes,
            "valid": self.valid,
        }


def legendre_kernel(beta: float) -> Kernel1D:
    """Kernel with vanishing moments up to floor(beta).

    Uses the orthonormal-on-[-1,1] normalization of the Legendre basis,
    phi_m = sqrt((2m+1)/2) P_m. The power-basis coefficients are exact in
    float64 for the small orders used here.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    order = int(np.floor(beta))
    leg_coeffs = np.zeros(order + 1)
    for m in range(order + 1):
        unit = np.zeros(m + 1)
        unit[m] = 1.0
        p_m_at_0 = npleg.legval(0.0, unit)
        # phi_m(0) * phi_m as a Legendre series: ((2m+1)/2) P_m(0) on P_m.
        leg_coeffs[m] = (2 * m + 1) / 2.0 * p_m_at_0
    coeffs = npleg.leg2poly(leg_coeffs)
    coeffs = np.trim_zeros(coeffs, "b")
    if coeffs.size == 0:
        coeffs = np.zeros(1)
    return Kernel1D(order_floor=order, coefficients=coeffs)


def rectangular_kernel() -> Kernel1D:
    """The order-0 member of the family, K = 1/2 on [-1, 1]."""
    return Kernel1D(order_floor=0, coefficients=np.array([0.5]))


def product_kernel(k: Kernel1D, d: int) -> KernelD:
    if d < 1:
        raise ValueError(f"kernel dimension must be >= 1, got {d}")
    return KernelD(dim=int(d), factor=k)


def _sign_breakpoints(coeffs: np.ndarray) -> np.ndarray:
    """Real roots of the polynomial inside (-1, 1), sorted."""
    if len(coeffs) < 2:
        return np.array([])
    roots = nppoly.polyroots(coeffs)
    real = roots[np.abs(roots.imag) < 1e-12].real
    inside = np.sort(real[(real > -1.0) & (real < 1.0)])
    return inside


def _piecewise_integral(coeffs: np.ndarray, absolute: bool) -> float:
    """Integral of (|poly| or poly) over [-1, 1], exact up to rounding."""
    anti = nppoly.polyint(coeffs)
    if not absolute:
        return float(nppoly.polyval(1.0, anti) - nppoly.polyval(-1.0, anti))
    pts = np.concatenate(([-1.0], _sign_breakpoints(coeffs), [1.0]))
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        piece = nppoly.polyval(b, anti) - nppoly.polyval(a, anti)
        sign = np.sign(nppoly.polyval((a + b) / 2.0, coeffs))
        total += abs(piece) if sign == 0 else sign * piece
    return float(total)


def _weighted_moment(coeffs: np.ndarray, beta: float, absolute: bool) -> float:
    """Integral of |t|^beta * (|K| or K) over [-1, 1] for an even kernel.

    Split at the sign changes of K on (0, 1] and apply 64-node
    Gauss-Legendre per piece; for integer beta each piece is a polynomial
    and the result is exact.
    """
    u, w = npleg.leggauss(64)
    pts = np.concatenate(([0.0], _sign_breakpoints(coeffs), [1.0]))
    pts = np.unique(pts[(pts >= 0.0) & (pts <= 1.0)])
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        t = (b - a) / 2.0 * u + (a + b) / 2.0
        vals = nppoly.polyval(t, coeffs)
        if absolute:
            vals = np.abs(vals)
        total += (b - a) / 2.0 * float(np.sum(w * t**beta * vals))
    return 2.0 * total


def _poly_sup(coeffs: np.ndarray) -> float:
    """Sup of |poly| over [-1, 1] via the critical points."""
    candidates = [-1.0, 0.0, 1.0]
    if len(coeffs) > 2:
        deriv = nppoly.polyder(coeffs)
        roots = nppoly.polyroots(deriv)
        real = roots[np.abs(roots.imag) < 1e-12].real
        candidates.extend(real[(real >= -1.0) & (real <= 1.0)].tolist())
    return float(np.max(np.abs(nppoly.polyval(np.asarray(candidates), coeffs))))


def gauss_legendre_nodes(beta: float, degree: int, requested: int | None = None) -> int:
    """Number of 1-D Gauss-Legendre nodes used by validate_kernel.

    n nodes integrate polynomials of degree 2n-1 exactly; the moment
    integrands have degree at most floor(beta) + kernel degree. The floor
    of floor(beta) + 2 keeps small kernels comfortably oversampled.
    """
    exact = (int(np.floor(beta)) + degree) // 2 + 1
    need = max(exact, int(np.floor(beta)) + 2, 4)
    if requested is not None:
        if requested < exact:
            raise ValueError(
                f"{requested} nodes cannot integrate degree "
                f"{int(np.floor(beta)) + degree} exactly; need >= {exact}"
            )
        return int(requested)
    return need


def validate_kernel(
    k: KernelD, beta: float, quadrature_nodes: int | None = None
) -> KernelValidityReport:
    """Measure the moment conditions of `k` at order beta.

    Reports the error of the unit-integral condition, every multi-index s
    with 1 <= |s| <= floor(beta) whose moment exceeds MOMENT_TOL, and the
    norms that feed the concentration constants.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    order = int(np.floor(beta))
    d = k.dim
    nodes = gauss_legendre_nodes(beta, k.factor.degree, quadrature_nodes)
    u, w = npleg.leggauss(nodes)
    kv = nppoly.polyval(u, k.factor.coefficients)

    # Product structure factorizes every polynomial moment: the tensor
    # quadrature sum equals the product of 1-D sums.
    integral_1d = float(np.sum(w * kv))
    moments_1d = {0: integral_1d}
    for s in range(1, order + 1):
        moments_1d[s] = float(np.sum(w * u**s * kv))
    integral = integral_1d**d
    integral_one_error = integral - 1.0

    violated = []
    for s_tuple in iter_product(range(order + 1), repeat=d):
        total = sum(s_tuple)
        if not 1 <= total <= order:
            continue
        moment = 1.0
        for s_j in s_tuple:
            moment *= moments_1d[s_j]
        if abs(moment) > MOMENT_TOL:
            violated.append(s_tuple)
    violated.sort()

    # |K| and the ||t||^beta weights are not polynomials, so they are
    # integrated piecewise between the sign changes of the factor (exact up
    # to rounding in 1-D, factorized where the product structure allows).
    l1_1d = _piecewise_integral(k.factor.coefficients, absolute=True)
    l1 = l1_1d**d
    l2sq = float(np.sum(w * kv**2)) ** d
    sup = _poly_sup(k.factor.coefficients) ** d
    if d == 1:
        beta_norm = _weighted_moment(k.factor.coefficients, beta, absolute=True)
        signed = _weighted_moment(k.factor.coefficients, beta, absolute=False)
    else:
        # Euclidean ||t||^beta does not factorize; dense tensor quadrature.
        # Node count shrinks with dimension to bound the grid size.
        ud, wd = npleg.leggauss(48 if d <= 3 else 12)
        mesh = np.meshgrid(*([ud] * d), indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=1)
        wmesh = np.meshgrid(*([wd] * d), indexing="ij")
        weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
        kvals = k(grid)
        norms = np.linalg.norm(grid, axis=1)
        beta_norm = float(np.sum(weights * norms**beta * np.abs(kvals)))
        signed = float(np.sum(weights * norms**beta * kvals))

    return KernelValidityReport(
        integral_one_error=integral_one_error,
        violated_moments=violated,
        beta_norm=beta_norm,
        sup_norm=sup,
        l2_norm_sq=l2sq,
        l1_norm=l1,
        signed_beta_moment=signed,
        quadrature_nodes=nodes,
    )
