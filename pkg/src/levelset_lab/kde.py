"""Kernel density estimation with rate-targeted bandwidth and offset rules.

The estimator is exact summation (no binning), evaluated through a
compiled core when the extension is built, with a pure-numpy fallback
selected at import time. Set LEVELSET_LAB_PURE=1 to force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelD, _weighted_moment, validate_kernel

if os.environ.get("LEVELSET_LAB_PURE"):
    from . import _kdepure as _backend
else:
    try:
        from . import _kdecore as _backend  # type: ignore[attr-defined]
    except ImportError:
        from . import _kdepure as _backend

COMPILED = _backend.BACKEND == "compiled"

H_RULES = ("dH-rule", "dDelta-rule")
ELL_RULES = ("dH-rule", "dDelta-rule", "zero")


class ConfigurationError(ValueError):
    """A schedule constant violates its admissibility constraint."""


def backend_name() -> str:
    return _backend.BACKEND


def _canonical_rule(rule: str, allowed=H_RULES) -> str:
    aliases = {
        "dh": "dH-rule",
        "dh-rule": "dH-rule",
        "ddelta": "dDelta-rule",
        "ddelta-rule": "dDelta-rule",
        "zero": "zero",
        "none": "zero",
    }
    canon = aliases.get(rule.lower())
    if canon is None or canon not in allowed:
        raise ValueError(f"unknown rule {rule!r}; expected one of {allowed}")
    return canon


@dataclass
class KdeEstimator:
    """Kernel density estimate p_hat(x) = (1/(n h^d)) sum_i K((X_i - x)/h).

    Values can be negative when the kernel has negative parts; thresholding
    callers must not assume nonnegativity.
    """

    points: np.ndarray
    kernel: KernelD
    h: float
    _sorted: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2:
            raise ValueError("points must be an (n, d) array")
        if pts.shape[1] != self.kernel.dim:
            raise ValueError(
                f"kernel dimension {self.kernel.dim} != sample dimension {pts.shape[1]}"
            )
        if self.h <= 0:
            raise ValueError("bandwidth must be positive")
        self.points = pts
        order = np.argsort(pts[:, 0], kind="stable")
        self._sorted = np.ascontiguousarray(pts[order])

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def eval_many(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        sums = _backend.kde_sum(
            self._sorted, self.kernel.factor.coefficients, self.h, x
        )
        return sums / (self.n * self.h**self.dim)


def kde_eval(est: KdeEstimator, x) -> float:
    """Evaluate the estimator at a single point."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(est.eval_many(x)[0])


def kde_eval_grid(est: KdeEstimator, x: np.ndarray) -> np.ndarray:
    """Evaluate the estimator at an (m, d) array of points."""
    return est.eval_many(x)


def bandwidth(n: int, rule: str, beta: float, d: int, c_h: float = 1.0) -> float:
    """Bandwidth schedules h_n = c_h n^{-1/(2b+d)} (dH-rule) or
    c_h (n/log n)^{-1/(2b+d)} (dDelta-rule). Natural logarithm throughout.
    """
    rule = _canonical_rule(rule)
    if beta <= 0 or d < 1 or c_h <= 0:
        raise ValueError("need beta > 0, d >= 1, c_h > 0")
    if rule == "dH-rule":
        if n < 1:
            raise ValueError("n must be >= 1")
        return c_h * n ** (-1.0 / (2 * beta + d))
    if n < 2:
        raise ValueError("dDelta-rule needs n >= 2 (log n must be positive)")
    return c_h * (n / math.log(n)) ** (-1.0 / (2 * beta + d))


def offset(
    n: int,
    rule: str,
    beta: float,
    d: int,
    c_ell: float = 1.0,
    c6: float | None = None,
    c_h: float | None = None,
) -> float:
    """Offset schedules for the plug-in estimator.

    dH-rule: c_ell n^{-b/(2b+d)}; dDelta-rule adds the sqrt(log n) factor
    and requires c_ell >= max(1/(c6 c_h^d), 1), which is checked when c6
    and c_h are supplied. Negative c_ell flips the target from the open
    level set to the closed one.
    """
    rule = _canonical_rule(rule, ELL_RULES)
    if rule == "zero":
        return 0.0
    if beta <= 0 or d < 1:
        raise ValueError("need beta > 0, d >= 1")
    mu = beta / (2 * beta + d)
    if rule == "dH-rule":
        if n < 1:
            raise ValueError("n must be >= 1")
        return c_ell * n**-mu
    if n < 2:
        raise ValueError("dDelta-rule needs n >= 2 (log n must be positive)")
    if c6 is not None and c_h is not None:
        bound = min_offset_constant(c6, c_h, d)
        if abs(c_ell) < bound:
            raise ConfigurationError(
                f"dDelta-rule requires |c_ell| >= max(1/(c6*c_h^d), 1) = {bound:.6g}, "
                f"got {c_ell:.6g}"
            )
    return c_ell * n**-mu * math.sqrt(math.log(n))


def min_offset_constant(c6: float, c_h: float, d: int) -> float:
    """Smallest admissible dDelta-rule offset constant."""
    return max(1.0 / (c6 * c_h**d), 1.0)


@dataclass(frozen=True)
class LemmaConstants:
    """Constants entering the pointwise concentration bound.

    c5 is the |K|-weighted beta moment (the signed variant is recorded in
    the kernel validity report); c7 bounds |Z_i|, c8 bounds Var(Z_i),
    c6 = 1/(16 c8) and delta_max = 6 c8 / c7 delimit the valid deviation
    range (2 L c5 h^beta, delta_max).
    """

    c5: float
    c5_signed: float
    c6: float
    c7: float
    c8: float
    delta_max: float
    kernel_sup: float
    kernel_l2_sq: float
    kernel_l1: float


def lemma_constants(kernel: KernelD, L: float, L_star: float, beta: float) -> LemmaConstants:
    rep = validate_kernel(kernel, max(beta, 1e-9))
    c5 = rep.beta_norm
    c8 = L_star * rep.l2_norm_sq
    c7 = rep.sup_norm + L_star + L * c5
    c6 = 1.0 / (16.0 * c8)
    return LemmaConstants(
        c5=c5,
        c5_signed=rep.signed_beta_moment,
        c6=c6,
        c7=c7,
        c8=c8,
        delta_max=6.0 * c8 / c7,
        kernel_sup=rep.sup_norm,
        kernel_l2_sq=rep.l2_norm_sq,
        kernel_l1=rep.l1_norm,
    )


def bias_bound(kernel: KernelD, L: float, beta: float, h: float) -> float:
    """Pointwise bias bound L * c5 * h^beta with c5 = int ||t||^beta |K|.

    The signed moment int ||t||^beta K can vanish for higher-order kernels
    and is recorded separately; the absolute version is the one that
    actually bounds the bias chain.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if kernel.dim == 1:
        c5 = _weighted_moment(kernel.factor.coefficients, beta, absolute=True)
    else:
        c5 = validate_kernel(kernel, max(beta, 1e-9)).beta_norm
    return L * c5 * h**beta


def concentration_bound(n: int, h: float, d: int, delta: float, c6: float) -> float:
    """Upper bound 2 exp(-c6 n h^d delta^2) on the deviation probability."""
    return 2.0 * math.exp(-c6 * n * h**d * delta * delta)


@dataclass(frozen=True)
class Schedules:
    """Bandwidth/offset schedules and the derived rate sequences.

    phi(n) = (n h_n^d)^{-1/2} is the in-neighborhood pointwise rate,
    psi(n) = h_n^{beta'} the out-of-neighborhood one, mu = beta/(2 beta + d)
    the polynomial rate exponent.
    """

    h_rule: str
    ell_rule: str
    beta: float
    beta_prime: float
    d: int
    c_h: float = 1.0
    c_ell: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "h_rule", _canonical_rule(self.h_rule))
        object.__setattr__(self, "ell_rule", _canonical_rule(self.ell_rule, ELL_RULES))

    @property
    def mu(self) -> float:
        return self.beta / (2 * self.beta + self.d)

    def h(self, n: int) -> float:
        return bandwidth(n, self.h_rule, self.beta, self.d, self.c_h)

    def ell(self, n: int) -> float:
        return offset(n, self.ell_rule, self.beta, self.d, self.c_ell)

    def phi(self, n: int) -> float:
        return (n * self.h(n) ** self.d) ** -0.5

    def psi(self, n: int) -> float:
        return self.h(n) ** self.beta_prime

    def validate_offset_constant(self, c6: float) -> None:
        """Enforce the dDelta-rule admissibility bound given c6."""
        if self.ell_rule == "dDelta-rule":
            bound = min_offset_constant(c6, self.c_h, self.d)
            if abs(self.c_ell) < bound:
                raise ConfigurationError(
                    f"dDelta-rule requires |c_ell| >= max(1/(c6*c_h^d), 1) = "
                    f"{bound:.6g}, got {self.c_ell:.6g}"
                )
