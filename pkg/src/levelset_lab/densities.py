"""Synthetic density families with analytic samplers and level-set oracles.

Every model carries an analytic pdf, an exact sampler (inverse-CDF in 1-D,
bounded rejection otherwise), membership oracles for the open and closed
level sets at its declared level, and its smoothness/margin parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .boxes import Box, cell_centers

# Bounded-rejection sampler gives up after this many proposal rounds.
MAX_REJECTION_ROUNDS = 1000


class SamplingError(RuntimeError):
    """Rejection sampler exceeded its round cap."""


class UndefinedFitError(ValueError):
    """All grid measures were zero; the log-log fit has no support."""


@dataclass(frozen=True)
class HolderParams:
    """Smoothness and margin parameters declared by a density model.

    beta/beta_prime are the smoothness orders near/away from the level,
    L the Taylor-remainder constant, L_star the sup-norm bound, r the
    locality radius, eta the level-neighborhood half-width, (gamma, c0,
    eps0) the margin exponent data and lam the declared level.
    """

    beta: float
    beta_prime: float
    L: float
    L_star: float
    r: float
    eta: float
    gamma: float
    c0: float
    eps0: float
    lam: float

    def __post_init__(self):
        for name in ("beta", "beta_prime", "L", "L_star", "r", "eta", "gamma", "c0", "eps0", "lam"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.gamma * min(self.beta, 1.0) > 1.0 + 1e-12:
            raise ValueError(
                "gamma * min(beta, 1) <= 1 is required for rate experiments; "
                f"got {self.gamma * min(self.beta, 1.0):.6g}"
            )


@dataclass(frozen=True)
class DensityModel:
    model_id: str
    params: HolderParams
    domain: Box
    pdf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray] | None = None
    cdf_inverse: Callable[[np.ndarray], np.ndarray] | None = None
    envelope: float | None = None  # rejection envelope constant (>= sup pdf)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def true_set(self, x: np.ndarray, lam: float | None = None) -> np.ndarray:
        """Membership in the open level set {p > lam}."""
        lam = self.params.lam if lam is None else lam
        return self.pdf(x) > lam

    def true_set_closed(self, x: np.ndarray, lam: float | None = None) -> np.ndarray:
        """Membership in the closed level set {p >= lam}."""
        lam = self.params.lam if lam is None else lam
        return self.pdf(x) >= lam


@dataclass(frozen=True)
class Sample:
    points: np.ndarray
    seed: int
    model_id: str

    @property
    def n(self) -> int:
        return self.points.shape[0]


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x


def make_uniform_box(d: int = 1) -> DensityModel:
    """Uniform density on the unit cube; baseline fixture."""
    if d < 1:
        raise ValueError("d must be >= 1")
    box = Box((0.0,) * d, (1.0,) * d)

    def pdf(x):
        x = _as_points(x)
        return np.where(box.contains(x), 1.0, 0.0)

    params = HolderParams(
        beta=2.0, beta_prime=2.0, L=1.0, L_star=1.0, r=1.0,
        eta=0.25, gamma=1.0, c0=1.0, eps0=0.4, lam=0.5,
    )
    return DensityModel(
        model_id="uniform" if d == 1 else f"uniform:{d}",
        params=params, domain=box, pdf=pdf,
    )


def make_cone_1d() -> DensityModel:
    """Triangular density p(x) = (1 - |x|)+ on [-1, 1].

    Linear flanks give gamma-exponent 1 with c0 = 4 at any level in (0, 1):
    the strip {0 < |p - lam| <= eps} is two intervals of length 2*eps each.
    """

    def pdf(x):
        x = _as_points(x)[:, 0]
        return np.maximum(0.0, 1.0 - np.abs(x))

    def cdf(x):
        x = np.asarray(x, dtype=float)
        left = 0.5 * (1.0 + np.clip(x, -1.0, 0.0)) ** 2
        right = 1.0 - 0.5 * (1.0 - np.clip(x, 0.0, 1.0)) ** 2
        return np.where(x <= 0.0, left, right)

    def cdf_inverse(u):
        u = np.asarray(u, dtype=float)
        lo = np.sqrt(2.0 * u) - 1.0
        hi = 1.0 - np.sqrt(2.0 * (1.0 - u))
        return np.where(u < 0.5, lo, hi)

    params = HolderParams(
        beta=1.0, beta_prime=1.0, L=1.0, L_star=1.0, r=1.0,
        eta=0.25, gamma=1.0, c0=4.0, eps0=0.4, lam=0.5,
    )
    return DensityModel(
        model_id="cone1d", params=params, domain=Box((-1.0,), (1.0,)),
        pdf=pdf, cdf=cdf, cdf_inverse=cdf_inverse,
    )


def make_plateau() -> DensityModel:
    """Flat density 1/2 on [0, 1] with linear tails on [-1, 0] and [1, 2].

    At level 1/2 the open level set is empty while the closed one is
    [0, 1]; the tails close the total mass to exactly one.
    """

    def pdf(x):
        x = _as_points(x)[:, 0]
        dist = np.maximum(np.maximum(-x, x - 1.0), 0.0)
        return np.maximum(0.0, 0.5 * (1.0 - dist))

    def cdf(x):
        x = np.asarray(x, dtype=float)
        left = 0.25 * (1.0 + np.clip(x, -1.0, 0.0)) ** 2
        mid = 0.5 * np.clip(x, 0.0, 1.0)
        right = 0.25 * (1.0 - (2.0 - np.clip(x, 1.0, 2.0)) ** 2)
        return left + mid + right

    def cdf_inverse(u):
        u = np.asarray(u, dtype=float)
        left = 2.0 * np.sqrt(u) - 1.0
        mid = 2.0 * u - 0.5
        right = 2.0 - 2.0 * np.sqrt(1.0 - u)
        return np.where(u < 0.25, left, np.where(u <= 0.75, mid, right))

    params = HolderParams(
        beta=1.0, beta_prime=1.0, L=0.5, L_star=0.5, r=1.0,
        eta=0.25, gamma=1.0, c0=4.0, eps0=0.2, lam=0.5,
    )
    return DensityModel(
        model_id="plateau", params=params, domain=Box((-1.0,), (2.0,)),
        pdf=pdf, cdf=cdf, cdf_inverse=cdf_inverse,
    )


def sample(model: DensityModel, n: int, seed: int) -> Sample:
    """Draw n i.i.d. points; deterministic given the seed.

    1-D models with an inverse CDF sample by inversion; the uniform cube
    samples directly; everything else uses rejection against the uniform
    envelope L_star * Leb(domain), capped at MAX_REJECTION_ROUNDS rounds.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if model.cdf_inverse is not None and model.dim == 1:
        pts = model.cdf_inverse(rng.random(n))[:, None]
    elif model.model_id.startswith("uniform"):
        lo = np.asarray(model.domain.lows)
        wid = model.domain.widths()
        pts = lo + wid * rng.random((n, model.dim))
    else:
        envelope = model.envelope if model.envelope is not None else model.params.L_star
        pts = _rejection_sample(model, n, rng, envelope)
    return Sample(points=pts, seed=seed, model_id=model.model_id)


def _rejection_sample(model, n, rng, envelope):
    lo = np.asarray(model.domain.lows)
    wid = model.domain.widths()
    got = []
    have = 0
    batch = max(2 * n, 1024)
    for _ in range(MAX_REJECTION_ROUNDS):
        cand = lo + wid * rng.random((batch, model.dim))
        accept = rng.random(batch) * envelope <= model.pdf(cand)
        kept = cand[accept]
        got.append(kept)
        have += kept.shape[0]
        if have >= n:
            return np.concatenate(got)[:n]
    raise SamplingError(
        f"rejection sampler did not reach n={n} within "
        f"{MAX_REJECTION_ROUNDS} rounds (envelope {envelope})"
    )


@dataclass(frozen=True)
class GammaExponentFit:
    gamma_hat: float
    c0_hat: float
    eps_grid: np.ndarray
    measures: np.ndarray
    resolution: int


def gamma_exponent_empirical(
    model: DensityModel,
    lam: float,
    eps_grid,
    resolution: int | None = None,
) -> GammaExponentFit:
    """Fit Leb{0 < |p - lam| <= eps} ~ c0 * eps^gamma by grid counting.

    Cells where the analytic pdf equals lam exactly are excluded (the
    margin condition is about the strict inequality). Raises
    UndefinedFitError when fewer than two grid measures are positive.
    """
    eps_grid = np.sort(np.asarray(eps_grid, dtype=float))
    if np.any(eps_grid <= 0):
        raise ValueError("eps grid must be positive")
    if resolution is None:
        resolution = {1: 1 << 17, 2: 2048, 3: 192}.get(model.dim, 64)
    centers, cellvol = cell_centers(model.domain, resolution)
    pvals = model.pdf(centers)
    gap = np.abs(pvals - lam)
    off_level = pvals != lam  # exact analytic equality marks the flat part
    measures = np.array([
        float(np.count_nonzero(off_level & (gap <= eps))) * cellvol
        for eps in eps_grid
    ])
    positive = measures > 0
    if np.count_nonzero(positive) < 2:
        raise UndefinedFitError(
            "level-strip measures are zero on the epsilon grid; "
            "gamma fit undefined"
        )
    slope, intercept = np.polyfit(
        np.log(eps_grid[positive]), np.log(measures[positive]), 1
    )
    return GammaExponentFit(
        gamma_hat=float(slope),
        c0_hat=float(np.exp(intercept)),
        eps_grid=eps_grid,
        measures=measures,
        resolution=resolution,
    )


def model_from_id(model_id: str) -> DensityModel:
    """Resolve the string ids used by experiment configs.

    `uniform`, `uniform:<d>`, `cone1d`, `plateau`, and
    `pomega:<q>:<beta>:<gamma>:<d>:<omega-spec>` where omega-spec is a
    string over {+,-,0} of length N.
    """
    if model_id == "uniform":
        return make_uniform_box(1)
    if model_id.startswith("uniform:"):
        return make_uniform_box(int(model_id.split(":")[1]))
    if model_id == "cone1d":
        return make_cone_1d()
    if model_id == "plateau":
        return make_plateau()
    if model_id.startswith("pomega:"):
        from .lowerbound import build_family, family_density

        parts = model_id.split(":")
        if len(parts) != 6:
            raise ValueError(
                "pomega ids look like pomega:<q>:<beta>:<gamma>:<d>:<omega-spec>"
            )
        q, beta, gamma, d, spec = int(parts[1]), float(parts[2]), float(parts[3]), int(parts[4]), parts[5]
        family = build_family(q=q, d=d, beta=beta, gamma=gamma, seed=0)
        signs = {"+": 1, "-": -1, "0": 0}
        try:
            omega = np.array([signs[c] for c in spec], dtype=int)
        except KeyError as exc:
            raise ValueError(f"omega-spec may only contain +, -, 0: {spec!r}") from exc
        return family_density(family, omega, model_id=model_id)
    raise ValueError(f"unknown model id {model_id!r}")
