"""Minimax lower-bound machinery: bump perturbations of the flat density.

A grid of 2N disjoint balls in the unit cube carries paired +/- bumps of
height ~ kappa^beta; sign vectors omega in {-1, 0, 1}^N select which pairs
are active. Hamming-separated subsets of sign vectors give families whose
level sets are far apart in the set pseudo-distances while staying close
in Kullback-Leibler divergence.

Geometry note: 2N disjoint balls of radius 1/q cannot fit in a measure-1
support, so the construction is used in its affinely rescaled form:
centers (2k+1)/(2q) per axis and ball radius 1/(2q), with kappa = 1/q
kept as the declared amplitude/rate scaling parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .boxes import Box, cell_centers
from .densities import DensityModel, HolderParams


class InfeasibleConstructionError(ValueError):
    """The requested family parameters cannot be realized."""


@dataclass(frozen=True)
class BumpFunction:
    """Radial bump on the unit ball, nonnegative, vanishing at the boundary.

    Below order one the profile is (1 - ||x||)^beta; at order one and
    above it is 2^(1-beta) - ||x||^beta inside radius 1/2 and matches the
    first branch outside (the two agree at 1/2).
    """

    beta: float
    C_beta: float

    def __post_init__(self):
        if not 0 < self.C_beta < 0.5:
            raise ValueError("amplitude constant must lie in (0, 1/2)")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @property
    def branch(self) -> str:
        return "sub-lipschitz" if self.beta < 1.0 else "super-lipschitz"

    def eval_radial(self, norms: np.ndarray) -> np.ndarray:
        r = np.asarray(norms, dtype=float)
        out = np.zeros_like(r)
        if self.beta < 1.0:
            inside = r <= 1.0
            out[inside] = self.C_beta * (1.0 - r[inside]) ** self.beta
        else:
            inner = r <= 0.5
            outer = (r > 0.5) & (r <= 1.0)
            out[inner] = self.C_beta * (2.0 ** (1.0 - self.beta) - r[inner] ** self.beta)
            out[outer] = self.C_beta * (1.0 - r[outer]) ** self.beta
        return out

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.eval_radial(np.linalg.norm(x, axis=1))

    @property
    def peak(self) -> float:
        return float(self.eval_radial(np.array([0.0]))[0])


def bump_eval(phi: BumpFunction, x) -> np.ndarray:
    return phi(x)


def calibrate_C_beta(beta: float, L: float, d: int = 1, seed: int = 0, n_pairs: int = 4000) -> float:
    """Largest tested amplitude in (0, 1/2) passing the sampled Holder check.

    Draws random point pairs (both near and far) and halves the amplitude
    until |phi(x) - phi(x')| <= L ||x - x'||^beta holds on every sampled
    pair. Deterministic given the seed.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.2, 1.2, size=(n_pairs, d))
    # Mix global pairs with short-range ones to probe the kinks.
    y = np.where(
        rng.random((n_pairs, 1)) < 0.5,
        rng.uniform(-1.2, 1.2, size=(n_pairs, d)),
        x + rng.normal(scale=0.05, size=(n_pairs, d)),
    )
    dist = np.linalg.norm(x - y, axis=1)
    keep = dist > 0
    x, y, dist = x[keep], y[keep], dist[keep]
    c = 0.4999
    for _ in range(200):
        phi = BumpFunction(beta=beta, C_beta=c)
        gap = np.abs(phi(x) - phi(y))
        if np.all(gap <= L * dist**beta + 1e-12):
            return c
        c /= 2.0
    raise RuntimeError("amplitude calibration did not converge")


@dataclass(frozen=True)
class SeparatedSubset:
    """Hamming-separated constant-weight binary vectors."""

    n_bits: int
    weight: int  # every member has exactly this many ones (= 2*ell)
    members: np.ndarray  # (card, n_bits) of {0, 1}
    min_hamming: int
    ell: int
    certified: bool  # exhaustive pairwise verification ran

    @property
    def cardinality(self) -> int:
        return self.members.shape[0]

    @property
    def growth_constant(self) -> float:
        """C with log(card) >= C * ell * log(n_bits / ell)."""
        denom = self.ell * math.log(self.n_bits / self.ell)
        return math.log(self.cardinality) / denom if denom > 0 else float("nan")


def _pairwise_min_hamming(members: np.ndarray) -> int:
    diffs = members[:, None, :] != members[None, :, :]
    dists = diffs.sum(axis=2)
    np.fill_diagonal(dists, members.shape[1] + 1)
    return int(dists.min())


def extract_separated_subset(N: int, ell: int, seed: int = 0, max_card: int = 64) -> SeparatedSubset:
    """Greedy extraction of weight-2*ell vectors with pairwise distance > ell.

    Requires N >= 6*ell >= 6. Small instances enumerate all candidates in
    a seeded shuffle; larger ones sample random supports. The pairwise
    separation of the returned set is always verified; `certified` marks
    the exhaustive pass the small cases get.
    """
    if not N >= 6 * ell >= 6:
        raise ValueError(f"need N >= 6*ell >= 6, got N={N}, ell={ell}")
    rng = np.random.default_rng(seed)
    weight = 2 * ell
    kept = np.empty((0, N), dtype=np.int8)

    def try_add(vec: np.ndarray) -> None:
        nonlocal kept
        if kept.shape[0] == 0 or int((kept != vec).sum(axis=1).min()) >= ell + 1:
            kept = np.vstack([kept, vec])

    if math.comb(N, weight) <= 200_000:
        cands = np.zeros((math.comb(N, weight), N), dtype=np.int8)
        for i, support in enumerate(combinations(range(N), weight)):
            cands[i, list(support)] = 1
        for i in rng.permutation(len(cands)):
            if kept.shape[0] >= max_card:
                break
            try_add(cands[i])
    else:
        seen = set()
        for _ in range(50_000):
            if kept.shape[0] >= max_card:
                break
            support = tuple(sorted(rng.choice(N, size=weight, replace=False).tolist()))
            if support in seen:
                continue
            seen.add(support)
            v = np.zeros(N, dtype=np.int8)
            v[list(support)] = 1
            try_add(v)

    members = kept
    if members.shape[0] < 2:
        raise RuntimeError("extraction produced fewer than two members")
    min_h = _pairwise_min_hamming(members)
    certified = members.shape[0] <= 64
    if min_h < ell + 1:
        raise RuntimeError("separation verification failed")  # greedy bug guard
    return SeparatedSubset(
        n_bits=N, weight=weight, members=members,
        min_hamming=min_h, ell=ell, certified=certified,
    )


@dataclass(frozen=True)
class LowerBoundFamily:
    q: int
    d: int
    beta: float
    gamma: float
    kappa: float  # 1/q, the declared scaling parameter
    radius: float  # actual ball radius 1/(2q) after rescaling
    N: int
    m: int
    centers: np.ndarray  # (2N, d), lexicographic in the grid indices
    bump: BumpFunction
    lam: float
    omega_rho: np.ndarray  # (s, N) in {-1, 0, 1}, weight m on the first m
    omega_kappa: np.ndarray | None  # (s, N) in {0, 1}, weight 2m, plus zero row
    omega_kappa_reason: str
    rho_min_hamming: int
    kappa_min_hamming: int | None

    @property
    def ball_volume(self) -> float:
        d = self.d
        unit = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
        return unit * self.radius**d

    def amplitude(self) -> float:
        return self.kappa**self.beta

    def max_height(self) -> float:
        return self.amplitude() * self.bump.peak

    def pdf_omega(self, omega: np.ndarray, x) -> np.ndarray:
        """Evaluate 1 + sum_j omega_j (phi_j - phi_{N+j}) at points x."""
        omega = np.asarray(omega, dtype=int)
        if omega.shape != (self.N,):
            raise ValueError(f"omega must have length N={self.N}")
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals = np.zeros(x.shape[0])
        inside_cube = np.all((x >= 0.0) & (x <= 1.0), axis=1)
        coeff, dist = self._site_data(omega, x)
        active = inside_cube & (coeff != 0) & (dist <= self.radius)
        vals[inside_cube] = 1.0
        if np.any(active):
            bump_vals = self.bump.eval_radial(dist[active] / self.radius)
            vals[active] += coeff[active] * self.amplitude() * bump_vals
        return vals

    def _site_data(self, omega: np.ndarray, x: np.ndarray):
        """Per-point signed pair coefficient and distance to the cell center."""
        q = self.q
        idx = np.clip(np.floor(x * q).astype(int), 0, q - 1)
        flat = np.ravel_multi_index(idx.T, (q,) * self.d)
        centers = (2 * idx + 1) / (2.0 * q)
        dist = np.linalg.norm(x - centers, axis=1)
        coeff = np.zeros(x.shape[0], dtype=int)
        pos = flat < self.N
        neg = (flat >= self.N) & (flat < 2 * self.N)
        coeff[pos] = omega[flat[pos]]
        coeff[neg] = -omega[flat[neg] - self.N]
        return coeff, dist

    def true_set_omega(self, omega: np.ndarray, x) -> np.ndarray:
        """Membership in {p_omega > lam}: open balls whose signed bump is +."""
        omega = np.asarray(omega, dtype=int)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside_cube = np.all((x >= 0.0) & (x <= 1.0), axis=1)
        coeff, dist = self._site_data(omega, x)
        return inside_cube & (coeff == 1) & (dist < self.radius)


def _min_feasible_q(d: int, beta: float, gamma: float) -> int:
    for q in range(4, 100_000):
        n_balls = q**d // 2
        m = int(math.floor(q ** (d - gamma * beta) / 2.0)) + 6
        if n_balls >= m:
            return q
    raise RuntimeError("no feasible q below 100000")


def build_family(q: int, d: int, beta: float, gamma: float, seed: int = 0) -> LowerBoundFamily:
    """Construct the bump family for the given grid parameter.

    Raises InfeasibleConstructionError when N < m (reporting the minimal
    feasible q) or when gamma * beta > 1. The level is fixed at 1.
    """
    if q < 4:
        raise InfeasibleConstructionError("q must be at least 4")
    if d < 1:
        raise InfeasibleConstructionError("d must be at least 1")
    if gamma * beta > 1.0 + 1e-12:
        raise InfeasibleConstructionError("gamma * beta <= 1 is required")
    N = q**d // 2
    m = int(math.floor(q ** (d - gamma * beta) / 2.0)) + 6
    if N < m:
        raise InfeasibleConstructionError(
            f"N={N} < m={m} at q={q}; smallest feasible q is "
            f"{_min_feasible_q(d, beta, gamma)}"
        )

    kappa = 1.0 / q
    radius = 1.0 / (2.0 * q)
    axes = [np.arange(q)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    ks = np.stack([mm.ravel() for mm in mesh], axis=1)  # lexicographic
    centers = (2 * ks[: 2 * N] + 1) / (2.0 * q)

    c_beta = calibrate_C_beta(beta, L=2.0, d=d, seed=seed)
    bump = BumpFunction(beta=beta, C_beta=c_beta)

    ell_t = m // 6
    rho_subset = extract_separated_subset(m, ell_t, seed=seed)
    omega_rho = np.zeros((rho_subset.cardinality, N), dtype=int)
    omega_rho[:, :m] = 2 * rho_subset.members.astype(int) - 1  # {0,1} -> {-1,1}

    if N >= 6 * m:
        kappa_subset = extract_separated_subset(N, m, seed=seed + 1)
        omega_kappa = np.vstack(
            [np.zeros((1, N), dtype=int), kappa_subset.members.astype(int)]
        )
        kappa_min = kappa_subset.min_hamming
        reason = ""
    else:
        omega_kappa = None
        kappa_min = None
        reason = (
            f"weight-2m subset needs N >= 6m, got N={N}, m={m}; "
            "increase q to build the d_Delta family"
        )

    return LowerBoundFamily(
        q=q, d=d, beta=beta, gamma=gamma, kappa=kappa, radius=radius,
        N=N, m=m, centers=centers, bump=bump, lam=1.0,
        omega_rho=omega_rho, omega_kappa=omega_kappa,
        omega_kappa_reason=reason,
        rho_min_hamming=rho_subset.min_hamming,
        kappa_min_hamming=kappa_min,
    )


def family_density(family: LowerBoundFamily, omega: np.ndarray, model_id: str | None = None) -> DensityModel:
    """Wrap one sign vector as a DensityModel on the unit cube."""
    omega = np.asarray(omega, dtype=int)
    if omega.shape != (family.N,):
        raise ValueError(f"omega must have length N={family.N}")
    if np.any(np.abs(omega) > 1):
        raise ValueError("omega entries must lie in {-1, 0, 1}")
    height = family.max_height()
    params = HolderParams(
        beta=family.beta, beta_prime=family.beta, L=2.0, L_star=2.0, r=1.0,
        eta=max(height, 1e-12),
        gamma=family.gamma,
        c0=4.0 * family.m / family.bump.C_beta ** (1.0 / family.beta),
        eps0=max(0.9 * height, 1e-12),
        lam=family.lam,
    )
    if model_id is None:
        signs = "".join({1: "+", -1: "-", 0: "0"}[int(w)] for w in omega)
        model_id = f"pomega:{family.q}:{family.beta:g}:{family.gamma:g}:{family.d}:{signs}"
    box = Box((0.0,) * family.d, (1.0,) * family.d)
    return DensityModel(
        model_id=model_id,
        params=params,
        domain=box,
        pdf=lambda x, _f=family, _w=omega: _f.pdf_omega(_w, x),
        envelope=2.0,
    )


def pairwise_set_distance(
    family: LowerBoundFamily, w1: np.ndarray, w2: np.ndarray, metric: str = "d_delta"
) -> float:
    """Exact distance between the level sets of two sign vectors.

    Each coordinate where the signs differ contributes the balls claimed
    by exactly one of them: two balls for a +/- flip, one when a single
    side is zero. d_rho restricts the count to the first m pairs.
    """
    w1 = np.asarray(w1, dtype=int)
    w2 = np.asarray(w2, dtype=int)
    limit = family.m if metric == "d_rho" else family.N
    balls = 0
    for j in range(limit):
        a, b = int(w1[j]), int(w2[j])
        if a == b:
            continue
        balls += 2 if a != 0 and b != 0 else 1
    return balls * family.ball_volume


def kl_divergence(p: DensityModel, q_model: DensityModel, resolution: int) -> float:
    """Per-observation KL divergence by cell-center quadrature.

    The n-sample divergence is n times this value. Returns +inf when the
    second density vanishes somewhere the first is positive on the grid.
    """
    if p.domain != q_model.domain:
        raise ValueError("models must share a domain")
    centers, cellvol = cell_centers(p.domain, resolution)
    pv = p.pdf(centers)
    qv = q_model.pdf(centers)
    bad = (pv > 0) & (qv <= 0)
    if np.any(bad):
        return float("inf")
    mask = pv > 0
    return float(np.sum(pv[mask] * np.log(pv[mask] / qv[mask])) * cellvol)


@dataclass(frozen=True)
class LemmaA2Report:
    metric: str
    n: int
    cardinality: int
    min_pairwise_distance: float
    epsilon: float  # largest admissible separation level (= min distance / 2)
    max_kl_n: float
    log_cardinality: float
    kl_condition_constant: float  # max_kl_n / log(card)
    rate_ratio: float  # epsilon / (rate sequence at n), constant-free
    kl_coarse: float
    kl_fine: float
    raster_max_abs_dev: float

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "n": self.n,
            "cardinality": self.cardinality,
            "min_pairwise_distance": self.min_pairwise_distance,
            "epsilon": self.epsilon,
            "max_kl_n": self.max_kl_n,
            "log_cardinality": self.log_cardinality,
            "kl_condition_constant": self.kl_condition_constant,
            "rate_ratio": self.rate_ratio,
            "kl_coarse": self.kl_coarse,
            "kl_fine": self.kl_fine,
            "raster_max_abs_dev": self.raster_max_abs_dev,
        }


def verify_lemmaA2_conditions(
    family: LowerBoundFamily, metric: str, n: int, resolution: int | None = None
) -> LemmaA2Report:
    """Numerically check the separation and KL conditions of the family.

    Pairwise set distances are computed analytically and cross-checked on
    a raster; KL divergences are computed at two resolutions to expose
    quadrature drift. Epsilon is derived from the observed minimum
    distance rather than the asymptotic constants.
    """
    if metric not in ("d_delta", "d_rho"):
        raise ValueError("metric must be d_delta or d_rho")
    if metric == "d_delta":
        if family.omega_kappa is None:
            raise InfeasibleConstructionError(family.omega_kappa_reason)
        omegas = family.omega_kappa
        base_index = 0  # the added zero vector
    else:
        omegas = family.omega_rho
        base_index = 0
    if resolution is None:
        # Align cells with the ball boundaries so kinks sit on cell edges.
        resolution = family.q * max(1, (1 << 16) // family.q) if family.d == 1 else family.q * 8

    card = omegas.shape[0]
    dists = []
    for i, j in combinations(range(card), 2):
        dists.append(pairwise_set_distance(family, omegas[i], omegas[j], metric))
    min_dist = min(dists)

    # Raster cross-check of the analytic distances on a handful of pairs.
    box = Box((0.0,) * family.d, (1.0,) * family.d)
    raster_res = min(resolution, family.q * max(1, 2048 // family.q)) if family.d == 1 else resolution
    centers_grid, cellvol = cell_centers(box, raster_res)
    max_dev = 0.0
    pairs = list(combinations(range(card), 2))[:10]
    member_bits = {}
    for i, j in pairs:
        for k in (i, j):
            if k not in member_bits:
                member_bits[k] = family.true_set_omega(omegas[k], centers_grid)
        if metric == "d_rho":
            sel = _rho_ball_mask(family, centers_grid)
        else:
            sel = np.ones(centers_grid.shape[0], dtype=bool)
        raster_d = float(np.count_nonzero((member_bits[i] ^ member_bits[j]) & sel)) * cellvol
        analytic = pairwise_set_distance(family, omegas[i], omegas[j], metric)
        max_dev = max(max_dev, abs(raster_d - analytic))

    base = family_density(family, omegas[base_index])
    kl_coarse = []
    kl_fine = []
    for k in range(card):
        if k == base_index:
            continue
        dens = family_density(family, omegas[k])
        kl_coarse.append(kl_divergence(dens, base, resolution))
        kl_fine.append(kl_divergence(dens, base, 2 * resolution))
    max_kl_n = n * max(kl_fine)
    log_card = math.log(card)

    exponent = family.gamma * family.beta / (2.0 * family.beta + family.d)
    if metric == "d_delta":
        rate = (n / math.log(n)) ** -exponent if n >= 2 else float("nan")
    else:
        rate = n**-exponent
    eps = min_dist / 2.0

    return LemmaA2Report(
        metric=metric,
        n=n,
        cardinality=card,
        min_pairwise_distance=min_dist,
        epsilon=eps,
        max_kl_n=max_kl_n,
        log_cardinality=log_card,
        kl_condition_constant=max_kl_n / log_card,
        rate_ratio=eps / rate,
        kl_coarse=max(kl_coarse),
        kl_fine=max(kl_fine),
        raster_max_abs_dev=max_dev,
    )


def _rho_ball_mask(family: LowerBoundFamily, x: np.ndarray) -> np.ndarray:
    """Points inside any of the balls B_j or B_{N+j} with j <= m."""
    q = family.q
    idx = np.clip(np.floor(x * q).astype(int), 0, q - 1)
    flat = np.ravel_multi_index(idx.T, (q,) * family.d)
    centers = (2 * idx + 1) / (2.0 * q)
    dist = np.linalg.norm(x - centers, axis=1)
    pair = np.where(flat < family.N, flat, flat - family.N)
    in_sites = (flat < 2 * family.N) & (pair < family.m)
    return in_sites & (dist < family.radius)
