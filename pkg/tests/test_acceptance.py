"""Acceptance suite: one test per criterion, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as the
criteria complete. Tolerances are fixed here, not tuned at runtime.
"""

import json
import math
import time
from contextlib import contextmanager
from itertools import combinations

import numpy as np
import pytest

from levelset_lab.boxes import Box, cell_centers
from levelset_lab.cli import main as cli_main
from levelset_lab.densities import (
    gamma_exponent_empirical,
    make_cone_1d,
    make_plateau,
)
from levelset_lab.harness import (
    ExperimentConfig,
    run_concentration_experiment,
    run_rate_experiment,
)
from levelset_lab.kde import bandwidth, lemma_constants
from levelset_lab.kernels import (
    legendre_kernel,
    product_kernel,
    rectangular_kernel,
    validate_kernel,
)
from levelset_lab.lowerbound import (
    build_family,
    extract_separated_subset,
    family_density,
    kl_divergence,
    pairwise_set_distance,
)
from levelset_lab.metrics import excess_mass, random_box_union

RECT = product_kernel(rectangular_kernel(), 1)


@contextmanager
def runtime_cap(seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"runtime {elapsed:.1f}s exceeded the {seconds}s cap"


def report(criterion, message):
    print(f"\nACCEPTANCE {criterion}: PASS ({message})")


def test_criterion_01_kernel_validity():
    with runtime_cap(1.0):
        k2 = legendre_kernel(2.0)
        u = np.linspace(-1.0, 1.0, 101)
        max_err = float(np.max(np.abs(k2(u) - (9.0 - 15.0 * u**2) / 8.0)))
        assert max_err <= 1e-12
        rep = validate_kernel(product_kernel(k2, 1), 2.0)
        assert abs(rep.integral_one_error) <= 1e-10
        assert rep.violated_moments == []
        rect = validate_kernel(RECT, 3.0)
        assert rect.violated_moments == [(2,)]
    report(1, f"closed form max err {max_err:.2e}, rect violations {rect.violated_moments}")


def test_criterion_02_moment_downgrade():
    with runtime_cap(1.0):
        checked = 0
        for beta in (1.0, 2.0, 3.0):
            kd = product_kernel(legendre_kernel(beta), 1)
            bp = 0.5
            while bp <= beta + 1e-9:
                rep = validate_kernel(kd, bp)
                assert rep.violated_moments == [], (beta, bp)
                assert abs(rep.integral_one_error) <= 1e-10
                checked += 1
                bp += 0.5
    report(2, f"{checked} (beta, beta') pairs, zero violations")


def test_criterion_03_metric_identity():
    resolution = 10_000
    cone = make_cone_1d()
    centers, cellvol = cell_centers(cone.domain, resolution)
    pv = cone.pdf(centers)
    truth = cone.true_set(centers, 0.5)
    h_truth = excess_mass(lambda x: cone.true_set(x, 0.5), cone, 0.5, resolution)
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(30):
        g = random_box_union(rng, cone.domain, n_components=int(rng.integers(1, 4)))
        gm = np.asarray(g(centers), bool)
        d_h_val = float(np.sum(np.abs(pv[truth ^ gm] - 0.5)) * cellvol)
        h_g = float(np.sum(pv[gm]) * cellvol - 0.5 * np.count_nonzero(gm) * cellvol)
        diff = abs(d_h_val - (h_truth - h_g))
        boundary = np.count_nonzero(np.diff((truth ^ gm).astype(np.int8)) != 0)
        err_bound = max((boundary + 2) * cellvol, 1e-12)
        assert diff <= 2.0 * err_bound
        worst = max(worst, diff)

    plateau = make_plateau()
    pcenters, pcell = cell_centers(plateau.domain, resolution)
    ppv = plateau.pdf(pcenters)
    weight = np.abs(ppv - 0.5)
    t_open = plateau.true_set(pcenters, 0.5)
    t_closed = plateau.true_set_closed(pcenters, 0.5)
    worst_pl = 0.0
    for _ in range(20):
        g = random_box_union(rng, plateau.domain, n_components=int(rng.integers(1, 4)))
        gm = np.asarray(g(pcenters), bool)
        d_open = float(np.sum(weight[gm ^ t_open]) * pcell)
        d_closed = float(np.sum(weight[gm ^ t_closed]) * pcell)
        assert abs(d_open - d_closed) <= 1e-10
        worst_pl = max(worst_pl, abs(d_open - d_closed))
    report(3, f"worst identity gap {worst:.2e}, open/closed gap {worst_pl:.2e}")


def test_criterion_04_gamma_exponent():
    fit = gamma_exponent_empirical(make_cone_1d(), 0.5, [0.2, 0.1, 0.05, 0.025])
    assert abs(fit.gamma_hat - 1.0) <= 0.05
    assert abs(fit.c0_hat - 4.0) <= 0.4
    report(4, f"gamma_hat {fit.gamma_hat:.4f}, c0_hat {fit.c0_hat:.3f}")


def test_criterion_05_concentration():
    with runtime_cap(120.0):
        model = make_cone_1d()
        n = 4096
        h = bandwidth(n, "dH-rule", 1.0, 1, 1.0)
        assert h == pytest.approx(1.0 / 16.0)
        deltas = [0.1, 0.3, 0.6, 1.0, 1.4]
        res = run_concentration_experiment(
            model=model, x0=[0.3], n=n, h=h, delta_grid=deltas,
            replications=2000, seed=777, kernel=RECT,
        )
        for row in res.rows:
            assert row.in_range, f"delta {row.delta} outside ({res.delta_lower}, {res.delta_upper})"
            assert row.frequency <= row.bound + 3.0 * row.binom_se, (
                row.delta, row.frequency, row.bound
            )
    report(5, f"5 in-range deltas, max freq {max(r.frequency for r in res.rows):.4f}")


@pytest.fixture(scope="module")
def rate_result():
    cfg = ExperimentConfig(
        model_id="cone1d", lam=0.5, kernel_beta=1.0,
        h_rule="dH-rule", c_h=1.5, ell_rule="dH-rule", c_ell=1.0,
        n_grid=tuple(2**k for k in range(8, 15)), replications=100,
        resolution=4096, base_seed=2024, experiment_id="acceptance_rates",
    )
    start = time.perf_counter()
    result = run_rate_experiment(cfg, threads=1)
    result_elapsed = time.perf_counter() - start
    return result, result_elapsed


def test_criterion_06_rate_exponents(rate_result):
    result, elapsed = rate_result
    assert elapsed < 600.0, f"single-threaded run took {elapsed:.0f}s"
    fd, fh = result.fit_d_delta, result.fit_d_h
    assert abs(fd.slope - (-1.0 / 3.0)) <= 0.15
    assert abs(fh.slope - (-2.0 / 3.0)) <= 0.20
    assert abs(fd.slope - fd.theory_slope) <= 3.0 * fd.slope_se
    assert abs(fh.slope - fh.theory_slope) <= 3.0 * fh.slope_se
    report(6, (
        f"d_delta {fd.slope:.4f}±{fd.slope_se:.4f} vs -1/3, "
        f"d_h {fh.slope:.4f}±{fh.slope_se:.4f} vs -2/3, {elapsed:.0f}s"
    ))


def test_criterion_07_offset_counterexample():
    offset_cfg = ExperimentConfig(
        model_id="plateau", lam=0.5, kernel_beta=1.0,
        h_rule="dDelta-rule", c_h=0.4, ell_rule="dDelta-rule", c_ell=None,
        n_grid=(4096,), replications=50, resolution=3072, base_seed=888,
        experiment_id="acceptance_offset",
    )
    with_offset = run_rate_experiment(offset_cfg)
    mean_offset = with_offset.fit_d_delta.per_n_means[0, 1]
    assert mean_offset <= 0.1

    zero_cfg = ExperimentConfig(
        model_id="plateau", lam=0.5, kernel_beta=1.0,
        h_rule="dDelta-rule", c_h=0.4, ell_rule="zero", c_ell=None,
        n_grid=(256, 512, 1024, 2048, 4096), replications=100,
        resolution=3072, base_seed=888, experiment_id="acceptance_zero_offset",
    )
    zero = run_rate_experiment(zero_cfg)
    means = zero.fit_d_delta.per_n_means
    for n, mean, _se in means:
        assert mean >= 0.5, f"zero-offset mean {mean:.4f} at n={int(n)}"
    report(7, (
        f"offset mean {mean_offset:.4f} <= 0.1; zero-offset means "
        f"{[round(float(v), 3) for v in means[:, 1]]} all >= 0.5"
    ))


@pytest.fixture(scope="module")
def family16():
    return build_family(q=16, d=1, beta=1.0, gamma=1.0, seed=0)


def test_criterion_08_lower_bound_family(family16):
    with runtime_cap(60.0):
        fam = family16
        assert fam.N == 8 and fam.m == 6
        assert fam.kappa == 1.0 / 16.0

        resolution = 1 << 16  # multiple of q: ball edges on cell edges
        centers, cellvol = cell_centers(Box((0.0,), (1.0,)), resolution)
        for omega in fam.omega_rho:
            vals = fam.pdf_omega(omega, centers)
            assert abs(float(vals.sum() * cellvol) - 1.0) <= 1e-6
            assert float(vals.max()) <= 2.0

        eps_grid = np.array([0.002, 0.004, 0.008, 0.016])
        omega = fam.omega_rho[0]
        vals = fam.pdf_omega(omega, centers)
        gap = np.abs(vals - 1.0)
        measures = np.array([
            float(np.count_nonzero((vals != 1.0) & (gap <= e))) * cellvol
            for e in eps_grid
        ])
        c_reported = float(np.max(measures / eps_grid))
        assert np.all(measures <= c_reported * eps_grid + 1e-12)
        assert c_reported <= fam.bump.C_beta**-1 * 2 * fam.m * 1.05

        subset = extract_separated_subset(12, 2, seed=0)
        worst = min(
            int(np.count_nonzero(a != b)) for a, b in combinations(subset.members, 2)
        )
        assert worst >= 3

        raster_res = 2048  # multiple of q
        rcenters, rcell = cell_centers(Box((0.0,), (1.0,)), raster_res)
        bits = [fam.true_set_omega(w, rcenters) for w in fam.omega_rho]
        worst_dev = 0.0
        for (i, wi), (j, wj) in combinations(enumerate(fam.omega_rho), 2):
            rho = int(np.count_nonzero(wi != wj))
            raster_d = float(np.count_nonzero(bits[i] ^ bits[j])) * rcell
            analytic = 2.0 * fam.ball_volume * rho
            assert pairwise_set_distance(fam, wi, wj) == pytest.approx(analytic)
            tol = 2 * rho * (1.0 / raster_res)  # one raster cell per active bump
            assert abs(raster_d - analytic) <= tol
            worst_dev = max(worst_dev, abs(raster_d - analytic))
    report(8, (
        f"N=8 m=6 kappa=1/16; gamma-bound C {c_reported:.2f}; "
        f"min Hamming {worst}; raster dev {worst_dev:.2e}"
    ))


def test_criterion_09_kl_conditions(family16):
    with runtime_cap(60.0):
        fam = family16
        base = family_density(fam, np.zeros(fam.N, dtype=int))
        member = family_density(fam, fam.omega_rho[0])
        resolution = 1 << 16

        self_kl = kl_divergence(member, member, resolution)
        assert abs(self_kl) <= 1e-10

        coarse = kl_divergence(member, base, resolution)
        fine = kl_divergence(member, base, 2 * resolution)
        rel = abs(coarse - fine) / fine
        assert rel <= 1e-6

        grid = np.linspace(-1.0, 1.0, 200_001)[:, None]
        int_phi2 = float(np.sum(fam.bump(grid) ** 2) * (2.0 / 200_000))
        for n in (100, 1000):
            bound = 2.0 * n * fam.m * fam.kappa ** (2 * fam.beta + fam.d) * int_phi2
            assert n * fine <= bound, (n, n * fine, bound)
    report(9, f"K(p,p)={self_kl:.1e}; two-res rel {rel:.1e}; bound ratio {1000*fine/bound:.3f}")


def test_criterion_10_determinism(tmp_path):
    cfg = {
        "experiment_id": "acceptance_det",
        "model_id": "cone1d", "lambda": 0.5, "kernel_beta": 1.0,
        "h_rule": "dH-rule", "c_h": 1.0, "ell_rule": "dH-rule", "c_ell": 1.0,
        "n_grid": [256, 512], "replications": 5, "resolution": 1024,
        "base_seed": 31,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli_main(["rates", "--config", str(cfg_path), "--out", str(out_a)]) == 0
    assert cli_main(["rates", "--config", str(cfg_path), "--out", str(out_b)]) == 0

    fits_a = (out_a / "acceptance_det_fits.csv").read_bytes()
    fits_b = (out_b / "acceptance_det_fits.csv").read_bytes()
    assert fits_a == fits_b

    def strip_runtime(path):
        # runtime_ms is wall-clock and documented as the one
        # nondeterministic column
        lines = path.read_text().splitlines()
        return ["\t".join(line.split(",")[:-1]) for line in lines]

    raw_a = strip_runtime(out_a / "acceptance_det_replications.csv")
    raw_b = strip_runtime(out_b / "acceptance_det_replications.csv")
    assert raw_a == raw_b
    report(10, "fits CSV byte-identical; replications identical up to runtime_ms")
