"""Command-line interface.

Subcommands: kernel-check, simulate, rates, concentration, lowerbound.
All config files are JSON; see README for the schemas.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .densities import model_from_id, sample
from .kde import (
    KdeEstimator,
    Schedules,
    backend_name,
    bandwidth,
    lemma_constants,
    min_offset_constant,
)
from .kernels import legendre_kernel, product_kernel, validate_kernel
from .levelset import plugin_estimate, rasterize
from .lowerbound import build_family, verify_lemmaA2_conditions
from .metrics import metric_report


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levelset-lab")
    sub = parser.add_subparsers(dest="command", required=True)

    kc = sub.add_parser("kernel-check", help="print a kernel validity report as JSON")
    kc.add_argument("--beta", type=float, required=True)
    kc.add_argument("--dim", type=int, default=1)
    kc.add_argument("--nodes", type=int, default=None)

    for name in ("simulate", "rates", "concentration", "lowerbound"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=True)
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
    return parser


def _load_json(path: Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _dump_json(obj: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_kernel_check(args) -> int:
    kernel = product_kernel(legendre_kernel(args.beta), args.dim)
    report = validate_kernel(kernel, args.beta, args.nodes)
    payload = {
        "beta": args.beta,
        "dim": args.dim,
        "order_floor": kernel.order_floor,
        "coefficients": kernel.factor.coefficients.tolist(),
    }
    payload.update(report.to_dict())
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_simulate(args) -> int:
    raw = _load_json(args.config)
    seed = args.seed if args.seed is not None else raw.get("seed", 0)
    model = model_from_id(raw["model_id"])
    lam = float(raw.get("lambda", model.params.lam))
    beta = float(raw.get("kernel_beta", model.params.beta))
    kernel = product_kernel(legendre_kernel(beta), model.dim)
    n = int(raw["n"])
    resolution = int(raw.get("resolution", 2048))
    consts = lemma_constants(kernel, model.params.L, model.params.L_star, beta)
    c_ell = raw.get("c_ell")
    ell_rule = raw.get("ell_rule", "dH-rule")
    if c_ell is None:
        c_ell = (
            min_offset_constant(consts.c6, float(raw.get("c_h", 1.0)), model.dim)
            if ell_rule.lower().startswith("ddelta") else 1.0
        )
    sched = Schedules(
        h_rule=raw.get("h_rule", "dH-rule"), ell_rule=ell_rule,
        beta=beta, beta_prime=model.params.beta_prime, d=model.dim,
        c_h=float(raw.get("c_h", 1.0)), c_ell=float(c_ell),
    )
    sched.validate_offset_constant(consts.c6)
    smp = sample(model, n, seed)
    est = KdeEstimator(points=smp.points, kernel=kernel, h=sched.h(n))
    estimate = plugin_estimate(est, lam, sched.ell(n))
    report = metric_report(estimate.member, model, lam, resolution)
    out = {
        "model_id": model.model_id,
        "lambda": lam,
        "n": n,
        "seed": seed,
        "h": sched.h(n),
        "ell": sched.ell(n),
        "backend": backend_name(),
    }
    out.update(report.to_dict())
    _dump_json(out, args.out / "simulate_report.json")
    if raw.get("export_raster"):
        raster = rasterize(estimate.member, model.domain, resolution)
        raster.to_csv(args.out / "estimate_raster.csv")
    print(f"simulate: d_delta={report.d_delta:.6g} d_h={report.d_h:.6g}")
    return 0


def cmd_rates(args) -> int:
    cfg = harness.with_seed(harness.load_config(args.config), args.seed)
    result = harness.run_rate_experiment(cfg, threads=args.threads)
    files = harness.emit_results([result], [], args.out)
    for fit in (result.fit_d_delta, result.fit_d_h):
        print(
            f"{fit.metric}: slope={fit.slope:.4f} se={fit.slope_se:.4f} "
            f"theory={fit.theory_slope:.4f} excluded_smallest={fit.excluded_smallest}"
        )
    for path in files:
        print(f"wrote {path}")
    return 0


def cmd_concentration(args) -> int:
    raw = _load_json(args.config)
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    model = model_from_id(raw["model_id"])
    beta = float(raw.get("kernel_beta", model.params.beta))
    kernel = product_kernel(legendre_kernel(beta), model.dim)
    n = int(raw["n"])
    h = raw.get("h")
    if h is None:
        h = bandwidth(n, raw.get("h_rule", "dH-rule"), beta, model.dim, float(raw.get("c_h", 1.0)))
    result = harness.run_concentration_experiment(
        model=model, x0=raw["x0"], n=n, h=float(h),
        delta_grid=raw["delta_grid"], replications=int(raw.get("replications", 2000)),
        seed=seed, kernel=kernel,
        experiment_id=raw.get("experiment_id", "concentration"),
    )
    files = harness.emit_results([], [result], args.out)
    worst = max((r.frequency - r.bound) for r in result.rows if r.in_range)
    print(
        f"concentration: n={n} h={h:.6g} in-range deltas="
        f"{sum(r.in_range for r in result.rows)} worst(freq-bound)={worst:.6g}"
    )
    for path in files:
        print(f"wrote {path}")
    return 0


def cmd_lowerbound(args) -> int:
    raw = _load_json(args.config)
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    family = build_family(
        q=int(raw["q"]), d=int(raw.get("d", 1)),
        beta=float(raw.get("beta", 1.0)), gamma=float(raw.get("gamma", 1.0)),
        seed=seed,
    )
    metrics = raw.get("metrics", ["d_rho"])
    ns = raw.get("n", [100])
    if isinstance(ns, (int, float)):
        ns = [int(ns)]
    resolution = raw.get("resolution")
    payload = {
        "q": family.q, "d": family.d, "beta": family.beta, "gamma": family.gamma,
        "kappa": family.kappa, "ball_radius": family.radius,
        "N": family.N, "m": family.m,
        "C_beta": family.bump.C_beta,
        "rho_family_size": int(family.omega_rho.shape[0]),
        "rho_min_hamming": family.rho_min_hamming,
        "kappa_family_size": (
            int(family.omega_kappa.shape[0]) if family.omega_kappa is not None else 0
        ),
        "kappa_family_note": family.omega_kappa_reason,
        "reports": [],
    }
    for metric in metrics:
        for n in ns:
            report = verify_lemmaA2_conditions(family, metric, int(n), resolution)
            payload["reports"].append(report.to_dict())
    _dump_json(payload, args.out / "lowerbound_report.json")
    print(
        f"lowerbound: q={family.q} N={family.N} m={family.m} "
        f"reports={len(payload['reports'])}"
    )
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "kernel-check": cmd_kernel_check,
        "simulate": cmd_simulate,
        "rates": cmd_rates,
        "concentration": cmd_concentration,
        "lowerbound": cmd_lowerbound,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
