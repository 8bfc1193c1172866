"""Command-line front end: verify | rho | fredholm | converge | ui-diag."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .density import density_breakdown_for_driver
from .development import coarsen, sample_brownian
from .experiments import (
    ExperimentConfig,
    report_to_json,
    run_convergence,
    run_ui_diagnostic,
    run_verify,
)
from .geometry import ManifoldSpec
from .wiener import KernelDiscretization, fredholm_nystrom, fredholm_series


def parse_manifold(text: str) -> ManifoldSpec:
    """euclidean:<dim> or sphere:<dim>:<radius>."""
    parts = text.split(":")
    kind = parts[0]
    dim = int(parts[1]) if len(parts) > 1 else 2
    radius = float(parts[2]) if len(parts) > 2 else 1.0
    return ManifoldSpec(kind, dim, radius)


def load_config(path: str | None, seed: int | None) -> ExperimentConfig:
    flat = {}
    if path:
        flat = json.loads(Path(path).read_text())
    cfg = ExperimentConfig.from_flat_dict(flat)
    if seed is not None:
        cfg.seed = seed
    return cfg


def _write(out_dir: str | None, name: str, text: str):
    if out_dir:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_verify(args) -> int:
    summary = run_verify()
    for c in summary.checks:
        status = "PASS" if c.ok else "FAIL"
        print(f"{status} {c.name:32s} ({c.seconds * 1000:7.1f} ms)  {c.detail}")
    if args.out:
        _write(args.out, "verify.json", report_to_json(summary))
    return 0 if summary.ok else 1


def cmd_rho(args) -> int:
    m = parse_manifold(args.manifold)
    flat = json.loads(Path(args.config).read_text()) if args.config else {}
    quad_nodes = int(flat.get("jacobi.quad_nodes", 8))
    method = str(flat.get("jacobi.method", "spectral"))
    lines = []
    for j in range(args.samples):
        fine = sample_brownian(args.seed, j, args.n_fine, m.dim)
        omega = coarsen(fine, args.n)
        b = density_breakdown_for_driver(
            m, omega, quad_nodes=quad_nodes, method=method,
            with_q=args.route in ("q", "both"),
        )
        rec = {
            "sample": j,
            "n": args.n,
            "guard_ok": b.guard_ok,
            "log_rho_f": b.log_rho_F if args.route != "q" else None,
            "log_rho_q": b.log_rho_Q,
            "log_detV2": b.log_detV2,
            "log_detIU": b.log_detIU,
            "log_detIX": b.log_detIX,
            "identity_residual": b.identity_residual,
        }
        lines.append(json.dumps(rec, sort_keys=True))
    _write(args.out, "rho.jsonl", "\n".join(lines) + "\n")
    return 0


def cmd_fredholm(args) -> int:
    gamma = np.eye(args.dim) * args.gamma_const
    kd = KernelDiscretization.from_constant(gamma, nodes=args.nodes)
    res = fredholm_nystrom(kd, 1.0 / 12.0)
    series = fredholm_series(kd, 1.0 / 12.0, k_max=args.kmax)
    oracle = args.dim * float(np.log(np.cosh(np.sqrt(args.gamma_const / 12.0))))
    payload = {
        "gamma": series.gamma,
        "log_det": res.log_det,
        "diagnostics": {
            "raw_log_dets": {str(k): v for k, v in res.raw_log_dets.items()},
            "doubling_gap": res.doubling_gap,
            "converged": res.converged,
            "series_kappa": series.kappa,
            "series_remainder_bound": series.remainder_bound,
            "constant_oracle": oracle,
        },
    }
    _write(args.out, "fredholm.json", json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_converge(args) -> int:
    cfg = load_config(args.config, args.seed)
    report = run_convergence(cfg)
    _write(args.out, "report.json", report_to_json(report))
    _write(args.out, "convergence.csv", report.to_csv())
    if args.svg:
        _render_svg(report, args.out)
    if not args.out:
        print()
    return 0


def cmd_ui_diag(args) -> int:
    cfg = load_config(args.config, args.seed)
    report = run_ui_diagnostic(cfg)
    _write(args.out, "report.json", report_to_json(report))
    return 0


def _render_svg(report, out_dir):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping SVG", file=sys.stderr)
        return
    ns = [r.n for r in report.rows]
    diffs = [abs(r.diff) for r in report.rows]
    ses = [r.diff_se for r in report.rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.errorbar(ns, diffs, yerr=ses, marker="o")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("|LHS_n - RHS|")
    fig.tight_layout()
    target = Path(out_dir or ".") / "convergence.svg"
    fig.savefig(target)
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geopath")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("rho", help="per-sample density breakdowns")
    p.add_argument("--manifold", default="sphere:2:6.0")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--n-fine", type=int, default=256)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--route", choices=["q", "f", "both", "factorized"], default="both")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_rho)

    p = sub.add_parser("fredholm", help="Fredholm determinant of the min kernel")
    p.add_argument("--gamma-const", type=float, default=1.2)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--nodes", type=int, default=64)
    p.add_argument("--kmax", type=int, default=30)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_fredholm)

    p = sub.add_parser("converge", help="coupled convergence experiment")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(fn=cmd_converge)

    p = sub.add_parser("ui-diag", help="uniform-integrability moment diagnostic")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_ui_diag)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
