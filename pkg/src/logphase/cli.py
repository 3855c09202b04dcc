"""Command line front end.

Subcommands:

* ``verify {scalar,modular,operator,solver,all}`` -- run the property
  suite; exit 0 on pass, 1 on any failed check.
* ``solve --config FILE --mode {fixed,positive,negative,nodal,all}`` --
  run the solvers and write solution CSVs plus ``summary.json`` (byte
  reproducible for a fixed seed); exit 2 on config/assumption errors
  unless ``--force``.
* ``norm --config FILE FIELD.csv`` -- print the modular split, the
  Luxemburg norm of the gradient field and the sandwich bounds.
* ``report RUN_DIR`` -- aggregate summaries into a table and plot data.

``LOGPHASE_THREADS`` (environment) caps the BLAS thread pools before
numpy gets loaded any further; solver runs writing to distinct output
directories may execute concurrently.
"""

import argparse
import json
import os
import sys

import numpy as np

from .config import ConfigError, parse_config_file
from .energy import energy_phi, grad_phi, residual_norms
from .mesh import load_solution_csv, save_mesh_csv, save_solution_csv, all_gradients
from .modular import luxemburg_norm, modular_hlog, sandwich_bounds
from .report import write_report
from .solve import SolverError, solve_constant_sign, solve_fixed_rhs, solve_sign_changing
from .verify import run_verify

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2

# Contract of every emitted summary.json.  Kept free of wall-clock data so
# reruns with the same seed are byte-identical.
SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["config", "mode", "instance", "solutions"],
    "properties": {
        "config": {"type": "object"},
        "mode": {"enum": ["fixed", "positive", "negative", "nodal", "all"]},
        "instance": {"type": "string"},
        "assumptions": {"type": "object"},
        "assumption_warnings": {"type": "array", "items": {"type": "string"}},
        "error": {"type": "string"},
        "solutions": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["energy", "residual", "iterations", "nodal", "status"],
                "properties": {
                    "energy": {"type": "number"},
                    "residual": {"type": "number"},
                    "iterations": {"type": "integer"},
                    "nodal": {
                        "type": "array",
                        "items": {"type": "integer"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                    "status": {"enum": ["converged", "max_iters", "diverged"]},
                    "residual_dual_probe": {"type": "number"},
                },
            },
        },
        "energy_ordering": {
            "type": "object",
            "required": ["phi_u0", "phi_v0", "phi_w0", "ordering_ok"],
        },
    },
    "additionalProperties": False,
}


def _apply_thread_env():
    n = os.environ.get("LOGPHASE_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def cmd_verify(args) -> int:
    report = run_verify(args.suite, seed=args.seed, n_samples=args.samples)
    print(report.table())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "verification.json")
        with open(path, "w") as fh:
            fh.write(report.to_json() + "\n")
        print(f"wrote {path}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _solve_setup(args):
    config = parse_config_file(args.config)
    mesh = config.build_mesh()
    exps = config.build_exponents(mesh)
    cfg = config.solver_config()
    if args.seed is not None:
        cfg.seed = args.seed
    return config, mesh, exps, cfg


def cmd_solve(args) -> int:
    try:
        config, mesh, exps, cfg = _solve_setup(args)
    except (ConfigError, OSError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = args.out or str(config.get("outputs.dir", "out"))
    os.makedirs(out_dir, exist_ok=True)

    summary = {
        "config": {k: v for k, v in sorted(config.entries.items())},
        "mode": args.mode,
        "instance": str(config.get("rhs.name")),
        "solutions": {},
    }

    rhs = None
    if args.mode != "fixed":
        try:
            rhs = config.build_rhs(exps)
        except ConfigError as err:
            print(f"config error: {err}", file=sys.stderr)
            return EXIT_CONFIG
        report = config.assumption_report(exps, rhs)
        summary["assumptions"] = {k: v for k, v in report.items()}
        violated = config.violated_assumptions(report)
        if violated:
            summary["assumption_warnings"] = violated
            if not args.force:
                print(
                    "assumption validation failed: " + ", ".join(violated)
                    + " (use --force to run anyway)",
                    file=sys.stderr,
                )
                return EXIT_CONFIG

    failures = []

    def record(name, result):
        dual = grad_phi(result.u, exps, mesh, rhs) if rhs is not None else None
        entry = result.summary()
        if dual is not None:
            eucl, probe = residual_norms(dual, exps, mesh)
            entry["residual_dual_probe"] = probe
        summary["solutions"][name] = entry
        save_solution_csv(result.u, os.path.join(out_dir, f"{name}.csv"))
        if result.status != "converged":
            failures.append(name)

    try:
        if args.mode == "fixed":
            src = config.source_fn()
            res = solve_fixed_rhs(lambda pts: src(pts), exps, mesh, cfg)
            record("u_fixed", res)
        if args.mode in ("positive", "all"):
            record("u0", solve_constant_sign("+", exps, mesh, rhs, cfg))
        if args.mode in ("negative", "all"):
            record("v0", solve_constant_sign("-", exps, mesh, rhs, cfg))
        if args.mode in ("nodal", "all"):
            record("w0", solve_sign_changing(exps, mesh, rhs, cfg))
    except SolverError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        summary["error"] = str(err)
        failures.append("solver")

    if args.mode == "all" and not failures:
        sols = summary["solutions"]
        e_u0, e_v0, e_w0 = (sols[k]["energy"] for k in ("u0", "v0", "w0"))
        summary["energy_ordering"] = {
            "phi_u0": e_u0,
            "phi_v0": e_v0,
            "phi_w0": e_w0,
            "ordering_ok": bool(e_w0 > max(e_u0, e_v0) > 0.0),
        }

    save_mesh_csv(mesh, os.path.join(out_dir, "nodes.csv"), os.path.join(out_dir, "elements.csv"))
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(config.serialize())
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote artifacts to {out_dir}")
    return EXIT_CHECK_FAILED if failures else EXIT_OK


def cmd_norm(args) -> int:
    try:
        config = parse_config_file(args.config)
        mesh = config.build_mesh()
        exps = config.build_exponents(mesh)
        u = load_solution_csv(mesh, args.field)
    except (ConfigError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    grad = np.linalg.norm(all_gradients(u), axis=1)
    rep = modular_hlog(grad, exps, mesh)
    print(f"p_part    = {rep.p_part:.12e}")
    print(f"logq_part = {rep.logq_part:.12e}")
    print(f"total     = {rep.total:.12e}")
    if rep.total == 0.0:
        print("luxemburg = 0")
        return EXIT_OK
    lam = luxemburg_norm(grad, exps, mesh)
    lo, hi = sandwich_bounds(lam, exps)
    ok = lo * (1 - 1e-9) <= rep.total <= hi * (1 + 1e-9)
    print(f"luxemburg = {lam:.12e}")
    print(
        f"sandwich  : min/max powers p_minus={exps.p_minus:g}, "
        f"q_plus+kappa={exps.q_plus:g}+0.31784  "
        f"[{lo:.6e}, {hi:.6e}] -> {'pass' if ok else 'FAIL'}"
    )
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_report(args) -> int:
    result = write_report(args.run_dir, out_dir=args.out)
    rows = result["rows"]
    if not rows:
        print("no summaries found")
    for row in rows:
        print(
            f"{row['dir']:<20} {row['instance']:<12} {row['nx']}x{row['ny']}  "
            + "  ".join(
                f"{k}={row[k]:.6g}" for k in ("phi_u0", "phi_v0", "phi_w0") if k in row
            )
        )
    for problem in result["problems"]:
        print(f"warning: {problem}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="logphase", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the executable property suite")
    p.add_argument("suite", choices=["scalar", "modular", "operator", "solver", "all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--out", help="directory for verification.json")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("solve", help="solve the Dirichlet problem")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=["fixed", "positive", "negative", "nodal", "all"],
                   default="all")
    p.add_argument("--seed", type=int, default=None, help="override solver.seed")
    p.add_argument("--force", action="store_true",
                   help="run even if assumption validation fails")
    p.add_argument("--out", help="output directory (default: outputs.dir)")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("norm", help="modular and Luxemburg norm of a stored field")
    p.add_argument("--config", required=True)
    p.add_argument("field", help="solution CSV (id,x,y,value)")
    p.set_defaults(fn=cmd_norm)

    p = sub.add_parser("report", help="aggregate run summaries")
    p.add_argument("run_dir")
    p.add_argument("--out", help="directory for report files (default: run_dir)")
    p.set_defaults(fn=cmd_report)

    return ap


def main(argv=None) -> int:
    _apply_thread_env()
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
