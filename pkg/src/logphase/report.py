"""Aggregation of solve runs into consolidated tables and plot data.

Scans a directory tree for ``summary.json`` files, tabulates instance,
mesh size, energies, residuals, nodal counts and assumption flags, and
emits gnuplot-ready columns: ``report.dat`` (one row per run, energy
versus mesh size with an energy-difference column) and, for runs whose
directory still holds a solution CSV plus config, ``fibering_<name>.dat``
sampling the ray energy profile at 200 log-spaced scales.
"""

import json
import os

import numpy as np

from .config import parse_config_file
from .energy import energy_phi
from .mesh import load_solution_csv

__all__ = ["collect_runs", "write_report", "fibering_profile"]

N_PROFILE = 200


def collect_runs(run_dir):
    """(runs, problems): parsed summaries and non-fatal load failures."""
    runs, problems = [], []
    for root, _dirs, files in sorted(os.walk(run_dir)):
        if "summary.json" not in files:
            continue
        path = os.path.join(root, "summary.json")
        try:
            with open(path) as fh:
                summary = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            problems.append(f"{path}: {err}")
            continue
        summary["_dir"] = root
        runs.append(summary)
    return runs, problems


def _table_rows(runs):
    rows = []
    for s in runs:
        cfg = s.get("config", {})
        sols = s.get("solutions", {})
        row = {
            "dir": os.path.basename(s["_dir"]) or s["_dir"],
            "instance": s.get("instance", "?"),
            "nx": cfg.get("mesh.nx", "?"),
            "ny": cfg.get("mesh.ny", "?"),
        }
        for name in ("u0", "v0", "w0", "u_fixed"):
            if name in sols:
                row[f"phi_{name}"] = sols[name]["energy"]
                row[f"res_{name}"] = sols[name]["residual"]
                row[f"nodal_{name}"] = tuple(sols[name]["nodal"])
        flags = s.get("assumptions", {})
        row["flags_ok"] = all(v for k, v in flags.items() if isinstance(v, bool))
        rows.append(row)
    return rows


def fibering_profile(run_dir, solution_name: str):
    """Sample t -> phi(t u) for a stored solution; None if files missing."""
    cfg_path = os.path.join(run_dir, "config.txt")
    sol_path = os.path.join(run_dir, f"{solution_name}.csv")
    if not (os.path.exists(cfg_path) and os.path.exists(sol_path)):
        return None
    config = parse_config_file(cfg_path)
    mesh = config.build_mesh()
    exps = config.build_exponents(mesh)
    rhs = config.build_rhs(exps)
    u = load_solution_csv(mesh, sol_path)
    ts = np.logspace(-2, 2, N_PROFILE)
    phis = np.array([energy_phi(t * u, exps, mesh, rhs) for t in ts])
    return ts, phis


def write_report(run_dir, out_dir=None) -> dict:
    """Aggregate summaries; returns {'rows': ..., 'problems': ...}."""
    out_dir = out_dir or run_dir
    runs, problems = collect_runs(run_dir)
    rows = _table_rows(runs)

    os.makedirs(out_dir, exist_ok=True)
    dat_path = os.path.join(out_dir, "report.dat")
    with open(dat_path, "w") as fh:
        fh.write("# dir instance nx ny phi_u0 phi_v0 phi_w0 res_u0 res_v0 res_w0\n")
        prev_w0 = None
        for row in sorted(rows, key=lambda r: (str(r["instance"]), r["nx"], r["ny"])):
            w0 = row.get("phi_w0")
            diff = "" if (w0 is None or prev_w0 is None) else f" {w0 - prev_w0:.17g}"
            fh.write(
                f"{row['dir']} {row['instance']} {row['nx']} {row['ny']} "
                f"{row.get('phi_u0', 'nan')} {row.get('phi_v0', 'nan')} {row.get('phi_w0', 'nan')} "
                f"{row.get('res_u0', 'nan')} {row.get('res_v0', 'nan')} {row.get('res_w0', 'nan')}"
                f"{diff}\n"
            )
            if w0 is not None:
                prev_w0 = w0

    for s in runs:
        for name in ("u0", "w0"):
            prof = fibering_profile(s["_dir"], name)
            if prof is None:
                continue
            ts, phis = prof
            with open(os.path.join(out_dir, f"fibering_{os.path.basename(s['_dir'])}_{name}.dat"), "w") as fh:
                fh.write("# t phi(t*u)\n")
                for t, p in zip(ts, phis):
                    fh.write(f"{t:.17g} {p:.17g}\n")

    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump({"rows": rows, "problems": problems}, fh, indent=2, sort_keys=True, default=str)
    return {"rows": rows, "problems": problems}
