"""Command-line front end: solve, converge and pareto subcommands.

Writes machine-readable artifacts (JSON report, CSV tables) suitable
for external plotting; nothing is plotted in-process.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import problems as _problems
from .driver import SolverConfig, convergence_study, fit_slope, pareto_sweep, solve_ocp
from .mesh import Trajectory, decision_from_dict


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--problem", required=True, help="benchmark name (e.g. fuller)")
    p.add_argument("--eps-tol", type=float, default=1e-8, help="residual tolerance")
    p.add_argument("--eps-quad-tol", type=float, default=None,
                   help="quadrature-error gate (default 1e-2 * eps-tol)")
    p.add_argument("--n", type=int, default=5, help="initial number of mesh intervals")
    p.add_argument("--a", type=int, default=2, help="state polynomial degree")
    p.add_argument("--b", type=int, default=1, help="input polynomial degree")
    p.add_argument("--q", type=int, default=3, help="quadrature order per interval")
    p.add_argument("--phi-flex", type=float, default=0.5,
                   help="interval-length flexibility in [0,1)")
    p.add_argument("--mesh", choices=["flexible", "fixed"], default="flexible")
    p.add_argument("--max-rounds", type=int, default=8, help="refinement rounds")
    p.add_argument("--nlp-tol", type=float, default=1e-10)
    p.add_argument("--nlp-max-iter", type=int, default=3000)
    p.add_argument("--out-dir", default=os.environ.get("FLEXOCP_OUT", "."),
                   help="output directory (env FLEXOCP_OUT)")


def _config(args) -> SolverConfig:
    return SolverConfig(
        eps_tol=args.eps_tol, eps_quad_tol=args.eps_quad_tol,
        n_intervals=args.n, state_degree=args.a, input_degree=args.b,
        quad_order=args.q, flexibility=args.phi_flex, mesh_mode=args.mesh,
        max_rounds=args.max_rounds, nlp_tol=args.nlp_tol,
        nlp_max_iter=args.nlp_max_iter,
    )


def _parse_n_list(text: str) -> list[int]:
    """'5:60' doubles from 5 up to at most 60; '5,10,20' is explicit."""
    if ":" in text:
        lo, hi = (int(v) for v in text.split(":"))
        out, n = [], lo
        while n <= hi:
            out.append(n)
            n *= 2
        return out
    return [int(v) for v in text.split(",")]


def _parse_eps_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def _write_trajectory(path, report):
    dv = decision_from_dict(report.solution)
    traj = Trajectory.from_decision(dv)
    nodes = traj.nodes
    ts = np.union1d(np.linspace(nodes[0], nodes[-1], 1000), nodes)
    node_set = set(nodes.tolist())
    n_x, n_u = traj.n_x, traj.n_u
    header = (["t"] + [f"x_{m + 1}" for m in range(n_x)]
              + [f"u_{m + 1}" for m in range(n_u)] + ["is_mesh_node"])
    rows = []
    for t in ts:
        x = traj.state(t)
        u = traj.input(t)
        rows.append([float(t)] + [float(v) for v in x] + [float(v) for v in u]
                    + [str(t in node_set).lower()])
    _write_csv(path, header, rows)


def run(argv=None) -> int:
    """Entry point; returns the process exit code."""
    parser = argparse.ArgumentParser(
        prog="flexocp",
        description="Optimal control via integrated-residual transcription "
                    "on a flexible time mesh")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="two-phase solve; writes report.json "
                                           "and trajectory.csv")
    _add_common(p_solve)

    p_conv = sub.add_parser("converge", help="residual-vs-N sweep for both mesh "
                                             "modes; writes convergence.csv")
    _add_common(p_conv)
    p_conv.add_argument("--n-list", default="5:60",
                        help="'lo:hi' (doubling) or comma-separated list")

    p_par = sub.add_parser("pareto", help="cost-vs-budget sweep; writes pareto.csv")
    _add_common(p_par)
    p_par.add_argument("--eps-list", default="1e-12,1e-11,1e-10,1e-9",
                       help="comma-separated residual budgets")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    try:
        entry = _problems.get(args.problem)
    except KeyError as err:
        print(err.args[0], file=sys.stderr)
        return 1
    try:
        config = _config(args)
    except ValueError as err:
        print(f"bad configuration: {err}", file=sys.stderr)
        return 1

    os.makedirs(args.out_dir, exist_ok=True)

    if args.command == "solve":
        report = solve_ocp(entry.problem, config)
        with open(os.path.join(args.out_dir, "report.json"), "w") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        _write_trajectory(os.path.join(args.out_dir, "trajectory.csv"), report)
        print(f"termination: {report.termination}; "
              f"residual {report.final_residual:.3e}; "
              f"cost {report.evaluated_cost}")
        return 0 if report.termination == "success" else 2

    if args.command == "converge":
        records = convergence_study(entry.problem, config, _parse_n_list(args.n_list))
        _write_csv(os.path.join(args.out_dir, "convergence.csv"),
                   ["mode", "n_intervals", "eps_r", "status", "wall_time"],
                   [[r["mode"], r["n_intervals"], r["eps_r"], r["status"],
                     r["wall_time"]] for r in records])
        for mode in ("flexible", "fixed"):
            sel = [r for r in records if r["mode"] == mode and np.isfinite(r["eps_r"])]
            if len(sel) >= 3:
                slope = fit_slope([r["n_intervals"] for r in sel],
                                  [r["eps_r"] for r in sel])
                print(f"{mode}: fitted slope {slope:.2f}")
        return 0

    if args.command == "pareto":
        sweep = pareto_sweep(entry.problem, config, _parse_eps_list(args.eps_list))
        rows = [["feasible", "", sweep["feasible_point"]["eps_r"],
                 sweep["feasible_point"]["cost"], sweep["feasible_point"]["status"]]]
        for p in sweep["points"]:
            rows.append(["budget", p["eps_tol"], p["eps_r"], p["cost"], p["status"]])
        _write_csv(os.path.join(args.out_dir, "pareto.csv"),
                   ["kind", "eps_tol", "eps_r", "cost", "status"], rows)
        return 0

    return 1


def main(argv=None) -> int:
    code = run(argv)
    if argv is None:
        sys.exit(code)
    return code
