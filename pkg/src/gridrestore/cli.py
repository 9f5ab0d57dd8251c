"""Command-line front end: solve scenarios, verify plans, sweep the
equity tolerance, and run Monte Carlo failure simulations.

Exit codes partition outcomes: 0 solved/verified, 1 input error,
2 infeasible, 3 solver limits, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bnb import SolveOptions, solve_milp
from .feeder import (
    FeederError,
    FeederGraph,
    ScenarioConfig,
    apply_scenario,
    edge_key,
    natural_key,
    parse_feeder,
    parse_scenario,
    validate_feeder,
)
from .metrics import average_bias
from .model import ModelError, build_model
from .mps import MpsError, export_mps, import_solution, write_solution
from .plan import PlanError, RestorationPlan, extract_plan, plan_from_json, plan_to_json
from .verify import monte_carlo_survival, verify_plan

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_LIMIT = 3
EXIT_VERIFY = 4


def _setup_logging() -> None:
    level = os.environ.get("RESTORE_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        level=levels.get(level, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _manifest(args: argparse.Namespace, command: str) -> dict:
    opts = {}
    for key in ("solver", "solution", "eps", "samples", "seed", "format", "first_feasible"):
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return {
        "command": command,
        "feeder": args.feeder,
        "scenario": getattr(args, "scenario", None),
        "options": opts,
        "tool_version": __version__,
    }


def _load_inputs(args) -> tuple[FeederGraph, ScenarioConfig]:
    feeder_text = Path(args.feeder).read_text(encoding="utf-8")
    graph = parse_feeder(feeder_text)
    diags = validate_feeder(graph)
    if diags:
        raise FeederError("feeder failed validation: " + "; ".join(diags))
    scenario = ScenarioConfig()
    if getattr(args, "scenario", None):
        scenario = parse_scenario(Path(args.scenario).read_text(encoding="utf-8"))
    return apply_scenario(graph, scenario), scenario


def _restoration_paths(rsn) -> list[str]:
    """One DER-to-load node sequence per picked critical load."""
    parent: dict[str, str] = {}
    adj: dict[str, list[str]] = {}
    for a, b in rsn.edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    order = [rsn.der_node]
    seen = {rsn.der_node}
    i = 0
    while i < len(order):
        cur = order[i]
        i += 1
        for nxt in sorted(adj.get(cur, []), key=natural_key):
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = cur
                order.append(nxt)
    paths = []
    for cl in rsn.picked_cls:
        seq = [cl]
        while seq[-1] != rsn.der_node:
            seq.append(parent[seq[-1]])
        paths.append("-".join(reversed(seq)))
    return paths


def _plan_table(plan: RestorationPlan, report) -> tuple[list[str], list[list[str]]]:
    header = ["DER", "Critical Loads", "Nodes on Restoration Path", "T_k (h)", "Losses (%)"]
    rows = []
    for rsn in plan.rsns:
        loss = report.loss_percent.get(rsn.der_index)
        rows.append(
            [
                f"DER-{rsn.der_node}",
                ", ".join(f"CL-{c}" for c in rsn.picked_cls) or "-",
                " ; ".join(_restoration_paths(rsn)) or "-",
                "inf" if math.isinf(rsn.t_hours) else f"{rsn.t_hours:.2f}",
                f"{loss:.4f}%" if loss is not None else "-",
            ]
        )
    return header, rows


def _render(header: list[str], rows: list[list[str]], fmt: str) -> str:
    if fmt == "csv":
        out = [",".join(header)]
        out += [",".join(f'"{c}"' if "," in c else c for c in row) for row in rows]
        return "\n".join(out) + "\n"
    if fmt == "json":
        return json.dumps([dict(zip(header, row)) for row in rows], indent=2, sort_keys=True) + "\n"
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
              for i in range(len(header))]
    lines = [" | ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("-+-".join("-" * w for w in widths))
    for row in rows:
        lines.append(" | ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def _diagnose_infeasibility(graph, scenario) -> str:
    if scenario.enforce_time_equity:
        relaxed = replace(scenario, enforce_time_equity=False, epsilon_hours=None)
        try:
            model = build_model(graph, relaxed)
            if solve_milp(model).status == "optimal":
                return (
                    "model is infeasible; the restoration-time equity band "
                    "(constraint families equity_lo/equity_up) cannot be met "
                    f"with epsilon={scenario.epsilon_hours} h - relax epsilon"
                )
        except ModelError:
            pass
    return "model is infeasible"


def cmd_solve(args) -> int:
    try:
        graph, scenario = _load_inputs(args)
        model = build_model(graph, scenario)
    except (FeederError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(args, "solve")

    if args.solver == "mps-export":
        text = export_mps(model)
        if out_dir:
            (out_dir / "model.mps").write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return EXIT_OK

    if args.solution:
        try:
            sol = import_solution(model, Path(args.solution).read_text(encoding="utf-8"))
        except (MpsError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sol = solve_milp(model, SolveOptions())
        logger.info(
            "solve: status=%s nodes=%d lp_iterations=%d wall=%.3fs",
            sol.status, sol.stats.nodes, sol.stats.lp_iterations, sol.stats.wall_time,
        )
        if sol.status == "infeasible":
            print(f"error: {_diagnose_infeasibility(graph, scenario)}", file=sys.stderr)
            return EXIT_INFEASIBLE
        if sol.status in ("limit", "unbounded"):
            print(f"error: solver stopped with status {sol.status}", file=sys.stderr)
            return EXIT_LIMIT

    try:
        plan = extract_plan(model, sol.values, graph)
    except PlanError as exc:
        print(f"error: extracted plan failed its audit: {exc}", file=sys.stderr)
        return EXIT_VERIFY

    report = verify_plan(plan, graph, v_ref=scenario.v_ref)
    header, rows = _plan_table(plan, report)
    table = _render(header, rows, args.format)
    sys.stdout.write(table)
    if plan.unserved_cls:
        sys.stdout.write(
            "Unserved critical loads: " + ", ".join(f"CL-{c}" for c in plan.unserved_cls) + "\n"
        )
    sys.stdout.write(f"Objective {plan.objective:.6f}  U_R {plan.u_r:.6f}  picked {plan.total_picked}\n")

    if out_dir:
        (out_dir / "plan.json").write_text(plan_to_json(plan, manifest), encoding="utf-8")
        (out_dir / "report.json").write_text(report.to_json(manifest), encoding="utf-8")
        (out_dir / "table.txt").write_text(_render(header, rows, "table"), encoding="utf-8")
        (out_dir / "table.csv").write_text(_render(header, rows, "csv"), encoding="utf-8")
        (out_dir / "solution.txt").write_text(
            write_solution(model, sol.values, header="embedded solver solution"),
            encoding="utf-8",
        )
    if not report.all_radial():
        print("error: verification failed on the solved plan", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        graph, scenario = _load_inputs(args)
        plan = plan_from_json(Path(args.plan).read_text(encoding="utf-8"))
    except (FeederError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    unknown = [n for r in plan.rsns for n in r.nodes if n not in graph.nodes]
    der_mismatch = [
        r.der_node
        for r in plan.rsns
        if r.der_index >= len(graph.ders) or graph.ders[r.der_index].node != r.der_node
    ]
    if unknown or der_mismatch or plan.n_nodes != len(graph.nodes):
        print(
            f"error: plan does not match feeder "
            f"(unknown nodes {unknown[:3]}, DER mismatch {der_mismatch[:3]})",
            file=sys.stderr,
        )
        return EXIT_INPUT

    report = verify_plan(
        plan, graph, v_ref=scenario.v_ref,
        mc_samples=args.samples or 0, mc_seed=args.seed or 0,
    )
    manifest = _manifest(args, "verify")
    text = report.to_json(manifest)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)

    consistent = (
        abs(report.u_r - plan.u_r) < 1e-9
        and abs(report.u_p - plan.u_p) < 1e-9
        and abs(report.u_rc - plan.objective) < 1e-9
    )
    if report.all_radial() and consistent:
        return EXIT_OK
    print("error: verification failed (radiality or metric mismatch)", file=sys.stderr)
    return EXIT_VERIFY


def cmd_sweep_eps(args) -> int:
    try:
        eps_list = [float(tok) for tok in args.eps.split(",") if tok.strip() != ""]
    except (AttributeError, ValueError):
        print("error: --eps expects a comma-separated list of numbers", file=sys.stderr)
        return EXIT_INPUT
    if not eps_list:
        print("error: --eps list is empty", file=sys.stderr)
        return EXIT_INPUT
    try:
        graph, scenario = _load_inputs(args)
    except (FeederError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    header = ["epsilon (h)", "status", "U_R", "max |T_net - T_k| (h)", "picked"]
    rows = []
    for eps in sorted(eps_list):
        sc = replace(scenario, enforce_time_equity=True, epsilon_hours=eps)
        try:
            model = build_model(graph, sc)
        except ModelError as exc:
            rows.append([f"{eps:g}", f"error: {exc}", "-", "-", "-"])
            continue
        sol = solve_milp(model, SolveOptions())
        if sol.status != "optimal":
            rows.append([f"{eps:g}", sol.status, "-", "-", "-"])
            continue
        plan = extract_plan(model, sol.values, graph)
        active = [bool(r.picked_cls) for r in plan.rsns]
        biases = [
            abs(plan.t_net - r.t_hours)
            for r, a in zip(plan.rsns, active)
            if a and math.isfinite(r.t_hours)
        ]
        rows.append(
            [
                f"{eps:g}",
                "optimal",
                f"{plan.u_r:.4f}",
                f"{max(biases):.4f}" if biases else "-",
                str(plan.total_picked),
            ]
        )
        if args.first_feasible:
            break

    table = _render(header, rows, args.format)
    sys.stdout.write(table)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep.csv").write_text(_render(header, rows, "csv"), encoding="utf-8")
    return EXIT_OK


def cmd_mc(args) -> int:
    if args.samples is None or args.samples < 1:
        print("error: --samples must be a positive integer", file=sys.stderr)
        return EXIT_INPUT
    try:
        graph, _ = _load_inputs(args)
        plan = plan_from_json(Path(args.plan).read_text(encoding="utf-8"))
    except (FeederError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    seed = args.seed if args.seed is not None else 0
    header = ["DER", "edges", "survival", "stderr"]
    rows = []
    results = {}
    for rsn in plan.rsns:
        q_edges = [graph.edges[edge_key(a, b)].q_failure for a, b in rsn.edges]
        est, stderr = monte_carlo_survival(q_edges, args.samples, [seed, rsn.der_index])
        results[str(rsn.der_index + 1)] = {
            "survival": est,
            "stderr": stderr,
            "samples": args.samples,
            "edges": len(q_edges),
        }
        rows.append([f"DER-{rsn.der_node}", str(len(q_edges)), f"{est:.6f}", f"{stderr:.6f}"])

    table = _render(header, rows, args.format)
    sys.stdout.write(table)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        doc = {"manifest": _manifest(args, "mc"), "monte_carlo": results}
        (out_dir / "mc.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridrestore",
        description="Critical-load restoration planning for damaged feeders with DERs",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        p.add_argument("--feeder", required=True, help="feeder JSON file")
        if scenario:
            p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=["table", "csv", "json"], default="table")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--samples", type=int, default=None)

    p_solve = sub.add_parser("solve", help="build and solve a restoration plan")
    common(p_solve)
    p_solve.add_argument(
        "--solver", choices=["embedded", "mps-export"], default="embedded",
        help="embedded branch and bound, or write model.mps and stop",
    )
    p_solve.add_argument("--solution", help="import a 'name value' solution file instead of solving")
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="audit a plan file against its feeder")
    common(p_verify)
    p_verify.add_argument("--plan", required=True, help="plan JSON file")
    p_verify.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep-eps", help="solve across equity tolerances")
    common(p_sweep)
    p_sweep.add_argument("--eps", required=True, help="comma-separated epsilon values in hours")
    p_sweep.add_argument(
        "--first-feasible", action="store_true", dest="first_feasible",
        help="stop at the first feasible epsilon",
    )
    p_sweep.set_defaults(func=cmd_sweep_eps)

    p_mc = sub.add_parser("mc", help="Monte Carlo survival of a plan")
    common(p_mc)
    p_mc.add_argument("--plan", required=True, help="plan JSON file")
    p_mc.set_defaults(func=cmd_mc)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # pragma: no cover - last-resort guard
        logger.exception("unhandled error")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
