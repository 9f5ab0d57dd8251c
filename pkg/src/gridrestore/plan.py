"""Restoration plans: extraction from MILP solutions, assembly from raw
per-DER trees, and the plan JSON interchange format.
"""

from __future__ import annotations

import json
import math

from dataclasses import dataclass, field

import numpy as np

from .feeder import FeederGraph, edge_key, natural_key
from .metrics import average_bias, effective_unavailability, restoration_time
from .model import MilpModel, compute_t_net

__all__ = ["PlanError", "RsnPlan", "RestorationPlan", "extract_plan", "assemble_plan",
           "plan_to_json", "plan_from_json"]


class PlanError(RuntimeError):
    pass


@dataclass
class RsnPlan:
    der_index: int
    der_node: str
    availability: float
    energy_reserve: float
    nodes: list[str]
    edges: list[tuple[str, str]]
    picked_cls: list[str]
    selected_paths: dict[str, list[str]]
    served_p_kw: float
    served_q_kvar: float
    t_hours: float
    u_r_k: float

    @property
    def n_lines(self) -> int:
        return len(self.nodes) - 1


@dataclass
class RestorationPlan:
    rsns: list[RsnPlan]
    n_nodes: int
    n_ders: int
    t_net: float
    total_picked: int
    u_p: float
    u_r: float
    u_rc: float
    objective: float
    unserved_cls: list[str] = field(default_factory=list)


def assemble_plan(
    graph: FeederGraph,
    per_der: list[tuple[set[str], set[tuple[str, str]], dict[str, list[str]]]],
) -> RestorationPlan:
    """Build a full plan (with all metrics) from per-DER trees.

    per_der holds one (node set, edge set, selected paths) triple per DER
    in DER order. The objective is recomputed canonically here so the
    optimizer and the brute-force oracle report identical numbers.
    """
    if len(per_der) != len(graph.ders):
        raise PlanError("one (nodes, edges, paths) triple per DER required")
    try:
        t_net = compute_t_net(graph)
    except Exception:
        t_net = math.inf

    rsns = []
    picked_all: set[str] = set()
    for k, der in enumerate(graph.ders):
        nodes, edges, paths = per_der[k]
        picked = sorted(
            (n for n in nodes if graph.nodes[n].is_critical), key=natural_key
        )
        picked_all.update(picked)
        served_p = sum(graph.nodes[n].demand_p for n in picked)
        served_q = sum(graph.nodes[n].demand_q for n in picked)
        rsns.append(
            RsnPlan(
                der_index=k,
                der_node=der.node,
                availability=der.availability,
                energy_reserve=der.energy_reserve,
                nodes=sorted(nodes, key=natural_key),
                edges=sorted(edges, key=lambda e: (natural_key(e[0]), natural_key(e[1]))),
                picked_cls=picked,
                selected_paths={n: list(p) for n, p in sorted(paths.items(), key=lambda t: natural_key(t[0]))},
                served_p_kw=served_p,
                served_q_kvar=served_q,
                t_hours=restoration_time(der.energy_reserve, served_p),
                u_r_k=(1.0 - der.availability) * len(nodes),
            )
        )

    u_p, u_r, u_rc = effective_unavailability(
        [len(r.nodes) for r in rsns],
        [r.availability for r in rsns],
        n_nodes=len(graph.nodes),
        n_ders=len(graph.ders),
        picked=len(picked_all),
    )
    unserved = [n for n in graph.critical_nodes() if n not in picked_all]
    return RestorationPlan(
        rsns=rsns,
        n_nodes=len(graph.nodes),
        n_ders=len(graph.ders),
        t_net=t_net,
        total_picked=len(picked_all),
        u_p=u_p,
        u_r=u_r,
        u_rc=u_rc,
        objective=u_rc,
        unserved_cls=unserved,
    )


def extract_plan(
    model: MilpModel,
    values: np.ndarray,
    graph: FeederGraph | None = None,
    int_tol: float = 1e-6,
) -> RestorationPlan:
    """Threshold the binaries of a solution vector and rebuild the plan.

    Raises PlanError on fractional binaries beyond tolerance and on any
    RSN that fails the radiality identity (which would indicate a model
    or solver defect, not bad input).
    """
    ctx = model.context
    if ctx is None:
        raise PlanError("model carries no build context")
    g = graph or ctx.graph

    for idx in model.binary_indices():
        if abs(values[idx] - round(values[idx])) > int_tol:
            raise PlanError(
                f"binary {model.variables[idx].name} = {values[idx]!r} "
                f"is fractional beyond tolerance"
            )

    def on(idx: int) -> bool:
        return values[idx] > 0.5

    per_der = []
    loop_nodes = ctx.loops.loop_nodes
    for k, der in enumerate(g.ders):
        nodes = {n for (n, kk), idx in ctx.v_idx.items() if kk == k and on(idx)}
        om = ctx.orientations[k]
        edges: set[tuple[str, str]] = set()
        for child, par in om.parent_of.items():
            if child in nodes and par in nodes:
                edges.add(edge_key(par, child))
        paths: dict[str, list[str]] = {}
        for e in ctx.entries_by_der[k]:
            if on(ctx.y_idx[(k, e.nodes)]):
                if e.target in paths:
                    raise PlanError(
                        f"node {e.target} has more than one selected path in RSN {k + 1}"
                    )
                paths[e.target] = list(e.nodes)
                edges.update(e.edges)
        missing = sorted((nodes & loop_nodes) - set(paths), key=natural_key)
        if missing:
            raise PlanError(f"loop nodes {missing} energized without a selected path")
        _audit_tree(nodes, edges, der.node, k)
        per_der.append((nodes, edges, paths))

    return assemble_plan(g, per_der)


def _audit_tree(nodes: set[str], edges: set[tuple[str, str]], root: str, k: int) -> None:
    if root not in nodes:
        raise PlanError(f"RSN {k + 1} does not contain its DER node {root}")
    if len(edges) != len(nodes) - 1:
        raise PlanError(
            f"RSN {k + 1} is not a tree: {len(nodes)} nodes, {len(edges)} edges"
        )
    seen = {root}
    stack = [root]
    adj: dict[str, list[str]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    while stack:
        cur = stack.pop()
        for nxt in adj.get(cur, []):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if seen != nodes:
        raise PlanError(f"RSN {k + 1} is not connected")


# ---------------------------------------------------------------------------
# plan file format
# ---------------------------------------------------------------------------


def plan_to_json(plan: RestorationPlan, manifest: dict | None = None) -> str:
    doc = {
        "manifest": manifest or {},
        "n_nodes": plan.n_nodes,
        "n_ders": plan.n_ders,
        "t_net_hours": None if math.isinf(plan.t_net) else plan.t_net,
        "total_picked": plan.total_picked,
        "u_p": plan.u_p,
        "u_r": plan.u_r,
        "u_rc": plan.u_rc,
        "objective": plan.objective,
        "unserved_cls": plan.unserved_cls,
        "rsns": [
            {
                "der_index": r.der_index,
                "der_node": r.der_node,
                "availability": r.availability,
                "energy_kwh": r.energy_reserve,
                "nodes": r.nodes,
                "edges": [[a, b] for a, b in r.edges],
                "picked_cls": r.picked_cls,
                "selected_paths": r.selected_paths,
                "served_p_kw": r.served_p_kw,
                "served_q_kvar": r.served_q_kvar,
                "t_hours": None if math.isinf(r.t_hours) else r.t_hours,
                "u_r_k": r.u_r_k,
            }
            for r in plan.rsns
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def plan_from_json(text: str) -> RestorationPlan:
    doc = json.loads(text)
    rsns = []
    for raw in doc["rsns"]:
        rsns.append(
            RsnPlan(
                der_index=int(raw["der_index"]),
                der_node=str(raw["der_node"]),
                availability=float(raw["availability"]),
                energy_reserve=float(raw["energy_kwh"]),
                nodes=[str(n) for n in raw["nodes"]],
                edges=[edge_key(str(a), str(b)) for a, b in raw["edges"]],
                picked_cls=[str(n) for n in raw["picked_cls"]],
                selected_paths={str(n): [str(x) for x in p] for n, p in raw.get("selected_paths", {}).items()},
                served_p_kw=float(raw["served_p_kw"]),
                served_q_kvar=float(raw["served_q_kvar"]),
                t_hours=math.inf if raw["t_hours"] is None else float(raw["t_hours"]),
                u_r_k=float(raw["u_r_k"]),
            )
        )
    t_net = doc.get("t_net_hours")
    return RestorationPlan(
        rsns=rsns,
        n_nodes=int(doc["n_nodes"]),
        n_ders=int(doc["n_ders"]),
        t_net=math.inf if t_net is None else float(t_net),
        total_picked=int(doc["total_picked"]),
        u_p=float(doc["u_p"]),
        u_r=float(doc["u_r"]),
        u_rc=float(doc["u_rc"]),
        objective=float(doc["objective"]),
        unserved_cls=[str(n) for n in doc.get("unserved_cls", [])],
    )
