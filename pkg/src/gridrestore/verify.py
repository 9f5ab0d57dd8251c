"""Post-solve validation: radiality audits, exact power flow, reliability
metrics, Monte Carlo failure simulation and an exhaustive optimization
oracle for desk-scale feeders.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .feeder import FeederGraph, ScenarioConfig, edge_key, natural_key
from .metrics import average_bias, effective_unavailability, rsn_reliability
from .model import compute_t_net
from .plan import PlanError, RestorationPlan, RsnPlan, assemble_plan
from .topology import build_path_catalog, find_loops, orient

logger = logging.getLogger(__name__)

__all__ = [
    "PowerFlowError",
    "SweepResult",
    "VerificationReport",
    "audit_radiality",
    "sweep_powerflow",
    "linear_voltages",
    "monte_carlo_survival",
    "brute_force_restore",
    "verify_plan",
]


class PowerFlowError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# radiality audit
# ---------------------------------------------------------------------------


def audit_radiality(plan: RestorationPlan, graph: FeederGraph) -> dict[int, list[str]]:
    """Per-RSN diagnostics; an empty list everywhere means the plan is sound."""
    out: dict[int, list[str]] = {}
    der_nodes = set(graph.der_nodes())
    loops = find_loops(graph)
    seen_nodes: dict[str, int] = {}
    for r in plan.rsns:
        diags: list[str] = []
        nodes = set(r.nodes)
        edges = set(r.edges)
        if r.der_node not in nodes:
            diags.append(f"missing its DER node {r.der_node}")
        extra_ders = sorted((nodes & der_nodes) - {r.der_node}, key=natural_key)
        if extra_ders:
            diags.append(f"contains foreign DER nodes {extra_ders}")
        if len(edges) != len(nodes) - 1:
            diags.append(
                f"edge count {len(edges)} != node count {len(nodes)} - 1 (cycle or split)"
            )
        adj: dict[str, list[str]] = {}
        for a, b in edges:
            key = edge_key(a, b)
            if key not in graph.edges:
                diags.append(f"edge {a}-{b} does not exist in the feeder")
                continue
            if graph.edges[key].faulted:
                diags.append(f"faulted edge {a}-{b} is energized")
            if not (a in nodes and b in nodes):
                diags.append(f"edge {a}-{b} leaves the RSN node set")
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        if r.der_node in nodes:
            seen, stack = {r.der_node}, [r.der_node]
            while stack:
                cur = stack.pop()
                for nxt in adj.get(cur, []):
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            if seen != nodes:
                diags.append("not connected to its DER")
        for key, e in graph.edges.items():
            if e.faulted or e.switchable:
                continue
            inside = len(nodes & set(key))
            if inside == 1:
                diags.append(
                    f"non-switchable edge {key[0]}-{key[1]} straddles the RSN boundary"
                )
        for n in nodes & loops.loop_nodes:
            if n == r.der_node and n not in r.selected_paths:
                continue
            if n not in r.selected_paths:
                diags.append(f"loop node {n} has no selected path")
        for n, path in r.selected_paths.items():
            if not set(path) <= nodes:
                diags.append(f"selected path for {n} leaves the RSN")
        for n in nodes:
            if n in seen_nodes:
                diags.append(f"node {n} also belongs to RSN {seen_nodes[n] + 1}")
            else:
                seen_nodes[n] = r.der_index
        out[r.der_index] = diags
    return out


# ---------------------------------------------------------------------------
# power flow
# ---------------------------------------------------------------------------


def _tree_structure(rsn: RsnPlan) -> tuple[list[str], dict[str, str]]:
    """BFS order and parent map of the RSN tree."""
    adj: dict[str, list[str]] = {}
    for a, b in rsn.edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    order = [rsn.der_node]
    parent: dict[str, str] = {}
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
    if set(order) != set(rsn.nodes):
        raise PowerFlowError(f"RSN {rsn.der_index + 1} is not a connected tree")
    return order, parent


@dataclass
class SweepResult:
    voltages: dict[str, float]
    loss_percent: float
    iterations: int
    max_mismatch: float


def sweep_powerflow(
    rsn: RsnPlan,
    graph: FeederGraph,
    v_ref: float = 1.0,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> SweepResult:
    """Exact backward/forward sweep with constant-power loads.

    The backward pass accumulates complex branch power including I^2 Z
    losses; the forward pass propagates voltages from the DER reference.
    """
    order, parent = _tree_structure(rsn)
    children: dict[str, list[str]] = {}
    for child, par in parent.items():
        children.setdefault(par, []).append(child)

    s_load = {
        n: complex(graph.p_pu(n), graph.q_pu(n)) for n in order
    }
    z_edge = {}
    for child, par in parent.items():
        e = graph.edges[edge_key(par, child)]
        z_edge[child] = complex(e.r, e.x)

    volt = {n: complex(v_ref, 0.0) for n in order}
    s_in: dict[str, complex] = {}
    final_dv = math.inf
    for it in range(1, max_iter + 1):
        for node in reversed(order):
            s = s_load[node]
            for c in children.get(node, []):
                current = abs(s_in[c] / volt[c])
                s += s_in[c] + current * current * z_edge[c]
            s_in[node] = s
        max_dv = 0.0
        for node in order[1:]:
            current = (s_in[node] / volt[node]).conjugate()
            new_v = volt[parent[node]] - z_edge[node] * current
            max_dv = max(max_dv, abs(new_v - volt[node]))
            volt[node] = new_v
        final_dv = max_dv
        if max_dv < tol:
            break
    else:
        raise PowerFlowError(
            f"sweep did not converge in {max_iter} iterations (last dV {final_dv:.3e})"
        )

    magnitudes = {n: abs(volt[n]) for n in order}
    if min(magnitudes.values()) < 0.5:
        raise PowerFlowError("voltage collapse: magnitude below 0.5 pu")
    total_p = sum(s.real for s in s_load.values())
    loss_p = s_in[rsn.der_node].real - total_p
    loss_percent = 100.0 * loss_p / total_p if total_p > 0 else 0.0
    return SweepResult(
        voltages=magnitudes,
        loss_percent=loss_percent,
        iterations=it,
        max_mismatch=final_dv,
    )


def linear_voltages(rsn: RsnPlan, graph: FeederGraph, v_ref: float = 1.0) -> dict[str, float]:
    """Lossless linearized voltages on the RSN tree (the optimizer's model)."""
    order, parent = _tree_structure(rsn)
    p_sub = {n: graph.p_pu(n) for n in order}
    q_sub = {n: graph.q_pu(n) for n in order}
    for node in reversed(order):
        if node in parent:
            p_sub[parent[node]] += p_sub[node]
            q_sub[parent[node]] += q_sub[node]
    volt = {rsn.der_node: v_ref}
    for node in order[1:]:
        e = graph.edges[edge_key(parent[node], node)]
        volt[node] = volt[parent[node]] - (e.r * p_sub[node] + e.x * q_sub[node]) / v_ref
    return volt


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def monte_carlo_survival(
    q_edges: list[float], samples: int, seed, chunk: int = 1_000_000
) -> tuple[float, float]:
    """Estimate the probability that every edge survives one failure draw.

    Edges fail independently with their q_e; the RSN (a series system)
    survives a trial when no energized edge fails. Returns the sample
    mean and its binomial standard error; fully reproducible by seed.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    q = np.asarray(q_edges, dtype=float)
    rng = np.random.default_rng(seed)
    if q.size == 0:
        return 1.0, 0.0
    hits = 0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        draws = rng.random((n, q.size))
        hits += int(np.all(draws >= q, axis=1).sum())
        done += n
    est = hits / samples
    stderr = math.sqrt(est * (1.0 - est) / samples)
    return est, stderr


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


def _all_subtrees(root, allowed_nodes, adjacency):
    """Every subtree of the alive graph containing the root.

    Frontier edges are consumed in list order and earlier candidates are
    discarded for the rest of the branch, so each subtree is produced by
    exactly one recursion path (the seen-set is a defensive backstop).
    """
    seen: set[frozenset] = set()
    out = []

    def grow(tree_nodes: set, tree_edges: set, cands: list):
        key = frozenset(tree_edges)
        if key not in seen:
            seen.add(key)
            out.append((frozenset(tree_nodes), frozenset(tree_edges)))
        for i, (u, v, e) in enumerate(cands):
            if v in tree_nodes:
                continue
            new_cands = cands[i + 1 :]
            extra = []
            for w in adjacency[v]:
                if w in allowed_nodes and w not in tree_nodes:
                    extra.append((v, w, edge_key(v, w)))
            grow(tree_nodes | {v}, tree_edges | {e}, new_cands + extra)

    cands0 = [
        (root, v, edge_key(root, v))
        for v in adjacency[root]
        if v in allowed_nodes
    ]
    grow({root}, set(), cands0)
    return out


def brute_force_restore(
    graph: FeederGraph, scenario: ScenarioConfig
) -> tuple[float, RestorationPlan]:
    """Exhaustive optimum by direct constraint evaluation (no MILP).

    Enumerates per-DER candidate trees, then all critical-load
    assignments, applying exactly the same feasibility rules the model
    encodes. Guarded to desk scale.
    """
    g = graph
    n_nodes = len(g.nodes)
    n_ders = len(g.ders)
    if n_nodes > 14 or n_ders > 3:
        raise ValueError("brute force guarded to at most 14 nodes and 3 DERs")
    if n_ders == 0:
        raise ValueError("no DERs to restore with")

    loops = find_loops(g)
    catalog = build_path_catalog(g, g.ders, loops, scenario.max_paths_per_loop)
    criticals = g.critical_nodes()
    der_nodes = g.der_nodes()
    reward = n_ders * n_nodes
    try:
        t_net = compute_t_net(g)
    except Exception:
        t_net = math.inf

    rigid_edges = [e for e in g.alive_edges() if not e.switchable]
    exempt_faulted = set()
    for key, e in g.edges.items():
        if e.faulted and any(e.u in c.nodes and e.v in c.nodes for c in loops.clusters):
            exempt_faulted.add(key)
    faulted_pairs = [
        key for key, e in g.edges.items() if e.faulted and key not in exempt_faulted
    ]

    adjacency = {
        n: [v for v in g.adjacency[n] if not g.edges[edge_key(n, v)].faulted]
        for n in g.node_ids()
    }

    # per-DER admissible candidates grouped by which criticals they pick
    cand_by_der: list[dict[frozenset, list[dict]]] = []
    for k, der in enumerate(g.ders):
        om = orient(g, der, loops, k)
        allowed = set(om.reachable) - (set(der_nodes) - {der.node})
        catalog_paths = {
            e.nodes for e in catalog.entries if e.der_index == k
        }
        groups: dict[frozenset, list[dict]] = {}
        for nodes, edges in _all_subtrees(der.node, allowed, adjacency):
            if not _tree_admissible(
                g, scenario, der, nodes, edges, rigid_edges, faulted_pairs,
                loops, catalog_paths, t_net,
            ):
                continue
            picked = frozenset(n for n in nodes if g.nodes[n].is_critical)
            cost = (1.0 - der.availability) * len(nodes)
            paths = _tree_paths(der.node, nodes, edges, loops)
            groups.setdefault(picked, []).append(
                {"nodes": nodes, "edges": edges, "cost": cost, "paths": paths}
            )
        for lst in groups.values():
            lst.sort(key=lambda c: (c["cost"], sorted(natural_key(n) for n in c["nodes"])))
        cand_by_der.append(groups)

    # assignment enumeration: each critical load goes to one DER or stays dark
    options_per_cl: list[list[int | None]] = []
    for cl in criticals:
        forced = next((k for k in range(n_ders) if g.ders[k].node == cl), None)
        if forced is not None:
            options_per_cl.append([forced])  # a critical DER node is always self-picked
            continue
        opts: list[int | None] = [None]
        for k in range(n_ders):
            if any(cl in picked for picked in cand_by_der[k]):
                opts.append(k)
        options_per_cl.append(opts)

    best: tuple[float, list[dict]] | None = None
    for assignment in itertools.product(*options_per_cl):
        pools = []
        ok = True
        for k in range(n_ders):
            targets = frozenset(cl for cl, a in zip(criticals, assignment) if a == k)
            pool = cand_by_der[k].get(targets)
            if not pool:
                ok = False
                break
            pools.append(pool)
        if not ok:
            continue
        combo = _best_disjoint(pools)
        if combo is None:
            continue
        total_cost, chosen = combo
        picked_count = sum(1 for a in assignment if a is not None)
        _, _, u_rc = effective_unavailability(
            [len(c["nodes"]) for c in chosen],
            [d.availability for d in g.ders],
            n_nodes=n_nodes,
            n_ders=n_ders,
            picked=picked_count,
        )
        if best is None or u_rc < best[0] - 0.0:
            best = (u_rc, chosen)

    if best is None:
        raise PlanError("no feasible restoration exists (not even idle DERs)")
    _, chosen = best
    plan = assemble_plan(
        g, [(set(c["nodes"]), set(c["edges"]), c["paths"]) for c in chosen]
    )
    return plan.objective, plan


def _best_disjoint(pools: list[list[dict]]):
    """Cheapest selection of one candidate per pool with disjoint node sets."""
    best_cost = math.inf
    best_sel: list[dict] | None = None
    order = sorted(range(len(pools)), key=lambda i: len(pools[i]))

    def dfs(pos: int, used: frozenset, cost: float, sel: list):
        nonlocal best_cost, best_sel
        if cost >= best_cost:
            return
        if pos == len(pools):
            best_cost = cost
            best_sel = list(sel)
            return
        for cand in pools[order[pos]]:
            if cost + cand["cost"] >= best_cost:
                break  # pool sorted by cost
            if used & cand["nodes"]:
                continue
            sel.append(cand)
            dfs(pos + 1, used | cand["nodes"], cost + cand["cost"], sel)
            sel.pop()

    dfs(0, frozenset(), 0.0, [])
    if best_sel is None:
        return None
    ordered = [None] * len(pools)
    for slot, cand in zip(order, best_sel):
        ordered[slot] = cand
    return best_cost, ordered


def _tree_paths(root, nodes, edges, loops):
    """Root paths of every loop node inside a candidate tree."""
    adj: dict[str, list[str]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    parent = {root: None}
    order = [root]
    i = 0
    while i < len(order):
        cur = order[i]
        i += 1
        for nxt in sorted(adj.get(cur, []), key=natural_key):
            if nxt not in parent:
                parent[nxt] = cur
                order.append(nxt)
    paths = {}
    for n in nodes & loops.loop_nodes:
        seq = []
        cur = n
        while cur is not None:
            seq.append(cur)
            cur = parent[cur]
        paths[n] = list(reversed(seq))
    return paths


def _tree_admissible(
    g: FeederGraph,
    scenario: ScenarioConfig,
    der,
    nodes: frozenset,
    edges: frozenset,
    rigid_edges,
    faulted_pairs,
    loops,
    catalog_paths,
    t_net: float,
) -> bool:
    for e in rigid_edges:
        inside = (e.u in nodes) + (e.v in nodes)
        if inside == 1:
            return False
    for (u, v) in faulted_pairs:
        if u in nodes and v in nodes:
            return False

    # loop-node supply paths must be catalog paths (mirrors the model)
    paths = _tree_paths(der.node, nodes, edges, loops)
    for n, seq in paths.items():
        if tuple(seq) not in catalog_paths:
            return False

    served_p = sum(g.nodes[n].demand_p for n in nodes if g.nodes[n].is_critical)
    served_q = sum(g.nodes[n].demand_q for n in nodes if g.nodes[n].is_critical)
    if served_p > der.p_max + 1e-9 or served_q > der.q_max + 1e-9:
        return False

    if scenario.enforce_time_equity and math.isfinite(t_net):
        eps = scenario.epsilon_hours
        hi = der.energy_reserve / (t_net - eps)
        lo = der.energy_reserve / (t_net + eps)
        if served_p > hi + 1e-9:
            return False
        picks_cl = any(g.nodes[n].is_critical for n in nodes)
        if picks_cl and served_p < lo - 1e-9:
            return False

    # linearized voltages on the candidate tree
    fake = RsnPlan(
        der_index=0,
        der_node=der.node,
        availability=der.availability,
        energy_reserve=der.energy_reserve,
        nodes=sorted(nodes, key=natural_key),
        edges=sorted(edges),
        picked_cls=[],
        selected_paths={},
        served_p_kw=served_p,
        served_q_kvar=served_q,
        t_hours=math.inf,
        u_r_k=0.0,
    )
    volts = linear_voltages(fake, g, scenario.v_ref)
    for n, v in volts.items():
        if v < scenario.v_min - 1e-7 or v > scenario.v_max + 1e-7:
            return False
    return True


# ---------------------------------------------------------------------------
# full verification report
# ---------------------------------------------------------------------------


@dataclass
class VerificationReport:
    radial_ok: dict[int, bool]
    diagnostics: dict[int, list[str]]
    voltages: dict[int, dict[str, float]]
    loss_percent: dict[int, float]
    max_lin_deviation: dict[int, float]
    r_p: dict[int, float]
    r_p_total: float
    u_p: float
    u_r: float
    u_rc: float
    t_k: dict[int, float]
    t_net: float
    avg_bias: float
    monte_carlo: dict[int, dict] = field(default_factory=dict)

    def all_radial(self) -> bool:
        return all(self.radial_ok.values())

    def to_json(self, manifest: dict | None = None) -> str:
        def t_or_null(v):
            return None if math.isinf(v) else v

        doc = {
            "manifest": manifest or {},
            "radial_ok": {str(k + 1): v for k, v in self.radial_ok.items()},
            "diagnostics": {str(k + 1): v for k, v in self.diagnostics.items()},
            "voltages": {
                str(k + 1): {n: self.voltages[k][n] for n in sorted(self.voltages[k], key=natural_key)}
                for k in self.voltages
            },
            "loss_percent": {str(k + 1): v for k, v in self.loss_percent.items()},
            "max_lin_deviation_pu": {str(k + 1): v for k, v in self.max_lin_deviation.items()},
            "metrics": {
                "r_p": {str(k + 1): v for k, v in self.r_p.items()},
                "r_p_total": self.r_p_total,
                "u_p": self.u_p,
                "u_r": self.u_r,
                "u_rc": self.u_rc,
                "t_k_hours": {str(k + 1): t_or_null(v) for k, v in self.t_k.items()},
                "t_net_hours": t_or_null(self.t_net),
                "average_bias_hours": self.avg_bias,
            },
            "monte_carlo": {str(k + 1): v for k, v in self.monte_carlo.items()} or None,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def verify_plan(
    plan: RestorationPlan,
    graph: FeederGraph,
    v_ref: float = 1.0,
    uniform_p_e: float | None = None,
    mc_samples: int = 0,
    mc_seed: int = 0,
) -> VerificationReport:
    """Run every audit over a plan and recompute all metrics."""
    diags = audit_radiality(plan, graph)
    radial_ok = {k: not v for k, v in diags.items()}

    voltages: dict[int, dict[str, float]] = {}
    losses: dict[int, float] = {}
    lin_dev: dict[int, float] = {}
    r_p: dict[int, float] = {}
    t_k: dict[int, float] = {}
    mc: dict[int, dict] = {}

    for r in plan.rsns:
        k = r.der_index
        if not radial_ok[k]:
            continue
        sweep = sweep_powerflow(r, graph, v_ref=v_ref)
        lin = linear_voltages(r, graph, v_ref=v_ref)
        voltages[k] = sweep.voltages
        losses[k] = sweep.loss_percent
        lin_dev[k] = max(abs(sweep.voltages[n] - lin[n]) for n in lin)
        if uniform_p_e is not None:
            p_e = uniform_p_e
        else:
            edge_ps = [graph.edges[edge_key(a, b)].p_success for a, b in r.edges]
            p_e = edge_ps[0] if edge_ps and all(abs(p - edge_ps[0]) < 1e-12 for p in edge_ps) else None
        r_p[k] = rsn_reliability(len(r.nodes), p_e) if p_e is not None else float("nan")
        t_k[k] = r.t_hours
        if mc_samples > 0:
            q_edges = [graph.edges[edge_key(a, b)].q_failure for a, b in r.edges]
            est, stderr = monte_carlo_survival(q_edges, mc_samples, [mc_seed, k])
            mc[k] = {"survival": est, "stderr": stderr, "samples": mc_samples}

    u_p, u_r, u_rc = effective_unavailability(
        [len(r.nodes) for r in plan.rsns],
        [r.availability for r in plan.rsns],
        n_nodes=plan.n_nodes,
        n_ders=plan.n_ders,
        picked=plan.total_picked,
    )
    active = [bool(r.picked_cls) for r in plan.rsns]
    bias = average_bias(plan.t_net, [r.t_hours for r in plan.rsns], active)
    total = 1.0
    for v in r_p.values():
        total *= v if not math.isnan(v) else 1.0

    return VerificationReport(
        radial_ok=radial_ok,
        diagnostics=diags,
        voltages=voltages,
        loss_percent=losses,
        max_lin_deviation=lin_dev,
        r_p=r_p,
        r_p_total=total,
        u_p=u_p,
        u_r=u_r,
        u_rc=u_rc,
        t_k=t_k,
        t_net=plan.t_net,
        avg_bias=bias,
        monte_carlo=mc,
    )
