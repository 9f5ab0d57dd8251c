"""Canonical MILP construction for the restoration problem.

Builds a sparse mixed-integer linear program over node-DER assignment
binaries, critical-load pickup binaries and per-path selection binaries,
with linearized-DistFlow power flow, voltage limits, DER capacity and
optional restoration-time equity. Products of a path binary with a
continuous flow/voltage are eliminated with the big-M device.

Unit conventions: impedances and flow/voltage quantities are per-unit on
(base_kv, base_kva); capacity and equity rows are written in kW/kVAr.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .feeder import FeederGraph, ScenarioConfig, edge_key, natural_key
from .topology import (
    LoopSet,
    Orientation,
    PathCatalog,
    PathEntry,
    build_path_catalog,
    find_loops,
    orient,
)

__all__ = [
    "ModelError",
    "VariableHandle",
    "LinearConstraint",
    "MilpModel",
    "BuildContext",
    "ModelBuilder",
    "compute_t_net",
    "build_model",
    "VOLTAGE_BIG_M",
]

# voltage relaxation big-M in per-unit; grown automatically if the feeder
# could ever produce larger hypothetical path voltages
VOLTAGE_BIG_M = 2.0

_KIND_ORDER = ["v", "s", "y", "act", "p", "q", "V", "pp", "qp", "Vp", "zp", "zq", "zv"]
_BINARY_KINDS = {"v", "s", "y", "act"}


class ModelError(ValueError):
    """Raised when the model cannot be constructed from the given inputs."""


@dataclass(frozen=True)
class VariableHandle:
    index: int
    name: str
    kind: str
    node: str | None
    der: int | None
    alpha: int | None
    lb: float
    ub: float
    is_binary: bool


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[int, float], ...]
    sense: str  # "<=", "=", ">="
    rhs: float
    label: str

    @property
    def family(self) -> str:
        return self.label.split(":", 1)[0]


@dataclass
class BuildContext:
    """Topology artifacts and index maps kept for plan extraction."""

    graph: FeederGraph
    scenario: ScenarioConfig
    loops: LoopSet
    orientations: list[Orientation]
    catalog: PathCatalog
    v_idx: dict[tuple[str, int], int]
    s_idx: dict[str, int]
    y_idx: dict[tuple[int, tuple[str, ...]], int]
    entries_by_der: dict[int, list[PathEntry]]


class MilpModel:
    """Canonical sparse MILP: variables with bounds, rows, min objective."""

    def __init__(
        self,
        variables: list[VariableHandle],
        constraints: list[LinearConstraint],
        objective: np.ndarray,
        t_net: float,
        metadata: dict,
        context: BuildContext | None = None,
    ):
        self.variables = variables
        self.constraints = constraints
        self.objective = objective
        self.t_net = t_net
        self.metadata = metadata
        self.context = context
        self.name_to_index = {v.name: v.index for v in variables}
        self._check()

    def _check(self) -> None:
        n = len(self.variables)
        if self.objective.shape != (n,):
            raise ModelError("objective length does not match variable count")
        if not np.all(np.isfinite(self.objective)):
            raise ModelError("objective has non-finite coefficients")
        for con in self.constraints:
            seen = set()
            for idx, coef in con.terms:
                if not (0 <= idx < n):
                    raise ModelError(f"constraint {con.label} references unknown variable {idx}")
                if idx in seen:
                    raise ModelError(f"constraint {con.label} repeats variable {idx}")
                seen.add(idx)
                if not np.isfinite(coef):
                    raise ModelError(f"constraint {con.label} has non-finite coefficient")
        for v in self.variables:
            if v.is_binary and not (v.lb >= 0.0 and v.ub <= 1.0):
                raise ModelError(f"binary {v.name} must be bounded within [0, 1]")

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_binaries(self) -> int:
        return sum(1 for v in self.variables if v.is_binary)

    def binary_indices(self) -> list[int]:
        return [v.index for v in self.variables if v.is_binary]

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub


def compute_t_net(graph: FeederGraph) -> float:
    """Pooled restoration-time bound: total reserve over total critical demand."""
    if not graph.ders:
        raise ModelError("no DER units in feeder")
    total_p = graph.total_critical_p()
    if total_p <= 0:
        raise ModelError("total critical demand is zero")
    return sum(d.energy_reserve for d in graph.ders) / total_p


class ModelBuilder:
    def __init__(self, graph: FeederGraph, scenario: ScenarioConfig):
        self.graph = graph
        self.scenario = scenario
        self.loops = find_loops(graph)
        self.orientations = [
            orient(graph, der, self.loops, idx) for idx, der in enumerate(graph.ders)
        ]
        self.catalog = build_path_catalog(
            graph, graph.ders, self.loops, scenario.max_paths_per_loop
        )
        self.entries_by_der: dict[int, list[PathEntry]] = {
            k: [] for k in range(len(graph.ders))
        }
        for e in self.catalog.entries:
            if e.target in self.orientations[e.der_index].reachable:
                self.entries_by_der[e.der_index].append(e)

        # flat variable store
        self.variables: list[VariableHandle] = []
        self.constraints: list[LinearConstraint] = []
        self.v_idx: dict[tuple[str, int], int] = {}
        self.s_idx: dict[str, int] = {}
        self.y_idx: dict[tuple[int, tuple[str, ...]], int] = {}
        self.act_idx: dict[int, int] = {}
        self.p_idx: dict[tuple[str, int], int] = {}
        self.q_idx: dict[tuple[str, int], int] = {}
        self.V_idx: dict[tuple[str, int], int] = {}
        self.pp_idx: dict[tuple[int, tuple[str, ...]], int] = {}
        self.qp_idx: dict[tuple[int, tuple[str, ...]], int] = {}
        self.Vp_idx: dict[tuple[int, tuple[str, ...]], int] = {}
        self.zp_idx: dict[tuple[int, tuple[str, ...]], int] = {}
        self.zq_idx: dict[tuple[int, tuple[str, ...]], int] = {}
        self.zv_idx: dict[tuple[int, tuple[str, ...]], int] = {}

        # working bounds for the flow/voltage quantities
        self.p_cap = max(graph.total_critical_p() / graph.base_kva, 1e-9)
        self.q_cap = max(graph.total_critical_q() / graph.base_kva, 1e-9)
        max_drop = sum(
            e.r * self.p_cap + e.x * self.q_cap for e in graph.alive_edges()
        )
        self.volt_m = max(VOLTAGE_BIG_M, scenario.v_max + max_drop + 0.1)
        if scenario.big_m is not None:
            self.flow_m = scenario.big_m
        else:
            pmax_pu = max(d.p_max for d in graph.ders) / graph.base_kva if graph.ders else 1.0
            self.flow_m = 10.0 * pmax_pu
        if self.p_cap > self.flow_m or self.q_cap > self.flow_m:
            raise ModelError(
                f"big_m {self.flow_m} is smaller than the flow bound "
                f"{max(self.p_cap, self.q_cap)} (per-unit); raise big_m"
            )

    # -- variable helpers ---------------------------------------------------

    def _add_var(
        self,
        kind: str,
        node: str | None,
        der: int | None,
        alpha: int | None,
        lb: float,
        ub: float,
    ) -> int:
        parts = [kind]
        if node is not None:
            parts.append(str(node))
        if der is not None:
            parts.append(str(der + 1))
        if alpha is not None:
            parts.append(str(alpha))
        name = "_".join(parts)
        idx = len(self.variables)
        self.variables.append(
            VariableHandle(
                index=idx,
                name=name,
                kind=kind,
                node=node,
                der=der,
                alpha=alpha,
                lb=lb,
                ub=ub,
                is_binary=kind in _BINARY_KINDS,
            )
        )
        return idx

    def _row(self, terms, sense: str, rhs: float, label: str) -> None:
        merged: dict[int, float] = {}
        for idx, coef in terms:
            if coef == 0.0:
                continue
            merged[idx] = merged.get(idx, 0.0) + coef
        self.constraints.append(
            LinearConstraint(terms=tuple(sorted(merged.items())), sense=sense, rhs=rhs, label=label)
        )

    def _reachable(self, node: str, k: int) -> bool:
        return node in self.orientations[k].reachable

    # -- spec operations ----------------------------------------------------

    def build_variables(self) -> None:
        g = self.graph
        nodes = g.node_ids()
        n_der = len(g.ders)
        loop_nodes = self.loops.loop_nodes

        for node in nodes:
            for k in range(n_der):
                reach = self._reachable(node, k)
                ub = 1.0 if reach else 0.0
                self.v_idx[(node, k)] = self._add_var("v", node, k, None, 0.0, ub)
        for node in nodes:
            if g.nodes[node].is_critical:
                self.s_idx[node] = self._add_var("s", node, None, None, 0.0, 1.0)
        ordered_entries = sorted(
            (
                (e.target, k, e.alpha, e)
                for k in range(n_der)
                for e in self.entries_by_der[k]
            ),
            key=lambda t: (natural_key(t[0]), t[1], t[2]),
        )
        for target, k, alpha, e in ordered_entries:
            self.y_idx[(k, e.nodes)] = self._add_var("y", target, k, alpha, 0.0, 1.0)
        if self.scenario.enforce_time_equity:
            for k in range(n_der):
                self.act_idx[k] = self._add_var("act", None, k, None, 0.0, 1.0)

        for node in nodes:
            for k in range(n_der):
                reach = self._reachable(node, k)
                pcap = self.p_cap if reach else 0.0
                self.p_idx[(node, k)] = self._add_var("p", node, k, None, 0.0, pcap)
        for node in nodes:
            for k in range(n_der):
                reach = self._reachable(node, k)
                qcap = self.q_cap if reach else 0.0
                self.q_idx[(node, k)] = self._add_var("q", node, k, None, 0.0, qcap)
        for node in nodes:
            for k in range(n_der):
                reach = self._reachable(node, k)
                vcap = self.scenario.v_max if reach else 0.0
                self.V_idx[(node, k)] = self._add_var("V", node, k, None, 0.0, vcap)

        for target, k, alpha, e in ordered_entries:
            self.pp_idx[(k, e.nodes)] = self._add_var("pp", target, k, alpha, 0.0, self.p_cap)
        for target, k, alpha, e in ordered_entries:
            self.qp_idx[(k, e.nodes)] = self._add_var("qp", target, k, alpha, 0.0, self.q_cap)
        for target, k, alpha, e in ordered_entries:
            self.Vp_idx[(k, e.nodes)] = self._add_var(
                "Vp", target, k, alpha, -self.volt_m, self.volt_m
            )
        for target, k, alpha, e in ordered_entries:
            self.zp_idx[(k, e.nodes)] = self._add_var("zp", target, k, alpha, 0.0, self.p_cap)
        for target, k, alpha, e in ordered_entries:
            self.zq_idx[(k, e.nodes)] = self._add_var("zq", target, k, alpha, 0.0, self.q_cap)
        for target, k, alpha, e in ordered_entries:
            self.zv_idx[(k, e.nodes)] = self._add_var(
                "zv", target, k, alpha, -self.volt_m, self.volt_m
            )

    def linearize_product(
        self, y_idx: int, w_idx: int, z_idx: int, w_bound: float, signed: bool, tag: str
    ) -> None:
        """Tie z = y * w through four rows valid at integral y.

        Unsigned variant assumes w in [0, W]; the signed variant covers
        w in [-W, W] (used for path voltages).
        """
        if not np.isfinite(w_bound) or w_bound <= 0:
            raise ModelError(f"product {tag}: continuous factor lacks a finite bound")
        big_m = self.scenario.big_m if self.scenario.big_m is not None else self.flow_m
        if not signed and w_bound > max(big_m, self.volt_m):
            raise ModelError(f"product {tag}: bound {w_bound} exceeds big_m")
        w = w_bound
        if signed:
            self._row([(z_idx, 1.0), (y_idx, -w)], "<=", 0.0, f"lin:{tag}:1")
            self._row([(z_idx, 1.0), (y_idx, w)], ">=", 0.0, f"lin:{tag}:2")
            self._row([(z_idx, 1.0), (w_idx, -1.0), (y_idx, -w)], "<=", w, f"lin:{tag}:3")
            self._row([(z_idx, 1.0), (w_idx, -1.0), (y_idx, w)], ">=", -w, f"lin:{tag}:4")
        else:
            self._row([(z_idx, 1.0), (y_idx, -w)], "<=", 0.0, f"lin:{tag}:1")
            self._row([(z_idx, 1.0), (w_idx, -1.0)], "<=", 0.0, f"lin:{tag}:2")
            self._row([(z_idx, 1.0), (w_idx, -1.0), (y_idx, w)], ">=", -w, f"lin:{tag}:3")
            self._row([(z_idx, 1.0)], ">=", 0.0, f"lin:{tag}:4")

    def add_connectivity_constraints(self) -> None:
        g = self.graph
        n_der = len(g.ders)
        critical = set(g.critical_nodes())
        loop_clusters = self.loops.clusters

        for k, der in enumerate(g.ders):
            self._row([(self.v_idx[(der.node, k)], 1.0)], "=", 1.0, f"root_assign:d{k + 1}")

        for node in g.node_ids():
            terms = [(self.v_idx[(node, k)], 1.0) for k in range(n_der)]
            if node in critical:
                self._row(terms + [(self.s_idx[node], -1.0)], "=", 0.0, f"cl_pickup:{node}")
            else:
                self._row(terms, "<=", 1.0, f"single_assign:{node}")

        for e in g.alive_edges():
            if not e.switchable:
                for k in range(n_der):
                    self._row(
                        [(self.v_idx[(e.u, k)], 1.0), (self.v_idx[(e.v, k)], -1.0)],
                        "=",
                        0.0,
                        f"rigid_edge:{e.u}-{e.v}:d{k + 1}",
                    )

        for key in sorted(g.edges, key=lambda k: (natural_key(k[0]), natural_key(k[1]))):
            e = g.edges[key]
            if not e.faulted:
                continue
            in_cluster = any(
                e.u in c.nodes and e.v in c.nodes for c in loop_clusters
            )
            if in_cluster:
                continue  # alternate intact routes may legitimately reconnect them
            for k in range(n_der):
                self._row(
                    [(self.v_idx[(e.u, k)], 1.0), (self.v_idx[(e.v, k)], 1.0)],
                    "<=",
                    1.0,
                    f"faulted_sep:{e.u}-{e.v}:d{k + 1}",
                )

        for k in range(n_der):
            om = self.orientations[k]
            for child in sorted(om.parent_of, key=natural_key):
                par = om.parent_of[child]
                self._row(
                    [(self.v_idx[(child, k)], 1.0), (self.v_idx[(par, k)], -1.0)],
                    "<=",
                    0.0,
                    f"parent_child:{par}-{child}:d{k + 1}",
                )

        # path selection for loop nodes: parents energized, exactly one
        # route when energized, and nested choices must agree on prefixes
        for k in range(n_der):
            by_target: dict[str, list[PathEntry]] = {}
            for e in self.entries_by_der[k]:
                by_target.setdefault(e.target, []).append(e)
            for target in sorted(by_target, key=natural_key):
                entries = by_target[target]
                for e in entries:
                    y = self.y_idx[(k, e.nodes)]
                    if e.n_parents > 0:
                        terms = [(self.v_idx[(target, k)], 1.0), (y, 1.0)]
                        inv = 1.0 / e.n_parents
                        for par in e.parents:
                            terms.append((self.v_idx[(par, k)], -inv))
                        self._row(terms, "<=", 1.0, f"path_parents:{target}:d{k + 1}:a{e.alpha}")
                    for cut in range(1, len(e.nodes) - 1):
                        mid = e.nodes[cut - 1]
                        prefix = e.nodes[:cut]
                        if mid in self.loops.loop_nodes and (k, prefix) in self.y_idx:
                            self._row(
                                [(y, 1.0), (self.y_idx[(k, prefix)], -1.0)],
                                "<=",
                                0.0,
                                f"path_prefix:{target}:d{k + 1}:a{e.alpha}:{mid}",
                            )
                self._row(
                    [(self.y_idx[(k, e.nodes)], 1.0) for e in entries]
                    + [(self.v_idx[(target, k)], -1.0)],
                    "=",
                    0.0,
                    f"path_choice:{target}:d{k + 1}",
                )

    def add_powerflow_constraints(self) -> None:
        g = self.graph
        vref = self.scenario.v_ref
        loop_nodes = self.loops.loop_nodes

        ext_by_prefix: dict[tuple[int, tuple[str, ...]], list[PathEntry]] = {}
        for k in range(len(g.ders)):
            for e in self.entries_by_der[k]:
                if len(e.nodes) >= 2:
                    key = (k, e.nodes[:-1])
                    if key in self.y_idx:
                        ext_by_prefix.setdefault(key, []).append(e)

        for k, der in enumerate(g.ders):
            om = self.orientations[k]
            label_k = f"d{k + 1}"

            # plain tree recursion outside loops
            for node in sorted(om.reachable, key=natural_key):
                if node in loop_nodes:
                    continue
                children = om.children_of.get(node, ())
                p_terms = [
                    (self.p_idx[(node, k)], 1.0),
                    (self.v_idx[(node, k)], -g.p_pu(node)),
                ]
                q_terms = [
                    (self.q_idx[(node, k)], 1.0),
                    (self.v_idx[(node, k)], -g.q_pu(node)),
                ]
                for c in children:
                    p_terms.append((self.p_idx[(c, k)], -1.0))
                    q_terms.append((self.q_idx[(c, k)], -1.0))
                self._row(p_terms, "=", 0.0, f"flow_p:{node}:{label_k}")
                self._row(q_terms, "=", 0.0, f"flow_q:{node}:{label_k}")

            # conditional voltage drop along every oriented pair
            for child in sorted(om.parent_of, key=natural_key):
                par = om.parent_of[child]
                e = g.edges[edge_key(par, child)]
                base = [
                    (self.V_idx[(child, k)], 1.0),
                    (self.V_idx[(par, k)], -1.0),
                    (self.p_idx[(child, k)], e.r / vref),
                    (self.q_idx[(child, k)], e.x / vref),
                ]
                m = self.volt_m
                self._row(
                    base + [(self.v_idx[(child, k)], m)],
                    "<=",
                    m,
                    f"volt_drop_up:{par}-{child}:{label_k}",
                )
                self._row(
                    base + [(self.v_idx[(child, k)], -m)],
                    ">=",
                    -m,
                    f"volt_drop_lo:{par}-{child}:{label_k}",
                )

            # reference voltage at the DER root
            self._row(
                [
                    (self.V_idx[(der.node, k)], 1.0),
                    (self.v_idx[(der.node, k)], -vref),
                ],
                "=",
                0.0,
                f"volt_ref:{label_k}",
            )

            # per-path flow/voltage for loop nodes plus recombination
            for e in self.entries_by_der[k]:
                target = e.target
                y = self.y_idx[(k, e.nodes)]
                pp = self.pp_idx[(k, e.nodes)]
                qp = self.qp_idx[(k, e.nodes)]
                vp = self.Vp_idx[(k, e.nodes)]
                tag = f"{target}:{label_k}:a{e.alpha}"

                p_terms = [(pp, 1.0), (self.v_idx[(target, k)], -g.p_pu(target))]
                q_terms = [(qp, 1.0), (self.v_idx[(target, k)], -g.q_pu(target))]
                for c in om.children_of.get(target, ()):
                    p_terms.append((self.p_idx[(c, k)], -1.0))
                    q_terms.append((self.q_idx[(c, k)], -1.0))
                for ext in ext_by_prefix.get((k, e.nodes), ()):
                    p_terms.append((self.zp_idx[(k, ext.nodes)], -1.0))
                    q_terms.append((self.zq_idx[(k, ext.nodes)], -1.0))
                self._row(p_terms, "=", 0.0, f"path_flow_p:{tag}")
                self._row(q_terms, "=", 0.0, f"path_flow_q:{tag}")

                if len(e.nodes) == 1:
                    # trivial path: the DER sits on the loop itself
                    self._row(
                        [(vp, 1.0), (self.v_idx[(target, k)], -vref)],
                        "=",
                        0.0,
                        f"path_volt:{tag}",
                    )
                else:
                    prev = e.nodes[-2]
                    line = g.edges[edge_key(prev, target)]
                    terms = [
                        (vp, 1.0),
                        (pp, line.r / vref),
                        (qp, line.x / vref),
                    ]
                    prefix = e.nodes[:-1]
                    if (k, prefix) in self.Vp_idx:
                        terms.append((self.Vp_idx[(k, prefix)], -1.0))
                    else:
                        terms.append((self.V_idx[(prev, k)], -1.0))
                    self._row(terms, "=", 0.0, f"path_volt:{tag}")

                self.linearize_product(y, pp, self.zp_idx[(k, e.nodes)], self.p_cap, False, f"zp:{tag}")
                self.linearize_product(y, qp, self.zq_idx[(k, e.nodes)], self.q_cap, False, f"zq:{tag}")
                self.linearize_product(y, vp, self.zv_idx[(k, e.nodes)], self.volt_m, True, f"zv:{tag}")

            by_target: dict[str, list[PathEntry]] = {}
            for e in self.entries_by_der[k]:
                by_target.setdefault(e.target, []).append(e)
            for target in sorted(by_target, key=natural_key):
                entries = by_target[target]
                self._row(
                    [(self.p_idx[(target, k)], 1.0)]
                    + [(self.zp_idx[(k, e.nodes)], -1.0) for e in entries],
                    "=",
                    0.0,
                    f"recomb_p:{target}:{label_k}",
                )
                self._row(
                    [(self.q_idx[(target, k)], 1.0)]
                    + [(self.zq_idx[(k, e.nodes)], -1.0) for e in entries],
                    "=",
                    0.0,
                    f"recomb_q:{target}:{label_k}",
                )
                self._row(
                    [(self.V_idx[(target, k)], 1.0)]
                    + [(self.zv_idx[(k, e.nodes)], -1.0) for e in entries],
                    "=",
                    0.0,
                    f"recomb_v:{target}:{label_k}",
                )

    def add_operational_constraints(self) -> None:
        g = self.graph
        scenario = self.scenario
        n_der = len(g.ders)
        critical = g.critical_nodes()

        for node in g.node_ids():
            for k in range(n_der):
                if not self._reachable(node, k):
                    continue
                self._row(
                    [
                        (self.V_idx[(node, k)], 1.0),
                        (self.v_idx[(node, k)], -scenario.v_max),
                    ],
                    "<=",
                    0.0,
                    f"volt_ub:{node}:d{k + 1}",
                )
                self._row(
                    [
                        (self.V_idx[(node, k)], 1.0),
                        (self.v_idx[(node, k)], -scenario.v_min),
                    ],
                    ">=",
                    0.0,
                    f"volt_lb:{node}:d{k + 1}",
                )

        for k, der in enumerate(g.ders):
            p_terms = [
                (self.v_idx[(node, k)], g.nodes[node].demand_p)
                for node in critical
                if self._reachable(node, k)
            ]
            q_terms = [
                (self.v_idx[(node, k)], g.nodes[node].demand_q)
                for node in critical
                if self._reachable(node, k)
            ]
            self._row(p_terms, "<=", der.p_max, f"cap_p:d{k + 1}")
            self._row(q_terms, "<=", der.q_max, f"cap_q:d{k + 1}")

        if scenario.enforce_time_equity:
            t_net = compute_t_net(g)
            eps = scenario.epsilon_hours
            if eps >= t_net:
                raise ModelError(
                    f"equity tolerance {eps} h is not smaller than the pooled "
                    f"restoration time {t_net:.6g} h (degenerate band)"
                )
            for k, der in enumerate(g.ders):
                served = [
                    (self.v_idx[(node, k)], g.nodes[node].demand_p)
                    for node in critical
                    if self._reachable(node, k)
                ]
                hi = der.energy_reserve / (t_net - eps)
                lo = der.energy_reserve / (t_net + eps)
                self._row(served, "<=", hi, f"equity_up:d{k + 1}")
                # lower band applies only to DERs that picked a critical load
                act = self.act_idx[k]
                self._row(served + [(act, -lo)], ">=", 0.0, f"equity_lo:d{k + 1}")
                cl_terms = [
                    (self.v_idx[(node, k)], 1.0)
                    for node in critical
                    if self._reachable(node, k)
                ]
                self._row([(act, 1.0)] + [(i, -c) for i, c in cl_terms], "<=", 0.0, f"act_ub:d{k + 1}")
                for node in critical:
                    if self._reachable(node, k):
                        self._row(
                            [(act, 1.0), (self.v_idx[(node, k)], -1.0)],
                            ">=",
                            0.0,
                            f"act_lb:{node}:d{k + 1}",
                        )

    def build_objective(self) -> np.ndarray:
        g = self.graph
        c = np.zeros(len(self.variables))
        reward = len(g.ders) * len(g.nodes)
        for (node, k), idx in self.v_idx.items():
            c[idx] = 1.0 - g.ders[k].availability
        for node, idx in self.s_idx.items():
            c[idx] = -float(reward)
        return c

    def finish(self) -> MilpModel:
        families: dict[str, int] = {}
        for con in self.constraints:
            families[con.family] = families.get(con.family, 0) + 1
        kinds: dict[str, int] = {}
        for v in self.variables:
            kinds[v.kind] = kinds.get(v.kind, 0) + 1
        try:
            t_net = compute_t_net(self.graph)
        except ModelError:
            t_net = float("inf")
        metadata = {
            "families": families,
            "kinds": kinds,
            "binaries": sum(1 for v in self.variables if v.is_binary),
            "rows": len(self.constraints),
        }
        ctx = BuildContext(
            graph=self.graph,
            scenario=self.scenario,
            loops=self.loops,
            orientations=self.orientations,
            catalog=self.catalog,
            v_idx=dict(self.v_idx),
            s_idx=dict(self.s_idx),
            y_idx=dict(self.y_idx),
            entries_by_der={k: list(v) for k, v in self.entries_by_der.items()},
        )
        return MilpModel(
            variables=self.variables,
            constraints=self.constraints,
            objective=self.build_objective(),
            t_net=t_net,
            metadata=metadata,
            context=ctx,
        )


def build_model(graph: FeederGraph, scenario: ScenarioConfig) -> MilpModel:
    """Compose the full restoration MILP for a validated feeder."""
    builder = ModelBuilder(graph, scenario)
    builder.build_variables()
    builder.add_connectivity_constraints()
    builder.add_powerflow_constraints()
    builder.add_operational_constraints()
    return builder.finish()
