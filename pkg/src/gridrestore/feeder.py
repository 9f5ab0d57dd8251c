"""Feeder data model and scenario/feeder file ingestion.

A feeder is an undirected probabilistic graph: buses with (possibly
critical) demands, lines with impedance and switching/fault state, and
DER units with capacity, reserve energy and an availability figure.
Non-critical loads are assumed shed before restoration, so only critical
demands enter any downstream computation; nameplate values of other
nodes are carried for documentation only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

__all__ = [
    "FeederError",
    "NodeRecord",
    "EdgeRecord",
    "DerUnit",
    "ScenarioConfig",
    "FeederGraph",
    "parse_feeder",
    "serialize_feeder",
    "parse_scenario",
    "apply_scenario",
    "validate_feeder",
    "natural_key",
    "edge_key",
]


class FeederError(ValueError):
    """Raised for malformed feeder/scenario documents or broken invariants."""


def natural_key(node_id: str):
    """Sort key putting numeric ids in numeric order, others after."""
    try:
        return (0, int(node_id), "")
    except ValueError:
        return (1, 0, node_id)


def edge_key(a: str, b: str) -> tuple[str, str]:
    """Canonical unordered endpoint pair."""
    return (a, b) if natural_key(a) <= natural_key(b) else (b, a)


@dataclass(frozen=True)
class NodeRecord:
    id: str
    demand_p: float = 0.0  # kW nameplate
    demand_q: float = 0.0  # kVAr nameplate
    is_critical: bool = False

    def restoration_p(self) -> float:
        """Demand seen by restoration: zero unless critical."""
        return self.demand_p if self.is_critical else 0.0

    def restoration_q(self) -> float:
        return self.demand_q if self.is_critical else 0.0


@dataclass(frozen=True)
class EdgeRecord:
    u: str
    v: str
    r: float  # per-unit resistance
    x: float  # per-unit reactance
    switchable: bool = True
    normally_open: bool = False
    faulted: bool = False
    p_success: float = 1.0

    @property
    def key(self) -> tuple[str, str]:
        return edge_key(self.u, self.v)

    @property
    def q_failure(self) -> float:
        return 1.0 - self.p_success


@dataclass(frozen=True)
class DerUnit:
    node: str
    p_max: float  # kW
    q_max: float  # kVAr
    energy_reserve: float  # kWh
    availability: float


@dataclass(frozen=True)
class ScenarioConfig:
    faulted_edges: tuple[str, ...] = ()
    epsilon_hours: float | None = None
    enforce_time_equity: bool = False
    v_min: float = 0.95
    v_max: float = 1.05
    v_ref: float = 1.0
    big_m: float | None = None
    max_paths_per_loop: int = 8
    global_p_success_override: float | None = None

    def __post_init__(self):
        if not (0.0 < self.v_min < self.v_ref <= self.v_max):
            raise FeederError(
                f"voltage bounds must satisfy 0 < v_min < v_ref <= v_max, "
                f"got v_min={self.v_min}, v_ref={self.v_ref}, v_max={self.v_max}"
            )
        if self.enforce_time_equity:
            if self.epsilon_hours is None or self.epsilon_hours <= 0:
                raise FeederError("epsilon_hours must be > 0 when time equity is enforced")
        if self.big_m is not None and self.big_m <= 0:
            raise FeederError("big_m must be positive")
        if self.max_paths_per_loop < 1:
            raise FeederError("max_paths_per_loop must be a positive integer")
        if self.global_p_success_override is not None and not (
            0.0 <= self.global_p_success_override <= 1.0
        ):
            raise FeederError("p_success_override must lie in [0, 1]")


@dataclass(frozen=True)
class FeederGraph:
    nodes: dict[str, NodeRecord]
    edges: dict[tuple[str, str], EdgeRecord]
    ders: tuple[DerUnit, ...]
    base_kv: float
    base_kva: float
    adjacency: dict[str, tuple[str, ...]] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for (a, b) in sorted(self.edges, key=lambda k: (natural_key(k[0]), natural_key(k[1]))):
            adj[a].append(b)
            adj[b].append(a)
        frozen = {n: tuple(sorted(vs, key=natural_key)) for n, vs in adj.items()}
        object.__setattr__(self, "adjacency", frozen)

    # -- convenience views ------------------------------------------------

    def node_ids(self) -> list[str]:
        return sorted(self.nodes, key=natural_key)

    def critical_nodes(self) -> list[str]:
        return [n for n in self.node_ids() if self.nodes[n].is_critical]

    def der_nodes(self) -> list[str]:
        return [d.node for d in self.ders]

    def alive_edges(self) -> list[EdgeRecord]:
        """Edges usable for restoration: everything not faulted (ties included)."""
        return [
            self.edges[k]
            for k in sorted(self.edges, key=lambda k: (natural_key(k[0]), natural_key(k[1])))
            if not self.edges[k].faulted
        ]

    def neighbors_alive(self, node: str) -> list[str]:
        out = []
        for other in self.adjacency[node]:
            if not self.edges[edge_key(node, other)].faulted:
                out.append(other)
        return out

    def p_pu(self, node: str) -> float:
        return self.nodes[node].restoration_p() / self.base_kva

    def q_pu(self, node: str) -> float:
        return self.nodes[node].restoration_q() / self.base_kva

    def total_critical_p(self) -> float:
        return sum(self.nodes[n].demand_p for n in self.critical_nodes())

    def total_critical_q(self) -> float:
        return sum(self.nodes[n].demand_q for n in self.critical_nodes())


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_NODE_FIELDS = {"id", "p_kw", "q_kvar", "critical"}
_EDGE_FIELDS = {"from", "to", "r_pu", "x_pu", "switchable", "normally_open", "faulted", "p_success"}
_DER_FIELDS = {"node", "p_max_kw", "q_max_kvar", "energy_kwh", "availability"}
_TOP_FIELDS = {"base_kv", "base_kva", "nodes", "edges", "ders"}
_SCENARIO_FIELDS = {
    "faulted_edges",
    "epsilon_hours",
    "enforce_time_equity",
    "v_min",
    "v_max",
    "v_ref",
    "big_m",
    "max_paths_per_loop",
    "p_success_override",
}


def _load_json(document: str, what: str) -> dict:
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise FeederError(f"{what} syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise FeederError(f"{what} document must be a JSON object")
    return data


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise FeederError(f"unknown field(s) {unknown} in {where}")


def _num(obj: dict, key: str, where: str, default=None):
    if key not in obj:
        if default is None:
            raise FeederError(f"missing field '{key}' in {where}")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise FeederError(f"field '{key}' in {where} must be a number")
    return float(val)


def _flag(obj: dict, key: str, where: str, default=False) -> bool:
    val = obj.get(key, default)
    if not isinstance(val, bool):
        raise FeederError(f"field '{key}' in {where} must be a boolean")
    return val


def parse_feeder(document: str) -> FeederGraph:
    """Parse a UTF-8 JSON feeder document into a validated FeederGraph."""
    data = _load_json(document, "feeder")
    _reject_unknown(data, _TOP_FIELDS, "feeder document")
    base_kv = _num(data, "base_kv", "feeder document")
    base_kva = _num(data, "base_kva", "feeder document")
    if base_kv <= 0 or base_kva <= 0:
        raise FeederError("base_kv and base_kva must be positive")

    nodes: dict[str, NodeRecord] = {}
    for i, raw in enumerate(data.get("nodes", [])):
        where = f"nodes[{i}]"
        _reject_unknown(raw, _NODE_FIELDS, where)
        if "id" not in raw:
            raise FeederError(f"missing field 'id' in {where}")
        nid = str(raw["id"])
        if nid in nodes:
            raise FeederError(f"duplicate node id '{nid}'")
        rec = NodeRecord(
            id=nid,
            demand_p=_num(raw, "p_kw", where, default=0.0),
            demand_q=_num(raw, "q_kvar", where, default=0.0),
            is_critical=_flag(raw, "critical", where),
        )
        if rec.demand_p < 0 or rec.demand_q < 0:
            raise FeederError(f"negative demand at node '{nid}'")
        nodes[nid] = rec

    edges: dict[tuple[str, str], EdgeRecord] = {}
    for i, raw in enumerate(data.get("edges", [])):
        where = f"edges[{i}]"
        _reject_unknown(raw, _EDGE_FIELDS, where)
        for req in ("from", "to"):
            if req not in raw:
                raise FeederError(f"missing field '{req}' in {where}")
        a, b = str(raw["from"]), str(raw["to"])
        for endpoint in (a, b):
            if endpoint not in nodes:
                raise FeederError(f"edge {a}-{b} references absent node '{endpoint}'")
        if a == b:
            raise FeederError(f"self-loop edge at node '{a}'")
        key = edge_key(a, b)
        if key in edges:
            raise FeederError(f"duplicate edge {key[0]}-{key[1]}")
        rec = EdgeRecord(
            u=key[0],
            v=key[1],
            r=_num(raw, "r_pu", where),
            x=_num(raw, "x_pu", where),
            switchable=_flag(raw, "switchable", where, default=True),
            normally_open=_flag(raw, "normally_open", where),
            faulted=_flag(raw, "faulted", where),
            p_success=_num(raw, "p_success", where, default=1.0),
        )
        if rec.r < 0 or rec.x < 0:
            raise FeederError(f"negative impedance on edge {a}-{b}")
        if not (0.0 <= rec.p_success <= 1.0):
            raise FeederError(f"p_success out of [0, 1] on edge {a}-{b}")
        edges[key] = rec

    ders = []
    seen_der_nodes = set()
    for i, raw in enumerate(data.get("ders", [])):
        where = f"ders[{i}]"
        _reject_unknown(raw, _DER_FIELDS, where)
        if "node" not in raw:
            raise FeederError(f"missing field 'node' in {where}")
        node = str(raw["node"])
        if node not in nodes:
            raise FeederError(f"DER references absent node '{node}'")
        if node in seen_der_nodes:
            raise FeederError(f"more than one DER at node '{node}'")
        seen_der_nodes.add(node)
        der = DerUnit(
            node=node,
            p_max=_num(raw, "p_max_kw", where),
            q_max=_num(raw, "q_max_kvar", where),
            energy_reserve=_num(raw, "energy_kwh", where),
            availability=_num(raw, "availability", where),
        )
        if der.p_max <= 0:
            raise FeederError(f"DER at '{node}': p_max_kw must be > 0")
        if der.q_max < 0:
            raise FeederError(f"DER at '{node}': q_max_kvar must be >= 0")
        if der.energy_reserve <= 0:
            raise FeederError(f"DER at '{node}': energy_kwh must be > 0")
        if not (0.0 < der.availability <= 1.0):
            raise FeederError(f"DER at '{node}': availability must lie in (0, 1]")
        ders.append(der)

    return FeederGraph(nodes=nodes, edges=edges, ders=tuple(ders), base_kv=base_kv, base_kva=base_kva)


def serialize_feeder(graph: FeederGraph) -> str:
    """Inverse of parse_feeder (round-trip identity, deterministic ordering)."""
    doc = {
        "base_kv": graph.base_kv,
        "base_kva": graph.base_kva,
        "nodes": [
            {
                "id": n.id,
                "p_kw": n.demand_p,
                "q_kvar": n.demand_q,
                "critical": n.is_critical,
            }
            for n in (graph.nodes[i] for i in graph.node_ids())
        ],
        "edges": [
            {
                "from": e.u,
                "to": e.v,
                "r_pu": e.r,
                "x_pu": e.x,
                "switchable": e.switchable,
                "normally_open": e.normally_open,
                "faulted": e.faulted,
                "p_success": e.p_success,
            }
            for e in (graph.edges[k] for k in sorted(graph.edges, key=lambda k: (natural_key(k[0]), natural_key(k[1]))))
        ],
        "ders": [
            {
                "node": d.node,
                "p_max_kw": d.p_max,
                "q_max_kvar": d.q_max,
                "energy_kwh": d.energy_reserve,
                "availability": d.availability,
            }
            for d in graph.ders
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def parse_scenario(document: str) -> ScenarioConfig:
    """Parse a scenario JSON document."""
    data = _load_json(document, "scenario")
    _reject_unknown(data, _SCENARIO_FIELDS, "scenario document")
    faulted = data.get("faulted_edges", [])
    if not isinstance(faulted, list) or not all(isinstance(s, str) for s in faulted):
        raise FeederError("faulted_edges must be an array of 'from-to' strings")
    kwargs = dict(
        faulted_edges=tuple(faulted),
        enforce_time_equity=_flag(data, "enforce_time_equity", "scenario"),
        v_min=_num(data, "v_min", "scenario", default=0.95),
        v_max=_num(data, "v_max", "scenario", default=1.05),
        v_ref=_num(data, "v_ref", "scenario", default=1.0),
        max_paths_per_loop=int(_num(data, "max_paths_per_loop", "scenario", default=8.0)),
    )
    if data.get("epsilon_hours") is not None:
        kwargs["epsilon_hours"] = _num(data, "epsilon_hours", "scenario")
    if data.get("big_m") is not None:
        kwargs["big_m"] = _num(data, "big_m", "scenario")
    if data.get("p_success_override") is not None:
        kwargs["global_p_success_override"] = _num(data, "p_success_override", "scenario")
    return ScenarioConfig(**kwargs)


def _resolve_edge_ref(graph: FeederGraph, ref: str) -> tuple[str, str]:
    if "-" not in ref:
        raise FeederError(f"edge reference '{ref}' is not of the form 'from-to'")
    # node ids may themselves contain dashes; try every split point
    for pos in range(1, len(ref)):
        if ref[pos] != "-":
            continue
        key = edge_key(ref[:pos], ref[pos + 1 :])
        if key in graph.edges:
            return key
    raise FeederError(f"unknown edge reference '{ref}'")


def apply_scenario(graph: FeederGraph, scenario: ScenarioConfig) -> FeederGraph:
    """Return a copy with fault flags set and probabilities overridden.

    Topology (node and edge sets) is never altered; the input graph is
    left untouched.
    """
    to_fault = {_resolve_edge_ref(graph, ref) for ref in scenario.faulted_edges}
    new_edges = {}
    for key, e in graph.edges.items():
        changed = e
        if key in to_fault:
            changed = replace(changed, faulted=True)
        if scenario.global_p_success_override is not None:
            changed = replace(changed, p_success=scenario.global_p_success_override)
        new_edges[key] = changed
    return FeederGraph(
        nodes=dict(graph.nodes),
        edges=new_edges,
        ders=graph.ders,
        base_kv=graph.base_kv,
        base_kva=graph.base_kva,
    )


def reachable_from(graph: FeederGraph, start: str) -> set[str]:
    """Nodes reachable from start over non-faulted edges (ties included)."""
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for other in graph.neighbors_alive(cur):
            if other not in seen:
                seen.add(other)
                stack.append(other)
    return seen


def validate_feeder(graph: FeederGraph) -> list[str]:
    """Return one diagnostic string per violated invariant (empty when clean).

    Type-level invariants are enforced at parse time, so on a parsed
    graph only reachability-class findings can appear here; direct
    constructor use is checked in full.
    """
    diags: list[str] = []
    for n in graph.node_ids():
        rec = graph.nodes[n]
        if rec.demand_p < 0 or rec.demand_q < 0:
            diags.append(f"node {n}: negative demand")
    for key, e in sorted(graph.edges.items()):
        if e.r < 0 or e.x < 0:
            diags.append(f"edge {key[0]}-{key[1]}: negative impedance")
        if not (0.0 <= e.p_success <= 1.0):
            diags.append(f"edge {key[0]}-{key[1]}: p_success {e.p_success} out of [0, 1]")
        for endpoint in key:
            if endpoint not in graph.nodes:
                diags.append(f"edge {key[0]}-{key[1]}: dangling endpoint {endpoint}")
    der_nodes = set()
    for d in graph.ders:
        if d.node not in graph.nodes:
            diags.append(f"DER at {d.node}: node missing")
            continue
        if d.node in der_nodes:
            diags.append(f"DER at {d.node}: duplicate DER node")
        der_nodes.add(d.node)
        if not (0.0 < d.availability <= 1.0):
            diags.append(f"DER at {d.node}: availability {d.availability} out of (0, 1]")
        if len(graph.nodes) > 1 and len(reachable_from(graph, d.node)) <= 1:
            diags.append(f"DER at {d.node}: isolated (reaches no other node over non-faulted edges)")
    return diags
