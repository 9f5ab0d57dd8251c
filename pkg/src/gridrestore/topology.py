"""Loop detection, per-DER tree orientation and restoration-path enumeration.

Tie switches turn the radial feeder into an open-loop graph, so nodes on
a cycle can be supplied along more than one route. This module finds the
cycle clusters, orients everything off-cycle as a rooted tree per DER,
and enumerates the candidate supply paths for nodes inside clusters.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import networkx as nx

from .feeder import DerUnit, FeederGraph, edge_key, natural_key

__all__ = [
    "LoopCluster",
    "LoopSet",
    "Orientation",
    "PathEntry",
    "PathCatalog",
    "find_loops",
    "orient",
    "enumerate_paths",
    "build_path_catalog",
    "IsolatedDerError",
]

logger = logging.getLogger(__name__)


class IsolatedDerError(RuntimeError):
    """DER node cannot reach any other node over non-faulted edges."""


@dataclass(frozen=True)
class LoopCluster:
    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]


@dataclass(frozen=True)
class LoopSet:
    clusters: tuple[LoopCluster, ...]

    @property
    def loop_nodes(self) -> frozenset[str]:
        out: set[str] = set()
        for c in self.clusters:
            out |= c.nodes
        return frozenset(out)

    @property
    def loop_edges(self) -> frozenset[tuple[str, str]]:
        out: set[tuple[str, str]] = set()
        for c in self.clusters:
            out |= c.edges
        return frozenset(out)

    def __bool__(self) -> bool:
        return bool(self.clusters)


@dataclass(frozen=True)
class Orientation:
    """BFS tree rooted at one DER over non-faulted edges.

    parent_of covers reachable non-loop nodes plus cluster entry points;
    loop-internal nodes are left to the path catalog. children_of is the
    inverse map over the same pairs.
    """

    der_index: int
    root: str
    parent_of: dict[str, str]
    children_of: dict[str, tuple[str, ...]]
    reachable: frozenset[str]
    loop_handled: frozenset[str]


@dataclass(frozen=True)
class PathEntry:
    der_index: int
    target: str
    alpha: int  # 1-based path index per (der, target)
    nodes: tuple[str, ...]  # full node sequence, DER root first, target last
    parents: tuple[str, ...]  # nodes excluding the target

    @property
    def n_parents(self) -> int:
        return len(self.parents)

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        return tuple(edge_key(a, b) for a, b in zip(self.nodes, self.nodes[1:]))


@dataclass
class PathCatalog:
    entries: list[PathEntry] = field(default_factory=list)
    truncated: dict[tuple[int, str], int] = field(default_factory=dict)

    def for_target(self, der_index: int, target: str) -> list[PathEntry]:
        return [e for e in self.entries if e.der_index == der_index and e.target == target]

    def lookup(self, der_index: int, nodes: tuple[str, ...]) -> PathEntry | None:
        for e in self.entries:
            if e.der_index == der_index and e.nodes == nodes:
                return e
        return None


def _alive_graph(graph: FeederGraph) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(graph.node_ids())
    for e in graph.alive_edges():
        g.add_edge(e.u, e.v)
    return g


def find_loops(graph: FeederGraph) -> LoopSet:
    """Cycle clusters of the non-faulted graph, tie switches included.

    An edge lies on some cycle exactly when it is not a bridge, so the
    union of fundamental cycles is the non-bridge subgraph. Overlapping
    cycles end up merged into one cluster per connected component, which
    keeps path enumeration well-defined on nested loops.
    """
    g = _alive_graph(graph)
    bridges = {edge_key(a, b) for a, b in nx.bridges(g)}
    cycle_edges = [
        e.key for e in graph.alive_edges() if e.key not in bridges
    ]
    if not cycle_edges:
        return LoopSet(clusters=())

    cluster_graph = nx.Graph(cycle_edges)
    clusters = []
    for comp in nx.connected_components(cluster_graph):
        comp_edges = frozenset(edge_key(a, b) for a, b in cluster_graph.edges(comp))
        clusters.append(LoopCluster(nodes=frozenset(comp), edges=comp_edges))
    clusters.sort(key=lambda c: min(natural_key(n) for n in c.nodes))
    return LoopSet(clusters=tuple(clusters))


def orient(graph: FeederGraph, der: DerUnit, loops: LoopSet, der_index: int = 0) -> Orientation:
    """Breadth-first orientation rooted at the DER node over non-faulted edges."""
    root = der.node
    if root not in graph.nodes:
        raise KeyError(f"DER node '{root}' not in feeder")
    if len(graph.nodes) > 1 and not graph.neighbors_alive(root):
        raise IsolatedDerError(f"DER at node '{root}' is isolated")

    parent: dict[str, str] = {}
    seen = {root}
    queue = deque([root])
    while queue:
        cur = queue.popleft()
        for nxt in graph.neighbors_alive(cur):
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = cur
                queue.append(nxt)

    loop_nodes = loops.loop_nodes
    covered: dict[str, str] = {}
    for node, par in parent.items():
        if node in loop_nodes and par in loop_nodes:
            continue  # loop-internal, handled by the path catalog
        covered[node] = par
    loop_handled = frozenset(n for n in seen if n in loop_nodes and n not in covered and n != root)

    children: dict[str, list[str]] = {}
    for node, par in covered.items():
        children.setdefault(par, []).append(node)
    children_frozen = {p: tuple(sorted(cs, key=natural_key)) for p, cs in children.items()}

    return Orientation(
        der_index=der_index,
        root=root,
        parent_of=covered,
        children_of=children_frozen,
        reachable=frozenset(seen),
        loop_handled=loop_handled,
    )


def enumerate_paths(graph: FeederGraph, der: DerUnit, target: str, k: int) -> list[list[str]]:
    """Up to k loopless paths DER->target over non-faulted edges.

    Ordered by nondecreasing hop count, ties broken lexicographically by
    the node-id sequence; with k at least the number of simple paths this
    is exactly the set of all simple paths (Yen-style enumeration).
    """
    if target == der.node:
        return [[der.node]]
    g = _alive_graph(graph)
    if target not in g or der.node not in g or not nx.has_path(g, der.node, target):
        return []

    collected: list[list[str]] = []
    group: list[list[str]] = []
    group_len = None
    gen = nx.shortest_simple_paths(g, der.node, target)
    for path in gen:
        if group_len is None or len(path) == group_len:
            group.append(path)
            group_len = len(path)
        else:
            group.sort(key=lambda p: [natural_key(n) for n in p])
            collected.extend(group)
            if len(collected) >= k:
                break
            group = [path]
            group_len = len(path)
    else:
        group.sort(key=lambda p: [natural_key(n) for n in p])
        collected.extend(group)
    return collected[:k]


def build_path_catalog(
    graph: FeederGraph, ders: tuple[DerUnit, ...], loops: LoopSet, k: int
) -> PathCatalog:
    """Enumerate candidate supply paths for every reachable loop node.

    Entries are kept prefix-closed: a path whose proper prefix (at some
    interior loop node) did not survive the k-truncation is dropped, so
    path-selection constraints can always chain to the root.
    """
    catalog = PathCatalog()
    loop_nodes = loops.loop_nodes
    for idx, der in enumerate(ders):
        kept: dict[tuple[str, ...], PathEntry] = {}
        targets = sorted((n for n in loop_nodes), key=natural_key)
        per_target: dict[str, list[list[str]]] = {}
        for target in targets:
            if target == der.node:
                paths = [[der.node]]
            else:
                paths = enumerate_paths(graph, der, target, k + 1)
                if len(paths) > k:
                    catalog.truncated[(idx, target)] = len(paths) - k
                    logger.warning(
                        "path catalog truncated at %d entries for DER %s -> node %s",
                        k, der.node, target,
                    )
                    paths = paths[:k]
            if paths:
                per_target[target] = paths

        # shorter paths first so prefixes are processed before extensions
        flat = []
        for target, paths in per_target.items():
            for path in paths:
                flat.append((len(path), [natural_key(n) for n in path], target, path))
        flat.sort(key=lambda t: (t[0], t[1]))

        alpha_counter: dict[str, int] = {}
        for _, _, target, path in flat:
            ok = True
            for cut in range(2, len(path)):
                mid = path[cut - 1]
                if mid in loop_nodes and tuple(path[:cut]) not in kept:
                    ok = False
                    break
            if not ok:
                logger.warning(
                    "dropping path %s for DER %s: prefix lost to truncation",
                    "-".join(path), der.node,
                )
                continue
            alpha_counter[target] = alpha_counter.get(target, 0) + 1
            entry = PathEntry(
                der_index=idx,
                target=target,
                alpha=alpha_counter[target],
                nodes=tuple(path),
                parents=tuple(path[:-1]),
            )
            kept[entry.nodes] = entry

        catalog.entries.extend(
            sorted(kept.values(), key=lambda e: (natural_key(e.target), e.alpha))
        )
    return catalog
