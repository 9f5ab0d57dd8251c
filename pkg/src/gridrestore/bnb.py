"""Best-bound branch and bound with depth-first dives over LP relaxations.

Branching picks the most fractional binary (ties to the lowest variable
index); after a branch the solver dives into the child suggested by the
fractional value and parks the sibling on a (bound, creation index) heap,
so node selection and the final answer are bit-deterministic.
"""

from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import LpResult, solve_lp, standard_form
from .model import MilpModel

logger = logging.getLogger(__name__)

__all__ = ["SolveOptions", "SolveStats", "MilpSolution", "solve_milp"]


@dataclass(frozen=True)
class SolveOptions:
    gap_tol: float = 1e-6
    int_tol: float = 1e-6
    node_limit: int = 200_000
    time_limit: float | None = None  # seconds
    lp_engine: str = "auto"


@dataclass
class SolveStats:
    nodes: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0
    incumbent_history: list[float] = field(default_factory=list)


@dataclass
class MilpSolution:
    status: str  # optimal | feasible | infeasible | unbounded | limit
    objective: float
    values: np.ndarray | None
    gap: float
    stats: SolveStats


@dataclass(order=True)
class _Node:
    bound: float
    order: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    depth: int = field(compare=False, default=0)


def _fractionality(x: np.ndarray, bins: np.ndarray) -> np.ndarray:
    xb = x[bins]
    return np.abs(xb - np.round(xb))


def solve_milp(model: MilpModel, options: SolveOptions | None = None) -> MilpSolution:
    """Solve the model to proven optimality within the gap tolerance."""
    opts = options or SolveOptions()
    t_start = time.monotonic()
    stats = SolveStats()
    std = standard_form(model)
    bins = np.array(model.binary_indices(), dtype=int)
    lb0, ub0 = model.bounds_arrays()

    engine = opts.lp_engine
    if engine == "auto":
        engine = "dense" if std.n_rows <= 1500 else "highs"
    logger.debug("branch and bound over %d rows, %d binaries, lp engine %s",
                 std.n_rows, bins.size, engine)

    incumbent_x: np.ndarray | None = None
    incumbent_obj = np.inf
    heap: list[_Node] = []
    order = 0
    dive: _Node | None = _Node(bound=-np.inf, order=order, lb=lb0, ub=ub0, depth=0)
    hit_limit = False

    def best_bound() -> float:
        cands = [n.bound for n in heap]
        if dive is not None:
            cands.append(dive.bound)
        return min(cands) if cands else incumbent_obj

    while True:
        if dive is not None:
            node = dive
            dive = None
        elif heap:
            node = heapq.heappop(heap)
        else:
            break

        if stats.nodes >= opts.node_limit:
            hit_limit = True
            break
        if opts.time_limit is not None and time.monotonic() - t_start > opts.time_limit:
            hit_limit = True
            break
        if node.bound >= incumbent_obj - 1e-9:
            continue

        stats.nodes += 1
        res: LpResult = solve_lp(model, lb=node.lb, ub=node.ub, engine=engine)
        stats.lp_iterations += res.iterations
        if res.status == "infeasible":
            continue
        if res.status == "unbounded":
            stats.wall_time = time.monotonic() - t_start
            return MilpSolution("unbounded", -np.inf, None, np.inf, stats)
        if res.status == "limit":
            raise RuntimeError("LP iteration limit inside branch and bound")

        if res.objective >= incumbent_obj - 1e-9:
            continue

        frac = _fractionality(res.x, bins) if bins.size else np.array([])
        if not bins.size or frac.max() <= opts.int_tol:
            incumbent_obj = res.objective
            incumbent_x = res.x.copy()
            stats.incumbent_history.append(incumbent_obj)
            continue

        j = int(bins[np.argmax(frac)])
        up_first = res.x[j] >= 0.5

        lb_dn, ub_dn = node.lb.copy(), node.ub.copy()
        ub_dn[j] = 0.0
        lb_up, ub_up = node.lb.copy(), node.ub.copy()
        lb_up[j] = 1.0
        order += 1
        child_dn = _Node(bound=res.objective, order=order, lb=lb_dn, ub=ub_dn, depth=node.depth + 1)
        order += 1
        child_up = _Node(bound=res.objective, order=order, lb=lb_up, ub=ub_up, depth=node.depth + 1)
        if up_first:
            dive = child_up
            heapq.heappush(heap, child_dn)
        else:
            dive = child_dn
            heapq.heappush(heap, child_up)

        if incumbent_x is not None:
            bb = best_bound()
            gap = (incumbent_obj - bb) / max(abs(incumbent_obj), 1e-9)
            if gap <= opts.gap_tol:
                break

    stats.wall_time = time.monotonic() - t_start
    if incumbent_x is None:
        if hit_limit:
            return MilpSolution("limit", np.inf, None, np.inf, stats)
        return MilpSolution("infeasible", np.inf, None, np.inf, stats)

    bb = best_bound() if (heap or dive is not None) else incumbent_obj
    gap = max(0.0, (incumbent_obj - bb) / max(abs(incumbent_obj), 1e-9))
    status = "feasible" if hit_limit and gap > opts.gap_tol else "optimal"
    return MilpSolution(status, incumbent_obj, incumbent_x, gap, stats)
