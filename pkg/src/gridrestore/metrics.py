"""Reliability and restoration-time metrics over restored subtree networks.

All metrics are simple functions of the per-RSN node sets, the DER
availabilities and the picked critical loads, so they can be recomputed
independently of the optimizer for cross-checking.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence

__all__ = [
    "rsn_reliability",
    "plan_reliability",
    "effective_unavailability",
    "restoration_time",
    "average_bias",
]


def rsn_reliability(n_nodes: int, p_e: float) -> float:
    """Survival probability of one RSN: every line in series must hold."""
    l_k = max(n_nodes - 1, 0)
    return p_e**l_k


def plan_reliability(rsn_sizes: Iterable[int], p_e: float) -> float:
    total = 1.0
    for n in rsn_sizes:
        total *= rsn_reliability(n, p_e)
    return total


def effective_unavailability(
    rsn_sizes: Sequence[int],
    availabilities: Sequence[float],
    n_nodes: int,
    n_ders: int,
    picked: int,
) -> tuple[float, float, float]:
    """(U_P, U_R, U_RC): node-count surrogate, its availability-weighted
    form, and the optimizer objective including the pickup reward."""
    if len(rsn_sizes) != len(availabilities):
        raise ValueError("one availability per RSN required")
    u_p = float(sum(rsn_sizes))
    u_r = float(sum((1.0 - a) * n for n, a in zip(rsn_sizes, availabilities)))
    u_rc = u_r - float(n_ders * n_nodes * picked)
    return u_p, u_r, u_rc


def restoration_time(energy_kwh: float, served_p_kw: float) -> float:
    """Hours a DER can carry its served load; unlimited when idle."""
    if served_p_kw <= 0:
        return math.inf
    return energy_kwh / served_p_kw


def average_bias(t_net: float, t_ks: Sequence[float], active: Sequence[bool]) -> float:
    """Mean |t_net - t_k| over RSNs serving at least one critical load."""
    vals = [abs(t_net - t) for t, a in zip(t_ks, active) if a and math.isfinite(t)]
    if not vals:
        return 0.0
    return sum(vals) / len(vals)
