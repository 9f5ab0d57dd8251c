"""Pure-numpy implementations of the simplex pivot kernels.

Fallback lane for environments without the compiled extension; the
compiled module in _kernels.pyx exposes the same three functions.
"""

from __future__ import annotations

import numpy as np

IMPL = "python"


def ftran(binv: np.ndarray, idxs: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """d = Binv @ a where a is sparse with entries vals at rows idxs."""
    if idxs.size == 0:
        return np.zeros(binv.shape[0])
    return binv[:, idxs] @ vals


def pivot_update(binv: np.ndarray, d: np.ndarray, r: int) -> None:
    """Product-form basis inverse update for entering column d, leaving row r."""
    piv = d[r]
    binv[r, :] /= piv
    scale = d.copy()
    scale[r] = 0.0
    binv -= np.outer(scale, binv[r, :])


def ratio_test(
    x_b: np.ndarray,
    delta: np.ndarray,
    lb_b: np.ndarray,
    ub_b: np.ndarray,
    feas_tol: float,
    pivot_tol: float,
) -> tuple[float, int, bool]:
    """Two-pass Harris ratio test for x_b(t) = x_b - t * delta, t >= 0.

    Returns (step, blocking position, hit_upper); position -1 means no
    basic variable blocks. Among blockers admissible at the relaxed
    bound, the largest |delta| wins (ties to the lowest index) so pivots
    stay well-conditioned and deterministic.
    """
    m = x_b.shape[0]
    dec = delta > pivot_tol
    inc = delta < -pivot_tol

    t_strict = np.full(m, np.inf)
    t_relax = np.full(m, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        lb_gap = x_b - lb_b
        ub_gap = ub_b - x_b
        t_strict[dec] = lb_gap[dec] / delta[dec]
        t_relax[dec] = (lb_gap[dec] + feas_tol) / delta[dec]
        t_strict[inc] = ub_gap[inc] / (-delta[inc])
        t_relax[inc] = (ub_gap[inc] + feas_tol) / (-delta[inc])
    t_strict[~np.isfinite(t_strict)] = np.inf
    t_relax[~np.isfinite(t_relax)] = np.inf

    t_max = t_relax.min() if m else np.inf
    if not np.isfinite(t_max):
        return np.inf, -1, False

    cand = t_strict <= t_max
    if not cand.any():  # defensive: strict < relaxed holds whenever feas_tol > 0
        cand = t_relax <= t_max
    mags = np.where(cand, np.abs(delta), -1.0)
    r = int(np.argmax(mags))
    step = max(t_strict[r], 0.0)
    return float(step), r, bool(delta[r] < 0)
