"""Bounded-variable primal simplex over the canonical model, plus a
HiGHS-backed lane for large instances.

The embedded solver runs a two-phase method: phase 1 drives artificial
variables out of an identity basis, phase 2 optimizes the real costs.
Pricing is Dantzig with a Bland fallback on stalling, the ratio test is
a two-pass Harris variant, and every tie-break is by lowest index so
results are bit-reproducible. The dense basis inverse is maintained by
the pivot kernels; the compiled lane is used when available.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import MilpModel

logger = logging.getLogger(__name__)

if os.environ.get("RESTORE_PURE_PY"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on build environment
        from . import _kernels_py as kernels

KERNEL_IMPL = kernels.IMPL

# rows above this size go to the HiGHS lane when engine="auto"
DENSE_ROW_LIMIT = 1500

_OPT_TOL = 1e-9
_PIVOT_TOL = 1e-10
_RATIO_TOL = 1e-9


class LpError(RuntimeError):
    pass


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded | limit
    x: np.ndarray | None  # structural variable values
    objective: float
    iterations: int
    basis: list[int] | None = None


class StandardLp:
    """Equality form min c'x, A x + s = b with bounded structurals and slacks."""

    def __init__(self, model: MilpModel):
        n = model.n_variables
        m = len(model.constraints)
        rows, cols, vals = [], [], []
        b = np.zeros(m)
        slack_lb = np.zeros(m)
        slack_ub = np.zeros(m)
        for i, con in enumerate(model.constraints):
            for idx, coef in con.terms:
                rows.append(i)
                cols.append(idx)
                vals.append(coef)
            b[i] = con.rhs
            if con.sense == "<=":
                slack_lb[i], slack_ub[i] = 0.0, np.inf
            elif con.sense == ">=":
                slack_lb[i], slack_ub[i] = -np.inf, 0.0
            elif con.sense == "=":
                slack_lb[i], slack_ub[i] = 0.0, 0.0
            else:
                raise LpError(f"unknown sense {con.sense!r}")
        self.n_struct = n
        self.n_rows = m
        struct = sp.csc_matrix((vals, (rows, cols)), shape=(m, n))
        self.a_struct = struct
        self.a_full = sp.hstack([struct, sp.identity(m, format="csc")], format="csc")
        self.a_full.sort_indices()
        self.b = b
        self.slack_lb = slack_lb
        self.slack_ub = slack_ub
        self.c_struct = model.objective.astype(float)
        # row split for the HiGHS lane
        senses = np.array([con.sense for con in model.constraints]) if m else np.array([])
        self._le_rows = np.where(senses == "<=")[0]
        self._ge_rows = np.where(senses == ">=")[0]
        self._eq_rows = np.where(senses == "=")[0]
        csr = struct.tocsr()
        self.a_ub = sp.vstack([csr[self._le_rows], -csr[self._ge_rows]], format="csr")
        self.b_ub = np.concatenate([b[self._le_rows], -b[self._ge_rows]])
        self.a_eq = csr[self._eq_rows]
        self.b_eq = b[self._eq_rows]


def _column(a: sp.csc_matrix, j: int):
    start, end = a.indptr[j], a.indptr[j + 1]
    return a.indices[start:end], a.data[start:end]


BASIC = 0
AT_LB = 1
AT_UB = 2
FREE = 3


class _Simplex:
    """One bounded-variable simplex run over fixed bounds.

    Column layout: structurals, then row slacks, then one artificial per
    row (phase 1 only; locked to zero afterwards).
    """

    def __init__(self, std: StandardLp, lb: np.ndarray, ub: np.ndarray):
        m = std.n_rows
        self.std = std
        self.m = m
        self.n_real = std.n_struct + m
        self.nt = self.n_real + m
        self.lb = np.concatenate([lb, std.slack_lb, np.zeros(m)])
        self.ub = np.concatenate([ub, std.slack_ub, np.zeros(m)])
        self.art_sign = np.ones(m)
        self.iterations = 0

    def column(self, j: int):
        if j < self.n_real:
            idxs, vals = _column(self.std.a_full, j)
            return idxs.astype(np.int32), vals.astype(float)
        i = j - self.n_real
        return np.array([i], dtype=np.int32), np.array([self.art_sign[i]])

    # -- starting bases -----------------------------------------------------

    def start_cold(self) -> None:
        m, nr = self.m, self.n_real
        self.x = np.zeros(self.nt)
        self.vstat = np.full(self.nt, AT_LB, dtype=np.int8)
        for j in range(nr):
            if np.isfinite(self.lb[j]):
                self.x[j] = self.lb[j]
                self.vstat[j] = AT_LB
            elif np.isfinite(self.ub[j]):
                self.x[j] = self.ub[j]
                self.vstat[j] = AT_UB
            else:
                self.x[j] = 0.0
                self.vstat[j] = FREE
        resid = self.std.b - self.std.a_full @ self.x[:nr]
        self.art_sign = np.where(resid >= 0, 1.0, -1.0)
        self.ub[nr:] = np.abs(resid) + 1.0
        self.x[nr:] = np.abs(resid)
        self.basis = list(range(nr, nr + m))
        self.vstat[nr:] = BASIC
        self.binv = np.diag(self.art_sign).copy()

    def start_from(self, basis: list[int]) -> bool:
        """Try a caller-supplied basis; report whether it is primal feasible."""
        nr = self.n_real
        if len(basis) != self.m or any(j >= nr for j in basis):
            return False
        self.x = np.zeros(self.nt)
        self.vstat = np.full(self.nt, AT_LB, dtype=np.int8)
        in_basis = set(basis)
        for j in range(nr):
            if j in in_basis:
                continue
            if np.isfinite(self.lb[j]):
                self.x[j] = self.lb[j]
                self.vstat[j] = AT_LB
            elif np.isfinite(self.ub[j]):
                self.x[j] = self.ub[j]
                self.vstat[j] = AT_UB
            else:
                self.x[j] = 0.0
                self.vstat[j] = FREE
        self.basis = list(basis)
        self.vstat[np.array(basis)] = BASIC
        self.ub[nr:] = 0.0
        try:
            self._refresh(np.array(basis))
        except LpError:
            return False
        x_b = self.x[np.array(basis)]
        lb_b = self.lb[np.array(basis)]
        ub_b = self.ub[np.array(basis)]
        return bool(np.all(x_b >= lb_b - 1e-7) and np.all(x_b <= ub_b + 1e-7))

    # -- core iteration -----------------------------------------------------

    def _phase(self, c: np.ndarray, max_iter: int, phase_one: bool) -> str:
        m = self.m
        nr = self.n_real
        a_full = self.std.a_full
        basis_arr = np.array(self.basis)
        x_b = self.x[basis_arr].copy()
        stall = 0
        bland = False
        last_obj = np.inf

        while True:
            if self.iterations >= max_iter:
                return "limit"
            self.iterations += 1

            y = c[basis_arr] @ self.binv
            z = c.copy()
            z[:nr] -= a_full.T @ y
            z[nr:] -= y * self.art_sign

            fixed = self.lb == self.ub
            attr = (
                ((self.vstat == AT_LB) & (z < -_OPT_TOL))
                | ((self.vstat == AT_UB) & (z > _OPT_TOL))
                | ((self.vstat == FREE) & (np.abs(z) > _OPT_TOL))
            ) & ~fixed
            if not attr.any():
                return "optimal"

            if bland:
                q = int(np.flatnonzero(attr)[0])
            else:
                q = int(np.argmax(np.where(attr, np.abs(z), -1.0)))
            if self.vstat[q] == AT_UB:
                sigma = -1.0
            elif self.vstat[q] == FREE:
                sigma = 1.0 if z[q] < 0 else -1.0
            else:
                sigma = 1.0

            idxs, vals = self.column(q)
            d = kernels.ftran(self.binv, idxs, vals)
            delta = sigma * d

            step, r, hit_upper = kernels.ratio_test(
                x_b, delta, self.lb[basis_arr], self.ub[basis_arr], _RATIO_TOL, _PIVOT_TOL
            )
            t_flip = self.ub[q] - self.lb[q]
            if not np.isfinite(step) and not np.isfinite(t_flip):
                return "unbounded"

            if t_flip <= step:
                x_b -= delta * t_flip
                self.x[basis_arr] = x_b
                self.x[q] = self.ub[q] if self.vstat[q] == AT_LB else self.lb[q]
                self.vstat[q] = AT_UB if self.vstat[q] == AT_LB else AT_LB
            else:
                leave = int(basis_arr[r])
                x_b -= delta * step
                enter_val = self.x[q] + sigma * step
                self.x[basis_arr] = x_b
                self.x[leave] = self.ub[leave] if hit_upper else self.lb[leave]
                self.vstat[leave] = AT_UB if hit_upper else AT_LB
                self.x[q] = enter_val
                self.vstat[q] = BASIC
                self.basis[r] = q
                basis_arr[r] = q
                kernels.pivot_update(self.binv, d, r)
                x_b[r] = enter_val
                if phase_one and leave >= nr and not hit_upper:
                    # an artificial that left the basis at zero never returns
                    self.ub[leave] = 0.0

            obj = float(c @ self.x)
            if obj < last_obj - 1e-12:
                last_obj = obj
                stall = 0
                bland = False
            else:
                stall += 1
                if stall > max(100, 2 * m):
                    bland = True

            if self.iterations % 250 == 0:
                self._refresh(basis_arr)
                x_b = self.x[basis_arr].copy()

    def _refresh(self, basis_arr: np.ndarray) -> None:
        """Recompute the basis inverse and basic values from scratch."""
        m = self.m
        bmat = np.zeros((m, m))
        for pos, j in enumerate(self.basis):
            idxs, vals = self.column(j)
            bmat[idxs, pos] = vals
        try:
            self.binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError as exc:
            raise LpError("basis became singular") from exc
        nonbasic = np.ones(self.nt, dtype=bool)
        nonbasic[basis_arr] = False
        xn = np.where(nonbasic, self.x, 0.0)
        rhs = self.std.b - self.std.a_full @ xn[: self.n_real] - xn[self.n_real :] * self.art_sign
        self.x[basis_arr] = self.binv @ rhs

    def solve(self, c_struct: np.ndarray, max_iter: int, basis_hint=None) -> tuple[str, float]:
        nr = self.n_real
        warm = basis_hint is not None and self.start_from(basis_hint)
        if not warm:
            self.start_cold()
            c1 = np.zeros(self.nt)
            c1[nr:] = 1.0
            status = self._phase(c1, max_iter, phase_one=True)
            if status == "limit":
                return "limit", np.nan
            if float(np.abs(self.x[nr:]).sum()) > 1e-7:
                return "infeasible", np.nan
            self.lb[nr:] = 0.0
            self.ub[nr:] = 0.0
            self.x[nr:] = 0.0

        c2 = np.zeros(self.nt)
        c2[: self.std.n_struct] = c_struct
        status = self._phase(c2, max_iter, phase_one=False)
        if status in ("unbounded", "limit"):
            return status, np.nan
        self._refresh(np.array(self.basis))
        obj = float(c_struct @ self.x[: self.std.n_struct])
        return "optimal", obj


def standard_form(model: MilpModel) -> StandardLp:
    std = getattr(model, "_std_cache", None)
    if std is None:
        std = StandardLp(model)
        model._std_cache = std
    return std


def solve_lp(
    model: MilpModel,
    lb: np.ndarray | None = None,
    ub: np.ndarray | None = None,
    engine: str = "auto",
    max_iter: int | None = None,
    basis_hint: list[int] | None = None,
) -> LpResult:
    """Solve the LP relaxation of the model under the given bounds.

    engine: "dense" for the embedded simplex, "highs" for scipy's HiGHS
    wrapper, "auto" to pick by row count. A primal-feasible basis_hint
    skips phase 1 in the dense engine.
    """
    std = standard_form(model)
    mlb, mub = model.bounds_arrays()
    if lb is None:
        lb = mlb
    if ub is None:
        ub = mub
    if engine == "auto":
        engine = "dense" if std.n_rows <= DENSE_ROW_LIMIT else "highs"

    if engine == "highs":
        return _solve_highs(std, lb, ub)
    if engine != "dense":
        raise LpError(f"unknown LP engine {engine!r}")

    if max_iter is None:
        max_iter = 20000 + 100 * std.n_rows
    sx = _Simplex(std, np.asarray(lb, dtype=float), np.asarray(ub, dtype=float))
    status, obj = sx.solve(std.c_struct, max_iter, basis_hint=basis_hint)
    if status != "optimal":
        return LpResult(status=status, x=None, objective=np.nan, iterations=sx.iterations)
    return LpResult(
        status="optimal",
        x=sx.x[: std.n_struct].copy(),
        objective=obj,
        iterations=sx.iterations,
        basis=list(sx.basis),
    )


def _solve_highs(std: StandardLp, lb: np.ndarray, ub: np.ndarray) -> LpResult:
    from scipy.optimize import linprog

    res = linprog(
        std.c_struct,
        A_ub=std.a_ub if std.a_ub.shape[0] else None,
        b_ub=std.b_ub if std.b_ub.shape[0] else None,
        A_eq=std.a_eq if std.a_eq.shape[0] else None,
        b_eq=std.b_eq if std.b_eq.shape[0] else None,
        bounds=list(zip(lb, ub)),
        method="highs",
    )
    status_map = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded"}
    status = status_map.get(res.status, "limit")
    if status != "optimal":
        return LpResult(status=status, x=None, objective=np.nan, iterations=int(res.nit or 0))
    return LpResult(
        status="optimal",
        x=np.asarray(res.x),
        objective=float(res.fun),
        iterations=int(res.nit or 0),
    )
