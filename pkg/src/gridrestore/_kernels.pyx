# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simplex pivot kernels (hot inner loops of the LP solver).

Mirrors the API of _kernels_py; selected at import time by the solver.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

IMPL = "compiled"


def ftran(double[:, ::1] binv, cnp.int32_t[::1] idxs, double[::1] vals):
    """d = Binv @ a for a sparse column a (entries vals at rows idxs)."""
    cdef Py_ssize_t m = binv.shape[0]
    cdef Py_ssize_t nnz = idxs.shape[0]
    out = np.zeros(m)
    cdef double[::1] d = out
    cdef Py_ssize_t i, t
    cdef double v
    cdef Py_ssize_t col
    for t in range(nnz):
        col = idxs[t]
        v = vals[t]
        for i in range(m):
            d[i] += binv[i, col] * v
    return out


def pivot_update(double[:, ::1] binv, double[::1] d, Py_ssize_t r):
    """Product-form update: row r scaled by the pivot, others eliminated."""
    cdef Py_ssize_t m = binv.shape[0]
    cdef double piv = d[r]
    cdef Py_ssize_t i, j
    cdef double factor
    for j in range(m):
        binv[r, j] /= piv
    for i in range(m):
        if i == r:
            continue
        factor = d[i]
        if factor == 0.0:
            continue
        for j in range(m):
            binv[i, j] -= factor * binv[r, j]


def ratio_test(
    double[::1] x_b,
    double[::1] delta,
    double[::1] lb_b,
    double[::1] ub_b,
    double feas_tol,
    double pivot_tol,
):
    """Two-pass Harris ratio test; see the python lane for semantics."""
    cdef Py_ssize_t m = x_b.shape[0]
    cdef Py_ssize_t i
    cdef double t_max = np.inf
    cdef double t, gap
    cdef double inf = np.inf

    # pass 1: largest step admissible at tolerance-relaxed bounds
    for i in range(m):
        if delta[i] > pivot_tol:
            if lb_b[i] != -inf:
                t = (x_b[i] - lb_b[i] + feas_tol) / delta[i]
                if t < t_max:
                    t_max = t
        elif delta[i] < -pivot_tol:
            if ub_b[i] != inf:
                t = (ub_b[i] - x_b[i] + feas_tol) / (-delta[i])
                if t < t_max:
                    t_max = t
    if t_max == inf:
        return inf, -1, False

    # pass 2: among admissible blockers take the largest pivot magnitude
    cdef Py_ssize_t best = -1
    cdef double best_mag = -1.0
    cdef double best_step = 0.0
    cdef double mag, strict
    for i in range(m):
        strict = inf
        if delta[i] > pivot_tol:
            if lb_b[i] != -inf:
                strict = (x_b[i] - lb_b[i]) / delta[i]
        elif delta[i] < -pivot_tol:
            if ub_b[i] != inf:
                strict = (ub_b[i] - x_b[i]) / (-delta[i])
        if strict <= t_max:
            mag = delta[i] if delta[i] > 0 else -delta[i]
            if mag > best_mag:
                best_mag = mag
                best = i
                best_step = strict if strict > 0.0 else 0.0
    if best < 0:
        # every candidate only fits the relaxed bound: degenerate step
        for i in range(m):
            if delta[i] > pivot_tol or delta[i] < -pivot_tol:
                mag = delta[i] if delta[i] > 0 else -delta[i]
                if mag > best_mag:
                    best_mag = mag
                    best = i
        best_step = 0.0
        if best < 0:
            return inf, -1, False
    return best_step, best, delta[best] < 0
