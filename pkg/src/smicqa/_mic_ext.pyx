# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled approximate-MIC kernel.

Operates on dense ranks only; see ``_mic_py`` for the reference fallback
that this module must agree with.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef struct Work:
    Py_ssize_t *cnt_eq      # points per rank on the equipartitioned axis
    Py_ssize_t *row_of      # compressed row label per rank on that axis
    Py_ssize_t *row_cnt     # points per row
    Py_ssize_t *bounds_eq   # rank boundaries between rows
    Py_ssize_t *prefix      # (d_opt + 1) * q cumulative counts
    Py_ssize_t *prefix_tot  # (d_opt + 1) cumulative totals
    double *f_prev
    double *f_cur
    Py_ssize_t *arg         # p * (d_opt + 1) backtracking table
    Py_ssize_t *cuts_opt


cdef inline double _g(Work *w, Py_ssize_t i, Py_ssize_t j, Py_ssize_t q,
                      const double *xlogx) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t r
    for r in range(q):
        s += xlogx[w.prefix[j * q + r] - w.prefix[i * q + r]]
    return s - xlogx[w.prefix_tot[j] - w.prefix_tot[i]]


cdef double _orient(Work *w, const long long *eq_r, Py_ssize_t d_eq,
                    const long long *opt_r, Py_ssize_t d_opt,
                    Py_ssize_t n, Py_ssize_t q, Py_ssize_t p,
                    const double *xlogx) noexcept nogil:
    """Return mutual information, or -1.0 when the shape is infeasible."""
    cdef Py_ssize_t i, j, t, r, start, raw, prev_raw, rows, lo, hi
    cdef double best, cand, rowterm
    cdef double *tmp

    if d_opt < p or d_eq < q:
        return -1.0

    for i in range(d_eq):
        w.cnt_eq[i] = 0
    for i in range(n):
        w.cnt_eq[eq_r[i]] += 1

    # equipartition by sorted position; a tie group takes the row of its
    # first element
    start = 0
    rows = 0
    prev_raw = -1
    for i in range(d_eq):
        raw = (start * q) // n
        if raw != prev_raw:
            if prev_raw >= 0:
                w.bounds_eq[rows - 1] = i
            rows += 1
            prev_raw = raw
        w.row_of[i] = rows - 1
        start += w.cnt_eq[i]
    if rows < q:
        return -1.0

    for r in range(q):
        w.row_cnt[r] = 0
    for i in range((d_opt + 1) * q):
        w.prefix[i] = 0
    for i in range(n):
        r = w.row_of[eq_r[i]]
        w.row_cnt[r] += 1
        w.prefix[(opt_r[i] + 1) * q + r] += 1
    w.prefix_tot[0] = 0
    for j in range(1, d_opt + 1):
        t = 0
        for r in range(q):
            w.prefix[j * q + r] += w.prefix[(j - 1) * q + r]
            t += w.prefix[j * q + r]
        w.prefix_tot[j] = t

    for j in range(1, d_opt + 1):
        w.f_prev[j] = _g(w, 0, j, q, xlogx)
        w.arg[j] = 0

    for t in range(2, p + 1):
        # layer t needs j in [t, d_opt - (p - t)]
        lo = t
        hi = d_opt - (p - t)
        if t == p:
            lo = d_opt
        for j in range(lo, hi + 1):
            best = -1e300
            for i in range(t - 1, j):
                cand = w.f_prev[i] + _g(w, i, j, q, xlogx)
                if cand > best:
                    best = cand
                    w.arg[t * (d_opt + 1) + j] = i
            w.f_cur[j] = best
        tmp = w.f_prev
        w.f_prev = w.f_cur
        w.f_cur = tmp

    # backtrack cuts on the optimized axis
    j = d_opt
    for t in range(p, 1, -1):
        j = w.arg[t * (d_opt + 1) + j]
        w.cuts_opt[t - 2] = j

    rowterm = 0.0
    for r in range(q):
        rowterm += xlogx[w.row_cnt[r]]
    return log(<double>n) + (w.f_prev[d_opt] - rowterm) / <double>n


def approx_mic_ranks(const long long[:, ::1] rx, const long long[:, ::1] ry,
                     const long long[::1] dx, const long long[::1] dy,
                     const long long[:, ::1] shapes, const double[::1] xlogx):
    """Heuristic MIC for a batch of rank-coded sequences.

    Returns ``(value, mi, nx, ny, xcuts, ycuts)``; cut arrays hold rank
    boundaries padded with -1. Sequences with no feasible shape get
    ``nx == ny == 0``.
    """
    cdef Py_ssize_t m_total = rx.shape[0]
    cdef Py_ssize_t n = rx.shape[1]
    cdef Py_ssize_t n_shapes = shapes.shape[0]
    cdef Py_ssize_t maxdim = 2, s, m, c, a, b, o
    for s in range(n_shapes):
        if shapes[s, 0] > maxdim:
            maxdim = shapes[s, 0]
        if shapes[s, 1] > maxdim:
            maxdim = shapes[s, 1]
    cdef Py_ssize_t ncut = maxdim - 1

    value_np = np.zeros(m_total, dtype=np.float64)
    mi_np = np.zeros(m_total, dtype=np.float64)
    nx_np = np.zeros(m_total, dtype=np.int64)
    ny_np = np.zeros(m_total, dtype=np.int64)
    xc_np = np.full((m_total, ncut), -1, dtype=np.int64)
    yc_np = np.full((m_total, ncut), -1, dtype=np.int64)
    cdef double[::1] value = value_np
    cdef double[::1] mi_out = mi_np
    cdef long long[::1] nx_out = nx_np
    cdef long long[::1] ny_out = ny_np
    cdef long long[:, ::1] xc = xc_np
    cdef long long[:, ::1] yc = yc_np

    cdef Work w
    cdef Py_ssize_t buf = n + 2
    w.cnt_eq = <Py_ssize_t *> malloc(buf * sizeof(Py_ssize_t))
    w.row_of = <Py_ssize_t *> malloc(buf * sizeof(Py_ssize_t))
    w.row_cnt = <Py_ssize_t *> malloc((maxdim + 1) * sizeof(Py_ssize_t))
    w.bounds_eq = <Py_ssize_t *> malloc((maxdim + 1) * sizeof(Py_ssize_t))
    w.prefix = <Py_ssize_t *> malloc(buf * (maxdim + 1) * sizeof(Py_ssize_t))
    w.prefix_tot = <Py_ssize_t *> malloc(buf * sizeof(Py_ssize_t))
    w.f_prev = <double *> malloc(buf * sizeof(double))
    w.f_cur = <double *> malloc(buf * sizeof(double))
    w.arg = <Py_ssize_t *> malloc(buf * (maxdim + 1) * sizeof(Py_ssize_t))
    w.cuts_opt = <Py_ssize_t *> malloc((maxdim + 1) * sizeof(Py_ssize_t))
    if (w.cnt_eq == NULL or w.row_of == NULL or w.row_cnt == NULL
            or w.bounds_eq == NULL or w.prefix == NULL or w.prefix_tot == NULL
            or w.f_prev == NULL or w.f_cur == NULL or w.arg == NULL
            or w.cuts_opt == NULL):
        free(w.cnt_eq); free(w.row_of); free(w.row_cnt); free(w.bounds_eq)
        free(w.prefix); free(w.prefix_tot); free(w.f_prev); free(w.f_cur)
        free(w.arg); free(w.cuts_opt)
        raise MemoryError()

    cdef double best, mi, norm, val
    cdef double *f0 = w.f_prev
    cdef double *f1 = w.f_cur
    cdef const double *table = &xlogx[0]
    try:
        with nogil:
            for m in range(m_total):
                best = -1.0
                for s in range(n_shapes):
                    a = shapes[s, 0]
                    b = shapes[s, 1]
                    norm = log(<double>(a if a < b else b))
                    for o in range(2):
                        w.f_prev = f0
                        w.f_cur = f1
                        if o == 0:
                            # rows: y equipartitioned into b; columns: x into a
                            mi = _orient(&w, &ry[m, 0], dy[m], &rx[m, 0], dx[m],
                                         n, b, a, table)
                        else:
                            mi = _orient(&w, &rx[m, 0], dx[m], &ry[m, 0], dy[m],
                                         n, a, b, table)
                        if mi < -0.5:
                            continue
                        if mi < 0.0:
                            mi = 0.0
                        val = mi / norm
                        if val > best:
                            best = val
                            mi_out[m] = mi
                            nx_out[m] = a
                            ny_out[m] = b
                            for c in range(ncut):
                                xc[m, c] = -1
                                yc[m, c] = -1
                            if o == 0:
                                for c in range(a - 1):
                                    xc[m, c] = w.cuts_opt[c]
                                for c in range(b - 1):
                                    yc[m, c] = w.bounds_eq[c]
                            else:
                                for c in range(a - 1):
                                    xc[m, c] = w.bounds_eq[c]
                                for c in range(b - 1):
                                    yc[m, c] = w.cuts_opt[c]
                if best < 0.0:
                    value[m] = 0.0
                else:
                    if best > 1.0:
                        best = 1.0
                    value[m] = best
    finally:
        free(w.cnt_eq); free(w.row_of); free(w.row_cnt); free(w.bounds_eq)
        free(w.prefix); free(w.prefix_tot); free(f0); free(f1)
        free(w.arg); free(w.cuts_opt)
    return value_np, mi_np, nx_np, ny_np, xc_np, yc_np
