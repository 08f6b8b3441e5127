"""Pure-Python/numpy fallback for the approximate-MIC kernel.

Mirrors ``_mic_ext.approx_mic_ranks`` step for step, including the
order in which table terms are summed, so both backends pick the same
grids and agree to rounding.
"""

import math

import numpy as np


def _orient(eq_r, d_eq, opt_r, d_opt, n, q, p, xlogx):
    if d_opt < p or d_eq < q:
        return None

    cnt_eq = np.bincount(eq_r, minlength=d_eq)
    starts = np.concatenate(([0], np.cumsum(cnt_eq)[:-1]))
    raw = (starts * q) // n
    new_row = np.concatenate(([True], raw[1:] != raw[:-1]))
    row_of = np.cumsum(new_row) - 1
    rows = int(row_of[-1]) + 1
    if rows < q:
        return None
    bounds_eq = np.flatnonzero(new_row)[1:]

    labels = row_of[eq_r]
    row_cnt = np.bincount(labels, minlength=q)
    counts = np.zeros((d_opt + 1, q), dtype=np.int64)
    np.add.at(counts, (opt_r + 1, labels), 1)
    prefix = np.cumsum(counts, axis=0)
    prefix_tot = prefix.sum(axis=1)

    # g[i, j] for the column spanning ranks [i, j); summed over rows in order
    diff = prefix[None, :, :] - prefix[:, None, :]
    np.clip(diff, 0, None, out=diff)
    g = np.zeros((d_opt + 1, d_opt + 1))
    for r in range(q):
        g = g + xlogx[diff[:, :, r]]
    tot = np.clip(prefix_tot[None, :] - prefix_tot[:, None], 0, None)
    g = g - xlogx[tot]

    f_prev = np.full(d_opt + 1, -np.inf)
    f_prev[1:] = g[0, 1:]
    args = {}
    for t in range(2, p + 1):
        lo = d_opt if t == p else t
        hi = d_opt - (p - t)
        f_cur = np.full(d_opt + 1, -np.inf)
        arg_t = np.zeros(d_opt + 1, dtype=np.int64)
        for j in range(lo, hi + 1):
            cand = f_prev[t - 1:j] + g[t - 1:j, j]
            k = int(np.argmax(cand))
            f_cur[j] = cand[k]
            arg_t[j] = t - 1 + k
        args[t] = arg_t
        f_prev = f_cur

    cuts_opt = [0] * (p - 1)
    j = d_opt
    for t in range(p, 1, -1):
        j = int(args[t][j])
        cuts_opt[t - 2] = j

    rowterm = 0.0
    for r in range(q):
        rowterm += xlogx[row_cnt[r]]
    mi = math.log(n) + (float(f_prev[d_opt]) - rowterm) / n
    return mi, cuts_opt, [int(b) for b in bounds_eq]


def approx_mic_ranks(rx, ry, dx, dy, shapes, xlogx):
    m_total, n = rx.shape
    maxdim = max(2, int(np.max(shapes))) if len(shapes) else 2
    ncut = maxdim - 1
    value = np.zeros(m_total)
    mi_out = np.zeros(m_total)
    nx_out = np.zeros(m_total, dtype=np.int64)
    ny_out = np.zeros(m_total, dtype=np.int64)
    xc = np.full((m_total, ncut), -1, dtype=np.int64)
    yc = np.full((m_total, ncut), -1, dtype=np.int64)

    for m in range(m_total):
        best = -1.0
        for a, b in shapes:
            a, b = int(a), int(b)
            norm = math.log(min(a, b))
            for o in range(2):
                if o == 0:
                    res = _orient(ry[m], int(dy[m]), rx[m], int(dx[m]), n, b, a, xlogx)
                else:
                    res = _orient(rx[m], int(dx[m]), ry[m], int(dy[m]), n, a, b, xlogx)
                if res is None:
                    continue
                mi, cuts_opt, bounds_eq = res
                mi = max(mi, 0.0)
                val = mi / norm
                if val > best:
                    best = val
                    mi_out[m] = mi
                    nx_out[m], ny_out[m] = a, b
                    xc[m] = -1
                    yc[m] = -1
                    if o == 0:
                        xc[m, :a - 1] = cuts_opt
                        yc[m, :b - 1] = bounds_eq
                    else:
                        xc[m, :a - 1] = bounds_eq
                        yc[m, :b - 1] = cuts_opt
        value[m] = 0.0 if best < 0.0 else min(best, 1.0)
    return value, mi_out, nx_out, ny_out, xc, yc
