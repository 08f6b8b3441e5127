"""Independent reference computations for the test suite.

Nothing here imports smicqa: each routine recomputes its quantity the slow,
obvious way (plain loops, dict counting) so it can check the package.
"""

import itertools
import math


def cell_counting_mi(xs, ys, x_cuts, y_cuts):
    """Mutual information (nats) by assigning each point to a cell by hand."""
    def bin_of(v, cuts):
        k = 0
        for c in cuts:
            if v >= c:
                k += 1
        return k

    n = len(xs)
    joint, px, py = {}, {}, {}
    for x, y in zip(xs, ys):
        u, v = bin_of(x, x_cuts), bin_of(y, y_cuts)
        joint[(u, v)] = joint.get((u, v), 0) + 1
        px[u] = px.get(u, 0) + 1
        py[v] = py.get(v, 0) + 1
    total = 0.0
    for (u, v), c in joint.items():
        p = c / n
        total += p * math.log(p / ((px[u] / n) * (py[v] / n)))
    return total


def _midpoints(values):
    uniq = sorted(set(values))
    return [(a + b) / 2.0 for a, b in zip(uniq, uniq[1:])]


def brute_force_mic(xs, ys, exponent=0.5):
    """Max over every admissible grid of MI / log(min(nx, ny)).

    Shapes: nx, ny >= 2 with nx * ny < n ** exponent, plus (2, 2).
    """
    n = len(xs)
    bound = n ** exponent
    shapes = {(2, 2)}
    for nx in range(2, n + 1):
        for ny in range(2, n + 1):
            if nx * ny < bound:
                shapes.add((nx, ny))
    cx, cy = _midpoints(xs), _midpoints(ys)
    best = 0.0
    for nx, ny in shapes:
        for xc in itertools.combinations(cx, nx - 1):
            for yc in itertools.combinations(cy, ny - 1):
                val = cell_counting_mi(xs, ys, xc, yc) / math.log(min(nx, ny))
                best = max(best, val)
    return best


def naive_projection(patch, vector):
    """Row-major per-site dot products with explicit loops."""
    h, w, c = len(patch), len(patch[0]), len(patch[0][0])
    out = []
    for i in range(h):
        for j in range(w):
            s = 0.0
            for k in range(c):
                s += patch[i][j][k] * vector[k]
            out.append(s)
    return out


def naive_deep_map(ref, dist, patch, stride, normalize):
    """Tile-by-tile squared distance divided by the tile area, by loops."""
    h, w, c = ref.shape
    gh, gw = (h - patch) // stride + 1, (w - patch) // stride + 1
    out = [[0.0] * gw for _ in range(gh)]
    for r in range(gh):
        for q in range(gw):
            s = 0.0
            for i in range(r * stride, r * stride + patch):
                for j in range(q * stride, q * stride + patch):
                    a, b = list(ref[i, j]), list(dist[i, j])
                    if normalize:
                        na = math.sqrt(sum(v * v for v in a)) + 1e-10
                        nb = math.sqrt(sum(v * v for v in b)) + 1e-10
                        a = [v / na for v in a]
                        b = [v / nb for v in b]
                    s += sum((u - v) ** 2 for u, v in zip(a, b))
            out[r][q] = s / (patch * patch)
    return out


def average_ranks(values):
    """1-based ranks with ties sharing the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def spearman(x, y):
    return pearson(average_ranks(x), average_ranks(y))


def mse(a, b):
    flat_a, flat_b = a.ravel().tolist(), b.ravel().tolist()
    return sum((u - v) ** 2 for u, v in zip(flat_a, flat_b)) / len(flat_a)


def bilinear_align_corners(grid, out_h, out_w):
    """Corner-aligned bilinear resampling of a list-of-lists grid, by loops."""
    h, w = len(grid), len(grid[0])

    def coord(i, n_src, n_dst):
        if n_src == 1 or n_dst == 1:
            return 0, 0, 0.0
        p = i * (n_src - 1) / (n_dst - 1)
        i0 = min(int(math.floor(p)), n_src - 2)
        return i0, i0 + 1, p - i0

    out = []
    for i in range(out_h):
        r0, r1, fr = coord(i, h, out_h)
        row = []
        for j in range(out_w):
            c0, c1, fc = coord(j, w, out_w)
            top = grid[r0][c0] * (1 - fc) + grid[r0][c1] * fc
            bot = grid[r1][c0] * (1 - fc) + grid[r1][c1] * fc
            row.append(top * (1 - fr) + bot * fr)
        out.append(row)
    return out
