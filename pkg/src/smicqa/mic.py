"""Grid mutual information and the Maximal Information Coefficient.

Every estimator here works on dense ranks: a cut may only fall between two
consecutive distinct sample values and is placed at their midpoint. Values
therefore depend on the samples only through their orderings, which makes
them invariant (bit for bit) under strictly increasing transforms.
"""

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exceptions import PreconditionError, SearchTooLargeError

MIN_SAMPLES = 4
DEFAULT_BOUND_EXPONENT = 0.5
EXACT_MAX_N = 64


@dataclass(frozen=True)
class SamplePairs:
    """Paired scalar observations ``(xs[i], ys[i])``."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64).ravel()
        ys = np.asarray(self.ys, dtype=np.float64).ravel()
        if xs.shape != ys.shape:
            raise PreconditionError(
                f"xs and ys differ in length ({xs.size} vs {ys.size})"
            )
        if xs.size < MIN_SAMPLES:
            raise PreconditionError(
                f"need at least {MIN_SAMPLES} samples, got {xs.size}"
            )
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise PreconditionError("samples must be finite")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self):
        return self.xs.size

    def swapped(self):
        return SamplePairs(self.ys, self.xs)


@dataclass(frozen=True)
class GridPartition:
    """An ``n_x`` by ``n_y`` grid given by its interior cut positions.

    Cells are half-open, ``[c_k, c_{k+1})``; the outermost cells extend to
    infinity, so every finite sample lands in exactly one cell.
    """

    x_cuts: tuple
    y_cuts: tuple

    def __post_init__(self):
        x_cuts = tuple(float(c) for c in self.x_cuts)
        y_cuts = tuple(float(c) for c in self.y_cuts)
        for name, cuts in (("x_cuts", x_cuts), ("y_cuts", y_cuts)):
            if len(cuts) < 1:
                raise PreconditionError(f"{name} needs at least one cut")
            if not all(math.isfinite(c) for c in cuts):
                raise PreconditionError(f"{name} must be finite")
            if any(b <= a for a, b in zip(cuts, cuts[1:])):
                raise PreconditionError(f"{name} must be strictly increasing")
        object.__setattr__(self, "x_cuts", x_cuts)
        object.__setattr__(self, "y_cuts", y_cuts)

    @property
    def n_x(self):
        return len(self.x_cuts) + 1

    @property
    def n_y(self):
        return len(self.y_cuts) + 1

    def cell_indices(self, samples):
        ix = np.searchsorted(np.asarray(self.x_cuts), samples.xs, side="right")
        iy = np.searchsorted(np.asarray(self.y_cuts), samples.ys, side="right")
        return ix, iy


@dataclass(frozen=True)
class MicResult:
    value: float
    best_grid: GridPartition
    best_mi: float


@functools.lru_cache(maxsize=64)
def xlogx_table(n):
    """``k * log(k)`` for ``k = 0..n`` (with ``0 log 0 = 0``), read-only."""
    table = np.array([0.0] + [k * math.log(k) for k in range(1, n + 1)])
    table.setflags(write=False)
    return table


def _mi_from_counts(counts):
    """Mutual information (nats) of a contingency table of integer counts.

    Uses ``fsum`` so the result does not depend on cell order; transposing
    the table gives the identical float.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = int(counts.sum())
    table = xlogx_table(n)
    terms = list(table[counts.ravel()])
    terms += [-v for v in table[counts.sum(axis=1)]]
    terms += [-v for v in table[counts.sum(axis=0)]]
    return math.log(n) + math.fsum(terms) / n


def mi_under_grid(samples, grid):
    """Empirical mutual information of ``samples`` under ``grid``, in nats.

    Empty cells contribute zero. The result lies in
    ``[0, log(min(n_x, n_y))]`` up to rounding.
    """
    if not isinstance(samples, SamplePairs):
        raise PreconditionError("samples must be a SamplePairs instance")
    if not isinstance(grid, GridPartition):
        raise PreconditionError("grid must be a GridPartition instance")
    ix, iy = grid.cell_indices(samples)
    counts = np.zeros((grid.n_x, grid.n_y), dtype=np.int64)
    np.add.at(counts, (ix, iy), 1)
    return max(_mi_from_counts(counts), 0.0)


def admissible_grid_shapes(n, bound_exponent=DEFAULT_BOUND_EXPONENT):
    """Grid shapes searched for ``n`` samples.

    All ``(n_x, n_y)`` with both sides at least 2 and ``n_x * n_y <
    n ** bound_exponent``, plus ``(2, 2)`` so the set is never empty.
    """
    if n < MIN_SAMPLES:
        raise PreconditionError(f"need at least {MIN_SAMPLES} samples, got {n}")
    bound = float(n) ** bound_exponent
    shapes = {(2, 2)}
    nx = 2
    while nx * 2 < bound:
        ny = 2
        while nx * ny < bound:
            shapes.add((nx, ny))
            ny += 1
        nx += 1
    return shapes


def dense_ranks(values):
    """Dense 0-based ranks along the last axis and the distinct-value counts.

    Works on a 1-D sequence or a 2-D batch of sequences.
    """
    values = np.asarray(values, dtype=np.float64)
    batch = np.atleast_2d(values)
    order = np.argsort(batch, axis=1, kind="stable")
    ordered = np.take_along_axis(batch, order, axis=1)
    steps = np.zeros(ordered.shape, dtype=np.int64)
    steps[:, 1:] = ordered[:, 1:] != ordered[:, :-1]
    sorted_ranks = np.cumsum(steps, axis=1)
    ranks = np.empty_like(sorted_ranks)
    np.put_along_axis(ranks, order, sorted_ranks, axis=1)
    distinct = sorted_ranks[:, -1] + 1
    if values.ndim == 1:
        return ranks[0], distinct[0]
    return ranks, distinct


def _cut_value(uniq, boundary):
    """Cut between distinct values ``uniq[boundary-1]`` and ``uniq[boundary]``."""
    lo, hi = uniq[boundary - 1], uniq[boundary]
    mid = lo + (hi - lo) / 2.0
    if not lo < mid <= hi:
        mid = hi
    return float(mid)


def _axis_cuts(uniq, boundaries):
    return tuple(_cut_value(uniq, int(b)) for b in boundaries)


def _fallback_grid(samples):
    cuts = []
    for v in (samples.xs, samples.ys):
        uniq = np.unique(v)
        cuts.append((_cut_value(uniq, 1),) if uniq.size > 1 else (float(uniq[0]),))
    return GridPartition(*cuts)


def _sorted_shapes(n, bound_exponent):
    return sorted(admissible_grid_shapes(n, bound_exponent))


def exact_mic(samples, bound_exponent=DEFAULT_BOUND_EXPONENT, max_n=EXACT_MAX_N):
    """MIC by exhaustive search over every admissible grid.

    Intended as an oracle for small ``n``. Among grids with equal score the
    first in lexicographic ``(n_x, n_y, x cuts, y cuts)`` order wins.
    """
    if samples.n > max_n:
        raise SearchTooLargeError(
            f"exhaustive search too large for n={samples.n} (limit {max_n}); "
            "use approx_mic instead"
        )
    n = samples.n
    rx, dx = dense_ranks(samples.xs)
    ry, dy = dense_ranks(samples.ys)
    joint = np.zeros((dx, dy), dtype=np.int64)
    np.add.at(joint, (rx, ry), 1)
    # cum[i, j] = number of points with x-rank < i and y-rank < j
    cum = np.zeros((dx + 1, dy + 1), dtype=np.int64)
    cum[1:, 1:] = joint.cumsum(axis=0).cumsum(axis=1)
    table = xlogx_table(n)
    log_n = math.log(n)

    best_val = -1.0
    best = None
    for a, b in _sorted_shapes(n, bound_exponent):
        if dx < a or dy < b:
            continue
        norm = math.log(min(a, b))
        y_combos = np.array(list(itertools.combinations(range(1, dy), b - 1)),
                            dtype=np.int64)
        y_bounds = np.concatenate(
            [np.zeros((len(y_combos), 1), dtype=np.int64), y_combos,
             np.full((len(y_combos), 1), dy, dtype=np.int64)], axis=1)
        for x_combo in itertools.combinations(range(1, dx), a - 1):
            x_bounds = np.array((0,) + x_combo + (dx,))
            col_cum = np.diff(cum[x_bounds], axis=0)          # (a, dy + 1)
            cell_cum = col_cum[:, y_bounds]                   # (a, ny, b + 1)
            cells = np.diff(cell_cum, axis=2)                 # (a, ny, b)
            col_tot = col_cum[:, dy]
            row_tot = cells.sum(axis=0)                       # (ny, b)
            s = (table[cells].sum(axis=(0, 2))
                 - table[row_tot].sum(axis=1)
                 - table[col_tot].sum())
            mi = log_n + s / n
            k = int(np.argmax(mi))
            val = mi[k] / norm
            if val > best_val:
                best_val = val
                best = (x_combo, tuple(int(v) for v in y_combos[k]))

    if best is None:
        return MicResult(0.0, _fallback_grid(samples), 0.0)
    ux, uy = np.unique(samples.xs), np.unique(samples.ys)
    grid = GridPartition(_axis_cuts(ux, best[0]), _axis_cuts(uy, best[1]))
    mi = mi_under_grid(samples, grid)
    return MicResult(_normalize(mi, grid), grid, mi)


def _normalize(mi, grid):
    value = mi / math.log(min(grid.n_x, grid.n_y))
    return min(max(value, 0.0), 1.0)


def _shapes_array(n, bound_exponent):
    return np.array(_sorted_shapes(n, bound_exponent), dtype=np.int64).reshape(-1, 2)


def approx_mic_batch(xs, ys, bound_exponent=DEFAULT_BOUND_EXPONENT):
    """Heuristic MIC for each row of two ``(m, n)`` arrays; returns values only."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    if xs.ndim != 2 or xs.shape != ys.shape:
        raise PreconditionError(f"expected equal (m, n) arrays, got {xs.shape} and {ys.shape}")
    n = xs.shape[1]
    if n < MIN_SAMPLES:
        raise PreconditionError(f"need at least {MIN_SAMPLES} samples, got {n}")
    if xs.shape[0] == 0:
        return np.zeros(0)
    rx, dx = dense_ranks(xs)
    ry, dy = dense_ranks(ys)
    out = _kernels.approx_mic_ranks(rx, ry, dx, dy, _shapes_array(n, bound_exponent),
                                    xlogx_table(n))
    return out[0]


def approx_mic(samples, bound_exponent=DEFAULT_BOUND_EXPONENT):
    """MIC by the equipartition + dynamic-programming heuristic.

    For each admissible shape one axis is split into equal-count rows by
    rank and the other axis's cuts are chosen optimally by dynamic
    programming; both orientations are tried. The returned grid belongs to
    the exhaustive search space, so the value never exceeds ``exact_mic``.
    """
    rx, dx = dense_ranks(samples.xs)
    ry, dy = dense_ranks(samples.ys)
    value, mi, nx, ny, xc, yc = _kernels.approx_mic_ranks(
        rx[None, :], ry[None, :], np.array([dx]), np.array([dy]),
        _shapes_array(samples.n, bound_exponent), xlogx_table(samples.n))
    if nx[0] == 0:
        return MicResult(0.0, _fallback_grid(samples), 0.0)
    ux, uy = np.unique(samples.xs), np.unique(samples.ys)
    grid = GridPartition(_axis_cuts(ux, xc[0, :nx[0] - 1]),
                         _axis_cuts(uy, yc[0, :ny[0] - 1]))
    return MicResult(float(value[0]), grid, float(mi[0]))
