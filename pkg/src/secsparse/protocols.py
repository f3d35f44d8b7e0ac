"""Secure sparse products on tuple lists.

Every protocol follows the same pattern: concatenate or expand tuple lists
locally, sort them obliviously so that matching coordinates become
neighbours, combine neighbours with batched multiplications, then aggregate
equal coordinates and drop placeholders with a shuffle-and-reveal pass.

Lists travel as a coordinate bit array ``coords`` of shape ``(n, B)`` and a
value array ``values`` of shape ``(n,)``. A coordinate of 0 is the
placeholder; real coordinates start at 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oblivious import batcher_sort, eq_bits, reveal_flag, shuffle, to_bits
from .runtime import ProtocolContext
from .shamir import Shares, concat, inner_product, mul, public, stack, trunc
from .sparse import CooShares, SparseMatrixShares, SparseVectorShares, coord_width

MODES = ("naive", "optimized")


class DimensionError(ValueError):
    """Operand shapes do not line up."""


@dataclass
class TupleList:
    """Shared tuples: ``coords`` (n, B) bits and ``values`` (n,)."""

    coords: Shares
    values: Shares

    def __len__(self) -> int:
        return self.values.shape[0]


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _empty(ctx: ProtocolContext, width: int) -> TupleList:
    return TupleList(public(ctx, np.zeros((0, width), dtype=np.int64)), public(ctx, np.zeros(0, dtype=np.int64)))


def _adjacent_eq(coords: Shares) -> Shares:
    """``e[k] = [coords[k] == coords[k+1]]`` for all neighbours in one batch."""
    return eq_bits(coords[:-1], coords[1:])


def _one(ctx: ProtocolContext, n: int) -> Shares:
    return public(ctx, np.ones(n, dtype=np.int64))


# ---------------------------------------------------------------- vector


def sparse_vec_mult(x: SparseVectorShares, y: SparseVectorShares) -> Shares:
    """Inner product of two shared sparse vectors (fixed-point scalar)."""
    if x.dim != y.dim:
        raise DimensionError(f"dimension mismatch: {x.dim} vs {y.dim}")
    ctx = x.values.ctx
    if x.coord_bits != y.coord_bits:
        raise DimensionError("coordinate widths differ")
    n = x.nnz + y.nnz
    if n < 2:
        return public(ctx, 0)
    coords = concat([x.coords, y.coords], axis=0)
    values = concat([x.values, y.values], axis=0)
    (coords,), payload = batcher_sort([coords], values.expand())
    values = payload[..., 0]
    e = _adjacent_eq(coords)
    prods = mul(values[:-1], values[1:])
    return trunc(inner_product(e, prods))


# ------------------------------------------------------ recursive propagation


def _combine(g1: Shares, s1: Shares, g2: Shares, s2: Shares) -> tuple[Shares, Shares]:
    """Merge two adjacent segment summaries in one multiplication round.

    A summary is ``(g, s)``: ``g = 1`` when no segment starts inside the
    block, ``s`` the running value at its right end. Merging gives
    ``(g1*g2, s2 + g2*s1)``.
    """
    prod = mul(stack([g2, g2]), stack([g1, s1]))
    return prod[0], s2 + prod[1]


def _rec_prop(g: Shares, s: Shares) -> Shares:
    """Carry entering each block, given block summaries ``(g, s)``.

    Pairs of neighbouring blocks are merged upward (one round per level),
    the recursion solves the parents, and the parents' carries are pushed
    down to both children (one more round per level).
    """
    ctx = g.ctx
    n = g.shape[0]
    if n == 1:
        return public(ctx, np.zeros(1, dtype=np.int64))
    half = n // 2
    gl, sl = g[0:2 * half:2], s[0:2 * half:2]
    gr, sr = g[1:2 * half:2], s[1:2 * half:2]
    pg, ps = _combine(gl, sl, gr, sr)
    if n % 2:
        pg = concat([pg, g[n - 1:]])
        ps = concat([ps, s[n - 1:]])
    carry_parent = _rec_prop(pg, ps)
    # left child inherits the parent's carry; right child sees the left child first
    cp = carry_parent[:half]
    carry_right = sl + mul(gl, cp)
    out = stack([cp, carry_right], axis=1).reshape(2 * half)
    if n % 2:
        out = concat([out, carry_parent[half:]])
    return out


def segmented_scan(starts: Shares, values: Shares) -> Shares:
    """Running sums that restart wherever ``starts`` is 1.

    Leaves hold four consecutive elements and are scanned locally in three
    rounds; the leaf summaries go through :func:`_rec_prop` and the final
    carries are applied with one more round. Logarithmic in the length.
    """
    ctx = values.ctx
    n = values.shape[0]
    if n == 0:
        return values
    pad = (-n) % 4
    if pad:
        starts = concat([starts, _one(ctx, pad)])
        values = concat([values, public(ctx, np.zeros(pad, dtype=np.int64))])
    leaves = n + pad
    f = starts.reshape(leaves // 4, 4)
    v = values.reshape(leaves // 4, 4)
    keep = 1 - f  # 1 where the element continues the previous segment
    cols_v = [v[:, 0]]
    cols_g = [keep[:, 0]]  # prefix: no segment start within the leaf so far
    for j in range(1, 4):
        prod = mul(stack([keep[:, j], keep[:, j]]), stack([cols_v[-1], cols_g[-1]]))
        cols_v.append(v[:, j] + prod[0])
        cols_g.append(prod[1])
    scanned = stack(cols_v, axis=1)
    prefix_g = stack(cols_g, axis=1)
    carry = _rec_prop(cols_g[-1], cols_v[-1])
    fixed = scanned + mul(prefix_g, carry.expand())
    return fixed.reshape(leaves)[:n]


# ---------------------------------------------------------------- aggregation


def agg_equal_coord(coords: Shares, values: Shares) -> TupleList:
    """Sequential aggregation of a list sorted on its coordinates.

    Walks the list once; when a tuple matches its successor, its value is
    pushed forward and its coordinate becomes the placeholder. Rounds grow
    linearly with the length.
    """
    n = values.shape[0]
    if n < 2:
        return TupleList(coords, values)
    ctx = values.ctx
    cdata = coords.data.copy()
    vdata = values.data.copy()
    cur_c = Shares(ctx, cdata, coords.degree)
    cur_v = Shares(ctx, vdata, values.degree)
    for k in range(n - 1):
        e = eq_bits(cur_c[k], cur_c[k + 1])
        # a merged tuple's coordinate bits become 0 and its value moves forward
        prod = mul(e.expand(), concat([cur_c[k], cur_v[k].expand()], axis=-1))
        cdata[:, k] = (cur_c[k] - prod[:-1]).data
        vdata[:, k + 1] = (cur_v[k + 1] + prod[-1]).data
    return TupleList(Shares(ctx, cdata, coords.degree), Shares(ctx, vdata, values.degree))


def agg_equal_coord_opt(coords: Shares, values: Shares) -> TupleList:
    """Logarithmic-round aggregation with the same output as the naive walk.

    Run boundaries come from one batched comparison of neighbours; the
    running sums within each run come from :func:`segmented_scan`.
    """
    n = values.shape[0]
    if n < 2:
        return TupleList(coords, values)
    ctx = values.ctx
    e = _adjacent_eq(coords)
    starts = concat([_one(ctx, 1), 1 - e])
    sums = segmented_scan(starts, values)
    drop = mul(e.expand(), coords[:-1])
    new_coords = concat([coords[:-1] - drop, coords[-1:]])
    return TupleList(new_coords, sums)


def aggregate(coords: Shares, values: Shares, mode: str = "optimized") -> TupleList:
    _check_mode(mode)
    fn = agg_equal_coord if mode == "naive" else agg_equal_coord_opt
    return fn(coords, values)


# ---------------------------------------------------------------- placeholders


def placeholder_removal(coords: Shares, values: Shares) -> tuple[TupleList, int]:
    """Shuffle, open the placeholder flags and keep the real tuples.

    Returns the compacted list and the number of placeholders dropped (the
    only thing revealed).
    """
    ctx = values.ctx
    n = values.shape[0]
    width = coords.shape[-1]
    if n == 0:
        return TupleList(coords, values), 0
    table = shuffle(concat([coords, values.expand()], axis=-1))
    coords, values = table[..., :width], table[..., width]
    flags = reveal_flag(eq_bits(coords, public(ctx, np.zeros((n, width), dtype=np.int64))))
    keep = np.flatnonzero(flags == 0)
    kept = TupleList(Shares(ctx, coords.data[:, keep], coords.degree), Shares(ctx, values.data[:, keep], values.degree))
    return kept, int(n - keep.size)


# ---------------------------------------------------------------- matvec


def mult_loop_naive(cols: Shares, values: Shares, is_y: Shares) -> Shares:
    """Sequential pass over a list sorted on (column, row).

    Keeps the most recent y tuple; every X tuple of the same column is
    multiplied by its value, any other X tuple becomes 0, and y tuples
    become placeholders (value 0).
    """
    ctx = values.ctx
    n = values.shape[0]
    width = cols.shape[-1]
    prev_c = public(ctx, np.zeros(width, dtype=np.int64))
    prev_v = public(ctx, 0)
    out = values.data.copy()
    for k in range(n):
        same = eq_bits(prev_c, cols[k])
        factor = mul(same, prev_v)
        val = mul(factor, values[k])
        flag = is_y[k]
        upd = mul(flag.expand(), concat([cols[k] - prev_c, (values[k] - prev_v).expand(), val.expand()], axis=-1))
        prev_c = prev_c + upd[:width]
        prev_v = prev_v + upd[width]
        out[:, k] = (val - upd[width + 1]).data
    return Shares(ctx, out, values.degree)


def mult_loop_opt(cols: Shares, values: Shares, is_y: Shares) -> Shares:
    """Logarithmic-round version of :func:`mult_loop_naive`.

    Each column's y value (0 if the column has no y tuple) is spread over the
    column with :func:`segmented_scan`; one final multiplication applies it.
    """
    ctx = values.ctx
    n = values.shape[0]
    if n == 0:
        return values
    y_only = mul(is_y, values)
    if n > 1:
        starts = concat([_one(ctx, 1), 1 - _adjacent_eq(cols)])
    else:
        starts = _one(ctx, 1)
    spread = segmented_scan(starts, y_only)
    return mul(values, spread - y_only)


def mult_loop(cols: Shares, values: Shares, is_y: Shares, mode: str = "optimized") -> Shares:
    _check_mode(mode)
    fn = mult_loop_naive if mode == "naive" else mult_loop_opt
    return fn(cols, values, is_y)


def sparse_matvec(X: SparseMatrixShares, y: SparseVectorShares, mode: str = "optimized", row_bits: int | None = None) -> SparseVectorShares:
    """Product of a row-grouped sparse matrix with a sparse vector.

    The output keeps one tuple per non-empty row of ``X``; rows whose
    non-zeros meet no non-zero of ``y`` carry an explicit 0 value.
    """
    _check_mode(mode)
    if X.orientation != "row":
        raise DimensionError("matrix must be row-grouped")
    n, m = X.shape
    if m != y.dim:
        raise DimensionError(f"inner dimension mismatch: {m} vs {y.dim}")
    if X.coord_bits != y.coord_bits:
        raise DimensionError("column coordinate widths differ")
    ctx = y.values.ctx
    rb = row_bits or coord_width(n)
    if rb < coord_width(n):
        raise ValueError("row_bits too small")
    if X.nnz == 0 or y.nnz == 0:
        # both counts are public
        return SparseVectorShares(public(ctx, np.zeros((0, rb), dtype=np.int64)), public(ctx, np.zeros(0, dtype=np.int64)), n)
    rows_x = public(ctx, to_bits(X.group_index(), rb))
    rows = concat([rows_x, public(ctx, np.zeros((y.nnz, rb), dtype=np.int64))])
    cols = concat([X.coords, y.coords])
    vals = concat([X.values, y.values])
    is_y = public(ctx, np.r_[np.zeros(X.nnz, dtype=np.int64), np.ones(y.nnz, dtype=np.int64)])
    (cols, rows), payload = batcher_sort([cols, rows], stack([vals, is_y], axis=1))
    vals, is_y = payload[..., 0], payload[..., 1]
    prods = trunc(mult_loop(cols, vals, is_y, mode))
    # the column coordinate is simply discarded
    (rows,), payload = batcher_sort([rows], prods.expand())
    agg = aggregate(rows, payload[..., 0], mode)
    out, _ = placeholder_removal(agg.coords, agg.values)
    return SparseVectorShares(out.coords, out.values, n)


# ---------------------------------------------------------------- matmat


def compute_minmult(cols_x, rows_y) -> int:
    """Number of scalar products: ``sum_k nnz(X column k) * nnz(Y row k)``.

    >>> compute_minmult([1, 2], [3, 4])
    11
    """
    a = np.asarray(cols_x, dtype=np.int64)
    b = np.asarray(rows_y, dtype=np.int64)
    if a.shape != b.shape:
        raise DimensionError("length mismatch")
    return int(np.dot(a, b))


def pair_products(X: SparseMatrixShares, Y: SparseMatrixShares) -> tuple[Shares, Shares, Shares]:
    """Every product ``x_ik * y_kj`` over shared inner indices ``k``.

    Returns (row bits, column bits, truncated values) with exactly
    :func:`compute_minmult` entries, built with one multiplication batch.
    """
    ox, oy = X.group_offsets(), Y.group_offsets()
    ia, ib = [], []
    for k in range(len(X.group_nnz)):
        a = np.arange(ox[k], ox[k + 1])
        b = np.arange(oy[k], oy[k + 1])
        if a.size and b.size:
            ia.append(np.repeat(a, b.size))
            ib.append(np.tile(b, a.size))
    ia = np.concatenate(ia) if ia else np.zeros(0, dtype=np.int64)
    ib = np.concatenate(ib) if ib else np.zeros(0, dtype=np.int64)
    rows = X.coords[ia]
    cols = Y.coords[ib]
    vals = trunc(mul(X.values[ia], Y.values[ib])) if ia.size else X.values[ia]
    return rows, cols, vals


def sparse_matmat(X: SparseMatrixShares, Y: SparseMatrixShares, mode: str = "optimized") -> CooShares:
    """Product of a column-grouped ``X`` (n x m) and a row-grouped ``Y`` (m x p)."""
    _check_mode(mode)
    if X.orientation != "col" or Y.orientation != "row":
        raise DimensionError("need column-grouped X and row-grouped Y")
    n, m = X.shape
    m2, p = Y.shape
    if m != m2:
        raise DimensionError(f"inner dimension mismatch: {m} vs {m2}")
    ctx = X.values.ctx
    rb, cb = X.coord_bits, Y.coord_bits
    if compute_minmult(X.group_nnz, Y.group_nnz) == 0:
        z = np.zeros(0, dtype=np.int64)
        return CooShares(public(ctx, np.zeros((0, rb), dtype=np.int64)), public(ctx, np.zeros((0, cb), dtype=np.int64)), public(ctx, z), (n, p))
    rows, cols, vals = pair_products(X, Y)
    (rows, cols), payload = batcher_sort([rows, cols], vals.expand())
    agg = aggregate(concat([cols, rows], axis=-1), payload[..., 0], mode)
    out, _ = placeholder_removal(agg.coords, agg.values)
    return CooShares(out.coords[..., cb:], out.coords[..., :cb], out.values, (n, p))


def gram(X: SparseMatrixShares, mode: str = "optimized") -> CooShares:
    """``X^T X`` for a row-grouped ``X``; its rows are the columns of ``X^T``."""
    if X.orientation != "row":
        raise DimensionError("gram expects a row-grouped matrix")
    return sparse_matmat(X.transposed(), X, mode)
