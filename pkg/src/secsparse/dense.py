"""Dense secret-shared products with delayed degree reduction.

Each party multiplies its share matrices locally, so every output cell is a
degree-2t sum of products; one resharing per output cell brings it back to
degree t and one truncation renormalises the fixed-point scale. Traffic is
therefore proportional to the output size, independent of the inner
dimension.
"""

from __future__ import annotations

import numpy as np

from .field import fp_decode_array, fp_encode_array
from .runtime import CostLedger, ProtocolContext
from .shamir import Shares, inner_product, reconstruct, reduce_degree, share, trunc


class DenseShapeError(ValueError):
    """Operand shapes do not line up."""


def share_dense(ctx: ProtocolContext, values) -> Shares:
    """Owner-side sharing of every cell, zeros included."""
    return share(ctx, fp_encode_array(np.asarray(values, dtype=np.float64), ctx.field))


def reconstruct_dense(x: Shares) -> np.ndarray:
    return fp_decode_array(reconstruct(x), x.ctx.field)


def _local_matmul(a: Shares, b: Shares) -> Shares:
    ctx = a.ctx
    f = ctx.field
    t = ctx.t
    if a.degree != t or b.degree != t:
        raise ValueError("dense products need degree-t operands")
    out = np.stack([f.matmul(a.data[i], b.data[i]) for i in range(ctx.n)])
    return Shares(ctx, out, 2 * t)


def dense_dot(x: Shares, y: Shares) -> Shares:
    if x.shape != y.shape or len(x.shape) != 1:
        raise DenseShapeError(f"need equal-length vectors, got {x.shape} and {y.shape}")
    return trunc(inner_product(x, y))


def dense_matvec(X: Shares, y: Shares) -> Shares:
    if len(X.shape) != 2 or y.shape != X.shape[1:]:
        raise DenseShapeError(f"cannot multiply {X.shape} by {y.shape}")
    prod = _local_matmul(X, y.reshape(y.shape[0], 1))
    return trunc(reduce_degree(prod)).reshape(X.shape[0])


def dense_matmat(X: Shares, Y: Shares) -> Shares:
    if len(X.shape) != 2 or len(Y.shape) != 2 or X.shape[1] != Y.shape[0]:
        raise DenseShapeError(f"cannot multiply {X.shape} by {Y.shape}")
    return trunc(reduce_degree(_local_matmul(X, Y)))


def dense_cost(ctx: ProtocolContext, output_cells: int) -> CostLedger:
    """Server traffic of a dense product with ``output_cells`` outputs.

    One resharing and one masked opening per cell, each sending one element
    on every ordered pair of parties, in two rounds. Input upload and
    dealer material are not included.
    """
    pairs = ctx.n * (ctx.n - 1)
    elements = 2 * pairs * int(output_cells)
    rounds = 2 if output_cells else 0
    return CostLedger(
        rounds=rounds,
        elements_sent=elements,
        bytes_sent=elements * ctx.field.wire_bytes,
        opened_elements=int(output_cells),
    )


def dense_storage(n: int, m: int) -> int:
    return int(n) * int(m)
