"""Plaintext reference implementations for the secure protocols.

Two independent paths are kept for products: dense ``numpy`` algebra and a
dictionary-based sparse accumulation. Tests check them against each other
and use them as ground truth.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np

from .sparse import PlainSparse


class OracleShapeError(ValueError):
    pass


def oracle_dot(x: PlainSparse, y: PlainSparse) -> float:
    if x.shape != y.shape or len(x.shape) != 1:
        raise OracleShapeError("vectors of equal dimension required")
    yd = dict(zip(y.coords[:, 0].tolist(), y.values.tolist()))
    return float(sum(v * yd.get(c, 0.0) for c, v in zip(x.coords[:, 0].tolist(), x.values.tolist())))


def oracle_matvec(X: PlainSparse, y: PlainSparse) -> dict[int, float]:
    """``{row: value}`` for every row holding at least one stored entry of ``X``."""
    if len(X.shape) != 2 or X.shape[1] != y.shape[0]:
        raise OracleShapeError("inner dimension mismatch")
    yd = dict(zip(y.coords[:, 0].tolist(), y.values.tolist()))
    out: dict[int, float] = defaultdict(float)
    for (r, c), v in zip(X.coords.tolist(), X.values.tolist()):
        out[r] += v * yd.get(c, 0.0)
    return dict(out)


def oracle_matmul(X: PlainSparse, Y: PlainSparse) -> dict[tuple[int, int], float]:
    """``{(i, j): value}`` over all index pairs reached by some product ``x_ik * y_kj``."""
    if X.shape[1] != Y.shape[0]:
        raise OracleShapeError("inner dimension mismatch")
    by_row: dict[int, list[tuple[int, float]]] = defaultdict(list)
    for (k, j), v in zip(Y.coords.tolist(), Y.values.tolist()):
        by_row[k].append((j, v))
    out: dict[tuple[int, int], float] = defaultdict(float)
    for (i, k), v in zip(X.coords.tolist(), X.values.tolist()):
        for j, w in by_row.get(k, ()):
            out[(i, j)] += v * w
    return dict(out)


def dense_of(entries: dict, shape: tuple[int, ...]) -> np.ndarray:
    out = np.zeros(shape)
    for key, v in entries.items():
        idx = (key - 1,) if isinstance(key, int) else tuple(k - 1 for k in key)
        out[idx] = v
    return out


def dense_dot(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.dot(x, y))


def dense_matvec(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.asarray(X) @ np.asarray(y)


def dense_matmul(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.asarray(X) @ np.asarray(Y)


def oracle_groupby_sum(pairs: Iterable[tuple]) -> list[tuple]:
    """Sum values of consecutive equal keys in a sorted list of ``(key, value)``."""
    out: list[list] = []
    for key, v in pairs:
        if out and out[-1][0] == key:
            out[-1][1] += v
        else:
            out.append([key, v])
    return [tuple(p) for p in out]


def oracle_sorted_quantiles(values: Sequence[int], positions: Sequence[int]) -> tuple[int, ...]:
    s = sorted(values)
    return tuple(s[p - 1] for p in positions)


def greedy_fit(degrees: Sequence[int], slots: Sequence[int]) -> bool:
    """Can rows be matched one-to-one to slots with ``degree <= slot``?

    Greedy: give each row, largest first, the largest remaining slot.
    """
    if len(degrees) != len(slots):
        return False
    remaining = sorted(slots)
    for d in sorted(degrees, reverse=True):
        if not remaining or remaining[-1] < d:
            return False
        remaining.pop()
    return True
