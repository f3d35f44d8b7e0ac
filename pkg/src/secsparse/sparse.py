"""Tuple representation of secret-shared sparse vectors and matrices.

A sparse object is a list of non-zero tuples ``(coordinate bits, value)``.
Coordinates are 1-indexed and bit-shared (``0`` is the placeholder); values
are fixed-point field elements. The number of tuples per row (or column) is
public, nothing else is.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field import fp_decode_array, fp_encode_array
from .oblivious import from_bits, to_bits
from .runtime import ProtocolContext
from .shamir import Shares, reconstruct, share


class SparseFormatError(ValueError):
    """Duplicate or out-of-range coordinates."""


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""


def coord_width(dim: int) -> int:
    """Bits needed for coordinates ``0..dim``.

    >>> coord_width(340000)
    19
    """
    return max(1, int(dim).bit_length())


@dataclass(frozen=True, eq=False)
class PlainSparse:
    """Plaintext sparse tensor in coordinate form (1-indexed).

    ``coords`` has shape ``(nnz, ndim)``; vectors use ``ndim = 1``.
    """

    shape: tuple[int, ...]
    coords: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.int64).reshape(-1, len(self.shape))
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if len(coords) != len(values):
            raise SparseFormatError("coords and values differ in length")
        if len(coords):
            if coords.min() < 1 or np.any(coords.max(axis=0) > np.array(self.shape)):
                raise SparseFormatError("coordinate out of range")
            if len(np.unique(coords, axis=0)) != len(coords):
                raise SparseFormatError("duplicate coordinate")
        if not np.all(np.isfinite(values)):
            raise SparseFormatError("non-finite value")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PlainSparse):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.coords, other.coords) and np.array_equal(self.values, other.values)

    __hash__ = None

    @property
    def nnz(self) -> int:
        return len(self.values)

    @classmethod
    def vector(cls, dim: int, pairs) -> "PlainSparse":
        pairs = list(pairs)
        coords = np.array([c for c, _ in pairs], dtype=np.int64).reshape(-1, 1)
        values = np.array([v for _, v in pairs], dtype=np.float64)
        return cls((dim,), coords, values)

    @classmethod
    def from_dense(cls, dense) -> "PlainSparse":
        dense = np.asarray(dense, dtype=np.float64)
        idx = np.argwhere(dense != 0)
        return cls(dense.shape, idx + 1, dense[tuple(idx.T)])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        if self.nnz:
            np.add.at(out, tuple((self.coords - 1).T), self.values)
        return out

    def sorted(self) -> "PlainSparse":
        order = np.lexsort(self.coords.T[::-1]) if self.nnz else np.arange(0)
        return PlainSparse(self.shape, self.coords[order], self.values[order])

    def transpose(self) -> "PlainSparse":
        return PlainSparse(self.shape[::-1], self.coords[:, ::-1], self.values)

    def group_counts(self, axis: int = 0) -> np.ndarray:
        """Non-zeros per row (``axis=0``) or per column (``axis=1``)."""
        return np.bincount(self.coords[:, axis] - 1, minlength=self.shape[axis]) if self.nnz else np.zeros(self.shape[axis], dtype=np.int64)

    def pairs(self) -> list[tuple]:
        return [(tuple(int(c) for c in cs) if len(cs) > 1 else int(cs[0]), float(v)) for cs, v in zip(self.coords, self.values)]


@dataclass
class SparseVectorShares:
    """Shared sparse vector: ``coords`` (nnz, B) bits and ``values`` (nnz,)."""

    coords: Shares
    values: Shares
    dim: int

    @property
    def nnz(self) -> int:
        return self.values.shape[0]

    @property
    def coord_bits(self) -> int:
        return self.coords.shape[-1]


@dataclass
class SparseMatrixShares:
    """Shared sparse matrix grouped by row or by column.

    Tuples are stored group after group; ``group_nnz`` (public) says how many
    belong to each group. ``coords`` holds the in-group coordinate only: the
    column for a row-grouped matrix, the row for a column-grouped one. The
    group index itself is public.
    """

    coords: Shares
    values: Shares
    shape: tuple[int, int]
    group_nnz: tuple[int, ...]
    orientation: str = "row"

    def __post_init__(self):
        if self.orientation not in ("row", "col"):
            raise ValueError("orientation must be 'row' or 'col'")
        if len(self.group_nnz) != self.shape[0 if self.orientation == "row" else 1]:
            raise ValueError("one nnz count per group required")

    @property
    def nnz(self) -> int:
        return int(sum(self.group_nnz))

    @property
    def coord_bits(self) -> int:
        return self.coords.shape[-1]

    def group_index(self) -> np.ndarray:
        """Public 1-indexed group of every tuple."""
        return np.repeat(np.arange(1, len(self.group_nnz) + 1), self.group_nnz)

    def group_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.group_nnz)]).astype(np.int64)

    def transposed(self) -> "SparseMatrixShares":
        """Same tuples read as the transpose (orientation flips, no work)."""
        flip = "col" if self.orientation == "row" else "row"
        return SparseMatrixShares(self.coords, self.values, self.shape[::-1], self.group_nnz, flip)


@dataclass
class CooShares:
    """Shared sparse matrix with both coordinates secret (product outputs)."""

    rows: Shares
    cols: Shares
    values: Shares
    shape: tuple[int, int]

    @property
    def nnz(self) -> int:
        return self.values.shape[0]


def _share_values(ctx: ProtocolContext, values) -> Shares:
    return share(ctx, fp_encode_array(values, ctx.field))


def owner_share_vector(ctx: ProtocolContext, plain, dim: int | None = None, coord_bits: int | None = None) -> SparseVectorShares:
    """Share a plaintext sparse vector (``PlainSparse`` or ``(coord, value)`` pairs)."""
    if not isinstance(plain, PlainSparse):
        if dim is None:
            raise ValueError("dim required for a list of pairs")
        plain = PlainSparse.vector(dim, plain)
    elif dim is not None and plain.shape != (dim,):
        raise SparseFormatError("dimension mismatch")
    dim = plain.shape[0]
    width = coord_bits or coord_width(dim)
    if width < coord_width(dim):
        raise ValueError("coord_bits too small for dim")
    coords = share(ctx, to_bits(plain.coords[:, 0], width).reshape(plain.nnz, width))
    return SparseVectorShares(coords, _share_values(ctx, plain.values), dim)


def owner_share_matrix(ctx: ProtocolContext, plain: PlainSparse, orientation: str = "row", coord_bits: int | None = None) -> SparseMatrixShares:
    """Share a plaintext matrix grouped by rows or columns."""
    if len(plain.shape) != 2:
        raise SparseFormatError("matrix expected")
    g, w = (0, 1) if orientation == "row" else (1, 0)
    order = np.lexsort((plain.coords[:, w], plain.coords[:, g])) if plain.nnz else np.arange(0)
    coords = plain.coords[order]
    inner_dim = plain.shape[w]
    width = coord_bits or coord_width(inner_dim)
    if width < coord_width(inner_dim):
        raise ValueError("coord_bits too small")
    bits = share(ctx, to_bits(coords[:, w], width).reshape(plain.nnz, width))
    counts = tuple(int(c) for c in plain.group_counts(g))
    return SparseMatrixShares(bits, _share_values(ctx, plain.values[order]), plain.shape, counts, orientation)


def _open_coords(x: Shares) -> np.ndarray:
    return from_bits(x.ctx.field.to_int(reconstruct(x)).astype(np.int64))


def _open_values(x: Shares) -> np.ndarray:
    return fp_decode_array(reconstruct(x), x.ctx.field)


def reconstruct_vector(v: SparseVectorShares) -> PlainSparse:
    """Test-only opening of a shared vector (coordinates must be distinct)."""
    coords = _open_coords(v.coords) if v.nnz else np.zeros(0, dtype=np.int64)
    return PlainSparse((v.dim,), coords.reshape(-1, 1), _open_values(v.values) if v.nnz else np.zeros(0)).sorted()


def reconstruct_matrix(m: SparseMatrixShares | CooShares) -> PlainSparse:
    if isinstance(m, CooShares):
        if not m.nnz:
            return PlainSparse(m.shape, np.zeros((0, 2), dtype=np.int64), np.zeros(0))
        rows, cols = _open_coords(m.rows), _open_coords(m.cols)
        return PlainSparse(m.shape, np.stack([rows, cols], axis=1), _open_values(m.values)).sorted()
    if not m.nnz:
        return PlainSparse(m.shape, np.zeros((0, 2), dtype=np.int64), np.zeros(0))
    inner = _open_coords(m.coords)
    groups = m.group_index()
    pair = np.stack([groups, inner], axis=1) if m.orientation == "row" else np.stack([inner, groups], axis=1)
    return PlainSparse(m.shape, pair, _open_values(m.values)).sorted()


def ingest_triplets(path, shape: tuple[int, int] | None = None) -> PlainSparse:
    """Read a ``row,col,value`` CSV with 1-indexed coordinates."""
    path = Path(path)
    rows, cols, vals = [], [], []
    seen = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header_seen = False
        for lineno, rec in enumerate(reader, start=1):
            if not rec or all(not f.strip() for f in rec):
                continue
            if not header_seen:
                header_seen = True
                if [f.strip().lower() for f in rec] == ["row", "col", "value"]:
                    continue
                raise ParseError(f"{path}:{lineno}: expected header 'row,col,value'")
            if len(rec) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(rec)}")
            try:
                r, c, v = int(rec[0]), int(rec[1]), float(rec[2])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if r < 1 or c < 1:
                raise ParseError(f"{path}:{lineno}: coordinates are 1-indexed")
            if not np.isfinite(v):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            if (r, c) in seen:
                raise ParseError(f"{path}:{lineno}: duplicate entry ({r},{c})")
            seen.add((r, c))
            rows.append(r)
            cols.append(c)
            vals.append(v)
    if shape is None:
        shape = (max(rows, default=0), max(cols, default=0))
    elif rows and (max(rows) > shape[0] or max(cols) > shape[1]):
        raise ParseError(f"{path}: entries exceed shape {shape}")
    coords = np.stack([np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64)], axis=1) if rows else np.zeros((0, 2), dtype=np.int64)
    return PlainSparse(shape, coords, np.array(vals, dtype=np.float64))


def write_triplets(path, plain: PlainSparse) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "col", "value"])
        for (r, c), v in zip(plain.coords, plain.values):
            writer.writerow([int(r), int(c), repr(float(v))])


def ingest_nnz_counts(path) -> list[int]:
    """One non-negative integer per line; blank lines are skipped."""
    path = Path(path)
    counts = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                value = int(text)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: not an integer: {text!r}") from None
            if value < 0:
                raise ParseError(f"{path}:{lineno}: negative count")
            counts.append(value)
    return counts


def sparse_storage(nnz: int, coord_bits: int, n_coords: int = 1) -> int:
    """Field elements for ``nnz`` tuples with bit-shared coordinates."""
    return int(nnz) * (n_coords * int(coord_bits) + 1)


def storage_cost(obj) -> int:
    """Stored field elements (per party) for a shared or plaintext object."""
    if isinstance(obj, (SparseVectorShares, SparseMatrixShares)):
        return sparse_storage(obj.nnz, obj.coord_bits)
    if isinstance(obj, CooShares):
        return obj.nnz * (obj.rows.shape[-1] + obj.cols.shape[-1] + 1)
    if isinstance(obj, Shares):
        return obj.size
    if isinstance(obj, PlainSparse):
        inner = obj.shape[-1]
        return sparse_storage(obj.nnz, coord_width(inner))
    if isinstance(obj, np.ndarray):
        return int(obj.size)
    raise TypeError(f"no storage model for {type(obj).__name__}")
