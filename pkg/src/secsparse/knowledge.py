"""Hiding per-row sparsity: padding, block templates and their estimation.

A template is a list of blocks ``(rows, nnz bound)`` with non-decreasing
bounds. A matrix fits when its rows, sorted by non-zero count, can be
assigned in order to the template's slots. Templates are obtained from
quantiles (in the clear or under MPC), from differentially private upper
bounds on the ECDF, or from a known population distribution.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .field import FIXED, fp_encode
from .oblivious import batcher_sort, bit_compose, recursive_max
from .shamir import Shares, open_values, share
from .sparse import PlainSparse, coord_width, sparse_storage

QUANTILES = (0.25, 0.5, 0.75, 0.9, 0.99, 1.0)


class TemplateFitError(ValueError):
    """Rows do not fit in the requested padding."""


# ---------------------------------------------------------------- ECDF


@dataclass(frozen=True)
class ECDF:
    """Tail counts of per-row degrees: ``counts[k]`` rows have at least ``degrees[k]`` non-zeros."""

    degrees: np.ndarray
    counts: np.ndarray
    total: int

    def __post_init__(self):
        d = np.asarray(self.degrees, dtype=np.int64)
        c = np.asarray(self.counts, dtype=np.int64)
        if d.shape != c.shape or d.ndim != 1:
            raise ValueError("degrees and counts must be aligned 1-d arrays")
        if d.size and (np.any(np.diff(d) <= 0) or np.any(np.diff(c) > 0)):
            raise ValueError("degrees must increase and counts must not")
        if c.size and (c[0] > self.total or c.min() < 0):
            raise ValueError("counts out of range")
        object.__setattr__(self, "degrees", d)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_degrees(cls, degrees) -> "ECDF":
        deg = np.asarray(degrees, dtype=np.int64)
        values, freq = np.unique(deg, return_counts=True)
        tail = np.cumsum(freq[::-1])[::-1]
        return cls(values, tail, int(deg.size))

    def at(self, x) -> np.ndarray | int:
        """Rows with at least ``x`` non-zeros (works for any integer ``x``)."""
        x_arr = np.asarray(x, dtype=np.int64)
        out = np.append(self.counts, 0)[np.searchsorted(self.degrees, x_arr, side="left")]
        # rows absent from the counts have degree 0
        out = np.where(x_arr <= 0, self.total, out)
        return int(out) if np.ndim(x) == 0 else out

    def sorted_degrees(self) -> np.ndarray:
        """Per-row degrees in ascending order, recovered from the tail counts."""
        exact = self.counts - np.append(self.counts[1:], 0)
        below = self.total - (self.counts[0] if self.counts.size else 0)
        parts = [np.zeros(below, dtype=np.int64)] if below else []
        parts.append(np.repeat(self.degrees, exact))
        return np.concatenate(parts)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["degree", "count_at_least"])
            for d, c in zip(self.degrees, self.counts):
                w.writerow([int(d), int(c)])

    @classmethod
    def from_csv(cls, path, total: int | None = None) -> "ECDF":
        from .sparse import ParseError

        rows = []
        with Path(path).open(newline="", encoding="utf-8") as fh:
            for lineno, rec in enumerate(csv.reader(fh), start=1):
                if lineno == 1:
                    if [f.strip() for f in rec] != ["degree", "count_at_least"]:
                        raise ParseError(f"{path}:1: expected header 'degree,count_at_least'")
                    continue
                if not rec:
                    continue
                try:
                    rows.append((int(rec[0]), int(rec[1])))
                except (ValueError, IndexError):
                    raise ParseError(f"{path}:{lineno}: malformed record") from None
        d = np.array([r[0] for r in rows], dtype=np.int64)
        c = np.array([r[1] for r in rows], dtype=np.int64)
        return cls(d, c, int(total if total is not None else (c[0] if c.size else 0)))


# ---------------------------------------------------------------- templates


@dataclass(frozen=True)
class Template:
    """Blocks ``(n_k, nnz_k)`` with non-decreasing bounds."""

    blocks: tuple[tuple[int, int], ...]
    source: str = "quantile"

    def __post_init__(self):
        blocks = tuple((int(n), int(b)) for n, b in self.blocks)
        if not blocks:
            raise ValueError("template needs at least one block")
        if any(n < 0 or b < 0 for n, b in blocks):
            raise ValueError("negative block entry")
        bounds = [b for _, b in blocks]
        if any(x > y for x, y in zip(bounds, bounds[1:])):
            raise ValueError("block bounds must be non-decreasing")
        object.__setattr__(self, "blocks", blocks)

    @property
    def total_rows(self) -> int:
        return sum(n for n, _ in self.blocks)

    @property
    def bounds(self) -> tuple[int, ...]:
        return tuple(b for _, b in self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(n for n, _ in self.blocks)

    def slots(self) -> np.ndarray:
        """Per-row bound in ascending order."""
        return np.repeat(np.array(self.bounds, dtype=np.int64), self.sizes)

    def storage(self, coord_bits: int) -> int:
        return sum(sparse_storage(n * b, coord_bits) for n, b in self.blocks)

    def to_json(self, path) -> None:
        doc = {"total_rows": self.total_rows, "source": self.source, "blocks": [list(b) for b in self.blocks]}
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "Template":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        t = cls(tuple(tuple(b) for b in doc["blocks"]), doc.get("source", "quantile"))
        if "total_rows" in doc and doc["total_rows"] != t.total_rows:
            raise ValueError("total_rows does not match the blocks")
        return t


def quantile_positions(n: int, quantiles: Sequence[float] = QUANTILES) -> np.ndarray:
    """1-indexed sorted positions ``floor(q * n)`` clamped to ``[1, n]``.

    >>> quantile_positions(100).tolist()
    [25, 50, 75, 90, 99, 100]
    """
    if n < 1:
        raise ValueError("need at least one row")
    pos = [min(n, max(1, math.floor(Fraction(str(q)) * n))) for q in quantiles]
    return np.array(pos, dtype=np.int64)


def block_sizes(n: int, quantiles: Sequence[float] = QUANTILES) -> tuple[int, ...]:
    pos = quantile_positions(n, quantiles)
    pos[-1] = n
    return tuple(int(x) for x in np.diff(np.concatenate([[0], pos])))


def build_template_quantiles(ecdf: ECDF, rows: int | None = None, quantiles: Sequence[float] = QUANTILES) -> Template:
    """Bounds read off the sorted degrees at the quantile positions."""
    n = ecdf.total if rows is None else rows
    if n != ecdf.total:
        raise ValueError("row count does not match the ECDF")
    if quantiles[-1] != 1.0:
        raise ValueError("the last quantile must be 1")
    deg = ecdf.sorted_degrees()
    pos = quantile_positions(n, quantiles)
    bounds = deg[pos - 1]
    return Template(tuple(zip(block_sizes(n, quantiles), bounds.tolist())), "quantile")


def template_fits(ecdf: ECDF, template: Template) -> bool:
    """Every block ``i`` leaves enough larger slots for rows above its bound."""
    if template.total_rows != ecdf.total:
        raise ValueError(f"template covers {template.total_rows} rows, data has {ecdf.total}")
    sizes = np.array(template.sizes, dtype=np.int64)
    above = np.concatenate([np.cumsum(sizes[::-1])[::-1][1:], [0]])
    return all(ecdf.at(b + 1) <= a for b, a in zip(template.bounds, above))


def _row_lists(plain: PlainSparse) -> list[tuple[np.ndarray, np.ndarray]]:
    n = plain.shape[0]
    order = np.lexsort((plain.coords[:, 1], plain.coords[:, 0])) if plain.nnz else np.arange(0)
    coords, values = plain.coords[order], plain.values[order]
    counts = plain.group_counts(0)
    offs = np.concatenate([[0], np.cumsum(counts)])
    return [(coords[offs[i]:offs[i + 1], 1], values[offs[i]:offs[i + 1]]) for i in range(n)]


def _pad_row(cols: np.ndarray, vals: np.ndarray, target: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    need = target - cols.size
    if need < 0:
        raise TemplateFitError(f"row has {cols.size} non-zeros, bound is {target}")
    if need == 0:
        return cols, vals
    free = np.setdiff1d(np.arange(1, width + 1), cols, assume_unique=True)[:need]
    if free.size < need:
        raise TemplateFitError(f"row cannot hold {target} entries in {width} columns")
    new_cols = np.concatenate([cols, free])
    new_vals = np.concatenate([vals, np.zeros(need)])
    order = np.argsort(new_cols, kind="stable")
    return new_cols[order], new_vals[order]


def _assemble(shape, rows: list[tuple[np.ndarray, np.ndarray]]) -> PlainSparse:
    coords = [np.stack([np.full(c.size, i + 1), c], axis=1) for i, (c, _) in enumerate(rows)]
    coords = np.concatenate(coords) if coords else np.zeros((0, 2), dtype=np.int64)
    values = np.concatenate([v for _, v in rows]) if rows else np.zeros(0)
    return PlainSparse(shape, coords, values)


def max_row_pad(plain: PlainSparse, bound: int) -> PlainSparse:
    """Give every row exactly ``bound`` tuples using zero-valued dummies.

    Dummies occupy the lowest-index empty columns of the row.
    """
    counts = plain.group_counts(0)
    if counts.size and bound < counts.max():
        raise TemplateFitError(f"bound {bound} below the largest row ({counts.max()})")
    width = plain.shape[1]
    rows = [_pad_row(c, v, bound, width) for c, v in _row_lists(plain)]
    return _assemble(plain.shape, rows)


def pad_to_template(plain: PlainSparse, template: Template) -> tuple[PlainSparse, np.ndarray]:
    """Sort rows by non-zero count and pad block by block.

    Returns the padded matrix and ``perm`` such that padded row ``i`` holds
    original row ``perm[i]`` (0-indexed).
    """
    counts = plain.group_counts(0)
    if not template_fits(ECDF.from_degrees(counts), template):
        raise TemplateFitError("rows do not fit the template")
    perm = np.argsort(counts, kind="stable")
    lists = _row_lists(plain)
    width = plain.shape[1]
    slots = template.slots()
    rows = [_pad_row(*lists[r], int(slots[i]), width) for i, r in enumerate(perm)]
    return _assemble(plain.shape, rows), perm


def padded_storage(plain: PlainSparse, bound: int) -> int:
    return sparse_storage(plain.shape[0] * bound, coord_width(plain.shape[1]))


# ---------------------------------------------------------------- MPC estimation


def mpc_quantile_template(nnz_bits: Shares, quantiles: Sequence[float] = QUANTILES) -> tuple[int, ...]:
    """Open the per-row counts at the quantile positions after an oblivious sort.

    ``nnz_bits`` holds one bit-shared count per row, shape ``(n, B)``. Only the
    values at the quantile positions are revealed.
    """
    n = nnz_bits.shape[0]
    if n == 0:
        raise ValueError("no rows")
    (ordered,), _ = batcher_sort([nnz_bits])
    pos = quantile_positions(n, quantiles) - 1
    picked = bit_compose(ordered[pos])
    vals = nnz_bits.ctx.field.to_int(open_values(picked))
    return tuple(int(v) for v in vals)


def owner_alpha(degrees, approx: Sequence[int], quantiles: Sequence[float] = QUANTILES) -> Fraction:
    """Smallest ``alpha >= 1`` with every row under ``alpha`` times its block's bound."""
    deg = np.sort(np.asarray(degrees, dtype=np.int64))
    if deg.size == 0:
        return Fraction(1)
    slots = np.repeat(np.array(approx, dtype=np.int64), block_sizes(deg.size, quantiles))
    alpha = Fraction(1)
    for d, s in zip(deg, slots):
        if d == 0:
            continue
        if s == 0:
            raise TemplateFitError("a block bound of 0 cannot be scaled to fit a non-empty row")
        alpha = max(alpha, Fraction(int(d), int(s)))
    return alpha


def share_alphas(ctx, alphas: Sequence) -> Shares:
    """Owners share their factors as fixed-point values."""
    return share(ctx, [fp_encode(float(a), ctx.field) for a in alphas])


def mpc_scaling_factor(alphas: Shares, approx: Sequence[int]) -> tuple[Fraction, tuple[int, ...]]:
    """Open the largest factor and scale the approximate bounds, rounding up."""
    best = recursive_max(alphas)
    raw = int(alphas.ctx.field.to_int(open_values(best.reshape(1)))[0])
    alpha = Fraction(raw, FIXED.scale)
    if alpha < 1:
        raise ValueError(f"scaling factor {float(alpha)} below 1: owner input violates the contract")
    return alpha, tuple(math.ceil(alpha * int(a)) for a in approx)


def template_for_owner(rows: int, bounds: Sequence[int], quantiles: Sequence[float] = QUANTILES) -> Template:
    return Template(tuple(zip(block_sizes(rows, quantiles), bounds)), "quantile")


# ---------------------------------------------------------------- DP bounds


@dataclass(frozen=True)
class DpParams:
    epsilon: float
    delta: float
    l: int = 1

    def __post_init__(self):
        _check_eps_delta(self.epsilon, self.delta)
        if self.l < 1 or self.l & (self.l - 1):
            raise ValueError("l must be a power of two")

    @property
    def L(self) -> int:
        return self.l.bit_length() - 1


def _check_eps_delta(epsilon: float, delta: float) -> None:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")


def dp_single_offset(epsilon: float, delta: float) -> float:
    _check_eps_delta(epsilon, delta)
    return math.log(1 / (2 * delta)) / epsilon


def dp_single_upper(y, epsilon: float, delta: float, rng: np.random.Generator, size=None):
    """``y`` plus a shift and Laplace noise; at least ``y`` with probability ``1 - delta``."""
    off = dp_single_offset(epsilon, delta)
    y = np.asarray(y, dtype=np.float64)
    # one independent draw per count unless a larger batch is requested
    noise = rng.laplace(0.0, 1.0 / epsilon, size=y.shape if size is None else size)
    return y + off + noise


def dp_tree_offset(params: DpParams) -> float:
    L = params.L
    if L == 0:
        raise ValueError("need l >= 2")
    c = L * (L + 1)
    return c / params.epsilon * math.log(c / (2 * params.delta))


def dp_tree_noise(params: DpParams, rng: np.random.Generator, noise_scale: float = 1.0) -> np.ndarray:
    """Correlated noise for ``l`` thresholds: output ``i`` sums one variable per level.

    Level ``j`` draws ``ceil(l / 2**j)`` variables and output ``i`` (1-indexed)
    uses the one at ``floor((i - 1) / 2**j)``.
    """
    L, l = params.L, params.l
    if L == 0:
        raise ValueError("need l >= 2")
    scale = (L + 1) / params.epsilon * noise_scale
    idx = np.arange(l)
    total = np.zeros(l)
    for j in range(L):
        count = -(-l // (1 << j))
        eta = rng.laplace(0.0, scale, size=count) if scale > 0 else np.zeros(count)
        total += eta[idx >> j]
    return total


def dp_tree_upper(values, params: DpParams, rng: np.random.Generator, noise_scale: float = 1.0) -> np.ndarray:
    """Simultaneous upper bounds on ``l`` ECDF values.

    ``noise_scale = 0`` removes the noise (a test hook for the offset).
    """
    f = np.asarray(values, dtype=np.float64)
    if f.shape != (params.l,):
        raise ValueError(f"expected {params.l} values, got shape {f.shape}")
    return f + dp_tree_offset(params) + dp_tree_noise(params, rng, noise_scale)


def dp_thresholds(params: DpParams, max_degree: int) -> np.ndarray:
    """``l`` increasing degree thresholds spread over ``[1, max_degree]`` (public)."""
    grid = np.linspace(1, max(max_degree, params.l), params.l)
    # spacing is at least 1, so the rounded grid stays strictly increasing
    return np.ceil(grid).astype(np.int64)


def template_from_tail_bounds(thresholds, upper, rows: int, max_degree: int, source: str = "dp") -> Template:
    """Smallest template consistent with "at most ``upper[i]`` rows reach ``thresholds[i]``".

    Rows are assumed to reach ``thresholds[i]`` but not ``thresholds[i+1]``
    in the largest numbers the bounds allow; the last group gets
    ``max_degree``. Fits any data whose tail counts respect the bounds.
    """
    t = np.asarray(thresholds, dtype=np.int64)
    u = np.floor(np.asarray(upper, dtype=np.float64))
    a = np.clip(u, 0, rows).astype(np.int64)
    a = np.minimum.accumulate(a)  # a count at a higher threshold cannot exceed a lower one
    blocks = [(rows - a[0], int(t[0]) - 1)]
    for i in range(len(t) - 1):
        blocks.append((int(a[i] - a[i + 1]), int(t[i + 1]) - 1))
    blocks.append((int(a[-1]), int(max_degree)))
    merged: list[tuple[int, int]] = []
    for n_k, b in blocks:
        if n_k == 0:
            continue
        if merged and merged[-1][1] == b:
            merged[-1] = (merged[-1][0] + n_k, b)
        else:
            merged.append((n_k, max(b, merged[-1][1]) if merged else b))
    return Template(tuple(merged) if merged else ((0, 0),), source)


# ---------------------------------------------------------------- population bounds


def pop_dist_upper(F, n: int, lam: float):
    """``F + lam * sqrt(F (1 - F) / n)`` clipped to ``[0, 1]``."""
    F = np.asarray(F, dtype=np.float64)
    if n < 1:
        raise ValueError("n must be positive")
    if np.any((F < 0) | (F > 1)):
        raise ValueError("F must be a probability")
    out = np.clip(F + lam * np.sqrt(F * (1 - F) / n), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def pop_sample_upper(p, s: int, lam: float):
    """Same bound from a sample of size ``s`` with measured tail fraction ``p``."""
    p = np.asarray(p, dtype=np.float64)
    if s < 2:
        raise ValueError("sample size must be at least 2")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p must be a probability")
    out = np.clip(p + lam * np.sqrt(p * (1 - p) / (s - 1)), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- power law


@dataclass(frozen=True)
class PowerLawParams:
    gamma: float
    m: int

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if self.m < 1:
            raise ValueError("max degree must be positive")

    @property
    def Z(self) -> float:
        return float(np.sum(np.arange(1, self.m + 1, dtype=np.float64) ** -self.gamma))

    def pmf(self) -> np.ndarray:
        w = np.arange(1, self.m + 1, dtype=np.float64) ** -self.gamma
        return w / w.sum()


def expected_degree(params: PowerLawParams) -> float:
    i = np.arange(1, params.m + 1, dtype=np.float64)
    return float(np.sum(i ** (1 - params.gamma)) / params.Z)


def degree_variance(params: PowerLawParams) -> float:
    i = np.arange(1, params.m + 1, dtype=np.float64)
    p = params.pmf()
    mean = float(np.sum(i * p))
    return float(np.sum(i * i * p) - mean * mean)


def sample_degrees(params: PowerLawParams, rows: int, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(np.arange(1, params.m + 1), size=rows, p=params.pmf())


def sample_powerlaw(params: PowerLawParams, rows: int, cols: int, rng: np.random.Generator) -> PlainSparse:
    """Rows with power-law degrees and uniformly placed non-zeros."""
    if params.m > cols:
        raise ValueError("max degree exceeds the column count")
    deg = sample_degrees(params, rows, rng)
    coords, values = [], []
    for i, d in enumerate(deg):
        cols_i = np.sort(rng.choice(cols, size=int(d), replace=False)) + 1
        coords.append(np.stack([np.full(d, i + 1), cols_i], axis=1))
        mag = rng.uniform(0.5, 1.5, size=d)
        values.append(np.where(rng.random(d) < 0.5, -mag, mag))
    if not coords:
        return PlainSparse((rows, cols), np.zeros((0, 2), dtype=np.int64), np.zeros(0))
    return PlainSparse((rows, cols), np.concatenate(coords), np.concatenate(values))
