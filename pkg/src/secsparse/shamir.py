"""Shamir secret sharing over a prime field with explicit degree tracking.

A :class:`Shares` object holds one share per party for a whole array of
secrets: ``data[i, ...]`` is party ``i + 1``'s share. Every communicating
operation works on the full array at once, so a batch of independent
multiplications or openings costs a single round.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .runtime import ProtocolContext

TRUNC_MAGNITUDE_BITS = 128
STAT_BITS = 40


class DegreeError(ValueError):
    """Operands carry incompatible polynomial degrees."""


class ReconstructionError(ValueError):
    """Too few shares to interpolate."""


class Shares:
    """Shares of an array of secrets, shape ``(N, *shape)``."""

    __slots__ = ("ctx", "data", "degree", "_count")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, ctx: ProtocolContext, data: np.ndarray, degree: int, view: bool = False):
        if data.shape[0] != ctx.n:
            raise ValueError(f"expected leading axis {ctx.n}, got {data.shape}")
        self.ctx = ctx
        self.data = data
        self.degree = degree
        # slices and reshapes of existing shares hold no new storage
        self._count = 0 if view else data.size // ctx.n
        ctx._alloc(self._count)

    def __del__(self):
        try:
            self.ctx._free(self._count)
        except AttributeError:
            pass

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape[1:]

    @property
    def size(self) -> int:
        return self.data.size // self.ctx.n

    def __len__(self) -> int:
        return self.data.shape[1]

    def __repr__(self) -> str:
        return f"Shares(shape={self.shape}, degree={self.degree})"

    def __getitem__(self, key) -> "Shares":
        if not isinstance(key, tuple):
            key = (key,)
        return Shares(self.ctx, self.data[(slice(None),) + key], self.degree, view=True)

    def reshape(self, *shape) -> "Shares":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Shares(self.ctx, self.data.reshape((self.ctx.n,) + tuple(shape)), self.degree, view=True)

    def expand(self, axis: int = -1) -> "Shares":
        """Insert a trailing (or given) length-1 axis for broadcasting."""
        ax = axis if axis < 0 else axis + 1
        return Shares(self.ctx, np.expand_dims(self.data, ax), self.degree, view=True)

    def _new(self, data: np.ndarray) -> "Shares":
        return Shares(self.ctx, data, self.degree)

    def __add__(self, other) -> "Shares":
        f = self.ctx.field
        if isinstance(other, Shares):
            _check_same_degree(self, other)
            return self._new(f.vadd(self.data, other.data))
        return self._new(f.vadd(self.data, f.array(other)))

    __radd__ = __add__

    def __sub__(self, other) -> "Shares":
        f = self.ctx.field
        if isinstance(other, Shares):
            _check_same_degree(self, other)
            return self._new(f.vsub(self.data, other.data))
        return self._new(f.vsub(self.data, f.array(other)))

    def __rsub__(self, other) -> "Shares":
        f = self.ctx.field
        return self._new(f.vsub(f.array(other), self.data))

    def __neg__(self) -> "Shares":
        return self._new(self.ctx.field.vneg(self.data))

    def __mul__(self, other) -> "Shares":
        if isinstance(other, Shares):
            raise TypeError("use mul() or mul_local() for share-by-share products")
        return self._new(self.ctx.field.vmul_public(self.data, other))

    __rmul__ = __mul__


def _check_same_degree(a: Shares, b: Shares) -> None:
    if a.degree != b.degree:
        raise DegreeError(f"degree mismatch: {a.degree} vs {b.degree}")


def add_local(a: Shares, b) -> Shares:
    return a + b


def sub_local(a: Shares, b) -> Shares:
    return a - b


def scale_public(a: Shares, c) -> Shares:
    return a * c


def concat(parts: Sequence[Shares], axis: int = 0) -> Shares:
    """Concatenate along a logical (non-party) axis."""
    if not parts:
        raise ValueError("nothing to concatenate")
    deg = parts[0].degree
    for s in parts[1:]:
        _check_same_degree(parts[0], s)
    ax = axis + 1 if axis >= 0 else axis
    return Shares(parts[0].ctx, np.concatenate([s.data for s in parts], axis=ax), deg)


def stack(parts: Sequence[Shares], axis: int = 0) -> Shares:
    deg = parts[0].degree
    for s in parts[1:]:
        _check_same_degree(parts[0], s)
    ax = axis + 1 if axis >= 0 else axis
    return Shares(parts[0].ctx, np.stack([s.data for s in parts], axis=ax), deg)


def _poly_shares(ctx: ProtocolContext, secrets: np.ndarray, degree: int, rng: np.random.Generator) -> np.ndarray:
    field = ctx.field
    shape = secrets.shape
    flat = secrets.reshape(1, -1)
    if degree == 0:
        coeffs = flat
    else:
        coeffs = np.concatenate([flat, field.random(rng, (degree, flat.shape[1]))], axis=0)
    data = field.lincomb(coeffs, ctx.vandermonde(degree))
    return data.reshape((ctx.n,) + shape)


def share(ctx: ProtocolContext, secrets, degree: int | None = None, rng: np.random.Generator | None = None) -> Shares:
    """Deal shares of field elements from a data owner.

    The owner's upload is recorded as input traffic, not as server traffic.
    """
    secrets = ctx.field.array(secrets)
    degree = ctx.t if degree is None else degree
    data = _poly_shares(ctx, secrets, degree, ctx.owner_rng if rng is None else rng)
    if rng is None:
        ctx.record_input(data.size)
    return Shares(ctx, data, degree)


def public(ctx: ProtocolContext, values) -> Shares:
    """Trivial sharing of a public constant (every party holds the value)."""
    arr = ctx.field.array(values)
    data = np.broadcast_to(arr, (ctx.n,) + arr.shape).copy()
    return Shares(ctx, data, ctx.t)


def zeros(ctx: ProtocolContext, shape) -> Shares:
    return Shares(ctx, ctx.field.zeros((ctx.n,) + tuple(shape)), ctx.t)


def reconstruct(x: Shares, parties: Sequence[int] | None = None) -> np.ndarray:
    """Interpolate at zero from the given parties' shares (default: all).

    Test-only opening: nothing is charged to the ledger.
    """
    ctx = x.ctx
    parties = ctx.parties if parties is None else tuple(parties)
    if len(parties) < x.degree + 1:
        raise ReconstructionError(f"need {x.degree + 1} shares, got {len(parties)}")
    lam = ctx.lagrange(parties)
    field = ctx.field
    acc = field.zeros(x.shape)
    for coeff, party in zip(lam, parties):
        acc = field.vadd(acc, field.vmul(x.data[party - 1], field.array(coeff)))
    return acc


def open_values(x: Shares) -> np.ndarray:
    """Every party broadcasts its share; one round, N(N-1) elements each."""
    ctx = x.ctx
    if x.size:
        outbox = np.broadcast_to(x.data[:, None], (ctx.n, ctx.n) + x.shape)
        ctx.exchange_all(outbox)
        ctx.record_open(x.size)
    return reconstruct(x)


def reduce_degree(x: Shares) -> Shares:
    """Resharing: each party deals its share with a fresh degree-t polynomial.

    Receivers recombine the sub-shares with the Lagrange coefficients of all N
    points, which lands on a degree-t sharing of the same secret.
    """
    ctx = x.ctx
    if x.degree >= ctx.n:
        raise DegreeError(f"degree {x.degree} cannot be reduced with {ctx.n} parties")
    field = ctx.field
    flat = x.data.reshape(ctx.n, -1)
    k = flat.shape[1]
    vander = ctx.vandermonde(ctx.t)
    outbox = field.zeros((ctx.n, ctx.n, k))
    for i in range(ctx.n):
        coeffs = np.concatenate([flat[i:i + 1], field.random(ctx.party_rngs[i], (ctx.t, k))], axis=0)
        outbox[i] = field.lincomb(coeffs, vander)
    inbox = ctx.exchange_all(outbox)
    lam = np.array([ctx.lagrange_small()], dtype=np.int64)
    out = field.zeros((ctx.n, k))
    for j in range(ctx.n):
        out[j] = field.lincomb(inbox[j], lam)[0]
    return Shares(ctx, out.reshape(x.data.shape), ctx.t)


def mul_local(a: Shares, b: Shares) -> Shares:
    """Pointwise share product; degrees add."""
    deg = a.degree + b.degree
    if deg >= a.ctx.n:
        raise DegreeError(f"product degree {deg} not reconstructable by {a.ctx.n} parties")
    return Shares(a.ctx, a.ctx.field.vmul(a.data, b.data), deg)


def mul(a: Shares, b: Shares) -> Shares:
    """Secure product with one resharing round (broadcasting allowed)."""
    t = a.ctx.t
    if a.degree != t or b.degree != t:
        raise DegreeError(f"mul needs degree-{t} operands, got {a.degree} and {b.degree}")
    return reduce_degree(mul_local(a, b))


def inner_product(xs: Shares, ys: Shares) -> Shares:
    """Sum of products along the last axis with a single degree reduction."""
    if xs.shape[-1:] != ys.shape[-1:]:
        raise ValueError(f"length mismatch: {xs.shape} vs {ys.shape}")
    t = xs.ctx.t
    if xs.degree != t or ys.degree != t:
        raise DegreeError("inner_product needs degree-t operands")
    ctx = xs.ctx
    field = ctx.field
    summed = field.vsum(field.vmul(xs.data, ys.data), axis=-1)
    return reduce_degree(Shares(ctx, summed, 2 * t))


def rand_share(ctx: ProtocolContext, shape, bound: int | None = None, degree: int | None = None) -> Shares:
    """Dealer-supplied sharing of a uniform value in ``[0, bound)``.

    ``bound`` must be a power of two; ``None`` means the whole field. Counted
    as offline material.
    """
    shape = tuple(shape) if not isinstance(shape, int) else (shape,)
    field = ctx.field
    if bound is None:
        vals = field.random(ctx.dealer_rng, shape)
    else:
        if bound & (bound - 1):
            raise ValueError("bound must be a power of two")
        vals = field.random_bits(ctx.dealer_rng, bound.bit_length() - 1, shape)
    degree = ctx.t if degree is None else degree
    data = _poly_shares(ctx, vals, degree, ctx.dealer_rng)
    ctx.record_offline(data.size)
    return Shares(ctx, data, degree)


def rand_bits(ctx: ProtocolContext, shape) -> Shares:
    return rand_share(ctx, shape, bound=2)


def trunc(x: Shares, frac_bits: int = 32, magnitude_bits: int = TRUNC_MAGNITUDE_BITS) -> Shares:
    """Probabilistic truncation by ``2**frac_bits``.

    Requires the signed value to satisfy ``|x| < 2**(magnitude_bits - 1)``.
    The opened value is ``x + 2**(magnitude_bits-1) + r`` with ``r`` carrying
    40 extra bits of masking; the result is ``floor(x / 2**f)`` or one more.
    """
    ctx = x.ctx
    if x.degree != ctx.t:
        raise DegreeError("trunc expects a degree-t input")
    f, ell = frac_bits, magnitude_bits
    r_lo = rand_share(ctx, x.shape, bound=1 << f)
    r_hi = rand_share(ctx, x.shape, bound=1 << (ell + STAT_BITS - f))
    masked = x + (1 << (ell - 1)) + r_hi * (1 << f) + r_lo
    opened = open_values(masked)
    shifted = (ctx.field.to_int(opened) >> f) - (1 << (ell - 1 - f))
    return shifted - r_hi
