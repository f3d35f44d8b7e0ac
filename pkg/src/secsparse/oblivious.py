"""Data-oblivious building blocks on bit-shared integers.

Bit-shared integers are :class:`Shares` whose last axis holds the bits,
least significant first. Composite sort keys are lists of such arrays, most
significant component first. Every layer of work is batched into a single
call to :func:`mul`, so the round count only depends on public sizes.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from .runtime import ProtocolContext
from .shamir import STAT_BITS, Shares, concat, mul, open_values, public, rand_bits, rand_share

DEFAULT_MAX_BITS = 52


def to_bits(values, width: int) -> np.ndarray:
    """Little-endian bit matrix of non-negative integers."""
    v = np.asarray(values, dtype=np.int64)
    if v.size and (v.min() < 0 or (width < 63 and v.max() >= 1 << width)):
        raise ValueError(f"values do not fit in {width} bits")
    return (v[..., None] >> np.arange(width, dtype=np.int64)) & 1


def from_bits(bits) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64)
    return (b << np.arange(b.shape[-1], dtype=np.int64)).sum(axis=-1)


def public_bits(ctx: ProtocolContext, values, width: int) -> Shares:
    return public(ctx, to_bits(values, width))


def bit_compose(bits: Shares) -> Shares:
    """Arithmetic value ``sum(2**i * b_i)``; local."""
    ctx = bits.ctx
    width = bits.shape[-1]
    weights = ctx.field.array(np.array([1 << i for i in range(width)], dtype=object))
    f = ctx.field
    return Shares(ctx, f.vsum(f.vmul(bits.data, weights), axis=-1), bits.degree)


def _check_widths(a: Shares, b: Shares) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"bit width mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def _and_tree(x: Shares) -> Shares:
    """Product over the last axis in ceil(log2 width) rounds."""
    width = x.shape[-1]
    if width == 0:
        return public(x.ctx, np.ones(x.shape[:-1], dtype=np.int64))
    while width > 1:
        half = width // 2
        prod = mul(x[..., 0:2 * half:2], x[..., 1:2 * half:2])
        x = concat([prod, x[..., 2 * half:]], axis=-1) if width % 2 else prod
        width = x.shape[-1]
    return x[..., 0]


def _xnor(a: Shares, b: Shares) -> tuple[Shares, Shares]:
    prod = mul(a, b)
    return 1 - a - b + 2 * prod, prod


def eq_bits(a: Shares, b: Shares) -> Shares:
    """1 iff the two bit strings are equal; 1 + ceil(log2 B) rounds."""
    _check_widths(a, b)
    e, _ = _xnor(a, b)
    return _and_tree(e)


def eq_zero(a: Shares) -> Shares:
    """1 iff every bit is 0; ceil(log2 B) rounds."""
    return _and_tree(1 - a)


def lt_bits(a: Shares, b: Shares) -> Shares:
    """1 iff ``a < b`` as unsigned integers.

    Pairs of adjacent bit groups are merged from the bottom up: the higher
    group decides unless it is all-equal, in which case the lower one does.
    """
    _check_widths(a, b)
    if a.shape[-1] == 0:
        return public(a.ctx, np.zeros(a.shape[:-1], dtype=np.int64))
    e, prod = _xnor(a, b)
    less = b - prod  # (1 - a_i) * b_i
    width = less.shape[-1]
    while width > 1:
        half = width // 2
        e_lo, e_hi = e[..., 0:2 * half:2], e[..., 1:2 * half:2]
        l_lo, l_hi = less[..., 0:2 * half:2], less[..., 1:2 * half:2]
        top_l, top_e = less[..., 2 * half:], e[..., 2 * half:]
        if width == 2:
            # last merge: the equality flag is no longer needed
            less = l_hi + mul(e_hi, l_lo)
            e = e_hi
        else:
            both = mul(concat([e_hi, e_hi], axis=-1), concat([l_lo, e_lo], axis=-1))
            less = l_hi + both[..., :half]
            e = both[..., half:]
        if width % 2:
            less = concat([less, top_l], axis=-1)
            e = concat([e, top_e], axis=-1)
        width = less.shape[-1]
    return less[..., 0]


def select(c: Shares, a, b) -> Shares:
    """``c ? a : b`` element-wise; ``c`` broadcasts over trailing axes."""
    while len(c.shape) < len(_shape(a)):
        c = c.expand()
    return b + mul(c, a - b)


def _shape(x) -> tuple[int, ...]:
    return x.shape if isinstance(x, Shares) else np.shape(x)


def cond_swap(c: Shares, x: Shares, y: Shares) -> tuple[Shares, Shares]:
    """Swap ``x`` and ``y`` where ``c = 1``; one multiplication per element."""
    while len(c.shape) < len(x.shape):
        c = c.expand()
    d = mul(c, y - x)
    return x + d, y - d


@lru_cache(maxsize=None)
def merge_exchange_layers(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Comparator layers of Batcher's merge-exchange network for ``n`` keys.

    Works for any ``n`` (no padding needed); every layer is a set of
    disjoint pairs ``i < j`` that may run in parallel.
    """
    if n < 2:
        return ()
    t = (n - 1).bit_length()
    layers = []
    p = 1 << (t - 1)
    while p > 0:
        q = 1 << (t - 1)
        r = 0
        d = p
        while True:
            idx = np.array([i for i in range(n - d) if i & p == r], dtype=np.int64)
            if idx.size:
                layers.append((idx, idx + d))
            if q == p:
                break
            d = q - p
            q >>= 1
            r = p
        p >>= 1
    return tuple(layers)


def comparator_count(n: int) -> int:
    return sum(len(i) for i, _ in merge_exchange_layers(n))


def batcher_sort(keys: Sequence[Shares], payload: Shares | None = None) -> tuple[list[Shares], Shares | None]:
    """Sort rows ascending on a composite bit-shared key.

    ``keys`` are ``(m, B_c)`` bit arrays, most significant component first;
    ``payload`` is an optional ``(m, w)`` array carried along.
    """
    keys = list(keys)
    if not keys:
        raise ValueError("need at least one key component")
    m = keys[0].shape[0]
    widths = [k.shape[-1] for k in keys]
    ctx = keys[0].ctx
    parts = keys[::-1]
    if payload is not None:
        parts = parts + [payload]
    table = concat(parts, axis=-1)
    kb = sum(widths)
    data = table.data.copy()
    for i, j in merge_exchange_layers(m):
        ti = Shares(ctx, data[:, i], table.degree, view=True)
        tj = Shares(ctx, data[:, j], table.degree, view=True)
        c = lt_bits(tj[..., :kb], ti[..., :kb])
        ni, nj = cond_swap(c, ti, tj)
        data[:, i] = ni.data
        data[:, j] = nj.data
    table = Shares(ctx, data, table.degree)
    out_keys = []
    pos = 0
    for w in widths[::-1]:
        out_keys.append(table[..., pos:pos + w])
        pos += w
    out_payload = table[..., pos:] if payload is not None else None
    return out_keys[::-1], out_payload


def shuffle_key_bits(m: int) -> int:
    return 2 * max(1, (m - 1).bit_length()) + STAT_BITS


def shuffle(items: Shares) -> Shares:
    """Uniformly permute the rows of ``items`` by sorting on random keys.

    For ``items`` of shape ``(m, *batch, w)`` every batch position gets its
    own independent permutation of the ``m`` rows.
    """
    m = items.shape[0]
    if m < 2:
        return items
    if len(items.shape) == 1:
        return shuffle(items.expand())[..., 0]
    keys = rand_bits(items.ctx, items.shape[:-1] + (shuffle_key_bits(m),))
    _, out = batcher_sort([keys], items)
    return out


def bit_decompose(x: Shares, bits: int) -> Shares:
    """Bits of secret values known to lie in ``[0, 2**bits)``.

    The value is masked by a dealer-supplied random ``r`` whose low bits are
    also shared, opened, and the low bits of ``x`` are recovered as
    ``(c - r) mod 2**bits`` with a parallel-prefix borrow circuit.
    """
    ctx = x.ctx
    shape = x.shape
    r_bits = rand_bits(ctx, shape + (bits,))
    r_hi = rand_share(ctx, shape, bound=1 << STAT_BITS)
    r = bit_compose(r_bits) + r_hi * (1 << bits)
    c = ctx.field.to_int(open_values(x + r))
    if bits < 63:
        mask = (1 << bits) - 1
        c_lo = np.array([v & mask for v in c.ravel()], dtype=np.int64).reshape(c.shape)
        a = to_bits(c_lo, bits)
    else:
        a = _big_bits(c, bits)
    not_a = 1 - a
    # x_i = a_i xor r_i xor borrow_i; borrow_{i+1} = g_i or (p_i and borrow_i)
    g = r_bits * not_a
    u = r_bits * (1 - 2 * a) + a  # a xor r
    prop = 1 - u
    gen, prp = g, prop
    s = 1
    while s < bits:
        both = mul(concat([prp[..., s:], prp[..., s:]], axis=-1), concat([gen[..., :-s], prp[..., :-s]], axis=-1))
        k = bits - s
        gen = concat([gen[..., :s], gen[..., s:] + both[..., :k]], axis=-1)
        prp = concat([prp[..., :s], both[..., k:]], axis=-1)
        s <<= 1
    zero = public(ctx, np.zeros(shape + (1,), dtype=np.int64))
    borrow = concat([zero, gen[..., :-1]], axis=-1)
    return u + borrow - 2 * mul(u, borrow)


def _big_bits(values: np.ndarray, bits: int) -> np.ndarray:
    out = np.zeros(values.shape + (bits,), dtype=np.int64)
    for idx, v in np.ndenumerate(values):
        v = int(v)
        for i in range(bits):
            out[idx + (i,)] = (v >> i) & 1
    return out


def recursive_max(values: Shares, bits: int = DEFAULT_MAX_BITS) -> Shares:
    """Maximum of non-negative secrets below ``2**bits``.

    Values are bit-decomposed once, then merged pairwise level by level: the
    maximum of a list is the larger of the maxima of its two halves.
    """
    if values.shape[0] == 0:
        raise ValueError("max of an empty list")
    vbits = bit_decompose(values, bits)
    return max_by_key(vbits, values.expand())[..., 0]


def max_by_key(key_bits: Shares, payload: Shares) -> Shares:
    """Row of ``payload`` whose bit key is largest (pairwise tournament)."""
    kb = key_bits.shape[-1]
    table = concat([key_bits, payload], axis=-1)
    while table.shape[0] > 1:
        n = table.shape[0]
        half = n // 2
        left = table[0:2 * half:2]
        right = table[1:2 * half:2]
        c = lt_bits(left[..., :kb], right[..., :kb])
        merged = select(c, right, left)
        table = concat([merged, table[2 * half:]], axis=0) if n % 2 else merged
    return table[0, kb:]


def reveal_flag(c: Shares) -> np.ndarray:
    """Open a batch of 0/1 flags in one round."""
    return c.ctx.field.to_int(open_values(c)).astype(np.int64)
