"""Compiled kernels for arithmetic modulo ``2**256 - c``.

Elements are eight little-endian 32-bit limbs held in ``uint32`` rows. All
kernels take flattened ``(k, 8)`` arrays and the folding constant ``c``.
"""

import numba as nb
import numpy as np

LIMBS = 8
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


@nb.njit(cache=True, inline="always")
def _finish(t, c, out):
    # t holds a value below 2**256; subtract p once if it is >= p
    carry = np.uint64(c)
    for i in range(LIMBS):
        cur = t[i] + carry
        carry = cur >> _S32
    if carry:
        carry = np.uint64(c)
        for i in range(LIMBS):
            cur = t[i] + carry
            out[i] = cur & _MASK
            carry = cur >> _S32
    else:
        for i in range(LIMBS):
            out[i] = t[i]


@nb.njit(cache=True, inline="always")
def _fold(t, carry, c):
    # add carry * 2**256 == carry * c (mod p) into t[0:8]
    while carry:
        cur = t[0] + carry * np.uint64(c)
        t[0] = cur & _MASK
        carry = cur >> _S32
        i = 1
        while carry and i < LIMBS:
            cur = t[i] + carry
            t[i] = cur & _MASK
            carry = cur >> _S32
            i += 1


@nb.njit(cache=True)
def add(a, b, out, c):
    t = np.zeros(LIMBS, np.uint64)
    for k in range(a.shape[0]):
        carry = np.uint64(0)
        for i in range(LIMBS):
            cur = np.uint64(a[k, i]) + np.uint64(b[k, i]) + carry
            t[i] = cur & _MASK
            carry = cur >> _S32
        _fold(t, carry, c)
        _finish(t, c, out[k])


@nb.njit(cache=True)
def sub(a, b, out, c):
    t = np.zeros(LIMBS, np.uint64)
    for k in range(a.shape[0]):
        borrow = np.uint64(0)
        for i in range(LIMBS):
            ai = np.uint64(a[k, i])
            d = np.uint64(b[k, i]) + borrow
            if ai >= d:
                t[i] = ai - d
                borrow = np.uint64(0)
            else:
                t[i] = ai + (np.uint64(1) << _S32) - d
                borrow = np.uint64(1)
        if borrow:
            # wrapped by 2**256; adding p means subtracting c
            bb = np.uint64(c)
            for i in range(LIMBS):
                if t[i] >= bb:
                    t[i] = t[i] - bb
                    bb = np.uint64(0)
                    break
                t[i] = t[i] + (np.uint64(1) << _S32) - bb
                bb = np.uint64(1)
        for i in range(LIMBS):
            out[k, i] = t[i]


@nb.njit(cache=True, inline="always")
def _mul_into(a, b, t, c):
    for i in range(2 * LIMBS):
        t[i] = 0
    for i in range(LIMBS):
        ai = np.uint64(a[i])
        if ai == 0:
            continue
        carry = np.uint64(0)
        for j in range(LIMBS):
            cur = t[i + j] + ai * np.uint64(b[j]) + carry
            t[i + j] = cur & _MASK
            carry = cur >> _S32
        t[i + LIMBS] = carry
    carry = np.uint64(0)
    for i in range(LIMBS):
        cur = t[i] + t[i + LIMBS] * np.uint64(c) + carry
        t[i] = cur & _MASK
        carry = cur >> _S32
    _fold(t, carry, c)


@nb.njit(cache=True)
def mul(a, b, out, c):
    t = np.zeros(2 * LIMBS, np.uint64)
    for k in range(a.shape[0]):
        _mul_into(a[k], b[k], t, c)
        _finish(t, c, out[k])


@nb.njit(cache=True)
def sum_rows(a, out, c):
    """``a`` has shape (k, m, 8); reduce over m."""
    t = np.zeros(LIMBS, np.uint64)
    for k in range(a.shape[0]):
        for i in range(LIMBS):
            t[i] = 0
        for r in range(a.shape[1]):
            carry = np.uint64(0)
            for i in range(LIMBS):
                cur = t[i] + np.uint64(a[k, r, i]) + carry
                t[i] = cur & _MASK
                carry = cur >> _S32
            _fold(t, carry, c)
        _finish(t, c, out[k])


@nb.njit(cache=True)
def matmul(a, b, out, c):
    """``a`` (n, m, 8) times ``b`` (m, q, 8) into ``out`` (n, q, 8)."""
    t = np.zeros(2 * LIMBS, np.uint64)
    acc = np.zeros(LIMBS, np.uint64)
    for r in range(a.shape[0]):
        for q in range(b.shape[1]):
            for i in range(LIMBS):
                acc[i] = 0
            for m in range(a.shape[1]):
                _mul_into(a[r, m], b[m, q], t, c)
                carry = np.uint64(0)
                for i in range(LIMBS):
                    cur = acc[i] + t[i] + carry
                    acc[i] = cur & _MASK
                    carry = cur >> _S32
                _fold(acc, carry, c)
            _finish(acc, c, out[r, q])


@nb.njit(cache=True)
def reduce_once(a, out, c):
    t = np.zeros(LIMBS, np.uint64)
    for k in range(a.shape[0]):
        for i in range(LIMBS):
            t[i] = a[k, i]
        _finish(t, c, out[k])


@nb.njit(cache=True, inline="always")
def _acc_small(acc, a, s):
    # acc (10 limbs) += a (8 limbs) * s, with s < 2**32
    carry = np.uint64(0)
    for i in range(LIMBS):
        cur = acc[i] + np.uint64(a[i]) * s + carry
        acc[i] = cur & _MASK
        carry = cur >> _S32
    i = LIMBS
    while carry:
        cur = acc[i] + carry
        acc[i] = cur & _MASK
        carry = cur >> _S32
        i += 1


@nb.njit(cache=True, inline="always")
def _reduce_wide(acc, c, out):
    # fold limbs 8 and 9 (weights 2**256, 2**288) back using 2**256 == c
    while acc[8] or acc[9]:
        for top in (9, 8):
            v = acc[top]
            if v == 0:
                continue
            acc[top] = 0
            carry = np.uint64(0)
            pos = top - LIMBS
            cur = acc[pos] + v * np.uint64(c)
            acc[pos] = cur & _MASK
            carry = cur >> _S32
            i = pos + 1
            while carry:
                cur = acc[i] + carry
                acc[i] = cur & _MASK
                carry = cur >> _S32
                i += 1
    _finish(acc, c, out)


@nb.njit(cache=True, inline="always")
def _sub_small(acc, a, s):
    # acc (10 limbs) -= a (8 limbs) * s; caller guarantees no underflow
    carry = np.uint64(0)
    borrow = np.uint64(0)
    for i in range(LIMBS + 2):
        if i < LIMBS:
            prod = np.uint64(a[i]) * s + carry
            lo = prod & _MASK
            carry = prod >> _S32
        else:
            lo = carry
            carry = np.uint64(0)
        d = lo + borrow
        if acc[i] >= d:
            acc[i] = acc[i] - d
            borrow = np.uint64(0)
        else:
            acc[i] = acc[i] + (np.uint64(1) << _S32) - d
            borrow = np.uint64(1)


@nb.njit(cache=True)
def lincomb(srcs, coeffs, offsets, out, c):
    """``out[t] = sum_s coeffs[t, s] * srcs[s]`` for signed |coeffs| < 2**32.

    ``srcs`` is (S, k, 8), ``coeffs`` (T, S) int64, ``out`` (T, k, 8).
    ``offsets[t]`` (10 limbs) is a multiple of p at least as large as the
    negative part of row t, so the accumulator never goes below zero.
    """
    acc = np.zeros(LIMBS + 2, np.uint64)
    for t in range(coeffs.shape[0]):
        for e in range(srcs.shape[1]):
            for i in range(LIMBS + 2):
                acc[i] = offsets[t, i]
            for s in range(srcs.shape[0]):
                w = coeffs[t, s]
                if w > 0:
                    _acc_small(acc, srcs[s, e], np.uint64(w))
                elif w < 0:
                    _sub_small(acc, srcs[s, e], np.uint64(-w))
            _reduce_wide(acc, c, out[t, e])


@nb.njit(cache=True)
def scale(a, s, out, c):
    """Element-wise product with signed small integers ``s`` (|s| < 2**32)."""
    acc = np.zeros(LIMBS + 2, np.uint64)
    r = np.zeros(LIMBS, np.uint64)
    for k in range(a.shape[0]):
        for i in range(LIMBS + 2):
            acc[i] = 0
        w = s[k]
        if w == 0:
            for i in range(LIMBS):
                out[k, i] = 0
            continue
        _acc_small(acc, a[k], np.uint64(w if w > 0 else -w))
        _reduce_wide(acc, c, r)
        if w > 0:
            for i in range(LIMBS):
                out[k, i] = r[i]
        else:
            # p - r, or 0 when r == 0
            nz = False
            for i in range(LIMBS):
                if r[i]:
                    nz = True
            if not nz:
                for i in range(LIMBS):
                    out[k, i] = 0
            else:
                # p - r = (2**256 - r) - c
                borrow = np.uint64(0)
                for i in range(LIMBS):
                    d = r[i] + borrow
                    if d == 0:
                        out[k, i] = 0
                        borrow = np.uint64(0)
                    else:
                        out[k, i] = (np.uint64(1) << _S32) - d
                        borrow = np.uint64(1)
                bb = np.uint64(c)
                for i in range(LIMBS):
                    v = np.uint64(out[k, i])
                    if v >= bb:
                        out[k, i] = v - bb
                        break
                    out[k, i] = v + (np.uint64(1) << _S32) - bb
                    bb = np.uint64(1)
