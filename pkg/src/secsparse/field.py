"""Prime-field arithmetic and fixed-point encoding of reals.

Scalar field elements are plain Python ints in ``[0, p)``. Arrays of elements
live in one of two backends:

* :class:`LimbField` for primes ``2**256 - c``: each element is a 32-byte
  ``void`` scalar (eight 32-bit limbs) and arithmetic runs in compiled kernels.
* :class:`SmallField` for primes below ``2**30``: plain ``int64`` arrays.

Both expose the same array API, so protocol code never looks at the
representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _limbs

# 2**256 - 36113; both p and (p - 1) / 2 are prime.
SAFE_PRIME = (1 << 256) - 36113

SMALL_LIMIT = 1 << 30


class EncodeRangeError(ValueError):
    """Real value outside the representable fixed-point range."""


class DecodeRangeError(ValueError):
    """Field element does not decode to an in-range fixed-point value."""


class PrimeField:
    """Arithmetic modulo a prime ``p``.

    ``wire_bytes`` is the size of one element on the wire, used only for cost
    accounting. It defaults to ``ceil(bits(p) / 8)`` and can be pinned so that
    a small-field run reports the bytes of the production field.
    """

    dtype: np.dtype

    def __init__(self, modulus: int, wire_bytes: int | None = None):
        if modulus < 3:
            raise ValueError("modulus must be an odd prime")
        self.p = int(modulus)
        self.bits = self.p.bit_length()
        self.wire_bytes = wire_bytes if wire_bytes is not None else (self.bits + 7) // 8

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.bits} bits, wire_bytes={self.wire_bytes})"

    def __eq__(self, other) -> bool:
        return type(other) is type(self) and other.p == self.p and other.wire_bytes == self.wire_bytes

    def __hash__(self) -> int:
        return hash((self.p, self.wire_bytes))

    # scalar arithmetic on Python ints
    def add(self, a: int, b: int) -> int:
        return (a + b) % self.p

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.p

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.p

    def neg(self, a: int) -> int:
        return (-a) % self.p

    def inv(self, a: int) -> int:
        if a % self.p == 0:
            raise ZeroDivisionError("zero has no inverse")
        return pow(a, -1, self.p)

    def centered(self, a: int) -> int:
        """Signed representative in ``(-p/2, p/2]``."""
        a %= self.p
        return a - self.p if a > self.p // 2 else a

    def lagrange_at_zero(self, xs) -> tuple[int, ...]:
        return _lagrange_at_zero(self.p, tuple(int(x) for x in xs))

    # array API, implemented by the backends
    def array(self, values) -> np.ndarray:
        raise NotImplementedError

    def to_int(self, arr: np.ndarray) -> np.ndarray:
        """Object array of Python ints."""
        raise NotImplementedError

    def zeros(self, shape) -> np.ndarray:
        raise NotImplementedError

    def vadd(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def vsub(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def vmul(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def vsum(self, a, axis: int = -1) -> np.ndarray:
        raise NotImplementedError

    def matmul(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def random(self, rng: np.random.Generator, shape) -> np.ndarray:
        raise NotImplementedError

    def random_bits(self, rng: np.random.Generator, nbits: int, shape) -> np.ndarray:
        """Uniform integers in ``[0, 2**nbits)``."""
        raise NotImplementedError

    def lincomb(self, srcs, coeffs) -> np.ndarray:
        """``out[t] = sum_s coeffs[t, s] * srcs[s]`` for small signed ints."""
        raise NotImplementedError

    def vmul_public(self, a, c) -> np.ndarray:
        """Multiply field array ``a`` by public integers ``c``."""
        small = _small_ints(c)
        if small is None:
            return self.vmul(a, self.array(c))
        return self._scale(a, small)

    def _scale(self, a, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def vneg(self, a) -> np.ndarray:
        return self.vsub(self.zeros(np.shape(a)), a)

    def equal(self, a, b) -> bool:
        a, b = np.broadcast_arrays(np.asarray(a), np.asarray(b))
        return bool(np.array_equal(self.to_int(a), self.to_int(b)))


class SmallField(PrimeField):
    """Primes below ``2**30`` on ``int64`` arrays."""

    dtype = np.dtype(np.int64)

    def __init__(self, modulus: int, wire_bytes: int | None = None):
        super().__init__(modulus, wire_bytes)
        if self.p >= SMALL_LIMIT:
            raise ValueError("SmallField needs p < 2**30")

    def array(self, values) -> np.ndarray:
        arr = np.asarray(values)
        if arr.dtype == object:
            flat = [int(v) % self.p for v in arr.ravel()]
            return np.array(flat, dtype=np.int64).reshape(arr.shape)
        return np.mod(arr.astype(np.int64), self.p)

    def to_int(self, arr) -> np.ndarray:
        return np.asarray(arr).astype(object)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=np.int64)

    def vadd(self, a, b):
        return (a + b) % self.p

    def vsub(self, a, b):
        return (a - b) % self.p

    def vmul(self, a, b):
        return (a * b) % self.p

    def vsum(self, a, axis=-1):
        # each term < 2**30, so 2**32 terms fit before reduction
        return np.sum(a, axis=axis) % self.p

    def matmul(self, a, b):
        # split b into 15-bit halves so partial sums stay below 2**63
        lo = b & 0x7FFF
        hi = b >> 15
        inner = a.shape[-1]
        step = max(1, (1 << 62) // ((self.p - 1) * 0x8000 + 1))
        acc_lo = np.zeros(a.shape[:-1] + b.shape[-1:], dtype=np.int64)
        acc_hi = np.zeros_like(acc_lo)
        for s in range(0, inner, step):
            acc_lo = (acc_lo + a[..., s:s + step] @ lo[s:s + step]) % self.p
            acc_hi = (acc_hi + a[..., s:s + step] @ hi[s:s + step]) % self.p
        return (acc_lo + (acc_hi * 0x8000) % self.p) % self.p

    def lincomb(self, srcs, coeffs):
        coeffs = np.asarray(coeffs, dtype=np.int64) % self.p
        srcs = np.asarray(srcs)
        out = np.zeros((coeffs.shape[0],) + srcs.shape[1:], dtype=np.int64)
        for s_idx in range(srcs.shape[0]):
            w = coeffs[:, s_idx].reshape((-1,) + (1,) * (srcs.ndim - 1))
            out = (out + w * srcs[s_idx]) % self.p
        return out

    def _scale(self, a, s):
        return (a * (s % self.p)) % self.p

    def random(self, rng, shape):
        return rng.integers(0, self.p, size=tuple(shape), dtype=np.int64)

    def random_bits(self, rng, nbits, shape):
        shape = tuple(shape)
        if nbits <= 62:
            return rng.integers(0, 1 << nbits, size=shape, dtype=np.int64) % self.p
        words = (nbits + 61) // 62
        acc = np.zeros(shape, dtype=object)
        for w in range(words):
            width = min(62, nbits - 62 * w)
            acc = acc + rng.integers(0, 1 << width, size=shape, dtype=np.int64).astype(object) * (1 << (62 * w))
        return self.array(acc)


class LimbField(PrimeField):
    """Primes of the form ``2**256 - c`` with ``c < 2**32``."""

    dtype = np.dtype("V32")

    def __init__(self, modulus: int, wire_bytes: int | None = None):
        super().__init__(modulus, wire_bytes)
        c = (1 << 256) - self.p
        if not 0 < c < (1 << 32):
            raise ValueError("LimbField needs p = 2**256 - c with c < 2**32")
        self.c = np.uint64(c)
        self._offset_cache: dict[bytes, np.ndarray] = {}

    @staticmethod
    def _rows(arr: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(arr).view(np.uint32).reshape(-1, _limbs.LIMBS)

    def _binary(self, kernel, a, b):
        a = np.asarray(a)
        b = np.asarray(b)
        if a.dtype != self.dtype:
            a = self.array(a)
        if b.dtype != self.dtype:
            b = self.array(b)
        if a.shape != b.shape:
            a, b = np.broadcast_arrays(a, b)
        out = np.empty(a.shape, dtype=self.dtype)
        if out.size:
            kernel(self._rows(a), self._rows(b), self._rows(out), self.c)
        return out

    def array(self, values) -> np.ndarray:
        arr = np.asarray(values)
        if arr.dtype == self.dtype:
            return arr
        p = self.p
        if arr.dtype != object and arr.size and arr.min() >= 0:
            # fast path for non-negative machine integers
            limbs = np.zeros(arr.shape + (_limbs.LIMBS,), dtype=np.uint32)
            u = arr.astype(np.uint64)
            limbs[..., 0] = (u & np.uint64(0xFFFFFFFF)).astype(np.uint32)
            limbs[..., 1] = (u >> np.uint64(32)).astype(np.uint32)
            return np.ascontiguousarray(limbs).view(self.dtype).reshape(arr.shape)
        blob = b"".join((int(v) % p).to_bytes(32, "little") for v in arr.ravel())
        return np.frombuffer(blob, dtype=self.dtype).reshape(arr.shape).copy()

    def to_int(self, arr) -> np.ndarray:
        arr = np.ascontiguousarray(arr)
        blob = arr.tobytes()
        vals = [int.from_bytes(blob[i:i + 32], "little") for i in range(0, len(blob), 32)]
        out = np.empty(len(vals), dtype=object)
        out[:] = vals
        return out.reshape(arr.shape)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=self.dtype)

    def vadd(self, a, b):
        return self._binary(_limbs.add, a, b)

    def vsub(self, a, b):
        return self._binary(_limbs.sub, a, b)

    def vmul(self, a, b):
        return self._binary(_limbs.mul, a, b)

    def vsum(self, a, axis=-1):
        a = np.moveaxis(np.asarray(a), axis, -1)
        if a.shape[-1] == 0:
            return self.zeros(a.shape[:-1])
        out = np.empty(a.shape[:-1], dtype=self.dtype)
        if out.size:
            src = np.ascontiguousarray(a).view(np.uint32).reshape(-1, a.shape[-1], _limbs.LIMBS)
            _limbs.sum_rows(src, self._rows(out), self.c)
        return out

    def matmul(self, a, b):
        a = np.ascontiguousarray(a)
        b = np.ascontiguousarray(b)
        out = np.empty((a.shape[0], b.shape[1]), dtype=self.dtype)
        if out.size:
            la = a.view(np.uint32).reshape(a.shape[0], a.shape[1], _limbs.LIMBS)
            lb = b.view(np.uint32).reshape(b.shape[0], b.shape[1], _limbs.LIMBS)
            lo = out.view(np.uint32).reshape(out.shape[0], out.shape[1], _limbs.LIMBS)
            _limbs.matmul(la, lb, lo, self.c)
        return out

    def lincomb(self, srcs, coeffs):
        srcs = np.ascontiguousarray(srcs)
        coeffs = np.ascontiguousarray(coeffs, dtype=np.int64)
        out = np.empty((coeffs.shape[0],) + srcs.shape[1:], dtype=self.dtype)
        if out.size:
            k = int(np.prod(srcs.shape[1:], dtype=np.int64))
            src = srcs.view(np.uint32).reshape(srcs.shape[0], k, _limbs.LIMBS)
            dst = out.view(np.uint32).reshape(coeffs.shape[0], k, _limbs.LIMBS)
            _limbs.lincomb(src, coeffs, self._offsets(coeffs), dst, self.c)
        return out

    def _offsets(self, coeffs: np.ndarray) -> np.ndarray:
        key = coeffs.tobytes() + bytes(coeffs.shape)
        hit = self._offset_cache.get(key)
        if hit is None:
            rows = []
            for row in coeffs:
                neg = int(-row[row < 0].sum())
                val = self.p * neg
                rows.append([(val >> (32 * i)) & 0xFFFFFFFF for i in range(_limbs.LIMBS + 2)])
            hit = np.array(rows, dtype=np.uint64).reshape(len(rows), _limbs.LIMBS + 2)
            self._offset_cache[key] = hit
        return hit

    def _scale(self, a, s):
        a = np.asarray(a)
        if a.shape != s.shape:
            a, s = np.broadcast_arrays(a, s)
        out = np.empty(a.shape, dtype=self.dtype)
        if out.size:
            _limbs.scale(self._rows(a), np.ascontiguousarray(s).reshape(-1), self._rows(out), self.c)
        return out

    def random(self, rng, shape):
        # 256 uniform bits reduced once: the bias is below 2**-239
        shape = tuple(shape)
        count = int(np.prod(shape, dtype=np.int64))
        raw = np.frombuffer(rng.bytes(32 * count), dtype=np.uint32).reshape(-1, _limbs.LIMBS).copy()
        if count:
            _limbs.reduce_once(raw, raw, self.c)
        return raw.view(self.dtype).reshape(shape)

    def random_bits(self, rng, nbits, shape):
        if nbits > 255:
            raise ValueError("at most 255 random bits")
        shape = tuple(shape)
        count = int(np.prod(shape, dtype=np.int64))
        raw = np.frombuffer(rng.bytes(32 * count), dtype=np.uint32).reshape(-1, _limbs.LIMBS).copy()
        mask = np.zeros(_limbs.LIMBS, dtype=np.uint32)
        full, rest = divmod(nbits, 32)
        mask[:full] = 0xFFFFFFFF
        if rest:
            mask[full] = (1 << rest) - 1
        raw &= mask
        return raw.view(self.dtype).reshape(shape)


def _small_ints(c) -> np.ndarray | None:
    """``c`` as an int64 array if every entry fits in 32 bits, else None."""
    if isinstance(c, (int, np.integer)):
        return np.array(c, dtype=np.int64) if -(1 << 32) < c < (1 << 32) else None
    arr = np.asarray(c)
    if arr.dtype.kind not in "iub":
        return None
    arr = arr.astype(np.int64)
    if arr.size and (arr.min() <= -(1 << 32) or arr.max() >= (1 << 32)):
        return None
    return arr


def make_field(modulus: int, wire_bytes: int | None = None) -> PrimeField:
    """Pick the array backend suited to ``modulus``."""
    if modulus < SMALL_LIMIT:
        return SmallField(modulus, wire_bytes)
    return LimbField(modulus, wire_bytes)


@lru_cache(maxsize=256)
def _lagrange_at_zero(p: int, xs: tuple[int, ...]) -> tuple[int, ...]:
    coeffs = []
    for i, xi in enumerate(xs):
        num, den = 1, 1
        for j, xj in enumerate(xs):
            if i != j:
                num = num * (-xj) % p
                den = den * (xi - xj) % p
        coeffs.append(num * pow(den, -1, p) % p)
    return tuple(coeffs)


DEFAULT_FIELD = LimbField(SAFE_PRIME)


@dataclass(frozen=True)
class FixedPointParams:
    total_bits: int = 64
    frac_bits: int = 32
    value_bits: int = 19

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def value_bound(self) -> float:
        return float(1 << self.value_bits)

    @property
    def raw_bound(self) -> int:
        return 1 << (self.value_bits + self.frac_bits)


FIXED = FixedPointParams()


def fp_encode(x: float, field: PrimeField = DEFAULT_FIELD, params: FixedPointParams = FIXED) -> int:
    """Encode a real as a field element; negatives wrap to the upper half.

    >>> fp_encode(1.0)
    4294967296
    >>> fp_encode(-0.5) == SAFE_PRIME - 2**31
    True
    """
    x = float(x)
    if not np.isfinite(x) or abs(x) > params.value_bound:
        raise EncodeRangeError(f"|{x}| exceeds {params.value_bound}")
    return int(round(x * params.scale)) % field.p


def fp_decode(e: int, field: PrimeField = DEFAULT_FIELD, params: FixedPointParams = FIXED) -> float:
    raw = field.centered(int(e))
    if abs(raw) > params.raw_bound:
        raise DecodeRangeError(f"raw magnitude {abs(raw)} exceeds 2**{params.value_bits + params.frac_bits}")
    return raw / params.scale


def fp_encode_array(xs, field: PrimeField = DEFAULT_FIELD, params: FixedPointParams = FIXED) -> np.ndarray:
    """Vectorised :func:`fp_encode` returning a field array."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size and (not np.all(np.isfinite(xs)) or np.max(np.abs(xs)) > params.value_bound):
        raise EncodeRangeError(f"values exceed {params.value_bound}")
    raw = np.rint(xs * params.scale).astype(np.int64)
    return field.array(raw.astype(object) if raw.size and raw.min() < 0 else raw)


def fp_decode_array(es, field: PrimeField = DEFAULT_FIELD, params: FixedPointParams = FIXED) -> np.ndarray:
    """Decode a field array (any backend) to float64."""
    ints = field.to_int(es)
    out = np.array([fp_decode(int(e), field, params) for e in ints.ravel()], dtype=np.float64)
    return out.reshape(ints.shape)
