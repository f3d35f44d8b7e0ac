import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from secsparse.field import fp_decode, fp_decode_array, fp_encode, fp_encode_array
from secsparse.runtime import ProtocolContext
from secsparse.shamir import (
    DegreeError,
    ReconstructionError,
    inner_product,
    mul,
    mul_local,
    open_values,
    rand_share,
    reconstruct,
    reduce_degree,
    scale_public,
    share,
    trunc,
)


def ints(ctx, x):
    return [int(v) for v in np.ravel(ctx.field.to_int(reconstruct(x)))]


def test_round_trips(ctx):
    assert ints(ctx, share(ctx, [0, 5])) == [0, 5]


def test_addition_matches_oracle(ctx, rng):
    a = rng.integers(0, 1 << 60, size=100)
    b = rng.integers(0, 1 << 60, size=100)
    got = ints(ctx, share(ctx, a) + share(ctx, b))
    assert got == [(int(x) + int(y)) % ctx.field.p for x, y in zip(a, b)]


def test_local_ops_are_free(ctx):
    x = share(ctx, [2, 7])
    before = ctx.ledger
    assert ints(ctx, x + 0) == [2, 7]
    assert ints(ctx, x - x) == [0, 0]
    assert ints(ctx, scale_public(x, 3)) == [6, 21]
    assert ctx.ledger.elements_sent == before.elements_sent and ctx.ledger.rounds == before.rounds


def test_reconstruct_threshold():
    ctx = ProtocolContext(5, 2, seed=1)
    x = share(ctx, [42])
    assert ints(ctx, x) == [42]
    assert ctx.field.to_int(reconstruct(x, parties=(2, 4, 5)))[0] == 42
    with pytest.raises(ReconstructionError):
        reconstruct(x, parties=(1, 3))


def test_local_product_is_degree_2t(ctx):
    a, b = share(ctx, [6]), share(ctx, [7])
    prod = mul_local(a, b)
    assert prod.degree == 2
    assert ints(ctx, prod) == [42]
    with pytest.raises(ReconstructionError):
        reconstruct(prod, parties=(1, 2))
    with pytest.raises(DegreeError):
        mul(prod, a)
    with pytest.raises(DegreeError):
        _ = prod + a


def test_mul_random_and_one_barrier(ctx, rng):
    p = ctx.field.p
    a = [int(v) for v in rng.integers(0, 1 << 62, size=30)]
    b = [int(v) for v in rng.integers(0, 1 << 62, size=30)]
    before = ctx.ledger
    got = ints(ctx, mul(share(ctx, a), share(ctx, b)))
    assert got == [x * y % p for x, y in zip(a, b)]
    d = ctx.ledger - before
    assert d.rounds == 1 and d.elements_sent == 30 * ctx.n * (ctx.n - 1)
    assert ints(ctx, mul(share(ctx, [0]), share(ctx, [9]))) == [0]


def test_reduce_degree_keeps_secret(ctx):
    x = mul_local(share(ctx, [3]), share(ctx, [5]))
    assert ints(ctx, reduce_degree(x)) == [15]


def test_inner_product(ctx, rng):
    a = rng.integers(0, 1000, size=8)
    b = rng.integers(0, 1000, size=8)
    assert ints(ctx, inner_product(share(ctx, a), share(ctx, b))) == [int(np.dot(a, b))]
    assert ints(ctx, inner_product(share(ctx, [1, 0, 1]), share(ctx, [0, 5, 0]))) == [0]
    assert ints(ctx, inner_product(share(ctx, np.zeros(0, dtype=np.int64)), share(ctx, np.zeros(0, dtype=np.int64)))) == [0]
    with pytest.raises(ValueError):
        inner_product(share(ctx, [1, 2]), share(ctx, [1]))


def test_inner_product_cost_independent_of_length():
    costs = []
    for n in (8, 8192):
        ctx = ProtocolContext(3, 1, seed=0)
        a = share(ctx, np.ones(n, dtype=np.int64))
        before = ctx.ledger
        inner_product(a, a)
        d = ctx.ledger - before
        costs.append((d.rounds, d.elements_sent))
    assert costs[0] == costs[1] == (1, 6)


def test_rand_share_range_and_determinism():
    ctx = ProtocolContext(3, 1, seed=5)
    r = rand_share(ctx, (500,), bound=1 << 16)
    vals = ints(ctx, r)
    assert all(0 <= v < 1 << 16 for v in vals)
    ctx2 = ProtocolContext(3, 1, seed=5)
    assert ints(ctx2, rand_share(ctx2, (500,), bound=1 << 16)) == vals
    assert ctx.ledger.offline_elements == 1500
    with pytest.raises(ValueError):
        rand_share(ctx, (1,), bound=3)


def test_rand_share_uniform_and_independent(small_ctx):
    # two independent draws over a small range: joint counts fit a uniform grid
    r = rand_share(small_ctx, (2, 20000), bound=8)
    vals = np.array(ints(small_ctx, r)).reshape(2, -1)
    table = np.zeros((8, 8))
    np.add.at(table, (vals[0], vals[1]), 1)
    assert stats.chisquare(table.ravel()).pvalue > 0.01
    assert stats.chi2_contingency(table).pvalue > 0.01


def test_single_share_independent_of_secret(small_ctx):
    """Party 1's share of secret 0 and of secret 1 follow the same law."""
    p = small_ctx.field.p
    bins = 20
    n = 50000
    hist = []
    for secret in (0, 1):
        x = share(small_ctx, np.full(n, secret))
        s1 = small_ctx.field.to_int(x.data[0]).astype(np.int64)
        hist.append(np.bincount(s1 * bins // p, minlength=bins))
    _, pval, _, _ = stats.chi2_contingency(np.array(hist))
    assert pval > 0.01


def test_trunc_examples(ctx):
    f = ctx.field
    prod = mul(share(ctx, [fp_encode(2.0)]), share(ctx, [fp_encode(3.0)]))
    assert abs(fp_decode(int(f.to_int(reconstruct(trunc(prod)))[0])) - 6.0) <= 2.0 ** -31
    x = share(ctx, fp_encode_array([-7.25, 0.0, 1e4]))
    one = share(ctx, fp_encode_array([1.0, 1.0, 1.0]))
    got = fp_decode_array(reconstruct(trunc(mul(x, one))))
    assert np.allclose(got, [-7.25, 0.0, 1e4], atol=2.0 ** -31)
    assert fp_decode(int(f.to_int(reconstruct(trunc(share(ctx, [0]))))[0])) in (0.0, 2.0 ** -32)


@given(st.floats(-500, 500), st.floats(-500, 500))
def test_fixed_point_product_error(a, b):
    ctx = ProtocolContext(3, 1, seed=0)
    prod = trunc(mul(share(ctx, [fp_encode(a)]), share(ctx, [fp_encode(b)])))
    got = fp_decode_array(reconstruct(prod))[0]
    assert abs(got - a * b) <= 2.0 ** -30 * max(1.0, abs(a) + abs(b))


def test_open_values_charges_one_round(ctx):
    x = share(ctx, np.arange(10))
    before = ctx.ledger
    assert ctx.field.to_int(open_values(x)).tolist() == list(range(10))
    d = ctx.ledger - before
    assert (d.rounds, d.elements_sent, d.opened_elements) == (1, 60, 10)
