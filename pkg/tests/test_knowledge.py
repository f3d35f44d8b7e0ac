import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from secsparse import knowledge as kn
from secsparse.oblivious import to_bits
from secsparse.oracle import greedy_fit, oracle_matvec, oracle_sorted_quantiles
from secsparse.protocols import sparse_matvec
from secsparse.runtime import ProtocolContext
from secsparse.shamir import share
from secsparse.sparse import PlainSparse, coord_width, owner_share_matrix, owner_share_vector, reconstruct_vector, sparse_storage


def rows_with_counts(counts, m, rng=None):
    rng = rng or np.random.default_rng(0)
    coords = [(i + 1, int(c) + 1) for i, k in enumerate(counts) for c in rng.choice(m, size=k, replace=False)]
    return PlainSparse((len(counts), m), coords, rng.uniform(0.5, 1.5, size=len(coords)))


# ---------------------------------------------------------------- ECDF and templates


def test_ecdf_basics(tmp_path):
    e = kn.ECDF.from_degrees([0, 1, 1, 3, 5])
    assert e.total == 5
    assert e.at([0, 1, 2, 3, 4, 5, 6]).tolist() == [5, 4, 2, 2, 1, 1, 0]
    assert e.at(2) == 2
    assert e.sorted_degrees().tolist() == [0, 1, 1, 3, 5]
    assert (np.diff(e.counts) <= 0).all()
    f = tmp_path / "e.csv"
    e.to_csv(f)
    back = kn.ECDF.from_csv(f, total=5)
    assert back.at([1, 3, 6]).tolist() == [4, 2, 0]
    with pytest.raises(ValueError):
        kn.ECDF(np.array([2, 1]), np.array([1, 2]), 3)


def test_template_validation_and_json(tmp_path):
    t = kn.Template(((3, 1), (2, 4)), "dp")
    assert t.total_rows == 5 and t.slots().tolist() == [1, 1, 1, 4, 4]
    assert t.storage(7) == sparse_storage(3, 7) + sparse_storage(8, 7)
    f = tmp_path / "t.json"
    t.to_json(f)
    assert kn.Template.from_json(f) == t
    with pytest.raises(ValueError):
        kn.Template(((1, 4), (1, 2)))
    with pytest.raises(ValueError):
        kn.Template(())


def test_quantile_template_examples():
    assert kn.quantile_positions(100).tolist() == [25, 50, 75, 90, 99, 100]
    assert kn.quantile_positions(1).tolist() == [1] * 6
    e = kn.ECDF.from_degrees(range(1, 101))
    t = kn.build_template_quantiles(e)
    assert t.bounds == oracle_sorted_quantiles(range(1, 101), [25, 50, 75, 90, 99, 100]) == (25, 50, 75, 90, 99, 100)
    assert t.sizes == (25, 25, 25, 15, 9, 1)
    assert kn.template_fits(e, t)
    const = kn.build_template_quantiles(kn.ECDF.from_degrees([4] * 30))
    assert set(const.bounds) == {4}


@given(st.lists(st.integers(0, 12), min_size=1, max_size=50))
def test_quantile_template_always_fits(degrees):
    e = kn.ECDF.from_degrees(degrees)
    assert kn.template_fits(e, kn.build_template_quantiles(e))


def test_template_fits_single_block():
    e = kn.ECDF.from_degrees([1, 5, 3])
    assert kn.template_fits(e, kn.Template(((3, 5),)))
    assert not kn.template_fits(e, kn.Template(((3, 4),)))
    with pytest.raises(ValueError):
        kn.template_fits(e, kn.Template(((2, 5),)))


@given(
    st.lists(st.integers(0, 8), min_size=1, max_size=50),
    st.lists(st.tuples(st.integers(0, 10), st.integers(0, 9)), min_size=1, max_size=5),
)
def test_template_fits_matches_greedy_assignment(degrees, raw_blocks):
    sizes = [n for n, _ in raw_blocks]
    total = sum(sizes)
    if total == 0:
        return
    # rescale block sizes so they cover exactly len(degrees) rows
    n = len(degrees)
    cut = np.floor(np.cumsum(sizes) / total * n).astype(int)
    cut[-1] = n
    sizes = np.diff(np.concatenate([[0], cut])).tolist()
    bounds = sorted(b for _, b in raw_blocks)
    t = kn.Template(tuple(zip(sizes, bounds)))
    assert kn.template_fits(kn.ECDF.from_degrees(degrees), t) == greedy_fit(degrees, t.slots().tolist())


# ---------------------------------------------------------------- padding


def test_max_row_pad(rng):
    uniform = rows_with_counts([2, 2, 2], 6)
    assert kn.max_row_pad(uniform, 2) == uniform.sorted()
    X = rows_with_counts([1, 3], 5)
    P = kn.max_row_pad(X, 3)
    assert P.group_counts(0).tolist() == [3, 3]
    assert np.array_equal(P.to_dense(), X.to_dense())
    y = PlainSparse.vector(5, [(c, float(c)) for c in range(1, 6)])
    assert oracle_matvec(P, y) == pytest.approx(oracle_matvec(X, y))
    with pytest.raises(kn.TemplateFitError):
        kn.max_row_pad(X, 2)
    with pytest.raises(kn.TemplateFitError):
        kn.max_row_pad(X, 6)  # a row cannot exceed the column count


def test_dummies_use_lowest_free_columns():
    X = PlainSparse((1, 6), [(1, 2), (1, 5)], [1.0, 2.0])
    P = kn.max_row_pad(X, 4)
    assert P.coords[:, 1].tolist() == [1, 2, 3, 5]
    assert P.values.tolist() == [0.0, 1.0, 0.0, 2.0]


def test_pad_to_template():
    X = rows_with_counts([3, 1, 2, 1], 6)
    t = kn.Template(((2, 1), (1, 2), (1, 3)))
    P, perm = kn.pad_to_template(X, t)
    assert P.group_counts(0).tolist() == [1, 1, 2, 3]
    assert np.array_equal(P.to_dense(), X.to_dense()[perm])
    single = rows_with_counts([2], 5)
    P1, _ = kn.pad_to_template(single, kn.Template(((1, 4),)))
    assert P1 == kn.max_row_pad(single, 4)
    with pytest.raises(kn.TemplateFitError):
        kn.pad_to_template(X, kn.Template(((3, 1), (1, 3))))


def test_powerlaw_template_cheaper_than_max_pad():
    rng = np.random.default_rng(3)
    params = kn.PowerLawParams(2.5, 200)
    X = kn.sample_powerlaw(params, 500, 200, rng)
    counts = X.group_counts(0)
    t = kn.build_template_quantiles(kn.ECDF.from_degrees(counts))
    P, _ = kn.pad_to_template(X, t)
    width = coord_width(200)
    assert sparse_storage(P.nnz, width) == t.storage(width)
    assert t.storage(width) < kn.padded_storage(X, int(counts.max()))


def test_padded_matvec_reproduces_product():
    ctx = ProtocolContext(3, 1, seed=5)
    X = rows_with_counts([1, 3, 0, 2], 6)
    y = PlainSparse.vector(6, [(1, 1.0), (3, -2.0), (4, 0.5), (6, 1.5)])
    P = kn.max_row_pad(X, 3)
    ys = owner_share_vector(ctx, y)
    out = reconstruct_vector(sparse_matvec(owner_share_matrix(ctx, P), ys)).to_dense()
    assert np.allclose(out, X.to_dense() @ y.to_dense(), atol=2.0 ** -18)


# ---------------------------------------------------------------- MPC quantiles and scaling


def test_mpc_quantiles_and_openings():
    ctx = ProtocolContext(3, 1, seed=1)
    rng = np.random.default_rng(1)
    counts = rng.permutation(np.arange(1, 101))
    bits = share(ctx, to_bits(counts, 7))
    before = ctx.ledger
    assert kn.mpc_quantile_template(bits) == (25, 50, 75, 90, 99, 100)
    assert (ctx.ledger - before).opened_elements == 6
    ctx = ProtocolContext(3, 1, seed=2)
    assert kn.mpc_quantile_template(share(ctx, to_bits([3] * 9, 2))) == (3,) * 6


def test_owner_alpha():
    approx = (25, 50, 75, 90, 99, 100)
    assert kn.owner_alpha(range(1, 101), approx) == 1
    a = kn.owner_alpha([10, 20, 30, 40], (5, 10, 15, 20, 20, 20))
    # sorted rows 10, 20, 30, 40 fall in blocks with bounds 5, 10, 15, 20
    assert a == 2


def test_mpc_scaling_factor():
    ctx = ProtocolContext(3, 1, seed=3)
    approx = (25, 50, 75, 90, 99, 100)
    alpha, bounds = kn.mpc_scaling_factor(kn.share_alphas(ctx, [1, 1]), approx)
    assert alpha == 1 and bounds == approx
    alpha, bounds = kn.mpc_scaling_factor(kn.share_alphas(ctx, [1, 1.2]), approx)
    assert bounds == tuple(math.ceil(alpha * a) for a in approx) == (30, 60, 90, 108, 119, 120)
    with pytest.raises(ValueError):
        kn.mpc_scaling_factor(kn.share_alphas(ctx, [0.5, 0.9]), approx)


def test_scaled_template_fits_every_owner():
    ctx = ProtocolContext(3, 1, seed=4)
    rng = np.random.default_rng(4)
    owners = [rng.integers(1, 40, size=30), rng.integers(1, 60, size=30)]
    all_counts = np.concatenate(owners)
    approx = kn.mpc_quantile_template(share(ctx, to_bits(all_counts, 6)))
    alphas = [kn.owner_alpha(o, approx) for o in owners]
    _, bounds = kn.mpc_scaling_factor(kn.share_alphas(ctx, alphas), approx)
    assert all(x <= y for x, y in zip(bounds, bounds[1:]))
    for o in owners:
        t = kn.template_for_owner(len(o), bounds)
        assert kn.template_fits(kn.ECDF.from_degrees(o), t)


# ---------------------------------------------------------------- differential privacy


def test_dp_single():
    assert kn.dp_single_offset(1.0, 0.5) == 0.0
    assert kn.dp_single_offset(1.0, 0.05) == pytest.approx(-math.log(0.1))
    rng = np.random.default_rng(0)
    noise = kn.dp_single_upper(np.zeros(20000), 2.0, 0.5, rng)
    assert stats.kstest(noise, stats.laplace(scale=0.5).cdf).pvalue > 0.01
    with pytest.raises(ValueError):
        kn.dp_single_offset(0.0, 0.1)
    with pytest.raises(ValueError):
        kn.dp_single_offset(1.0, 1.0)


def test_dp_params_validation():
    assert kn.DpParams(1.0, 0.1, 64).L == 6
    with pytest.raises(ValueError):
        kn.DpParams(1.0, 0.1, 48)
    with pytest.raises(ValueError):
        kn.dp_tree_offset(kn.DpParams(1.0, 0.1, 1))


def test_dp_tree_noise_free_hook():
    params = kn.DpParams(0.1, 0.01, 64)
    f = np.linspace(1000, 0, 64)
    out = kn.dp_tree_upper(f, params, np.random.default_rng(0), noise_scale=0)
    off = 6 * 7 / 0.1 * math.log(6 * 7 / 0.02)
    assert np.array_equal(out, f + off)
    assert (np.diff(out) <= 0).all()
    small = kn.dp_tree_offset(kn.DpParams(0.1, 0.01, 8))
    assert small < kn.dp_tree_offset(params)


def test_dp_tree_noise_structure():
    params = kn.DpParams(1.0, 0.1, 8)
    L = params.L
    noise = kn.dp_tree_noise(params, np.random.default_rng(9))
    rng = np.random.default_rng(9)
    levels = [rng.laplace(0.0, (L + 1) / 1.0, size=-(-8 // (1 << j))) for j in range(L)]
    expect = [sum(levels[j][(i - 1) >> j] for j in range(L)) for i in range(1, 9)]
    assert np.allclose(noise, expect)
    # with L = 1 neighbouring outputs differ only by their own level-0 variable
    p2 = kn.DpParams(1.0, 0.1, 2)
    n2 = kn.dp_tree_noise(p2, np.random.default_rng(1))
    r = np.random.default_rng(1).laplace(0.0, 2.0, size=2)
    assert np.allclose(n2, r)


def test_dp_tail_bounds_to_template():
    rng = np.random.default_rng(5)
    degrees = kn.sample_degrees(kn.PowerLawParams(2.0, 50), 400, rng)
    ecdf = kn.ECDF.from_degrees(degrees)
    params = kn.DpParams(1.0, 0.01, 16)
    th = kn.dp_thresholds(params, 50)
    assert th[0] == 1 and th[-1] == 50 and (np.diff(th) > 0).all()
    ub = kn.dp_tree_upper(ecdf.at(th), params, rng)
    t = kn.template_from_tail_bounds(th, ub, 400, 50)
    assert t.total_rows == 400
    if (ub >= ecdf.at(th)).all():
        assert kn.template_fits(ecdf, t)
    exact = kn.template_from_tail_bounds(th, ecdf.at(th), 400, 50)
    assert kn.template_fits(ecdf, exact)


# ---------------------------------------------------------------- population bounds


def test_pop_bounds():
    assert kn.pop_dist_upper(0.0, 100, 5) == 0.0
    assert kn.pop_dist_upper(1.0, 100, 5) == 1.0
    assert kn.pop_sample_upper(0.5, 101, 10) == pytest.approx(1.0)
    F = np.linspace(0, 1, 11)
    assert np.array_equal(kn.pop_dist_upper(F, 50, 0), F)
    lo, hi = kn.pop_dist_upper(F, 50, 5), kn.pop_dist_upper(F, 50, 20)
    assert (lo <= hi).all()
    gaps = [kn.pop_sample_upper(0.2, s, 5) - kn.pop_dist_upper(0.2, 10**6, 5) for s in (10, 100, 1000)]
    assert gaps[0] > gaps[1] > gaps[2]
    with pytest.raises(ValueError):
        kn.pop_sample_upper(0.2, 1, 5)
    with pytest.raises(ValueError):
        kn.pop_dist_upper(1.5, 10, 1)


# ---------------------------------------------------------------- power law


def test_powerlaw_generator():
    rng = np.random.default_rng(8)
    steep = kn.sample_degrees(kn.PowerLawParams(50, 100), 10_000, rng)
    assert (steep == 1).mean() > 0.999
    params = kn.PowerLawParams(2.5, 30)
    X = kn.sample_powerlaw(params, 300, 40, rng)
    counts = X.group_counts(0)
    assert counts.min() >= 1 and counts.max() <= 30
    assert abs(params.pmf().sum() - 1) < 1e-12
    sparsity = 1 - X.nnz / (300 * 40)
    sd = math.sqrt(kn.degree_variance(params) / 300) / 40
    assert abs(sparsity - (1 - kn.expected_degree(params) / 40)) <= 4 * sd
    with pytest.raises(ValueError):
        kn.PowerLawParams(1.0, 5)
    with pytest.raises(ValueError):
        kn.sample_powerlaw(kn.PowerLawParams(2.0, 50), 3, 10, rng)
