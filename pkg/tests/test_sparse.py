import numpy as np
import pytest

from secsparse.shamir import share
from secsparse.sparse import (
    ParseError,
    PlainSparse,
    SparseFormatError,
    coord_width,
    ingest_nnz_counts,
    ingest_triplets,
    owner_share_matrix,
    owner_share_vector,
    reconstruct_matrix,
    reconstruct_vector,
    sparse_storage,
    storage_cost,
    write_triplets,
)


def test_plain_validation():
    with pytest.raises(SparseFormatError):
        PlainSparse.vector(5, [(1, 1.0), (1, 2.0)])
    with pytest.raises(SparseFormatError):
        PlainSparse.vector(5, [(6, 1.0)])
    with pytest.raises(SparseFormatError):
        PlainSparse.vector(5, [(0, 1.0)])
    with pytest.raises(SparseFormatError):
        PlainSparse.vector(5, [(1, float("inf"))])


def test_dense_round_trip(rng):
    d = np.where(rng.random((6, 5)) < 0.3, rng.normal(size=(6, 5)), 0.0)
    p = PlainSparse.from_dense(d)
    assert np.array_equal(p.to_dense(), d)
    assert np.array_equal(p.transpose().to_dense(), d.T)
    assert p.group_counts(0).tolist() == (d != 0).sum(axis=1).tolist()
    assert p.group_counts(1).tolist() == (d != 0).sum(axis=0).tolist()


def test_coord_width():
    assert coord_width(340000) == 19
    assert coord_width(1) == 1
    assert coord_width(255) == 8 and coord_width(256) == 9


def test_share_vector_round_trip(ctx):
    pairs = [(2, 1.5), (9, -0.25), (4, 3.0)]
    v = owner_share_vector(ctx, pairs, dim=10)
    assert v.nnz == 3 and v.coord_bits == 4
    assert reconstruct_vector(v).pairs() == sorted(pairs)
    assert ctx.ledger.input_elements == 3 * 3 * 5
    assert ctx.ledger.elements_sent == 0
    empty = owner_share_vector(ctx, [], dim=10)
    assert empty.nnz == 0 and reconstruct_vector(empty).nnz == 0
    with pytest.raises(SparseFormatError):
        owner_share_vector(ctx, [(3, 1.0), (3, 2.0)], dim=10)
    with pytest.raises(ValueError):
        owner_share_vector(ctx, pairs, dim=10, coord_bits=3)


@pytest.mark.parametrize("orientation", ["row", "col"])
def test_share_matrix_round_trip(ctx, rng, orientation):
    d = np.where(rng.random((7, 9)) < 0.3, rng.uniform(-2, 2, size=(7, 9)), 0.0)
    plain = PlainSparse.from_dense(d)
    X = owner_share_matrix(ctx, plain, orientation)
    axis = 0 if orientation == "row" else 1
    assert list(X.group_nnz) == plain.group_counts(axis).tolist()
    assert np.allclose(reconstruct_matrix(X).to_dense(), d, atol=2.0 ** -32)
    T = X.transposed()
    assert T.shape == (9, 7) and T.orientation != orientation
    assert np.allclose(reconstruct_matrix(T).to_dense(), d.T, atol=2.0 ** -32)


def test_triplet_io(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("row,col,value\n1,3,2.5\n2,1,-1\n")
    p = ingest_triplets(f)
    assert p.pairs() == [((1, 3), 2.5), ((2, 1), -1.0)]
    assert p.shape == (2, 3)
    out = tmp_path / "o.csv"
    write_triplets(out, p)
    assert ingest_triplets(out, shape=(2, 3)) == p


def test_triplet_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    assert ingest_triplets(empty).nnz == 0
    cases = {
        "row,col,value\n1,1,1\n1,1,2\n": ":3:",
        "row,col,value\n1,x,1\n": ":2:",
        "row,col,value\n1,2\n": ":2:",
        "r,c,v\n": ":1:",
        "row,col,value\n0,1,1\n": ":2:",
        "row,col,value\n1,1,nan\n": ":2:",
    }
    for text, where in cases.items():
        f = tmp_path / "bad.csv"
        f.write_text(text)
        with pytest.raises(ParseError, match=where):
            ingest_triplets(f)
    f.write_text("row,col,value\n5,5,1\n")
    with pytest.raises(ParseError):
        ingest_triplets(f, shape=(3, 3))


def test_nnz_counts(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("3\n\n0\n12\n")
    assert ingest_nnz_counts(f) == [3, 0, 12]
    f.write_text("3\n-1\n")
    with pytest.raises(ParseError, match=":2:"):
        ingest_nnz_counts(f)


def test_storage_examples(ctx):
    assert storage_cost(np.zeros((100, 100))) == 10000
    assert sparse_storage(10, 7) == 80
    v = owner_share_vector(ctx, [(i, 1.0) for i in range(1, 11)], dim=100)
    assert storage_cost(v) == 80
    assert storage_cost(share(ctx, np.zeros((4, 5), dtype=np.int64))) == 20
    assert storage_cost(PlainSparse.vector(100, [(1, 1.0)])) == 8
    with pytest.raises(TypeError):
        storage_cost("x")
