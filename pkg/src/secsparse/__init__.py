"""Secret-shared sparse linear algebra on Shamir shares, simulated in process."""

from .field import DEFAULT_FIELD, FIXED, LimbField, SmallField, fp_decode, fp_encode, make_field
from .runtime import ConfigurationError, CostLedger, ProtocolContext
from .shamir import Shares, mul, open_values, reconstruct, share, trunc
from .sparse import PlainSparse, SparseMatrixShares, SparseVectorShares, owner_share_matrix, owner_share_vector, reconstruct_matrix, reconstruct_vector
from .protocols import gram, sparse_matmat, sparse_matvec, sparse_vec_mult

__all__ = [
    "DEFAULT_FIELD", "FIXED", "LimbField", "SmallField", "fp_decode", "fp_encode", "make_field",
    "ConfigurationError", "CostLedger", "ProtocolContext",
    "Shares", "mul", "open_values", "reconstruct", "share", "trunc",
    "PlainSparse", "SparseMatrixShares", "SparseVectorShares", "owner_share_matrix", "owner_share_vector",
    "reconstruct_matrix", "reconstruct_vector",
    "gram", "sparse_matmat", "sparse_matvec", "sparse_vec_mult",
]
