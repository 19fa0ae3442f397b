"""Adaptive low-rank solver for high-dimensional elliptic problems."""

from .htucker import (
    DimensionTree, HTTensor, SeparableDiagonal, build_linear_tree, from_rank_one,
    add, scale, subtract, inner_product, norm, orthogonalize, hsvd,
    truncate_to_rank, truncate_to_tolerance, evaluate_entry, zero_tensor,
)

__version__ = "0.1.0"
