"""Construction of the three item-item similarity graphs.

Each view follows the same recipe: take an interaction matrix (optionally
augmented with the group-membership relation), symmetrically degree-normalize
it, form the gram matrix restricted to the item block, and sharpen or flatten
the resulting similarities with an entrywise power ``s``.

The member view filters signals through co-consumption among members, the
group view through co-consumption among groups, and the unified view through
the vertically stacked group+member interactions.
"""

from __future__ import annotations

from dataclasses import dataclass

import scipy.sparse as sp

from .data import Dataset
from .errors import ParameterError
from .sparse import col_sums, concat_h, concat_v, gram, hadamard_pow, row_sums, scale_bilateral

VIEW_MEMBER = "member"
VIEW_GROUP = "group"
VIEW_UNIFIED = "unified"
VIEWS = (VIEW_MEMBER, VIEW_GROUP, VIEW_UNIFIED)

__all__ = [
    "VIEW_MEMBER",
    "VIEW_GROUP",
    "VIEW_UNIFIED",
    "VIEWS",
    "SimilarityGraph",
    "build_member_view",
    "build_group_view",
    "build_unified_view",
    "build_views",
]


@dataclass
class SimilarityGraph:
    """A symmetric nonnegative item-item similarity matrix for one view."""

    view: str
    matrix: sp.csr_matrix
    s_used: float
    augmented_with_membership: bool

    @property
    def n_items(self) -> int:
        return self.matrix.shape[0]


def _adjusted_item_gram(interactions: sp.csr_matrix, n_items: int, s: float) -> sp.csr_matrix:
    """Normalize, gram, restrict to the item block, apply the entrywise power.

    Degrees come from the full (augmented) matrix; only the item columns enter
    the gram so the discarded similarity blocks are never materialized.
    """
    normalized = scale_bilateral(interactions, row_sums(interactions), col_sums(interactions))
    item_block = normalized[:, :n_items] if normalized.shape[1] > n_items else normalized
    return hadamard_pow(gram(item_block), s)


def _check_s(s: float) -> float:
    if not s > 0:
        raise ParameterError(f"adjustment exponent must be > 0, got {s}")
    return float(s)


def build_member_view(ds: Dataset, s: float, use_membership: bool = True) -> SimilarityGraph:
    """Item graph from member-item interactions, optionally augmented with M^T."""
    s = _check_s(s)
    interactions = ds.r_u_train
    if use_membership:
        interactions = concat_h(interactions, ds.membership.T)
    return SimilarityGraph(VIEW_MEMBER, _adjusted_item_gram(interactions, ds.n_items, s),
                           s, use_membership)


def build_group_view(ds: Dataset, s: float, use_membership: bool = True) -> SimilarityGraph:
    """Item graph from group-item interactions, optionally augmented with M."""
    s = _check_s(s)
    interactions = ds.r_g_train
    if use_membership:
        interactions = concat_h(interactions, ds.membership)
    return SimilarityGraph(VIEW_GROUP, _adjusted_item_gram(interactions, ds.n_items, s),
                           s, use_membership)


def build_unified_view(ds: Dataset, s: float) -> SimilarityGraph:
    """Item graph from the stacked [group-item ; member-item] interactions."""
    s = _check_s(s)
    interactions = concat_v(ds.r_g_train, ds.r_u_train)
    return SimilarityGraph(VIEW_UNIFIED, _adjusted_item_gram(interactions, ds.n_items, s),
                           s, False)


def build_views(ds: Dataset, s: float, use_membership: bool = True,
                views=VIEWS, s_overrides: dict | None = None) -> dict:
    """Build the requested views; ``s_overrides`` maps view name -> exponent."""
    overrides = s_overrides or {}
    out = {}
    for view in views:
        if view not in VIEWS:
            raise ParameterError(f"unknown view {view!r}")
        s_view = _check_s(overrides.get(view, s))
        if view == VIEW_MEMBER:
            out[view] = build_member_view(ds, s_view, use_membership)
        elif view == VIEW_GROUP:
            out[view] = build_group_view(ds, s_view, use_membership)
        else:
            out[view] = build_unified_view(ds, s_view)
    return out
