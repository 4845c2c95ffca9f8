"""Polynomial graph filters over item similarity graphs.

A filter is a coefficient list (c_1..c_K) applied to graph powers P^1..P^K;
there is deliberately no identity term, so the raw signal never leaks through
unfiltered. Filters can be applied either from an explicitly materialized
matrix sum(c_k P^k) or as a chain of sparse row-vector products; both
strategies agree to high precision and the chain avoids densifying large
graphs.

Presets express the low-pass family 1-(1-x)^K on the similarity spectrum:
``linear`` (1,), ``second_order`` (2, -1) with frequency response 1-lambda^2
on the corresponding Laplacian, and a configurable ``cubic``. The shipped
cubic default (3, -3, 1) continues that family; it is an assumption, not a
published value, and can be overridden in config.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, ParameterError, ResourceError
from .graphs import SimilarityGraph
from .sparse import spmm
from .validation import as_csr, as_signal

MATERIALIZED = "materialized"
MATVEC_CHAIN = "matvec_chain"

DEFAULT_NNZ_CAP = 200_000_000
MATERIALIZE_MAX_ITEMS = 20_000

PRESET_COEFFICIENTS = {
    "linear": (1.0,),
    "second_order": (2.0, -1.0),
}
DEFAULT_CUBIC_COEFFICIENTS = (3.0, -3.0, 1.0)

__all__ = [
    "MATERIALIZED",
    "MATVEC_CHAIN",
    "DEFAULT_NNZ_CAP",
    "MATERIALIZE_MAX_ITEMS",
    "DEFAULT_CUBIC_COEFFICIENTS",
    "FilterSpec",
    "AppliedFilter",
    "preset",
    "as_spec",
    "polynomial_response",
    "materialize",
    "chain",
    "build_filter",
    "apply_filter",
    "apply_filter_to_rows",
]


@dataclass(frozen=True)
class FilterSpec:
    """Coefficients c_1..c_K of a polynomial filter sum(c_k P^k)."""

    coefficients: tuple[float, ...]
    name: str | None = None

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if len(coeffs) < 1:
            raise ParameterError("a filter needs at least one coefficient")
        if not all(np.isfinite(coeffs)):
            raise ParameterError(f"non-finite filter coefficients {coeffs}")
        if not any(coeffs):
            raise ParameterError("all filter coefficients are zero")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def order(self) -> int:
        return len(self.coefficients)

    def label(self) -> str:
        return self.name or ",".join(repr(c) for c in self.coefficients)


def preset(name: str, cubic_coefficients: Sequence[float] | None = None) -> FilterSpec:
    """Look up a named filter preset (``linear``, ``second_order``, ``cubic``)."""
    if name in PRESET_COEFFICIENTS:
        return FilterSpec(PRESET_COEFFICIENTS[name], name)
    if name == "cubic":
        coeffs = tuple(cubic_coefficients) if cubic_coefficients is not None \
            else DEFAULT_CUBIC_COEFFICIENTS
        return FilterSpec(coeffs, "cubic")
    raise ParameterError(f"unknown filter preset {name!r}")


def as_spec(value, cubic_coefficients: Sequence[float] | None = None) -> FilterSpec:
    """Coerce a preset name, coefficient sequence, or config dict to a FilterSpec."""
    if isinstance(value, FilterSpec):
        return value
    if isinstance(value, str):
        return preset(value, cubic_coefficients)
    if isinstance(value, dict):
        # config form {"view": ..., "preset": ...} / {"coefficients": [...]}
        if "coefficients" in value:
            return FilterSpec(tuple(value["coefficients"]))
        if "preset" in value:
            return preset(value["preset"], cubic_coefficients)
        raise ParameterError(f"filter config needs 'preset' or 'coefficients': {value!r}")
    try:
        return FilterSpec(tuple(value))
    except TypeError:
        raise ParameterError(f"cannot interpret {value!r} as a filter") from None


def polynomial_response(spec: FilterSpec, mu):
    """Evaluate sum(c_k mu^k) at similarity eigenvalue(s) *mu*."""
    mu = np.asarray(mu, dtype=np.float64)
    out = np.zeros_like(mu)
    for c in reversed(spec.coefficients):
        out = mu * (out + c)
    return out if out.ndim else float(out)


@dataclass
class AppliedFilter:
    """A filter bound to a graph, ready to apply to signals."""

    graph: SimilarityGraph
    spec: FilterSpec
    strategy: str
    matrix: sp.csr_matrix | None = None

    @property
    def n_items(self) -> int:
        return self.graph.n_items


def materialize(graph: SimilarityGraph, spec: FilterSpec,
                nnz_cap: int = DEFAULT_NNZ_CAP) -> AppliedFilter:
    """Explicitly compute sum(c_k P^k); raises ResourceError over the nnz cap."""
    g = graph.matrix
    if g.nnz > nnz_cap:
        raise ResourceError(
            f"graph nnz {g.nnz} exceeds cap {nnz_cap}; use the {MATVEC_CHAIN} strategy")
    coeffs = spec.coefficients
    power = g
    total = coeffs[0] * g
    for c in coeffs[1:]:
        power = spmm(power, g)
        if power.nnz > nnz_cap:
            raise ResourceError(
                f"materialized filter would exceed nnz cap {nnz_cap} "
                f"(power nnz {power.nnz}); use the {MATVEC_CHAIN} strategy")
        if c:
            total = total + c * power
    return AppliedFilter(graph, spec, MATERIALIZED, as_csr(total))


def chain(graph: SimilarityGraph, spec: FilterSpec) -> AppliedFilter:
    """Bind the filter for application via repeated sparse mat-vec products."""
    return AppliedFilter(graph, spec, MATVEC_CHAIN)


def predicted_nnz(graph: SimilarityGraph, spec: FilterSpec) -> int:
    """Upper bound on the materialized filter's nnz (powers fill the pattern in)."""
    n = graph.n_items
    return graph.matrix.nnz if spec.order == 1 else n * n


def build_filter(graph: SimilarityGraph, spec, strategy: str = "auto",
                 nnz_cap: int = DEFAULT_NNZ_CAP,
                 materialize_max_items: int = MATERIALIZE_MAX_ITEMS) -> AppliedFilter:
    """Bind *spec* to *graph* under the requested (or auto-chosen) strategy."""
    spec = as_spec(spec)
    if strategy == "auto":
        small = graph.n_items <= materialize_max_items
        strategy = MATERIALIZED if small and predicted_nnz(graph, spec) <= nnz_cap \
            else MATVEC_CHAIN
    if strategy == MATERIALIZED:
        return materialize(graph, spec, nnz_cap)
    if strategy == MATVEC_CHAIN:
        return chain(graph, spec)
    raise ParameterError(f"unknown filter strategy {strategy!r}")


def apply_filter(f: AppliedFilter, signal) -> np.ndarray:
    """Filter a dense row signal: returns signal @ sum(c_k P^k) as a 1-D vector.

    The bound matrices were validated when the filter was built, so the hot
    path uses raw products (no per-call canonicalization copies).
    """
    v = as_signal(signal, f.n_items)
    if f.strategy == MATERIALIZED:
        return np.asarray(f.matrix.T @ v, dtype=np.float64).ravel()
    g = f.graph.matrix
    acc = np.zeros_like(v)
    power = v
    for c in f.spec.coefficients:
        power = np.asarray(g.T @ power, dtype=np.float64).ravel()
        if c:
            acc = acc + c * power
    return acc


def apply_filter_to_rows(f: AppliedFilter, signals: sp.csr_matrix) -> np.ndarray:
    """Filter a sparse batch of row signals; returns a dense (n_rows, n_items) array.

    Row results are identical whether rows are filtered one at a time or in a
    batch (the sparse product treats output rows independently).
    """
    signals = as_csr(signals)
    if signals.shape[1] != f.n_items:
        raise DimensionError(
            f"signals have {signals.shape[1]} columns, filter expects {f.n_items}")
    if f.strategy == MATERIALIZED:
        return np.asarray((signals @ f.matrix).todense(), dtype=np.float64)
    g = f.graph.matrix
    acc = None
    power = signals
    for c in f.spec.coefficients:
        power = power @ g
        if c:
            term = c * power
            acc = term if acc is None else acc + term
    return np.asarray(acc.todense(), dtype=np.float64)
