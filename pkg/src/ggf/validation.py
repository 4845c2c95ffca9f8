"""Input validation helpers.

Everything numeric in the pipeline is canonicalized through :func:`as_csr`
(64-bit CSR, sorted indices, duplicates summed, stored zeros pruned) so the
kernel operations can assume a clean format.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, DomainError

__all__ = ["as_csr", "as_signal", "check_nonnegative"]


def as_csr(m, *, dtype=np.float64) -> sp.csr_matrix:
    """Coerce *m* (sparse, dense array, or nested lists) to canonical CSR.

    Canonical means: float64 data, sorted column indices, no duplicate
    coordinates, no stored zeros, all values finite.
    """
    if sp.issparse(m):
        out = m.tocsr().astype(dtype, copy=True)
    else:
        out = sp.csr_matrix(np.asarray(m, dtype=dtype))
    out.sum_duplicates()
    out.sort_indices()
    out.eliminate_zeros()
    if out.nnz and not np.isfinite(out.data).all():
        raise DomainError("matrix contains non-finite values")
    return out


def as_signal(x, n: int | None = None) -> np.ndarray:
    """Coerce *x* to a contiguous 1-D float64 vector, optionally of length *n*."""
    v = np.ascontiguousarray(np.asarray(x, dtype=np.float64)).ravel()
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"signal has length {v.shape[0]}, expected {n}")
    return v


def check_nonnegative(m: sp.csr_matrix, what: str = "matrix") -> None:
    """Raise :class:`DomainError` if any stored entry of *m* is negative."""
    if m.nnz and m.data.min() < 0:
        raise DomainError(f"{what} contains negative entries")
