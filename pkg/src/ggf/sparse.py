"""Sparse matrix kernel for the recommendation pipeline.

Thin, contract-checked wrappers around scipy.sparse CSR. All operations are
pure, deterministic (single-threaded C kernels, fixed accumulation order) and
keep values in 64-bit floats. Matrices returned here are always canonical:
sorted indices, no duplicates, no stored zeros.

Also implements the binary snapshot format used to cache item graphs between
CLI invocations (magic ``GGFM``, little-endian throughout).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataFormatError, DimensionError, DomainError, ParameterError
from .validation import as_csr, as_signal

__all__ = [
    "concat_h",
    "concat_v",
    "row_sums",
    "col_sums",
    "scale_bilateral",
    "gram",
    "hadamard_pow",
    "submatrix",
    "spmm",
    "spmv_row",
    "to_dense",
    "save_snapshot",
    "load_snapshot",
]


def concat_h(a: sp.csr_matrix, b: sp.csr_matrix) -> sp.csr_matrix:
    """Horizontal block concatenation [a | b]."""
    a, b = as_csr(a), as_csr(b)
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    return as_csr(sp.hstack([a, b], format="csr"))


def concat_v(a: sp.csr_matrix, b: sp.csr_matrix) -> sp.csr_matrix:
    """Vertical block concatenation [a ; b]."""
    a, b = as_csr(a), as_csr(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    return as_csr(sp.vstack([a, b], format="csr"))


def row_sums(m: sp.csr_matrix) -> np.ndarray:
    """Row sums as a 1-D float64 vector (zero rows yield 0)."""
    return np.asarray(as_csr(m).sum(axis=1), dtype=np.float64).ravel()


def col_sums(m: sp.csr_matrix) -> np.ndarray:
    """Column sums as a 1-D float64 vector (zero columns yield 0)."""
    return np.asarray(as_csr(m).sum(axis=0), dtype=np.float64).ravel()


def _inv_sqrt(d: np.ndarray) -> np.ndarray:
    # zero-degree convention: 0 ** -0.5 -> 0, never NaN/Inf
    d = np.asarray(d, dtype=np.float64).ravel()
    out = np.zeros_like(d)
    np.power(d, -0.5, out=out, where=d > 0)
    return out


def scale_bilateral(m: sp.csr_matrix, left: np.ndarray, right: np.ndarray) -> sp.csr_matrix:
    """Degree-normalize: entry (i, j) -> m[i,j] * left[i]**-0.5 * right[j]**-0.5.

    Indices with left/right value 0 produce 0 (stored zeros are pruned).
    """
    m = as_csr(m)
    left = np.asarray(left, dtype=np.float64).ravel()
    right = np.asarray(right, dtype=np.float64).ravel()
    if left.shape[0] != m.shape[0]:
        raise DimensionError(f"left vector length {left.shape[0]} != n_rows {m.shape[0]}")
    if right.shape[0] != m.shape[1]:
        raise DimensionError(f"right vector length {right.shape[0]} != n_cols {m.shape[1]}")
    lf, rf = _inv_sqrt(left), _inv_sqrt(right)
    out = m.copy()
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    out.data = m.data * lf[rows] * rf[m.indices]
    out.eliminate_zeros()
    return out


def gram(m: sp.csr_matrix) -> sp.csr_matrix:
    """Gram matrix m.T @ m (symmetric, PSD; pattern = column co-occurrence)."""
    m = as_csr(m)
    return as_csr(m.T @ m)


def hadamard_pow(m: sp.csr_matrix, s: float) -> sp.csr_matrix:
    """Entrywise power v -> v**s on stored entries (0**s = 0 for s > 0)."""
    if not np.isfinite(s) or s <= 0:
        raise ParameterError(f"exponent must be positive and finite, got {s}")
    m = as_csr(m)
    if m.nnz and m.data.min() < 0:
        raise DomainError("entrywise power requires nonnegative entries")
    out = m.copy()
    out.data = np.power(m.data, float(s))
    out.eliminate_zeros()
    return out


def submatrix(m: sp.csr_matrix, row_range: tuple[int, int], col_range: tuple[int, int]) -> sp.csr_matrix:
    """Block copy m[r0:r1, c0:c1] with rebased indices; ranges are half-open."""
    m = as_csr(m)
    r0, r1 = row_range
    c0, c1 = col_range
    if not (0 <= r0 <= r1 <= m.shape[0] and 0 <= c0 <= c1 <= m.shape[1]):
        raise DimensionError(
            f"range rows[{r0}:{r1}] cols[{c0}:{c1}] out of bounds for shape {m.shape}"
        )
    return as_csr(m[r0:r1, c0:c1])


def spmm(a: sp.csr_matrix, b: sp.csr_matrix) -> sp.csr_matrix:
    """Sparse matrix product a @ b."""
    a, b = as_csr(a), as_csr(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    return as_csr(a @ b)


def spmv_row(signal: np.ndarray, m: sp.csr_matrix) -> np.ndarray:
    """Row-vector times matrix: returns signal @ m as a dense 1-D vector."""
    m = as_csr(m)
    v = as_signal(signal, m.shape[0])
    return np.asarray(m.T @ v, dtype=np.float64).ravel()


def to_dense(m: sp.csr_matrix) -> np.ndarray:
    """Materialize as a dense float64 array."""
    return np.asarray(as_csr(m).todense(), dtype=np.float64)


# --- binary snapshot format -------------------------------------------------
#
# magic "GGFM" | version u16 | n_rows u64 | n_cols u64 | nnz u64
# | indptr (n_rows+1) u64 | indices (nnz) u64 | data (nnz) f64, little-endian.

_MAGIC = b"GGFM"
_VERSION = 1
_HEADER = struct.Struct("<4sHQQQ")


def save_snapshot(m: sp.csr_matrix, path) -> None:
    """Write *m* to *path* in the GGFM binary format."""
    m = as_csr(m)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, m.shape[0], m.shape[1], m.nnz))
        fh.write(m.indptr.astype("<u8").tobytes())
        fh.write(m.indices.astype("<u8").tobytes())
        fh.write(m.data.astype("<f8").tobytes())


def load_snapshot(path) -> sp.csr_matrix:
    """Read a GGFM snapshot back into canonical CSR."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated snapshot header")
    magic, version, n_rows, n_cols, nnz = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise DataFormatError(f"{path}: unsupported snapshot version {version}")
    expected = _HEADER.size + 8 * (n_rows + 1) + 8 * nnz + 8 * nnz
    if len(raw) != expected:
        raise DataFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    off = _HEADER.size
    indptr = np.frombuffer(raw, dtype="<u8", count=n_rows + 1, offset=off).astype(np.int64)
    off += 8 * (n_rows + 1)
    indices = np.frombuffer(raw, dtype="<u8", count=nnz, offset=off).astype(np.int64)
    off += 8 * nnz
    data = np.frombuffer(raw, dtype="<f8", count=nnz, offset=off).astype(np.float64)
    if indptr[0] != 0 or indptr[-1] != nnz or (np.diff(indptr) < 0).any():
        raise DataFormatError(f"{path}: corrupt row pointers")
    if nnz and indices.max() >= n_cols:
        raise DataFormatError(f"{path}: column index out of range")
    return as_csr(sp.csr_matrix((data, indices, indptr), shape=(n_rows, n_cols)))
