"""Sparse symmetric matrices, vector checks, and small dense solvers.

Vectors are plain 1-D float64 numpy arrays and dense matrices are 2-D
float64 numpy arrays; :func:`as_vector` / :func:`as_dense` validate them at
API boundaries.  The dense solvers exist as test oracles and are limited to
n <= 2000 by contract.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

DENSE_SIZE_LIMIT = 2000


class SingularMatrixError(ValueError):
    """Raised when a direct solve meets a numerically singular matrix."""


def as_vector(x, n: int | None = None, name: str = "vector") -> np.ndarray:
    """Validate and return a finite 1-D float64 array."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if n is not None and v.size != n:
        raise ValueError(f"{name} has length {v.size}, expected {n}")
    if v.size and not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite components")
    return v


def as_dense(a, name: str = "matrix") -> np.ndarray:
    """Validate and return a finite 2-D float64 array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


class SparseSymMatrix:
    """Symmetric sparse matrix stored in CSR with the full pattern.

    Symmetry is an invariant checked at construction, not a storage trick:
    every stored (i, j) has an exactly equal stored (j, i).  Duplicate
    triplets are summed in a fixed order so assembly is bit-reproducible.
    Dimension 0 is permitted as the degenerate result of eliminating every
    degree of freedom from a system.
    """

    def __init__(self, csr: sp.csr_matrix, check: bool = True):
        csr = csr.tocsr()
        csr.sort_indices()
        n, m = csr.shape
        if n != m:
            raise ValueError(f"matrix must be square, got {csr.shape}")
        if check and n > 0:
            if csr.nnz and not np.all(np.isfinite(csr.data)):
                raise ValueError("matrix contains non-finite entries")
            if (csr != csr.T).nnz != 0:
                raise ValueError("matrix is not symmetric")
        self._csr = csr

    @property
    def dimension(self) -> int:
        return self._csr.shape[0]

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    @classmethod
    def from_triplets(cls, n: int, rows, cols, values) -> "SparseSymMatrix":
        """Build from COO triplets, summing duplicates in a stable order."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        if not (rows.shape == cols.shape == values.shape):
            raise ValueError("triplet arrays must have matching shapes")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n:
                raise ValueError("triplet index out of range")
            # Stable lexsort keeps the per-entry addend order identical for
            # (i, j) and (j, i), so symmetric inputs assemble symmetrically
            # down to the last bit.
            order = np.lexsort((cols, rows))
            r, c, v = rows[order], cols[order], values[order]
            boundary = np.ones(r.size, dtype=bool)
            boundary[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
            starts = np.flatnonzero(boundary)
            summed = np.add.reduceat(v, starts)
            csr = sp.csr_matrix((summed, (r[starts], c[starts])), shape=(n, n))
        else:
            csr = sp.csr_matrix((n, n))
        return cls(csr)

    @classmethod
    def from_dense(cls, a) -> "SparseSymMatrix":
        return cls(sp.csr_matrix(as_dense(a)))

    @classmethod
    def from_diagonal(cls, d) -> "SparseSymMatrix":
        d = as_vector(d, name="diagonal")
        return cls(sp.diags(d, format="csr"), check=False)

    @classmethod
    def identity(cls, n: int) -> "SparseSymMatrix":
        return cls(sp.identity(n, format="csr"), check=False)

    @classmethod
    def zeros(cls, n: int) -> "SparseSymMatrix":
        return cls(sp.csr_matrix((n, n)), check=False)

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def submatrix(self, keep) -> "SparseSymMatrix":
        """Principal submatrix on the given index set (order preserved)."""
        keep = np.asarray(keep, dtype=np.int64)
        reduced = self._csr[keep][:, keep].tocsr()
        return SparseSymMatrix(reduced, check=False)

    def scaled(self, s) -> "SparseSymMatrix":
        """Symmetric diagonal scaling diag(s) @ A @ diag(s)."""
        s = as_vector(s, self.dimension, "scaling")
        out = self._csr.tocoo(copy=True)
        # s[r]*s[c] is computed once per entry; the (i,j)/(j,i) pair gets the
        # exact same product, so symmetry survives bit-for-bit.
        out.data = out.data * (s[out.row] * s[out.col])
        return SparseSymMatrix(out.tocsr(), check=False)

    def zero_rows(self) -> np.ndarray:
        """Indices of rows with no stored entries (fully decoupled DOFs)."""
        counts = np.diff(self._csr.indptr)
        return np.flatnonzero(counts == 0)


def spmv(a: SparseSymMatrix, x) -> np.ndarray:
    """Matrix-vector product y = A x."""
    x = as_vector(x, name="x")
    if x.size != a.dimension:
        raise ValueError(
            f"dimension mismatch: matrix is {a.dimension}, vector is {x.size}"
        )
    return a.csr @ x


def dense_solve(a, b, pivot_tol: float = 1e-14) -> np.ndarray:
    """Solve A x = b by Gaussian elimination with partial pivoting.

    Test oracle for regular systems; n is limited to 2000.  Raises
    :class:`SingularMatrixError` when the best available pivot falls below
    ``pivot_tol`` times the largest entry of the initial matrix.
    """
    a = as_dense(a, "a").copy()
    n, m = a.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {a.shape}")
    if n > DENSE_SIZE_LIMIT:
        raise ValueError(f"dense solver limited to n <= {DENSE_SIZE_LIMIT}")
    b = as_vector(b, n, "b").copy()
    scale = np.abs(a).max() if n else 0.0
    if n and scale == 0.0:
        raise SingularMatrixError("zero matrix")
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[piv, k]) <= pivot_tol * scale:
            raise SingularMatrixError(f"pivot {a[piv, k]:.3e} at column {k}")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        factors = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(factors, a[k, k:])
        b[k + 1:] -= factors * b[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def pseudo_solve(a, b, rank_tol: float = 1e-10) -> np.ndarray:
    """Minimum-norm least-squares solution x = A+ b for symmetric A.

    Uses the symmetric eigendecomposition and drops eigenvalues with
    |lambda| <= rank_tol * |lambda|_max.  Test oracle for singular systems.
    """
    a = as_dense(a, "a")
    n, m = a.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {a.shape}")
    if n > DENSE_SIZE_LIMIT:
        raise ValueError(f"dense solver limited to n <= {DENSE_SIZE_LIMIT}")
    scale = np.abs(a).max() if n else 0.0
    if n and np.abs(a - a.T).max() > 1e-12 * max(scale, 1e-300):
        raise ValueError("pseudo_solve requires a symmetric matrix")
    b = as_vector(b, n, "b")
    if n == 0:
        return np.zeros(0)
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    keep = np.abs(w) > rank_tol * np.abs(w).max()
    if not np.any(keep):
        return np.zeros(n)
    coeffs = (v[:, keep].T @ b) / w[keep]
    return v[:, keep] @ coeffs
