"""Shared generators and small oracles for the test suite."""
from __future__ import annotations

import numpy as np

from topokry import SparseSymMatrix


def random_spd(rng: np.random.Generator, n: int, spread: float = 10.0):
    """Random symmetric positive definite matrix with eigenvalues in
    [1, spread], returned dense."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = rng.uniform(1.0, spread, size=n)
    a = (q * eigs) @ q.T
    return 0.5 * (a + a.T)


def random_singular_psd(rng: np.random.Generator, n: int, nullity: int):
    """Random symmetric PSD matrix with a planted null space.

    Returns (dense matrix, q_range, q_null) where the q blocks are the
    planted orthonormal bases.
    """
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = np.concatenate([rng.uniform(0.5, 10.0, size=n - nullity), np.zeros(nullity)])
    a = (q * eigs) @ q.T
    return 0.5 * (a + a.T), q[:, : n - nullity], q[:, n - nullity :]


def sparse_from_dense(a) -> SparseSymMatrix:
    dense = np.asarray(a, dtype=float)
    return SparseSymMatrix.from_dense(0.5 * (dense + dense.T))


def random_sparse_symmetric(rng: np.random.Generator, n: int, density: float = 0.3):
    """Random symmetric sparse matrix (indefinite, full-rank not guaranteed)."""
    mask = rng.random((n, n)) < density
    vals = rng.standard_normal((n, n)) * mask
    dense = np.triu(vals)
    dense = dense + np.triu(dense, 1).T
    return SparseSymMatrix.from_dense(dense), dense
