"""Range/null decomposition instrumentation for singular symmetric systems.

Builds orthonormal bases of the range and its orthogonal complement from the
symmetric eigendecomposition, transforms matrices to the block "standard
form" with a regular leading block and a zero trailing block, projects
recorded solver histories onto the two subspaces, and checks the Conjugate
Residual contraction bound.  Test-scale machinery: dense, n <= 2000.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .krylov import SolveReport
from .linalg import DENSE_SIZE_LIMIT, SparseSymMatrix, as_dense


class DecompositionError(RuntimeError):
    """The computed decomposition is inconsistent with the matrix."""


@dataclass
class RangeDecomposition:
    """Orthonormal range/null bases of a symmetric matrix.

    ``q_range`` is n-by-r, ``q_null`` is n-by-(n-r) and together they form an
    orthogonal matrix; ``a11 = q_range.T @ A @ q_range`` is the regular block.
    """

    rank: int
    q_range: np.ndarray
    q_null: np.ndarray
    a11: np.ndarray


@dataclass
class ComponentTraces:
    """Per-iteration norms of range/null components of r_k and x_k."""

    residual_range: np.ndarray
    residual_null: np.ndarray
    iterate_range: np.ndarray
    iterate_null: np.ndarray


def _to_dense_symmetric(a, name: str = "matrix") -> np.ndarray:
    if isinstance(a, SparseSymMatrix):
        dense = a.to_dense()
    else:
        dense = as_dense(a, name)
    n, m = dense.shape
    if n != m:
        raise ValueError(f"{name} must be square, got {dense.shape}")
    if n > DENSE_SIZE_LIMIT:
        raise ValueError(f"decomposition limited to n <= {DENSE_SIZE_LIMIT}")
    scale = np.abs(dense).max() if n else 0.0
    if n and np.abs(dense - dense.T).max() > 1e-12 * max(scale, 1e-300):
        raise ValueError(f"{name} must be symmetric")
    return dense


def range_basis(a, rank_tol: float = 1e-10) -> RangeDecomposition:
    """Split R^n into the range of a symmetric matrix and its complement.

    Eigenvectors with |lambda| > rank_tol * |lambda|_max span the range; the
    rest span the null space (equal to the orthogonal complement for
    symmetric input).
    """
    dense = _to_dense_symmetric(a)
    n = dense.shape[0]
    if n == 0:
        empty = np.zeros((0, 0))
        return RangeDecomposition(0, empty, empty, empty)
    w, v = np.linalg.eigh(0.5 * (dense + dense.T))
    magnitude = np.abs(w)
    cutoff = rank_tol * magnitude.max() if magnitude.max() > 0 else 0.0
    keep = magnitude > cutoff
    # descending magnitude inside each block keeps the layout predictable
    range_order = np.flatnonzero(keep)[np.argsort(-magnitude[keep])]
    null_order = np.flatnonzero(~keep)
    q1 = v[:, range_order]
    q2 = v[:, null_order]
    a11 = q1.T @ dense @ q1
    return RangeDecomposition(int(keep.sum()), q1, q2, a11)


def standard_form(a, dec: RangeDecomposition) -> np.ndarray:
    """Orthogonal transform Q^T A Q exposing the regular/zero block split.

    Raises :class:`DecompositionError` if the off-diagonal or trailing
    blocks fail to vanish, i.e. the decomposition does not belong to A.
    """
    dense = _to_dense_symmetric(a)
    q = np.hstack([dec.q_range, dec.q_null])
    if q.shape != dense.shape:
        raise ValueError("decomposition size does not match the matrix")
    tilde = q.T @ dense @ q
    r = dec.rank
    scale = np.linalg.norm(dense)
    tol = 1e-10 * max(scale, 1e-300)
    off_upper = np.linalg.norm(tilde[:r, r:])
    off_lower = np.linalg.norm(tilde[r:, :r])
    trailing = np.linalg.norm(tilde[r:, r:])
    if max(off_upper, off_lower, trailing) > tol:
        raise DecompositionError(
            "block structure violated: off/trailing block norms "
            f"({off_upper:.2e}, {off_lower:.2e}, {trailing:.2e}) exceed {tol:.2e}"
        )
    return tilde


def decompose_history(report: SolveReport, dec: RangeDecomposition) -> ComponentTraces:
    """Project a recorded solve history onto the range and null subspaces."""
    if report.iterates is None or report.residual_vectors is None:
        raise ValueError("solver was not run with iterate recording enabled")
    n = dec.q_range.shape[0]
    for vec in (*report.iterates, *report.residual_vectors):
        if vec.size != n:
            raise ValueError("recorded vectors do not match the decomposition size")

    def split_norms(vectors):
        par = np.array([np.linalg.norm(dec.q_range.T @ v) for v in vectors])
        perp = np.array([np.linalg.norm(dec.q_null.T @ v) for v in vectors])
        return par, perp

    r_par, r_perp = split_norms(report.residual_vectors)
    x_par, x_perp = split_norms(report.iterates)
    return ComponentTraces(r_par, r_perp, x_par, x_perp)


def cr_bound_check(a, residual_history, slack: float = 1e-10) -> bool:
    """Check the CR contraction bound on a recorded residual history.

    For every consecutive pair the squared residual ratio must satisfy
    ||r_{k+1}||^2 / ||r_k||^2 <= 1 - lambda_min(M)^2 / lambda_max(A^T A)
    within ``slack``, where M is the symmetric part of A.  Requires M
    positive definite.
    """
    dense = as_dense(a, "a")
    n, m = dense.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {dense.shape}")
    if n > DENSE_SIZE_LIMIT:
        raise ValueError(f"bound check limited to n <= {DENSE_SIZE_LIMIT}")
    sym = 0.5 * (dense + dense.T)
    eigs_m = np.linalg.eigvalsh(sym)
    if eigs_m.min() <= 0.0:
        raise ValueError("symmetric part must be positive definite")
    lam_min = eigs_m.min()
    lam_max_ata = np.linalg.eigvalsh(dense.T @ dense).max()
    bound = 1.0 - lam_min**2 / lam_max_ata
    history = [float(h) for h in residual_history]
    for prev, nxt in zip(history, history[1:]):
        if prev == 0.0:
            continue
        if (nxt / prev) ** 2 > bound + slack:
            return False
    return True
