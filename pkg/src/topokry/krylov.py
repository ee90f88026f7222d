"""Conjugate Gradient and Conjugate Residual solvers for symmetric positive
semidefinite systems, engineered to run without breakdown when zero-density
elements make the stiffness matrix singular.

Both solvers implement the classical recurrences

    CG:  alpha_k = (r_k, p_k) / (p_k, A p_k)
         beta_k  = -(r_{k+1}, A p_k) / (p_k, A p_k)
    CR:  alpha_k = (r_k, A p_k) / (A p_k, A p_k)
         beta_k  = -(A r_{k+1}, A p_k) / (A p_k, A p_k)

with x_{k+1} = x_k + alpha_k p_k, r_{k+1} = r_k - alpha_k A p_k and
p_{k+1} = r_{k+1} + beta_k p_k, stopping when ||r_k|| <= eps * ||b||.
Collapse of the alpha denominator does not raise: the solver returns the
current iterate with status ``stagnated_least_squares``, which on a
consistent subsystem is the useful range-space solution.

Jacobi preconditioning differs per method.  CG runs the plain recurrences
on the symmetrically scaled system S A S y = S b with S = diag(sqrt(d)),
x = S y, which is the standard preconditioned CG.  CR applies the
preconditioner from the left and iterates on M^-1 A x = M^-1 b: the
operator is then nonsymmetric with a definite symmetric part, which is
precisely the setting of the CR contraction bound, and the method trades
its residual optimality for plain applicability -- it converges noticeably
slower than CG on the same system, and on matrices with strongly varying
diagonals it can plateau above tight tolerances (use symmetric-scaling CG
or no preconditioning when that matters).  In both cases the reported
residual history belongs to the system actually iterated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import SparseSymMatrix, as_vector

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
STAGNATED = "stagnated_least_squares"

RECORD_SIZE_LIMIT = 2000


class NumericalFailure(RuntimeError):
    """A solver met a non-finite value; carries the iteration index."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass
class SolverConfig:
    """Krylov solver settings.

    ``max_iterations = None`` falls back to the system dimension; problem
    configurations resolve it to the mesh node count instead.
    """

    method: str = "cg"
    rel_tolerance: float = 1e-8
    max_iterations: int | None = None
    breakdown_tolerance: float = 1e-14
    preconditioning: str = "none"
    record_iterates: bool = False

    def __post_init__(self):
        if self.method not in ("cg", "cr"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.breakdown_tolerance > 0:
            raise ValueError("breakdown_tolerance must be positive")
        if self.preconditioning not in ("none", "jacobi"):
            raise ValueError(f"unknown preconditioning {self.preconditioning!r}")


@dataclass
class SolveReport:
    """Outcome of a Krylov solve.

    ``residual_history`` has ``iterations + 1`` entries (it includes the
    initial residual norm).  When iterate recording is enabled, ``iterates``
    and ``residual_vectors`` hold the same number of snapshots; iterates are
    in original coordinates while residual vectors (like the history) belong
    to the system actually iterated, which differs from the input system
    only under preconditioning.
    """

    solution: np.ndarray
    status: str
    iterations: int
    residual_history: list[float]
    final_relative_residual: float
    iterates: list[np.ndarray] | None = None
    residual_vectors: list[np.ndarray] | None = None


@dataclass
class Preconditioner:
    """Diagonal scaling values, one positive entry per DOF."""

    diagonal: np.ndarray

    def __post_init__(self):
        d = as_vector(self.diagonal, name="preconditioner diagonal")
        if d.size and d.min() <= 0.0:
            raise ValueError("preconditioner entries must be positive")
        self.diagonal = d


def jacobi_preconditioner(
    a: SparseSymMatrix, breakdown_tolerance: float = 1e-14
) -> Preconditioner:
    """Reciprocal-diagonal preconditioner with pass-through for zero rows.

    d_i = 1 / A(i,i) where the diagonal is meaningfully positive, and
    d_i = 1 where it is numerically zero, so zero-stiffness DOFs are left
    unscaled.  A negative diagonal entry violates positive semidefiniteness
    and raises.
    """
    diag = a.diagonal()
    if diag.size and diag.min() < 0.0:
        raise ValueError("negative diagonal entry: matrix is not PSD")
    scale = diag.max() if diag.size else 0.0
    d = np.ones_like(diag)
    meaningful = diag > breakdown_tolerance * scale
    d[meaningful] = 1.0 / diag[meaningful]
    return Preconditioner(d)


def _empty_report(record: bool) -> SolveReport:
    return SolveReport(
        solution=np.zeros(0),
        status=CONVERGED,
        iterations=0,
        residual_history=[0.0],
        final_relative_residual=0.0,
        iterates=[np.zeros(0)] if record else None,
        residual_vectors=[np.zeros(0)] if record else None,
    )


def _iterate(matvec, n: int, b, x0, cfg: SolverConfig) -> SolveReport:
    """Run the plain CG/CR recurrences against an operator callable."""
    if n == 0:
        return _empty_report(cfg.record_iterates)
    if cfg.record_iterates and n > RECORD_SIZE_LIMIT:
        raise ValueError(f"iterate recording limited to n <= {RECORD_SIZE_LIMIT}")

    max_iter = cfg.max_iterations if cfg.max_iterations is not None else n
    is_cr = cfg.method == "cr"

    x = x0.copy()
    r = b - matvec(x)
    p = r.copy()
    b_norm = float(np.linalg.norm(b))
    history = [float(np.linalg.norm(r))]
    xs = [x.copy()] if cfg.record_iterates else None
    rs = [r.copy()] if cfg.record_iterates else None
    if is_cr:
        ar = matvec(r)
        ap = ar.copy()

    def relative(res: float) -> float:
        if b_norm > 0.0:
            return res / b_norm
        return 0.0 if res == 0.0 else np.inf

    def report(status: str, k: int) -> SolveReport:
        return SolveReport(
            solution=x,
            status=status,
            iterations=k,
            residual_history=history,
            final_relative_residual=relative(history[-1]),
            iterates=xs,
            residual_vectors=rs,
        )

    for k in range(max_iter):
        if history[-1] <= cfg.rel_tolerance * b_norm:
            return report(CONVERGED, k)
        if not is_cr:
            ap = matvec(p)
        denom = float(ap @ ap) if is_cr else float(p @ ap)
        p_sq = float(p @ p)
        if not np.isfinite(denom):
            raise NumericalFailure("non-finite denominator", k)
        if denom <= cfg.breakdown_tolerance * p_sq:
            return report(STAGNATED, k)
        alpha = float(r @ ap) / denom if is_cr else float(r @ p) / denom
        x = x + alpha * p
        r = r - alpha * ap
        res = float(np.linalg.norm(r))
        if not np.isfinite(res):
            raise NumericalFailure("non-finite residual", k)
        history.append(res)
        if is_cr:
            ar = matvec(r)
            beta = -float(ar @ ap) / denom
            p = r + beta * p
            ap = ar + beta * ap
        else:
            beta = -float(r @ ap) / denom
            p = r + beta * p
        if cfg.record_iterates:
            xs.append(x.copy())
            rs.append(r.copy())

    status = CONVERGED if history[-1] <= cfg.rel_tolerance * b_norm else MAX_ITERATIONS
    return report(status, max_iter)


def _solve(a: SparseSymMatrix, b, x0, cfg: SolverConfig) -> SolveReport:
    n = a.dimension
    b = as_vector(b, n, "b")
    if x0 is None:
        x0 = np.zeros(n)
    else:
        x0 = as_vector(x0, n, "x0").copy()

    if cfg.preconditioning == "jacobi" and n > 0:
        pre = jacobi_preconditioner(a, cfg.breakdown_tolerance)
        if cfg.method == "cg":
            s = np.sqrt(pre.diagonal)
            scaled = a.scaled(s).csr
            rep = _iterate(lambda v: scaled @ v, n, s * b, x0 / s, cfg)
            rep.solution = s * rep.solution
            if rep.iterates is not None:
                rep.iterates = [s * y for y in rep.iterates]
            return rep
        # CR: left application, iterate on the nonsymmetric M^-1 A
        d = pre.diagonal
        mat = a.csr
        return _iterate(lambda v: d * (mat @ v), n, d * b, x0, cfg)
    mat = a.csr
    return _iterate(lambda v: mat @ v, n, b, x0, cfg)


def cg_solve(
    a: SparseSymMatrix, b, x0=None, cfg: SolverConfig | None = None
) -> SolveReport:
    """Conjugate Gradient solve of A x = b for symmetric PSD A.

    With the default x0 = 0, a consistent right-hand side (b in the range
    of A) keeps every iterate in the range of A, which is what makes the
    method safe on singular stiffness matrices.
    """
    cfg = SolverConfig() if cfg is None else cfg
    if cfg.method != "cg":
        raise ValueError("cg_solve requires cfg.method == 'cg'")
    return _solve(a, b, x0, cfg)


def cr_solve(
    a: SparseSymMatrix, b, x0=None, cfg: SolverConfig | None = None
) -> SolveReport:
    """Conjugate Residual solve of A x = b for symmetric PSD A.

    For inconsistent b the range-space residual still decreases
    monotonically while the null-space residual stays at its initial value,
    so the solver stagnates at a least-squares solution of the consistent
    subsystem and reports ``stagnated_least_squares``.
    """
    if cfg is None:
        cfg = SolverConfig(method="cr")
    if cfg.method != "cr":
        raise ValueError("cr_solve requires cfg.method == 'cr'")
    return _solve(a, b, x0, cfg)


def solve(
    a: SparseSymMatrix, b, x0=None, cfg: SolverConfig | None = None
) -> SolveReport:
    """Dispatch to cg_solve or cr_solve based on cfg.method."""
    cfg = SolverConfig() if cfg is None else cfg
    return cg_solve(a, b, x0, cfg) if cfg.method == "cg" else cr_solve(a, b, x0, cfg)
