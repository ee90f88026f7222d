"""Topology optimization with Krylov solvers built for the singular
stiffness matrices that zero-density elements create."""

from .fem import (
    BoundaryConditions,
    DensityField,
    Material,
    Mesh,
    apply_dirichlet,
    assemble,
    build_load,
    element_stiffness,
    scatter_solution,
)
from .krylov import (
    NumericalFailure,
    Preconditioner,
    SolveReport,
    SolverConfig,
    cg_solve,
    cr_solve,
    jacobi_preconditioner,
    solve,
)
from .linalg import (
    SingularMatrixError,
    SparseSymMatrix,
    dense_solve,
    pseudo_solve,
    spmv,
)
from .optimizer import (
    InfeasibleConstraintError,
    OptimizationHistory,
    OptimizerConfig,
    compliance,
    conlin_update,
    oc_update,
    optimize,
    sensitivity,
    threshold,
)
from .problem import ConfigError, PointLoad, ProblemSpec, dump_problem, load_problem
from .singular_lab import (
    ComponentTraces,
    DecompositionError,
    RangeDecomposition,
    cr_bound_check,
    decompose_history,
    range_basis,
    standard_form,
)

__all__ = [
    "BoundaryConditions",
    "ComponentTraces",
    "ConfigError",
    "DecompositionError",
    "DensityField",
    "InfeasibleConstraintError",
    "Material",
    "Mesh",
    "NumericalFailure",
    "OptimizationHistory",
    "OptimizerConfig",
    "PointLoad",
    "Preconditioner",
    "ProblemSpec",
    "RangeDecomposition",
    "SingularMatrixError",
    "SolveReport",
    "SolverConfig",
    "SparseSymMatrix",
    "apply_dirichlet",
    "assemble",
    "build_load",
    "cg_solve",
    "compliance",
    "conlin_update",
    "cr_bound_check",
    "cr_solve",
    "decompose_history",
    "dense_solve",
    "dump_problem",
    "element_stiffness",
    "jacobi_preconditioner",
    "load_problem",
    "oc_update",
    "optimize",
    "pseudo_solve",
    "range_basis",
    "scatter_solution",
    "sensitivity",
    "solve",
    "spmv",
    "standard_form",
    "threshold",
]
