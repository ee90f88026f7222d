"""Outer topology-optimization loop: compliance objective, density
sensitivities, OC and CONLIN multiplicative updates with a bisected volume
multiplier, thresholding of near-void densities, and convergence control.

Both update rules share the same shape: a candidate density
``rho' = (|sens| / |lambda|)^eta * rho`` clamped to the move-limit box
intersected with [0, 1], with eta = 0.85 for OC (lambda < 0) and eta = 1/2
for CONLIN (lambda > 0).  The multiplier magnitude is found by bisection in
log space so that the updated volume meets the budget from the feasible
side; if even the maximal move keeps the volume under budget the constraint
is slack and the multiplier pins at its bracket edge.

Densities below the threshold cutoff are forced to exactly zero.  Zero
stays zero under the multiplicative rules, elements lose their stiffness
entirely, and the equilibrium system is left singular on purpose: the
Krylov solvers handle it without any density floor.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

from .fem import (
    DensityField,
    Material,
    Mesh,
    apply_dirichlet,
    assemble,
    build_load,
    element_stiffness,
    scatter_solution,
)
from .krylov import solve

if TYPE_CHECKING:  # pragma: no cover
    from .problem import ProblemSpec

MULTIPLIER_BRACKET = (1e-12, 1e12)


class InfeasibleConstraintError(RuntimeError):
    """The volume constraint cannot be met inside the multiplier bracket."""


@dataclass
class OptimizerConfig:
    """Settings for the density-update loop."""

    volume_fraction: float
    update_rule: str = "oc"
    oc_exponent: float = 0.85
    threshold_cutoff: float = 1e-3
    lagrangian_tolerance: float = 1e-10
    max_outer_iterations: int = 100
    move_limit: float = 0.2
    bisection_tolerance: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.volume_fraction <= 1.0:
            raise ValueError("volume_fraction must lie in (0, 1]")
        if self.update_rule not in ("oc", "conlin"):
            raise ValueError(f"unknown update rule {self.update_rule!r}")
        if not 0.0 < self.oc_exponent <= 1.0:
            raise ValueError("oc_exponent must lie in (0, 1]")
        if not 0.0 <= self.threshold_cutoff < 1.0:
            raise ValueError("threshold_cutoff must lie in [0, 1)")
        if not self.lagrangian_tolerance > 0:
            raise ValueError("lagrangian_tolerance must be positive")
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be >= 1")
        if not self.move_limit > 0:
            raise ValueError("move_limit must be positive")
        if not self.bisection_tolerance > 0:
            raise ValueError("bisection_tolerance must be positive")


@dataclass
class OptimizationHistory:
    """Per-outer-iteration record of an optimization run."""

    compliance: list[float] = field(default_factory=list)
    lagrange_multiplier: list[float] = field(default_factory=list)
    inner_iterations: list[int] = field(default_factory=list)
    solver_status: list[str] = field(default_factory=list)
    volume: list[float] = field(default_factory=list)
    densities: list[np.ndarray] = field(default_factory=list)
    status: str = "max_iterations"

    @property
    def outer_iterations(self) -> int:
        return len(self.compliance)

    @property
    def total_inner_iterations(self) -> int:
        return int(sum(self.inner_iterations))

    def cumulative_inner_iterations(self) -> list[int]:
        return list(np.cumsum(self.inner_iterations, dtype=np.int64))


def compliance(x, b) -> float:
    """Strain energy (1/2) x.b, which equals (1/2) x^T A x at equilibrium."""
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    if x.shape != b.shape:
        raise ValueError("displacement and load vectors differ in shape")
    return 0.5 * float(x @ b)


def sensitivity(mesh: Mesh, mat: Material, rho: DensityField, x) -> np.ndarray:
    """Compliance derivative per element: -p * rho^(p-1) * x_e^T D x_e.

    Evaluated through the unpenalized element stiffness so zero-density
    elements get exactly zero without any division; always <= 0.
    """
    x = np.asarray(x, dtype=float)
    if x.size != mesh.n_dofs:
        raise ValueError("displacement vector must cover all DOFs")
    if rho.n_elements != mesh.n_elements:
        raise ValueError("density field does not match the mesh")
    ke = element_stiffness(mat, mesh.elem_width, mesh.elem_height)
    ue = x[mesh.element_dofs]
    quad = np.einsum("ei,ij,ej->e", ue, ke, ue)
    # the element form is PSD; negative values are roundoff
    quad = np.maximum(quad, 0.0)
    values = rho.values
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(values > 0.0, values ** (mat.penal - 1.0), 0.0)
    return -mat.penal * factor * quad


def threshold(rho: DensityField, cutoff: float) -> DensityField:
    """Force densities strictly below the cutoff to exactly zero."""
    if not 0.0 <= cutoff < 1.0:
        raise ValueError("cutoff must lie in [0, 1)")
    return DensityField(np.where(rho.values < cutoff, 0.0, rho.values))


def _clamped_candidate(
    values: np.ndarray, sens: np.ndarray, mu: float, exponent: float, move: float
) -> np.ndarray:
    """Raw multiplicative update at multiplier magnitude mu, box-clamped."""
    base = -sens / mu
    factor = base**exponent
    lower = np.maximum(0.0, values - move)
    upper = np.minimum(1.0, values + move)
    return np.clip(factor * values, lower, upper)


def _update(
    rho: DensityField, sens, cfg: OptimizerConfig, exponent: float, sign: float
) -> tuple[DensityField, float]:
    sens = np.asarray(sens, dtype=float)
    if sens.shape != rho.values.shape:
        raise ValueError("sensitivity shape does not match densities")
    if sens.size and sens.max() > 0.0:
        raise ValueError("sensitivities must be <= 0")
    target = cfg.volume_fraction * rho.n_elements
    tol = cfg.bisection_tolerance * target

    def candidate(mu: float) -> np.ndarray:
        return _clamped_candidate(rho.values, sens, mu, exponent, cfg.move_limit)

    lo, hi = MULTIPLIER_BRACKET
    vol_lo = candidate(lo).sum()
    if vol_lo <= target:
        # constraint slack: even the maximal move stays inside the budget
        return DensityField(candidate(lo)), sign * lo
    if candidate(hi).sum() > target:
        raise InfeasibleConstraintError(
            "volume target unreachable inside the multiplier bracket"
        )
    # volume decreases monotonically in mu; bisect in log space and accept
    # from the feasible (under-budget) side so the constraint is never
    # overshot
    mu_feasible = hi
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        vol = candidate(mid).sum()
        if vol > target:
            lo = mid
        else:
            hi = mid
            mu_feasible = mid
            if target - vol <= tol:
                break
        if hi / lo < 1.0 + 1e-15:
            break
    return DensityField(candidate(mu_feasible)), sign * mu_feasible


def oc_update(
    rho: DensityField, sens, cfg: OptimizerConfig
) -> tuple[DensityField, float]:
    """Optimality-criteria update rho' = (sens/lambda)^eta * rho, lambda < 0."""
    return _update(rho, sens, cfg, cfg.oc_exponent, sign=-1.0)


def conlin_update(
    rho: DensityField, sens, cfg: OptimizerConfig
) -> tuple[DensityField, float]:
    """Convex-linearization update rho' = (-sens/lambda)^(1/2) * rho, lambda > 0."""
    return _update(rho, sens, cfg, 0.5, sign=1.0)


def optimize(spec: "ProblemSpec") -> OptimizationHistory:
    """Run the full optimization loop for a problem specification.

    Per outer iteration: assemble the SIMP-scaled stiffness, eliminate
    supports, solve equilibrium with the configured Krylov method, evaluate
    compliance and sensitivities, update densities, and threshold.  Stops
    when the Lagrangian change drops below tolerance or the iteration cap is
    reached.  Stagnating or iteration-capped solves (expected for singular
    or ill-conditioned states) are recorded and the loop continues; genuine
    numerical failures propagate.

    Each solve warm-starts from the previous displacement field, so
    successive solves keep refining the same equilibrium as the design
    settles.  Degrees of freedom that fall inside fully-void regions keep
    the value they last had; they carry no load and zero-density elements
    have zero sensitivity, so those stale entries influence nothing.
    """
    mesh = spec.build_mesh()
    bc = spec.build_boundary_conditions(mesh)
    mat = spec.material
    opt = spec.optimizer
    solver_cfg = spec.solver
    if solver_cfg.max_iterations is None:
        solver_cfg = replace(solver_cfg, max_iterations=mesh.n_nodes)

    rho = DensityField.uniform(mesh.n_elements, opt.volume_fraction)
    target = opt.volume_fraction * mesh.n_elements
    b_full = build_load(mesh, bc)
    update_rule = oc_update if opt.update_rule == "oc" else conlin_update

    history = OptimizationHistory()
    lagrangian_prev = None
    x_full = np.zeros(mesh.n_dofs)
    for _ in range(opt.max_outer_iterations):
        a_full = assemble(mesh, mat, rho)
        a_red, b_red, dof_map = apply_dirichlet(a_full, b_full, bc)
        report = solve(a_red, b_red, x_full[dof_map], solver_cfg)
        x_full = scatter_solution(report.solution, dof_map, mesh.n_dofs)

        c = compliance(x_full, b_full)
        sens = sensitivity(mesh, mat, rho, x_full)
        rho_new, lam = update_rule(rho, sens, opt)
        rho_new = threshold(rho_new, opt.threshold_cutoff)

        history.compliance.append(c)
        history.lagrange_multiplier.append(lam)
        history.inner_iterations.append(report.iterations)
        history.solver_status.append(report.status)
        history.volume.append(rho_new.volume())
        history.densities.append(rho_new.values.copy())

        lagrangian = c + lam * (rho_new.volume() - target)
        if (
            lagrangian_prev is not None
            and abs(lagrangian - lagrangian_prev) < opt.lagrangian_tolerance
        ):
            history.status = "converged"
            rho = rho_new
            break
        lagrangian_prev = lagrangian
        rho = rho_new
    else:
        history.status = "max_iterations"
    return history
