"""Problem configuration: a strict flat key-value format with dotted
sections, validated into a :class:`ProblemSpec`.

Example::

    domain.width = 10
    domain.height = 20
    mesh.nx = 20
    mesh.ny = 40
    material.young_modulus = 2.1e5
    material.poisson_ratio = 0.3
    supports.edges = left
    loads.0.x = 10
    loads.0.y = 10
    loads.0.fy = -105

Unknown keys are rejected.  Every omitted key takes its documented default;
``dump_problem`` writes a spec back out with all defaults materialized, and
reloading that text reproduces the spec exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fem import BoundaryConditions, Material, Mesh
from .krylov import SolverConfig
from .optimizer import OptimizerConfig

EDGES = ("left", "right", "top", "bottom")


class ConfigError(ValueError):
    """Configuration file could not be parsed or validated."""


@dataclass(frozen=True)
class PointLoad:
    """Concentrated force at a domain position, snapped to the nearest node."""

    x: float
    y: float
    fx: float = 0.0
    fy: float = 0.0


@dataclass
class ProblemSpec:
    """Complete description of one optimization run."""

    domain_width: float
    domain_height: float
    nx: int
    ny: int
    material: Material
    support_edges: tuple[str, ...] = ()
    support_nodes: tuple[tuple[float, float], ...] = ()
    loads: tuple[PointLoad, ...] = ()
    solver: SolverConfig = field(default_factory=SolverConfig)
    optimizer: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(volume_fraction=0.375)
    )
    output_dir: str | None = None
    seed: int | None = None

    def __post_init__(self):
        if not (self.domain_width > 0 and self.domain_height > 0):
            raise ConfigError("domain dimensions must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("mesh.nx and mesh.ny must be >= 1")
        for edge in self.support_edges:
            if edge not in EDGES:
                raise ConfigError(f"unknown support edge {edge!r}")
        for i, (x, y) in enumerate(self.support_nodes):
            if not (0 <= x <= self.domain_width and 0 <= y <= self.domain_height):
                raise ConfigError(f"supports.nodes[{i}] lies outside the domain")
        for i, load in enumerate(self.loads):
            if not (
                0 <= load.x <= self.domain_width
                and 0 <= load.y <= self.domain_height
            ):
                raise ConfigError(f"loads[{i}] lies outside the domain")

    def build_mesh(self) -> Mesh:
        return Mesh(self.nx, self.ny, self.domain_width, self.domain_height)

    def build_boundary_conditions(self, mesh: Mesh) -> BoundaryConditions:
        fixed = [mesh.edge_dofs(edge) for edge in self.support_edges]
        for x, y in self.support_nodes:
            fixed.append(np.asarray(mesh.node_dofs(mesh.node_near(x, y))))
        fixed_dofs = (
            np.unique(np.concatenate(fixed)) if fixed else np.zeros(0, np.int64)
        )
        point_loads = []
        for load in self.loads:
            dx, dy = mesh.node_dofs(mesh.node_near(load.x, load.y))
            if load.fx != 0.0:
                point_loads.append((dx, load.fx))
            if load.fy != 0.0:
                point_loads.append((dy, load.fy))
        return BoundaryConditions(
            n_dofs=mesh.n_dofs,
            fixed_dofs=fixed_dofs,
            point_loads=tuple(point_loads),
        )


def _parse_scalar(kind: str, text: str, key: str, line_no: int):
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"line {line_no}: {key} expects a {kind}, got {text!r}")
    return text


# key -> (kind, destination); loads.* handled separately
_SCHEMA = {
    "domain.width": "float",
    "domain.height": "float",
    "mesh.nx": "int",
    "mesh.ny": "int",
    "material.young_modulus": "float",
    "material.poisson_ratio": "float",
    "material.penal": "float",
    "material.thickness": "float",
    "supports.edges": "str",
    "supports.nodes": "str",
    "solver.method": "str",
    "solver.rel_tolerance": "float",
    "solver.max_iterations": "int",
    "solver.breakdown_tolerance": "float",
    "solver.preconditioning": "str",
    "optimizer.update_rule": "str",
    "optimizer.volume_fraction": "float",
    "optimizer.oc_exponent": "float",
    "optimizer.threshold_cutoff": "float",
    "optimizer.lagrangian_tolerance": "float",
    "optimizer.max_outer_iterations": "int",
    "optimizer.move_limit": "float",
    "optimizer.bisection_tolerance": "float",
    "output.directory": "str",
    "seed": "int",
}
_LOAD_FIELDS = ("x", "y", "fx", "fy")
_REQUIRED = (
    "mesh.nx",
    "mesh.ny",
    "material.young_modulus",
    "material.poisson_ratio",
)


def _parse_lines(text: str) -> dict[str, tuple[str, int]]:
    entries: dict[str, tuple[str, int]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {line_no}: empty key or value")
        if key in entries:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        entries[key] = (value, line_no)
    return entries


def _pop_load_keys(entries) -> tuple[PointLoad, ...]:
    indexed: dict[int, dict[str, float]] = {}
    for key in [k for k in entries if k.startswith("loads.")]:
        parts = key.split(".")
        value, line_no = entries.pop(key)
        if len(parts) != 3 or parts[2] not in _LOAD_FIELDS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        try:
            index = int(parts[1])
        except ValueError:
            raise ConfigError(f"line {line_no}: bad load index in {key!r}")
        indexed.setdefault(index, {})[parts[2]] = _parse_scalar(
            "float", value, key, line_no
        )
    loads = []
    for i in sorted(indexed):
        entry = indexed[i]
        if "x" not in entry or "y" not in entry:
            raise ConfigError(f"loads[{i}] needs both loads.{i}.x and loads.{i}.y")
        loads.append(
            PointLoad(
                x=entry["x"],
                y=entry["y"],
                fx=entry.get("fx", 0.0),
                fy=entry.get("fy", 0.0),
            )
        )
    return tuple(loads)


def _parse_node_list(text: str) -> tuple[tuple[float, float], ...]:
    nodes = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ConfigError(f"supports.nodes entry {chunk!r} is not 'x, y'")
        nodes.append((float(parts[0]), float(parts[1])))
    return tuple(nodes)


def loads_problem_text(text: str) -> ProblemSpec:
    """Parse configuration text into a validated ProblemSpec."""
    entries = _parse_lines(text)
    loads = _pop_load_keys(entries)

    values: dict[str, object] = {}
    for key, (value, line_no) in entries.items():
        if key not in _SCHEMA:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        values[key] = _parse_scalar(_SCHEMA[key], value, key, line_no)
    for key in _REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")

    nx = values["mesh.nx"]
    ny = values["mesh.ny"]
    try:
        material = Material(
            young_modulus=values["material.young_modulus"],
            poisson_ratio=values["material.poisson_ratio"],
            penal=values.get("material.penal", 3.0),
            thickness=values.get("material.thickness", 1.0),
        )
        solver = SolverConfig(
            method=values.get("solver.method", "cg"),
            rel_tolerance=values.get("solver.rel_tolerance", 1e-8),
            max_iterations=values.get(
                "solver.max_iterations", (nx + 1) * (ny + 1)
            ),
            breakdown_tolerance=values.get("solver.breakdown_tolerance", 1e-14),
            preconditioning=values.get("solver.preconditioning", "jacobi"),
        )
        optimizer = OptimizerConfig(
            volume_fraction=values.get("optimizer.volume_fraction", 0.375),
            update_rule=values.get("optimizer.update_rule", "oc"),
            oc_exponent=values.get("optimizer.oc_exponent", 0.85),
            threshold_cutoff=values.get("optimizer.threshold_cutoff", 1e-3),
            lagrangian_tolerance=values.get("optimizer.lagrangian_tolerance", 1e-10),
            max_outer_iterations=values.get("optimizer.max_outer_iterations", 100),
            move_limit=values.get("optimizer.move_limit", 0.2),
            bisection_tolerance=values.get("optimizer.bisection_tolerance", 1e-8),
        )
        edges = tuple(
            part.strip()
            for part in values.get("supports.edges", "").split(",")
            if part.strip()
        )
        spec = ProblemSpec(
            domain_width=values.get("domain.width", float(nx)),
            domain_height=values.get("domain.height", float(ny)),
            nx=nx,
            ny=ny,
            material=material,
            support_edges=edges,
            support_nodes=_parse_node_list(values.get("supports.nodes", "")),
            loads=loads,
            solver=solver,
            optimizer=optimizer,
            output_dir=values.get("output.directory"),
            seed=values.get("seed"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def load_problem(path) -> ProblemSpec:
    """Load and validate a problem configuration file."""
    with open(path, "r", encoding="utf-8") as handle:
        return loads_problem_text(handle.read())


def dump_problem(spec: ProblemSpec) -> str:
    """Serialize a spec with every default materialized."""
    lines = [
        f"domain.width = {spec.domain_width!r}",
        f"domain.height = {spec.domain_height!r}",
        f"mesh.nx = {spec.nx}",
        f"mesh.ny = {spec.ny}",
        f"material.young_modulus = {spec.material.young_modulus!r}",
        f"material.poisson_ratio = {spec.material.poisson_ratio!r}",
        f"material.penal = {spec.material.penal!r}",
        f"material.thickness = {spec.material.thickness!r}",
    ]
    if spec.support_edges:
        lines.append("supports.edges = " + ", ".join(spec.support_edges))
    if spec.support_nodes:
        lines.append(
            "supports.nodes = "
            + "; ".join(f"{x!r}, {y!r}" for x, y in spec.support_nodes)
        )
    for i, load in enumerate(spec.loads):
        lines.append(f"loads.{i}.x = {load.x!r}")
        lines.append(f"loads.{i}.y = {load.y!r}")
        lines.append(f"loads.{i}.fx = {load.fx!r}")
        lines.append(f"loads.{i}.fy = {load.fy!r}")
    solver = spec.solver
    max_iter = solver.max_iterations
    if max_iter is None:
        max_iter = (spec.nx + 1) * (spec.ny + 1)
    lines += [
        f"solver.method = {solver.method}",
        f"solver.rel_tolerance = {solver.rel_tolerance!r}",
        f"solver.max_iterations = {max_iter}",
        f"solver.breakdown_tolerance = {solver.breakdown_tolerance!r}",
        f"solver.preconditioning = {solver.preconditioning}",
    ]
    opt = spec.optimizer
    lines += [
        f"optimizer.update_rule = {opt.update_rule}",
        f"optimizer.volume_fraction = {opt.volume_fraction!r}",
        f"optimizer.oc_exponent = {opt.oc_exponent!r}",
        f"optimizer.threshold_cutoff = {opt.threshold_cutoff!r}",
        f"optimizer.lagrangian_tolerance = {opt.lagrangian_tolerance!r}",
        f"optimizer.max_outer_iterations = {opt.max_outer_iterations}",
        f"optimizer.move_limit = {opt.move_limit!r}",
        f"optimizer.bisection_tolerance = {opt.bisection_tolerance!r}",
    ]
    if spec.output_dir is not None:
        lines.append(f"output.directory = {spec.output_dir}")
    if spec.seed is not None:
        lines.append(f"seed = {spec.seed}")
    return "\n".join(lines) + "\n"
