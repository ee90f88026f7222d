import numpy as np
import pytest

from topokry import (
    BoundaryConditions,
    DensityField,
    Material,
    Mesh,
    SolverConfig,
    apply_dirichlet,
    assemble,
    build_load,
    cg_solve,
    element_stiffness,
    scatter_solution,
    spmv,
)


def element_stiffness_oracle(mat, width, height, points=4):
    """Independent integration of B^T C B with higher-order Gauss-Legendre
    quadrature and its own shape-function derivative derivation."""
    e, nu = mat.young_modulus, mat.poisson_ratio
    c = (e / ((1 + nu) * (1 - 2 * nu))) * np.array(
        [[1 - nu, nu, 0], [nu, 1 - nu, 0], [0, 0, (1 - 2 * nu) / 2]]
    )
    gp, gw = np.polynomial.legendre.leggauss(points)
    corners = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    ke = np.zeros((8, 8))
    for xi, wx in zip(gp, gw):
        for eta, wy in zip(gp, gw):
            b = np.zeros((3, 8))
            for i, (cx, cy) in enumerate(corners):
                dndx = 0.25 * cx * (1 + cy * eta) * 2.0 / width
                dndy = 0.25 * cy * (1 + cx * xi) * 2.0 / height
                b[0, 2 * i] = dndx
                b[1, 2 * i + 1] = dndy
                b[2, 2 * i] = dndy
                b[2, 2 * i + 1] = dndx
            ke += wx * wy * (b.T @ c @ b) * (width * height / 4.0)
    return mat.thickness * ke


class TestMesh:
    def test_counts(self):
        mesh = Mesh(3, 2, 3.0, 2.0)
        assert mesh.n_elements == 6
        assert mesh.n_nodes == 12
        assert mesh.n_dofs == 24

    def test_connectivity_counterclockwise(self):
        mesh = Mesh(2, 2, 2.0, 2.0)
        # element 0 spans nodes (0,0)-(1,0)-(1,1)-(0,1): indices 0,1,4,3
        np.testing.assert_array_equal(mesh.element_nodes[0], [0, 1, 4, 3])
        assert all(len(set(row)) == 4 for row in mesh.element_nodes)

    def test_node_near_rounds_half_up(self):
        mesh = Mesh(4, 4, 4.0, 4.0)
        # 0.5 element widths snap upward
        assert mesh.node_near(0.5, 0.0) == mesh.node_index(1, 0)
        assert mesh.node_near(2.4, 2.6) == mesh.node_index(2, 3)

    def test_edge_dofs(self):
        mesh = Mesh(2, 1, 2.0, 1.0)
        left_nodes = {mesh.node_index(0, 0), mesh.node_index(0, 1)}
        expected = sorted(d for n in left_nodes for d in (2 * n, 2 * n + 1))
        np.testing.assert_array_equal(mesh.edge_dofs("left"), expected)

    def test_adjacent_elements(self):
        mesh = Mesh(3, 3, 3.0, 3.0)
        center = mesh.node_index(1, 1)
        np.testing.assert_array_equal(
            mesh.elements_adjacent_to_node(center), [0, 1, 3, 4]
        )
        corner = mesh.node_index(0, 0)
        np.testing.assert_array_equal(mesh.elements_adjacent_to_node(corner), [0])

    def test_invalid(self):
        with pytest.raises(ValueError):
            Mesh(0, 1, 1.0, 1.0)
        with pytest.raises(ValueError):
            Mesh(1, 1, -1.0, 1.0)


class TestDensityField:
    def test_bounds_enforced(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            DensityField(np.array([0.5, 1.2]))
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            DensityField(np.array([-0.1]))

    def test_volume(self):
        assert DensityField.uniform(4, 0.25).volume() == pytest.approx(1.0)


class TestBoundaryConditions:
    def test_fixed_and_loaded_disjoint(self):
        with pytest.raises(ValueError, match="both fixed and loaded"):
            BoundaryConditions(n_dofs=4, fixed_dofs=[1], point_loads=((1, -1.0),))

    def test_out_of_range(self):
        with pytest.raises(ValueError, match="range"):
            BoundaryConditions(n_dofs=4, fixed_dofs=[4])
        with pytest.raises(ValueError, match="range"):
            BoundaryConditions(n_dofs=4, point_loads=((7, 1.0),))


class TestElementStiffness:
    mat = Material(1.0, 0.3, 3.0)

    def test_rigid_body_modes(self):
        ke = element_stiffness(self.mat, 1.0, 1.0)
        tx = np.array([1, 0, 1, 0, 1, 0, 1, 0], dtype=float)
        ty = np.array([0, 1, 0, 1, 0, 1, 0, 1], dtype=float)
        # in-plane rotation u = (-y, x) at corners (0,0),(w,0),(w,h),(0,h)
        rot = np.array([0, 0, 0, 1, -1, 1, -1, 0], dtype=float)
        scale = np.abs(ke).max()
        for mode in (tx, ty, rot):
            assert np.abs(ke @ mode).max() <= 1e-12 * scale

    def test_symmetry(self):
        ke = element_stiffness(self.mat, 2.0, 0.5)
        assert np.abs(ke - ke.T).max() <= 1e-12 * np.abs(ke).max()

    def test_rank_is_five(self):
        ke = element_stiffness(self.mat, 1.0, 1.0)
        eigs = np.linalg.eigvalsh(ke)
        assert np.sum(eigs > 1e-10 * eigs.max()) == 5

    def test_matches_higher_order_quadrature_oracle(self):
        ke = element_stiffness(self.mat, 1.0, 1.0)
        oracle = element_stiffness_oracle(self.mat, 1.0, 1.0, points=4)
        assert np.abs(ke - oracle).max() <= 1e-10 * np.abs(oracle).max()

    def test_oracle_on_rectangle_with_thickness(self):
        mat = Material(2.1e5, 0.3, 3.0, thickness=10.0)
        ke = element_stiffness(mat, 0.5, 0.25)
        oracle = element_stiffness_oracle(mat, 0.5, 0.25, points=5)
        assert np.abs(ke - oracle).max() <= 1e-10 * np.abs(oracle).max()

    def test_positive_semidefinite(self):
        ke = element_stiffness(self.mat, 1.0, 2.0)
        eigs = np.linalg.eigvalsh(ke)
        assert eigs.min() >= -1e-12 * eigs.max()


class TestAssemble:
    mat = Material(1.0, 0.3, 3.0)

    def test_all_zero_densities(self):
        mesh = Mesh(2, 2, 2.0, 2.0)
        a = assemble(mesh, self.mat, DensityField.uniform(4, 0.0))
        assert a.nnz == 0
        assert a.dimension == mesh.n_dofs

    def test_single_element_identity_scaling(self):
        mesh = Mesh(1, 1, 1.0, 1.0)
        a = assemble(mesh, self.mat, DensityField.uniform(1, 1.0))
        ke = element_stiffness(self.mat, 1.0, 1.0)
        dofs = mesh.element_dofs[0]
        dense = a.to_dense()
        np.testing.assert_allclose(dense[np.ix_(dofs, dofs)], ke)

    def test_two_elements_against_dense_scatter_oracle(self):
        mesh = Mesh(2, 1, 2.0, 1.0)
        rho = DensityField(np.array([1.0, 1.0]))
        a = assemble(mesh, self.mat, rho).to_dense()
        ke = element_stiffness(self.mat, 1.0, 1.0)
        oracle = np.zeros((mesh.n_dofs, mesh.n_dofs))
        for e in range(2):
            dofs = mesh.element_dofs[e]
            oracle[np.ix_(dofs, dofs)] += ke
        assert np.abs(a - oracle).max() <= 1e-12 * np.abs(oracle).max()

    def test_density_power_scaling(self):
        mesh = Mesh(1, 1, 1.0, 1.0)
        rho = DensityField(np.array([0.5]))
        a = assemble(mesh, self.mat, rho).to_dense()
        full = assemble(mesh, self.mat, DensityField.uniform(1, 1.0)).to_dense()
        np.testing.assert_allclose(a, 0.5**3 * full, rtol=1e-14)

    def test_size_mismatch(self):
        with pytest.raises(ValueError, match="density field"):
            assemble(Mesh(2, 2, 2.0, 2.0), self.mat, DensityField.uniform(3, 0.5))

    def test_positive_semidefinite_property(self):
        rng = np.random.default_rng(29)
        mesh = Mesh(3, 3, 3.0, 3.0)
        for _ in range(10):
            rho = DensityField(rng.uniform(0.0, 1.0, mesh.n_elements))
            a = assemble(mesh, self.mat, rho)
            dense = a.to_dense()
            scale = max(np.abs(dense).max(), 1e-30)
            for _ in range(5):
                v = rng.standard_normal(mesh.n_dofs)
                assert v @ spmv(a, v) >= -1e-10 * (v @ v) * scale

    def test_monotone_in_density(self):
        rng = np.random.default_rng(31)
        mesh = Mesh(3, 2, 3.0, 2.0)
        lo = rng.uniform(0.0, 0.7, mesh.n_elements)
        hi = np.minimum(lo + rng.uniform(0.0, 0.3, mesh.n_elements), 1.0)
        a_lo = assemble(mesh, self.mat, DensityField(lo))
        a_hi = assemble(mesh, self.mat, DensityField(hi))
        scale = np.abs(a_hi.to_dense()).max()
        for _ in range(10):
            v = rng.standard_normal(mesh.n_dofs)
            assert v @ spmv(a_hi, v) >= v @ spmv(a_lo, v) - 1e-10 * (v @ v) * scale

    def test_void_node_rows_vanish(self):
        # void the right column of a 2x1 mesh: the two right-edge nodes
        # touch only the void element, so their DOF rows must be empty
        mesh = Mesh(2, 1, 2.0, 1.0)
        rho = DensityField(np.array([1.0, 0.0]))
        a = assemble(mesh, self.mat, rho)
        void_nodes = [mesh.node_index(2, 0), mesh.node_index(2, 1)]
        void_dofs = {d for n in void_nodes for d in (2 * n, 2 * n + 1)}
        assert void_dofs == set(a.zero_rows().tolist())

    def test_full_density_reduced_system_is_definite(self):
        mesh = Mesh(4, 4, 4.0, 4.0)
        a = assemble(mesh, self.mat, DensityField.uniform(mesh.n_elements, 1.0))
        bc = BoundaryConditions(
            n_dofs=mesh.n_dofs,
            fixed_dofs=mesh.edge_dofs("left"),
            point_loads=((2 * mesh.node_near(4.0, 2.0) + 1, -1.0),),
        )
        b = build_load(mesh, bc)
        a_red, b_red, _ = apply_dirichlet(a, b, bc)
        rep = cg_solve(
            a_red, b_red, None, SolverConfig(rel_tolerance=1e-8, max_iterations=2000)
        )
        assert rep.status == "converged"
        assert rep.final_relative_residual <= 1e-8


class TestApplyDirichlet:
    def test_index_deletion(self):
        a = np.array([[2.0, 1.0, 0.5], [1.0, 3.0, 1.5], [0.5, 1.5, 4.0]])
        from topokry import SparseSymMatrix

        bc = BoundaryConditions(n_dofs=3, fixed_dofs=[1])
        reduced, b_red, dof_map = apply_dirichlet(
            SparseSymMatrix.from_dense(a), np.array([1.0, 2.0, 3.0]), bc
        )
        np.testing.assert_array_equal(dof_map, [0, 2])
        np.testing.assert_allclose(reduced.to_dense(), a[np.ix_([0, 2], [0, 2])])
        np.testing.assert_array_equal(b_red, [1.0, 3.0])

    def test_fix_everything_gives_empty_system(self):
        from topokry import SparseSymMatrix

        bc = BoundaryConditions(n_dofs=2, fixed_dofs=[0, 1])
        reduced, b_red, dof_map = apply_dirichlet(
            SparseSymMatrix.identity(2), np.array([1.0, 2.0]), bc
        )
        assert reduced.dimension == 0
        assert b_red.size == 0
        assert dof_map.size == 0
        rep = cg_solve(reduced, b_red, None, SolverConfig())
        assert rep.status == "converged" and rep.solution.size == 0

    def test_scattered_solution_satisfies_full_equilibrium(self):
        mesh = Mesh(3, 3, 3.0, 3.0)
        mat = Material(1.0, 0.3, 3.0)
        a = assemble(mesh, mat, DensityField.uniform(mesh.n_elements, 1.0))
        bc = BoundaryConditions(
            n_dofs=mesh.n_dofs,
            fixed_dofs=mesh.edge_dofs("bottom"),
            point_loads=((2 * mesh.node_near(3.0, 3.0), 1.0),),
        )
        b = build_load(mesh, bc)
        a_red, b_red, dof_map = apply_dirichlet(a, b, bc)
        rep = cg_solve(
            a_red, b_red, None, SolverConfig(rel_tolerance=1e-12, max_iterations=5000)
        )
        x_full = scatter_solution(rep.solution, dof_map, mesh.n_dofs)
        residual = b - spmv(a, x_full)
        free = bc.free_dofs()
        assert np.abs(residual[free]).max() <= 1e-10 * max(np.abs(b).max(), 1e-30)


class TestBuildLoad:
    def test_no_loads(self):
        mesh = Mesh(2, 2, 2.0, 2.0)
        bc = BoundaryConditions(n_dofs=mesh.n_dofs)
        np.testing.assert_array_equal(build_load(mesh, bc), np.zeros(mesh.n_dofs))

    def test_single_load(self):
        mesh = Mesh(2, 2, 2.0, 2.0)
        bc = BoundaryConditions(n_dofs=mesh.n_dofs, point_loads=((5, -100.0),))
        b = build_load(mesh, bc)
        assert b[5] == -100.0
        assert np.count_nonzero(b) == 1

    def test_loads_accumulate(self):
        mesh = Mesh(2, 2, 2.0, 2.0)
        bc = BoundaryConditions(
            n_dofs=mesh.n_dofs, point_loads=((3, 2.0), (3, 5.0))
        )
        assert build_load(mesh, bc)[3] == 7.0
