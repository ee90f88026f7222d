import numpy as np
import pytest

from topokry import SingularMatrixError, SparseSymMatrix, dense_solve, pseudo_solve, spmv
from util import random_sparse_symmetric, random_spd


class TestSparseSymMatrix:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            SparseSymMatrix.from_dense([[1.0, 2.0], [0.0, 1.0]])

    def test_rejects_nonsquare(self):
        import scipy.sparse as sp

        with pytest.raises(ValueError, match="square"):
            SparseSymMatrix(sp.csr_matrix((2, 3)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            SparseSymMatrix.from_dense([[np.nan, 0.0], [0.0, 1.0]])

    def test_triplets_sum_duplicates(self):
        a = SparseSymMatrix.from_triplets(
            2, [0, 0, 1, 0, 1], [1, 1, 0, 0, 1], [1.0, 2.0, 3.0, 5.0, 7.0]
        )
        np.testing.assert_allclose(a.to_dense(), [[5.0, 3.0], [3.0, 7.0]])

    def test_triplet_index_out_of_range(self):
        with pytest.raises(ValueError, match="range"):
            SparseSymMatrix.from_triplets(2, [0, 2], [0, 2], [1.0, 1.0])

    def test_scaled_preserves_symmetry_exactly(self):
        rng = np.random.default_rng(7)
        a, _ = random_sparse_symmetric(rng, 12)
        s = rng.uniform(0.1, 3.0, size=12)
        scaled = a.scaled(s).to_dense()
        assert np.array_equal(scaled, scaled.T)

    def test_zero_rows(self):
        a = SparseSymMatrix.from_dense(
            [[1.0, 0.0, 2.0], [0.0, 0.0, 0.0], [2.0, 0.0, 1.0]]
        )
        np.testing.assert_array_equal(a.zero_rows(), [1])


class TestSpmv:
    def test_identity(self):
        a = SparseSymMatrix.identity(3)
        np.testing.assert_array_equal(spmv(a, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_zero_matrix(self):
        a = SparseSymMatrix.zeros(3)
        np.testing.assert_array_equal(spmv(a, [1.0, 2.0, 3.0]), [0.0, 0.0, 0.0])

    def test_matches_dense_multiply_oracle(self):
        rng = np.random.default_rng(11)
        a, dense = random_sparse_symmetric(rng, 10)
        x = rng.standard_normal(10)
        # oracle: explicit row-by-row dense multiplication
        expected = np.array([dense[i] @ x for i in range(10)])
        got = spmv(a, x)
        assert np.linalg.norm(got - expected) <= 1e-14 * max(np.linalg.norm(expected), 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            spmv(SparseSymMatrix.identity(3), [1.0, 2.0])

    def test_linearity_property(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            n = int(rng.integers(2, 15))
            a, _ = random_sparse_symmetric(rng, n)
            x, y = rng.standard_normal(n), rng.standard_normal(n)
            al, be = rng.standard_normal(2)
            lhs = spmv(a, al * x + be * y)
            rhs = al * spmv(a, x) + be * spmv(a, y)
            scale = max(np.linalg.norm(rhs), 1e-30)
            assert np.linalg.norm(lhs - rhs) <= 1e-12 * scale

    def test_self_adjoint_property(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(2, 15))
            a, _ = random_sparse_symmetric(rng, n)
            x, y = rng.standard_normal(n), rng.standard_normal(n)
            lhs = x @ spmv(a, y)
            rhs = spmv(a, x) @ y
            scale = max(abs(lhs), abs(rhs), 1e-30)
            assert abs(lhs - rhs) <= 1e-12 * scale


class TestDenseSolve:
    def test_diagonal(self):
        x = dense_solve(np.diag([1.0, 2.0, 4.0]), [1.0, 2.0, 4.0])
        np.testing.assert_allclose(x, [1.0, 1.0, 1.0], atol=1e-14)

    def test_symmetric_2x2(self):
        x = dense_solve([[2.0, 1.0], [1.0, 2.0]], [3.0, 3.0])
        np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-14)

    def test_random_spd_residual(self):
        rng = np.random.default_rng(19)
        a = random_spd(rng, 8)
        b = rng.standard_normal(8)
        x = dense_solve(a, b)
        assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)

    def test_singular_raises(self):
        with pytest.raises(SingularMatrixError):
            dense_solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])

    def test_zero_matrix_raises(self):
        with pytest.raises(SingularMatrixError):
            dense_solve(np.zeros((3, 3)), np.ones(3))

    def test_needs_pivoting(self):
        # zero leading pivot: elimination only works with row exchange
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(dense_solve(a, [2.0, 3.0]), [3.0, 2.0])

    def test_size_limit(self):
        with pytest.raises(ValueError, match="2000"):
            dense_solve(np.eye(2001), np.ones(2001))


class TestPseudoSolve:
    def test_regular_block_untouched(self):
        np.testing.assert_allclose(
            pseudo_solve(np.diag([1.0, 0.0]), [2.0, 0.0]), [2.0, 0.0], atol=1e-12
        )

    def test_null_component_annihilated(self):
        np.testing.assert_allclose(
            pseudo_solve(np.diag([1.0, 0.0]), [2.0, 5.0]), [2.0, 0.0], atol=1e-12
        )

    def test_diagonal_pseudo_inverse(self):
        np.testing.assert_allclose(
            pseudo_solve(np.diag([2.0, 3.0, 0.0]), [4.0, 9.0, 7.0]),
            [2.0, 3.0, 0.0],
            atol=1e-12,
        )

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            pseudo_solve([[1.0, 2.0], [0.0, 1.0]], [1.0, 1.0])

    def test_zero_matrix_maps_to_zero(self):
        np.testing.assert_array_equal(
            pseudo_solve(np.zeros((3, 3)), [1.0, 2.0, 3.0]), np.zeros(3)
        )

    def test_result_in_range_property(self):
        rng = np.random.default_rng(23)
        for _ in range(15):
            n = int(rng.integers(3, 12))
            nullity = int(rng.integers(1, n))
            from util import random_singular_psd

            a, q1, _ = random_singular_psd(rng, n, nullity)
            b = rng.standard_normal(n)
            x = pseudo_solve(a, b)
            b_range = q1 @ (q1.T @ b)
            assert np.linalg.norm(a @ x - b_range) <= 1e-9 * max(np.linalg.norm(b), 1e-30)
