import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tempomc.tensor_ops import (DecompositionError, ShapeMismatchError,
                                contract, eig_general, svd_truncated)


def triple_loop_matmul(a, b):
    n, m = a.shape[0], b.shape[1]
    k = a.shape[1]
    out = np.zeros((n, m), dtype=complex)
    for i in range(n):
        for j in range(m):
            for l in range(k):
                out[i, j] += a[i, l] * b[l, j]
    return out


class TestContract:
    def test_identity_on_vector(self):
        v = np.array([1.0, 2.0])
        out = contract(np.eye(2), v, [(1, 0)])
        assert np.allclose(out, [1.0, 2.0])

    def test_shape_law(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((2, 3, 4))
        b = rng.standard_normal((4, 5))
        assert contract(a, b, [(2, 0)]).shape == (2, 3, 5)

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        assert np.allclose(contract(a, b, [(1, 0)]), triple_loop_matmul(a, b),
                           atol=1e-13)

    def test_extent_mismatch_raises(self):
        with pytest.raises(ShapeMismatchError):
            contract(np.zeros((2, 3)), np.zeros((4, 2)), [(1, 0)])

    def test_axis_out_of_range(self):
        with pytest.raises(IndexError):
            contract(np.zeros((2, 2)), np.zeros((2, 2)), [(5, 0)])

    def test_multi_pair(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((2, 3, 4))
        b = rng.standard_normal((3, 4, 5))
        out = contract(a, b, [(1, 0), (2, 1)])
        ref = np.einsum("ijk,jkl->il", a, b)
        assert np.allclose(out, ref, atol=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 5), st.integers(2, 5), st.integers(2, 5),
           st.integers(0, 2 ** 31 - 1))
    def test_bilinearity(self, n, m, k, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
        b = rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))
        alpha = complex(rng.standard_normal(), rng.standard_normal())
        left = contract(alpha * a, b, [(1, 0)])
        right = alpha * contract(a, b, [(1, 0)])
        assert np.allclose(left, right, atol=1e-12 * (1 + abs(alpha)))


class TestSvdTruncated:
    def test_identity_full_rank(self):
        res = svd_truncated(np.eye(4), max_rank=4)
        assert np.allclose(res.singular_values, np.ones(4))
        assert res.discarded_weight == 0.0

    def test_diag_truncation_closed_form(self):
        res = svd_truncated(np.diag([3.0, 2.0, 1.0, 0.0]), max_rank=2)
        assert np.allclose(res.singular_values, [3.0, 2.0])
        assert np.isclose(res.discarded_weight, 1.0 / 14.0)

    def test_reconstruction_full_rank(self):
        rng = np.random.default_rng(3)
        m = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
        res = svd_truncated(m, max_rank=6)
        rec = res.u @ np.diag(res.singular_values) @ res.v_dagger
        assert np.linalg.norm(rec - m) <= 1e-10 * np.linalg.norm(m)

    def test_isometry(self):
        rng = np.random.default_rng(4)
        m = rng.standard_normal((5, 7)) + 1j * rng.standard_normal((5, 7))
        res = svd_truncated(m, max_rank=3)
        assert np.allclose(res.u.conj().T @ res.u, np.eye(3), atol=1e-12)
        assert np.allclose(res.v_dagger @ res.v_dagger.conj().T, np.eye(3), atol=1e-12)

    def test_descending_order(self):
        rng = np.random.default_rng(5)
        m = rng.standard_normal((8, 8))
        s = svd_truncated(m, max_rank=8).singular_values
        assert np.all(np.diff(s) <= 0)
        assert np.all(s >= 0)

    def test_cutoff_drops_relative_weight(self):
        res = svd_truncated(np.diag([1.0, 1e-9]), max_rank=2, cutoff=1e-12)
        assert len(res.singular_values) == 1

    def test_bad_args(self):
        with pytest.raises(ValueError):
            svd_truncated(np.eye(2), max_rank=0)
        with pytest.raises(ValueError):
            svd_truncated(np.eye(2), max_rank=1, cutoff=-1.0)


class TestEigGeneral:
    def test_diagonal(self):
        res = eig_general(np.diag([2.0, 1.0]))
        assert np.allclose(res.eigenvalues, [2.0, 1.0])
        assert np.allclose(np.abs(res.right_vectors), np.eye(2))

    def test_jordan_block_flagged(self):
        res = eig_general(np.array([[0.0, 1.0], [0.0, 0.0]]))
        assert np.allclose(res.eigenvalues, [0.0, 0.0])
        assert res.biorth_condition > 1e7

    def test_trace_identity(self):
        rng = np.random.default_rng(6)
        m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        res = eig_general(m)
        assert abs(np.sum(res.eigenvalues) - np.trace(m)) <= 1e-10 * abs(np.trace(m))

    def test_biorthogonality_and_reconstruction(self):
        rng = np.random.default_rng(7)
        m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        res = eig_general(m)
        w_dag = res.left_vectors.conj().T
        assert np.allclose(w_dag @ res.right_vectors, np.eye(6), atol=1e-10)
        rec = res.right_vectors @ np.diag(res.eigenvalues) @ w_dag
        assert np.linalg.norm(rec - m) <= 1e-8 * np.linalg.norm(m)
        assert res.biorth_condition >= 1.0

    def test_magnitude_sorted(self):
        rng = np.random.default_rng(8)
        m = rng.standard_normal((7, 7)) + 1j * rng.standard_normal((7, 7))
        lam = eig_general(m).eigenvalues
        assert np.all(np.diff(np.abs(lam)) <= 1e-12)

    def test_tie_break_deterministic(self):
        # equal magnitudes 1 and -1: descending real part wins
        lam = eig_general(np.diag([-1.0, 1.0])).eigenvalues
        assert lam[0] == 1.0 and lam[1] == -1.0

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            eig_general(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_nonsquare_rejected(self):
        with pytest.raises(ShapeMismatchError):
            eig_general(np.zeros((2, 3)))
