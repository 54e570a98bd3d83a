import math

import numpy as np
import pytest

from tempomc.tensor_ops import ShapeMismatchError
from tempomc.tmps import (TemporalMPS, ZeroOverlapError, apply_mpo, compress_rdm,
                          overlap, pair_compress, rtm_spectrum, rtm_truncate_pair)

from helpers import (conj_state, dense_apply, dense_overlap, dense_rtm, rand_tmpo,
                     rand_tmps, spectrum_sorted, tmps_to_dense)


def product_state(bits, role="ket"):
    e = [np.array([1.0, 0.0], dtype=complex), np.array([0.0, 1.0], dtype=complex)]
    return TemporalMPS([e[b].reshape(1, 2, 1) for b in bits], role)


class TestOverlap:
    def test_equal_product_states(self):
        bra = product_state([0, 0, 0], "bra")
        ket = product_state([0, 0, 0])
        assert overlap(bra, ket) == pytest.approx(1.0)

    def test_orthogonal_product_states(self):
        assert overlap(product_state([0, 1, 0], "bra"),
                       product_state([0, 0, 0])) == pytest.approx(0.0)

    def test_matches_dense_contraction(self):
        rng = np.random.default_rng(0)
        bra = rand_tmps(rng, 4, 3, 2, "bra")
        ket = rand_tmps(rng, 4, 3, 2)
        ref = dense_overlap(bra, ket)
        assert overlap(bra, ket) == pytest.approx(ref, rel=1e-12)

    def test_no_implicit_conjugation(self):
        rng = np.random.default_rng(1)
        bra = rand_tmps(rng, 3, 2, 2, "bra")
        ket = rand_tmps(rng, 3, 2, 2)
        v = overlap(bra, ket)
        v_conj = overlap(conj_state(bra, "bra"), ket)
        assert abs(v - np.conj(overlap(conj_state(bra, "bra"), conj_state(ket, "ket")))) < 1e-12 * abs(v)
        assert abs(v - v_conj) > 1e-12  # conjugating the bra changes the value

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(2)
        with pytest.raises(ShapeMismatchError):
            overlap(rand_tmps(rng, 3, 2, 2, "bra"), rand_tmps(rng, 3, 2, 3))


class TestApplyMpo:
    def test_identity_column(self):
        rng = np.random.default_rng(3)
        state = rand_tmps(rng, 3, 2, 2)
        ident = rand_tmpo(rng, 3, 1, 2, 2)
        for t in ident.tensors:
            t[...] = np.eye(2)[None, :, :, None]
        out = apply_mpo(ident, state)
        assert np.allclose(tmps_to_dense(out), tmps_to_dense(state), atol=1e-12)

    def test_bond_shape_law(self):
        rng = np.random.default_rng(4)
        state = rand_tmps(rng, 4, 2, 2)
        op = rand_tmpo(rng, 4, 2, 2, 2)
        out = apply_mpo(op, state)
        assert out.bond_dims == (4, 4, 4)
        assert out.center is None

    @pytest.mark.parametrize("role", ["bra", "ket"])
    def test_matches_dense(self, role):
        rng = np.random.default_rng(5)
        state = rand_tmps(rng, 3, 3, 2, role)
        op = rand_tmpo(rng, 3, 2, 2, 2)
        out = apply_mpo(op, state)
        assert np.allclose(tmps_to_dense(out), dense_apply(op, state), atol=1e-10)

    def test_sandwich_matches_dense(self):
        rng = np.random.default_rng(6)
        bra = rand_tmps(rng, 3, 2, 2, "bra")
        ket = rand_tmps(rng, 3, 2, 3)
        op = rand_tmpo(rng, 3, 2, 2, 3)
        lhs = overlap(apply_mpo(op, bra), ket)
        dense_op = dense_apply(op, bra).reshape(-1)
        rhs = complex(np.sum(dense_op * tmps_to_dense(ket).reshape(-1)))
        assert lhs == pytest.approx(rhs, rel=1e-11)


class TestCompressRdm:
    def test_product_state_unchanged(self):
        state = product_state([0, 1, 0])
        out, disc = compress_rdm(state, chi=8)
        assert disc == 0.0
        assert np.allclose(tmps_to_dense(out), tmps_to_dense(state), atol=1e-12)
        assert out.center == 0

    def test_exact_rank_two_compression(self):
        rng = np.random.default_rng(7)
        small = rand_tmps(rng, 4, 2, 2)
        # pad bonds to 4 with zero blocks: exact rank 2 everywhere
        padded = []
        for i, t in enumerate(small.tensors):
            dl = 1 if i == 0 else 4
            dr = 1 if i == 3 else 4
            z = np.zeros((dl, 2, dr), dtype=complex)
            z[:t.shape[0], :, :t.shape[2]] = t
            padded.append(z)
        state = TemporalMPS(padded)
        out, disc = compress_rdm(state, chi=2)
        dense = tmps_to_dense(state).reshape(-1)
        dense_out = tmps_to_dense(out).reshape(-1)
        norm2 = np.sum(np.abs(dense) ** 2)
        fid = np.sum(np.conj(dense_out) * dense)
        assert abs(fid - norm2) <= 1e-10 * norm2
        assert max(out.bond_dims) <= 2
        assert disc <= 1e-12

    def test_full_rank_noop_fidelity(self):
        rng = np.random.default_rng(8)
        state = rand_tmps(rng, 5, 8, 2)
        out, disc = compress_rdm(state, chi=16)
        a = tmps_to_dense(state).reshape(-1)
        b = tmps_to_dense(out).reshape(-1)
        fid = abs(np.vdot(b, a)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real)
        assert fid == pytest.approx(1.0, abs=1e-10)
        assert disc <= 1e-12

    def test_truncation_error_bound(self):
        # squared overlap loss <= sum of per-bond discarded weights
        rng = np.random.default_rng(9)
        for seed in range(10):
            r = np.random.default_rng(seed)
            state = rand_tmps(r, 5, 6, 3)
            out, disc = compress_rdm(state, chi=3)
            a = tmps_to_dense(state).reshape(-1)
            b = tmps_to_dense(out).reshape(-1)
            fid2 = abs(np.vdot(b, a)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real)
            assert 1.0 - fid2 <= disc + 1e-12

    def test_chi_below_one_rejected(self):
        with pytest.raises(ValueError):
            compress_rdm(product_state([0, 0]), chi=0)


class TestRtmTruncatePair:
    def test_hermitian_pair_matches_rdm(self):
        # bra = conjugate of ket: RTM is a density matrix; eig truncation
        # reproduces the per-vector compression overlap
        rng = np.random.default_rng(10)
        ket = rand_tmps(rng, 4, 6, 2)
        bra = conj_state(ket, "bra")
        ov0 = overlap(bra, ket)
        b2, k2, rep = rtm_truncate_pair(bra, ket, bond=2, chi=3)
        kept_ratio = overlap(b2, k2) / ov0
        comp, _ = compress_rdm(ket, chi=3)
        # the RDM route: overlap of the compressed ket with the conjugate bra
        dense = tmps_to_dense(ket).reshape(-1)
        dc = tmps_to_dense(comp).reshape(-1)
        rdm_ratio = np.vdot(dense, dc) / np.vdot(dense, dense)
        assert abs(kept_ratio.real - rdm_ratio.real) < 1e-8

    def test_full_rank_keeps_overlap(self):
        rng = np.random.default_rng(11)
        bra = rand_tmps(rng, 4, 3, 2, "bra")
        ket = rand_tmps(rng, 4, 3, 2)
        ov0 = overlap(bra, ket)
        b2, k2, rep = rtm_truncate_pair(bra, ket, bond=2, chi=16)
        assert overlap(b2, k2) == pytest.approx(ov0, rel=1e-10)
        assert abs(rep.discarded_sum) <= 1e-10

    def test_overlap_ratio_equals_kept_eigenvalue_sum(self):
        rng = np.random.default_rng(12)
        bra = rand_tmps(rng, 4, 6, 2, "bra")
        ket = rand_tmps(rng, 4, 6, 2)
        ov0 = overlap(bra, ket)
        # dense-RTM oracle: dominant eigenvalues of the partially traced
        # transition matrix at the cut
        tau = dense_rtm(bra, ket, 2)
        lam = spectrum_sorted(tau)
        b2, k2, rep = rtm_truncate_pair(bra, ket, bond=2, chi=3)
        ratio = overlap(b2, k2) / ov0
        assert ratio == pytest.approx(complex(np.sum(lam[:3])), abs=1e-8)
        assert rep.kept_rank == 3
        assert abs(rep.kept_sum + rep.discarded_sum - 1.0) <= 1e-10

    def test_report_invariant_many_instances(self):
        # kept + discarded = unit trace, and the ratio identity, on a large
        # batch of random instances
        failures = 0
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            m = int(rng.integers(3, 6))
            chi_in = int(rng.integers(2, 5))
            keep = int(rng.integers(1, chi_in + 1))
            bra = rand_tmps(rng, m, chi_in, 2, "bra")
            ket = rand_tmps(rng, m, chi_in, 2)
            bond = int(rng.integers(1, m))
            ov0 = overlap(bra, ket)
            try:
                b2, k2, rep = rtm_truncate_pair(bra, ket, bond, keep)
            except ZeroOverlapError:
                continue
            assert abs(rep.kept_sum + rep.discarded_sum - 1.0) <= 1e-9
            ratio = overlap(b2, k2) / ov0
            if abs(ratio - rep.kept_sum) > 1e-8 * max(1.0, abs(rep.kept_sum)):
                failures += 1
        assert failures == 0

    def test_bond_out_of_range(self):
        rng = np.random.default_rng(13)
        bra = rand_tmps(rng, 3, 2, 2, "bra")
        ket = rand_tmps(rng, 3, 2, 2)
        with pytest.raises(IndexError):
            rtm_truncate_pair(bra, ket, bond=3, chi=2)

    def test_zero_overlap_raises(self):
        bra = product_state([0, 1], "bra")
        ket = product_state([0, 0])
        with pytest.raises(ZeroOverlapError):
            rtm_truncate_pair(bra, ket, bond=1, chi=1)

    def test_svd_mode_full_rank_exact(self):
        rng = np.random.default_rng(14)
        bra = rand_tmps(rng, 4, 3, 2, "bra")
        ket = rand_tmps(rng, 4, 3, 2)
        ov0 = overlap(bra, ket)
        b2, k2, rep = rtm_truncate_pair(bra, ket, bond=2, chi=16, mode="svd")
        assert overlap(b2, k2) == pytest.approx(ov0, rel=1e-9)


class TestRtmSpectrum:
    def test_self_paired_state_gives_schmidt_weights(self):
        rng = np.random.default_rng(15)
        ket = rand_tmps(rng, 4, 4, 2)
        bra = conj_state(ket, "bra")
        lam = rtm_spectrum(bra, ket, 2)
        assert np.all(np.abs(lam.imag) < 1e-10)
        assert np.all(lam.real > -1e-12)
        dense = tmps_to_dense(ket).reshape(4, -1)
        w = np.linalg.svd(dense, compute_uv=False) ** 2
        w = np.sort(w / w.sum())[::-1]
        assert np.allclose(np.sort(lam.real)[::-1][:len(w)], w, atol=1e-10)

    def test_unit_trace(self):
        rng = np.random.default_rng(16)
        bra = rand_tmps(rng, 5, 3, 2, "bra")
        ket = rand_tmps(rng, 5, 3, 2)
        for t in range(1, 5):
            lam = rtm_spectrum(bra, ket, t)
            assert np.sum(lam) == pytest.approx(1.0, abs=1e-10)

    def test_matches_dense_partial_trace(self):
        rng = np.random.default_rng(17)
        bra = rand_tmps(rng, 4, 3, 2, "bra")
        ket = rand_tmps(rng, 4, 3, 2)
        lam = rtm_spectrum(bra, ket, 2)
        ref = spectrum_sorted(dense_rtm(bra, ket, 2))
        # nonzero parts agree; the dense operator may carry extra zeros
        k = len(lam)
        assert np.allclose(lam, ref[:k], atol=1e-9)
        assert np.all(np.abs(ref[k:]) < 1e-9)


class TestPairCompress:
    def test_exact_regime_preserves_overlap(self):
        rng = np.random.default_rng(18)
        bra = rand_tmps(rng, 5, 4, 2, "bra")
        ket = rand_tmps(rng, 5, 4, 2)
        ov0 = overlap(bra, ket)
        b2, k2, _ = pair_compress(bra, ket, chi=64)
        assert overlap(b2, k2) == pytest.approx(ov0, rel=1e-10)

    def test_mirror_mode_single_object(self):
        # transpose gluing: ket is the same stored object as the bra; the
        # overlap ratio is the product of per-bond kept sums
        rng = np.random.default_rng(19)
        state = rand_tmps(rng, 4, 5, 2, "bra")
        ov0 = overlap(state, TemporalMPS(state.tensors, "ket"))
        out, out2, reports = pair_compress(state, state, chi=3)
        assert out is out2
        ratio = overlap(out, TemporalMPS(out.tensors, "ket")) / ov0
        expected = 1.0 + 0j
        for rep in reports:
            expected *= rep.kept_sum
        assert ratio == pytest.approx(expected, rel=1e-8)
