import math

import numpy as np
import pytest

from tempomc.network import PAULI_Z, QuenchSpec, trotter_gate, _ising_layers
from tempomc.oracle import (DenseState, bit_index, dense_amplitude, dense_evolve,
                            dense_measure, dense_renyi2, tebd_evolve, tebd_measure_z,
                            tebd_renyi2, tebd_to_dense)


class TestDenseEvolve:
    def test_zero_time_is_basis_vector(self):
        spec = QuenchSpec(n=4, hz=-1.0, hx=0.3, t_total=0.0, dt=0.0, x0="0110")
        st = dense_evolve(spec)
        assert st.vector[bit_index([0, 1, 1, 0])] == pytest.approx(1.0)
        assert np.sum(np.abs(st.vector) ** 2) == pytest.approx(1.0)

    def test_two_site_pure_coupling_analytic(self):
        t = 0.9
        spec = QuenchSpec(n=2, hz=0.0, hx=0.0, t_total=t, dt=t / 3,
                          trotter_order=1, x0="00")
        st = dense_evolve(spec)
        assert st.vector[bit_index([0, 0])] == pytest.approx(math.cos(t), abs=1e-12)
        assert st.vector[bit_index([1, 1])] == pytest.approx(-1j * math.sin(t), abs=1e-12)

    def test_norm_preserved(self):
        spec = QuenchSpec(n=5, hz=-1.05, hx=0.5, t_total=2.0, dt=0.25,
                          trotter_order=2, x0="0")
        assert dense_evolve(spec).norm == pytest.approx(1.0, abs=1e-10)

    def test_trotter_vs_exact_overlap_bound(self):
        spec = QuenchSpec(n=6, hz=-1.05, hx=0.5, t_total=1.0, dt=0.05,
                          trotter_order=2, x0="0")
        trot = dense_evolve(spec)
        exact = dense_evolve(spec, exact=True)
        fidelity = abs(np.vdot(exact.vector, trot.vector))
        assert fidelity >= 1.0 - 10.0 * 0.05 ** 2

    def test_gate_constructor_shared_with_columns(self):
        # the evolver and the column builder must use bit-identical gates
        layers = _ising_layers(4, -1.05, 0.5, 0.1, 2)
        again = _ising_layers(4, -1.05, 0.5, 0.1, 2)
        for la, lb in zip(layers, again):
            assert sorted(la) == sorted(lb)
            for b in la:
                assert np.array_equal(la[b], lb[b])
        assert np.array_equal(layers[1][1], trotter_gate(-1.05, 0.5, 0.1, 2))

    def test_size_guard(self):
        with pytest.raises(ValueError):
            dense_evolve(QuenchSpec(n=16, hz=-1.0, hx=0.0, t_total=0.0, dt=0.0,
                                    x0="0" * 16))


class TestDenseMeasurements:
    def test_product_state_renyi_zero(self):
        spec = QuenchSpec(n=4, hz=-1.0, hx=0.0, t_total=0.0, dt=0.0, x0="0101")
        st = dense_evolve(spec)
        assert dense_renyi2(st, 2) == pytest.approx(0.0, abs=1e-12)

    def test_amplitudes_normalized(self):
        spec = QuenchSpec(n=4, hz=-1.05, hx=0.5, t_total=1.0, dt=0.25,
                          trotter_order=1, x0="0")
        st = dense_evolve(spec)
        total = sum(abs(dense_amplitude(st, format(k, "04b"))) ** 2 for k in range(16))
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_measure_diagonal(self):
        spec = QuenchSpec(n=3, hz=-1.0, hx=0.0, t_total=0.0, dt=0.0, x0="010")
        st = dense_evolve(spec)
        assert dense_measure(st, PAULI_Z, 0) == pytest.approx(1.0)
        assert dense_measure(st, PAULI_Z, 1) == pytest.approx(-1.0)

    def test_bell_pair_renyi(self):
        t = math.pi / 4
        spec = QuenchSpec(n=2, hz=0.0, hx=0.0, t_total=t, dt=t / 4,
                          trotter_order=1, x0="00")
        st = dense_evolve(spec)
        assert dense_renyi2(st, 1) == pytest.approx(math.log(2.0), abs=1e-10)


class TestTebd:
    def test_exact_regime_matches_dense(self):
        spec = QuenchSpec(n=6, hz=-1.05, hx=0.5, t_total=1.0, dt=0.25,
                          trotter_order=2, x0="0")
        mps = tebd_evolve(spec, chi=8)  # 2^(n/2) = 8: no truncation possible
        dense = dense_evolve(spec)
        vec = tebd_to_dense(mps).vector
        assert np.linalg.norm(vec - dense.vector) <= 1e-10

    def test_measurements_match_dense(self):
        spec = QuenchSpec(n=6, hz=-1.05, hx=0.5, t_total=1.5, dt=0.25,
                          trotter_order=1, x0="0")
        mps = tebd_evolve(spec, chi=8)
        dense = dense_evolve(spec)
        assert tebd_measure_z(mps, 3) == pytest.approx(
            dense_measure(dense, PAULI_Z, 3).real, abs=1e-10)
        assert tebd_renyi2(mps, 3) == pytest.approx(dense_renyi2(dense, 3), abs=1e-10)

    def test_discarded_weight_accumulates(self):
        prev = 0.0
        for steps in (2, 4, 8):
            spec = QuenchSpec(n=8, hz=-1.05, hx=0.5, t_total=steps * 0.25, dt=0.25,
                              trotter_order=1, x0="0")
            w = tebd_evolve(spec, chi=4).discarded_weight
            assert w >= prev - 1e-15
            prev = w
        assert prev > 0.0

    def test_truncated_run_deviates(self):
        # the fixed-chi baseline visibly departs from the exact value at
        # long times while the exact-chi run does not
        spec = QuenchSpec(n=10, hz=-1.05, hx=0.5, t_total=4.0, dt=0.25,
                          trotter_order=1, x0="0")
        dense = dense_evolve(spec)
        z_ref = dense_measure(dense, PAULI_Z, 5).real
        z_trunc = tebd_measure_z(tebd_evolve(spec, chi=4), 5)
        z_exact = tebd_measure_z(tebd_evolve(spec, chi=32), 5)
        assert abs(z_exact - z_ref) < 1e-8
        assert abs(z_trunc - z_ref) > 1e-3

    def test_chi_guard(self):
        with pytest.raises(ValueError):
            tebd_evolve(QuenchSpec(n=4, hz=-1.0, hx=0.0, t_total=0.25, dt=0.25,
                                   x0="0"), chi=0)
