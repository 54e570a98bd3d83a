import math

import numpy as np
import pytest

from tempomc.engine import AmplitudeEngine
from tempomc.network import PAULI_X, PAULI_Z, QuenchSpec
from tempomc.oracle import (bit_index, dense_evolve, dense_measure, dense_renyi2)
from tempomc.sampler import (LocalOperatorSpec, ZeroAmplitudeSkip,
                             acceptance_probability, enumeration_norm,
                             full_enumeration_expectation, local_estimator,
                             metropolis_run, renyi2_swap)


def chaotic_spec(n, t_total, dt=0.25, order=1):
    return QuenchSpec(n=n, hz=-1.05, hx=0.5, t_total=t_total, dt=dt,
                      trotter_order=order, x0="0")


class TestAcceptanceRule:
    def test_hand_values(self):
        assert acceptance_probability(0.25, 1.0) == 0.25
        assert acceptance_probability(4.0, 1.0) == 1.0

    def test_zero_current_probability(self):
        assert acceptance_probability(0.3, 0.0) == 1.0


class TestLocalEstimator:
    def test_diagonal_operator_needs_no_ratios(self):
        called = []

        def amp(bits):
            called.append(tuple(bits))
            return 1.0

        z = LocalOperatorSpec.pauli_z(1)
        assert local_estimator(z, (0, 0, 0), amp) == 1.0
        assert local_estimator(z, (0, 1, 0), amp) == -1.0
        assert called == []  # no amplitude evaluations for a diagonal operator

    def test_single_flip_ratio(self):
        spec = chaotic_spec(4, 1.0)
        eng = AmplitudeEngine(spec, chi=16)
        x = LocalOperatorSpec.pauli_x(2)
        bits = (0, 1, 0, 0)
        flipped = (0, 1, 1, 0)
        expected = eng.amplitude(flipped) / eng.amplitude(bits)
        assert local_estimator(x, bits, eng.amplitude) == pytest.approx(expected)

    def test_full_enumeration_identity(self):
        # sum_x p(x) O_loc(x) = <psi|O|psi> over the full configuration space
        spec = chaotic_spec(6, 1.5)
        eng = AmplitudeEngine(spec, chi=64)
        st = dense_evolve(spec)
        for op in (LocalOperatorSpec.pauli_z(2), LocalOperatorSpec.pauli_x(4)):
            total = 0.0 + 0j
            for k in range(2 ** 6):
                bits = tuple(int(c) for c in format(k, "06b"))
                psi = eng.amplitude(bits)
                if abs(psi) < 1e-14:
                    continue
                total += abs(psi) ** 2 * local_estimator(op, bits, eng.amplitude)
            ref = dense_measure(st, op.matrix, op.site)
            assert total == pytest.approx(ref, abs=1e-8)

    def test_zero_reference_raises_skip(self):
        def amp(bits):
            return 0.0
        with pytest.raises(ZeroAmplitudeSkip):
            local_estimator(LocalOperatorSpec.pauli_x(0), (0, 0), amp)

    def test_two_site_operator(self):
        spec = chaotic_spec(4, 1.0)
        eng = AmplitudeEngine(spec, chi=16)
        st = dense_evolve(spec)
        xx = LocalOperatorSpec("XX_1", 1, np.kron(PAULI_X, PAULI_X))
        total = 0.0 + 0j
        for k in range(16):
            bits = tuple(int(c) for c in format(k, "04b"))
            psi = eng.amplitude(bits)
            if abs(psi) < 1e-14:
                continue
            total += abs(psi) ** 2 * local_estimator(xx, bits, eng.amplitude)
        assert total == pytest.approx(dense_measure(st, xx.matrix, 1), abs=1e-8)

    def test_support_cap(self):
        with pytest.raises(ValueError):
            LocalOperatorSpec("big", 0, np.eye(16))


class TestMetropolisRun:
    def test_frozen_chain_at_zero_time(self):
        spec = QuenchSpec(n=4, hz=-1.05, hx=0.5, t_total=0.0, dt=0.0, x0="0000")
        est = metropolis_run(spec, chi=8, n_samples=50, seed=1,
                            observables=[LocalOperatorSpec.pauli_z(2)])
        z = est["Z_2"]
        assert z.mean == pytest.approx(1.0)
        assert z.acceptance_rate == 0.0

    def test_matches_dense_within_errors(self):
        spec = chaotic_spec(8, 2.0)
        eng = AmplitudeEngine(spec, chi=64)
        st = dense_evolve(spec)
        ref = dense_measure(st, PAULI_Z, 4).real
        est = metropolis_run(spec, chi=64, n_samples=3000, seed=11,
                            observables=[LocalOperatorSpec.pauli_z(4)], engine=eng)
        z = est["Z_4"]
        assert abs(z.mean.real - ref) <= 3 * z.std_error
        assert 0.0 < z.acceptance_rate < 1.0

    def test_seed_determinism(self):
        spec = chaotic_spec(6, 1.0)
        eng = AmplitudeEngine(spec, chi=32)
        a = metropolis_run(spec, chi=32, n_samples=200, seed=5,
                          observables=[LocalOperatorSpec.pauli_z(3)], engine=eng)
        b = metropolis_run(spec, chi=32, n_samples=200, seed=5,
                          observables=[LocalOperatorSpec.pauli_z(3)], engine=eng)
        c = metropolis_run(spec, chi=32, n_samples=200, seed=6,
                          observables=[LocalOperatorSpec.pauli_z(3)], engine=eng)
        assert a["Z_3"].mean == b["Z_3"].mean
        assert a["Z_3"].mean != c["Z_3"].mean

    def test_chain_invariance_total_variation(self):
        # empirical distribution of decorrelated samples vs Born weights
        spec = chaotic_spec(6, 2.0)
        eng = AmplitudeEngine(spec, chi=64)
        table = eng.amplitude_table()
        born = np.abs(table) ** 2
        born /= born.sum()
        from tempomc.sampler import _Chain, _start_bits
        chain = _Chain(6, _start_bits(spec), eng, seed=17, chain_id=0)
        chain.thermalize()
        counts = np.zeros(64)
        n_samp = 100000
        for _ in range(n_samp):
            counts[bit_index(chain.next_sample())] += 1
        emp = counts / counts.sum()
        tv = 0.5 * np.abs(emp - born).sum()
        assert tv <= 0.02

    def test_sample_count_reported(self):
        spec = chaotic_spec(4, 0.5)
        est = metropolis_run(spec, chi=16, n_samples=64, seed=2,
                            observables=[LocalOperatorSpec.pauli_z(2)])
        assert est["Z_2"].n_samples == 64


class TestRenyi2Swap:
    def test_product_state_zero_entropy(self):
        spec = QuenchSpec(n=4, hz=-1.05, hx=0.5, t_total=0.0, dt=0.0, x0="0110")
        est = renyi2_swap(spec, chi=8, n_samples=100, seed=3, cut=2)
        assert est.mean == pytest.approx(0.0, abs=1e-12)

    def test_bell_pair_analytic(self):
        t = math.pi / 4
        spec = QuenchSpec(n=2, hz=0.0, hx=0.0, t_total=t, dt=t / 4,
                          trotter_order=1, x0="00")
        est = renyi2_swap(spec, chi=8, n_samples=4000, seed=7, cut=1)
        # purity 1/2 within statistical error
        purity = math.exp(-est.mean)
        assert abs(purity - 0.5) <= 3 * est.std_error + 1e-12
        assert est.mean == pytest.approx(math.log(2.0), abs=0.1)

    def test_matches_dense_within_errors(self):
        spec = chaotic_spec(8, 2.0)
        eng = AmplitudeEngine(spec, chi=64)
        ref = dense_renyi2(dense_evolve(spec), 4)
        est = renyi2_swap(spec, chi=64, n_samples=3000, seed=13, cut=4, engine=eng)
        assert abs(est.mean - ref) <= 3 * est.std_error

    def test_cut_validation(self):
        spec = chaotic_spec(4, 0.5)
        with pytest.raises(ValueError):
            renyi2_swap(spec, chi=8, n_samples=10, seed=1, cut=4)


class TestFullEnumeration:
    def test_zero_time_reduces_to_initial_expectation(self):
        spec = QuenchSpec(n=4, hz=-1.05, hx=0.5, t_total=0.0, dt=0.0, x0="0110")
        v = full_enumeration_expectation(spec, chi=8, op=LocalOperatorSpec.pauli_z(1))
        assert v == pytest.approx(-1.0)

    def test_matches_dense(self):
        spec = chaotic_spec(8, 2.0, dt=0.25, order=2)
        eng = AmplitudeEngine(spec, chi=64)
        st = dense_evolve(spec)
        v = full_enumeration_expectation(spec, chi=64,
                                         op=LocalOperatorSpec.pauli_z(4), engine=eng)
        assert v == pytest.approx(dense_measure(st, PAULI_Z, 4), abs=1e-8)

    def test_normalization(self):
        spec = chaotic_spec(8, 2.0)
        assert enumeration_norm(spec, chi=64) == pytest.approx(1.0, abs=1e-8)

    def test_size_guard(self):
        spec = QuenchSpec(n="infinite", hz=-1.0, hx=0.0, t_total=0.5, dt=0.25)
        big = chaotic_spec(4, 0.5)
        with pytest.raises(ValueError):
            full_enumeration_expectation(
                QuenchSpec(n=22, hz=-1.0, hx=0.0, t_total=0.0, dt=0.0, x0="0" * 22),
                chi=8, op=LocalOperatorSpec.pauli_z(0))
