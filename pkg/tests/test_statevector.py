import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhybrid import oracle
from qhybrid import statevector as sv
from qhybrid.errors import ConfigurationError, QubitIndexError, ValidationError
from qhybrid.verify import random_ops, random_state

S = 1 / math.sqrt(2)


def amps(state):
    return state.amplitudes


class TestZeroState:
    def test_one_qubit(self):
        np.testing.assert_array_equal(amps(sv.new_zero_state(1)), [1, 0])

    def test_two_qubits(self):
        np.testing.assert_array_equal(amps(sv.new_zero_state(2)), [1, 0, 0, 0])

    def test_norm(self):
        assert sv.new_zero_state(3).norm_squared() == 1.0

    @pytest.mark.parametrize("n", [0, 25, -1, 2.0])
    def test_out_of_range(self, n):
        with pytest.raises(ConfigurationError):
            sv.new_zero_state(n)


class TestHadamard:
    def test_on_zero(self):
        np.testing.assert_allclose(amps(sv.apply_h(sv.new_zero_state(1), 0)), [S, S], atol=1e-15)

    def test_bit_convention(self):
        np.testing.assert_allclose(amps(sv.apply_h(sv.new_zero_state(2), 1)), [S, 0, S, 0], atol=1e-15)

    def test_involution(self, rng):
        state = random_state(rng, 5)
        start = amps(state).copy()
        for q in range(5):
            sv.apply_h(state, q)
            sv.apply_h(state, q)
        np.testing.assert_allclose(amps(state), start, atol=1e-12)

    def test_target_out_of_range(self):
        with pytest.raises(QubitIndexError):
            sv.apply_h(sv.new_zero_state(2), 2)

    @pytest.mark.parametrize("n", range(1, 9))
    def test_only_index_two_to_the_j_touched(self, n):
        for j in range(n):
            a = amps(sv.apply_h(sv.new_zero_state(n), j))
            assert set(np.flatnonzero(np.abs(a) > 0)) == {0, 1 << j}


class TestRy:
    def test_pi_flips(self):
        np.testing.assert_allclose(amps(sv.apply_ry(sv.new_zero_state(1), 0, math.pi)), [0, 1], atol=1e-12)

    def test_zero_is_identity(self, rng):
        state = random_state(rng, 3)
        start = amps(state).copy()
        for q in range(3):
            sv.apply_ry(state, q, 0.0)
        np.testing.assert_array_equal(amps(state), start)

    @pytest.mark.parametrize("d", [0.0, 0.3, -1.1, math.pi / 4])
    def test_double_angle_gives_cos_sin(self, d):
        np.testing.assert_allclose(
            amps(sv.apply_ry(sv.new_zero_state(1), 0, 2 * d)), [math.cos(d), math.sin(d)], atol=1e-15
        )

    def test_real_stays_real(self, rng):
        state = sv.from_amplitudes(rng.normal(size=8), normalize=True)
        sv.apply_ry(state, 1, 0.7)
        assert np.all(amps(state).imag == 0)

    @pytest.mark.parametrize("theta", [math.inf, -math.inf, math.nan])
    def test_non_finite_rejected(self, theta):
        with pytest.raises(ValidationError):
            sv.apply_ry(sv.new_zero_state(1), 0, theta)


class TestCnot:
    def test_control_set(self):
        state = sv.from_amplitudes([0, 1, 0, 0])
        np.testing.assert_array_equal(amps(sv.apply_cnot(state, 0, 1)), [0, 0, 0, 1])

    def test_control_clear(self):
        np.testing.assert_array_equal(amps(sv.apply_cnot(sv.new_zero_state(2), 0, 1)), [1, 0, 0, 0])

    def test_bell_state(self):
        state = sv.apply_cnot(sv.apply_h(sv.new_zero_state(2), 0), 0, 1)
        np.testing.assert_allclose(amps(state), [S, 0, 0, S], atol=1e-15)

    def test_control_above_target(self):
        # control qubit 2 set, target qubit 0 flips: |100> (4) -> |101> (5)
        state = sv.from_amplitudes(np.eye(8)[4])
        np.testing.assert_array_equal(amps(sv.apply_cnot(state, 2, 0)), np.eye(8)[5])

    def test_same_qubit_rejected(self):
        with pytest.raises(ValidationError):
            sv.apply_cnot(sv.new_zero_state(2), 1, 1)

    def test_out_of_range(self):
        with pytest.raises(QubitIndexError):
            sv.apply_cnot(sv.new_zero_state(2), 0, 5)


class TestExpectZ:
    def test_zero_state(self):
        assert sv.expect_z(sv.new_zero_state(1), 0) == 1.0
        np.testing.assert_array_equal(sv.expect_z_all(sv.new_zero_state(2)), [1, 1])

    def test_bell(self):
        state = sv.apply_cnot(sv.apply_h(sv.new_zero_state(2), 0), 0, 1)
        np.testing.assert_allclose(sv.expect_z_all(state), [0, 0], atol=1e-12)
        assert abs(sv.expect_z(state, 1)) < 1e-12

    @pytest.mark.parametrize("d", [0.0, 0.4, -0.9, 1.3])
    def test_encoded_qubit(self, d):
        state = sv.apply_ry(sv.new_zero_state(1), 0, 2 * d)
        assert sv.expect_z(state, 0) == pytest.approx(math.cos(d) ** 2 - math.sin(d) ** 2, abs=1e-14)

    def test_all_matches_single(self, rng):
        state = random_state(rng, 5)
        np.testing.assert_allclose(sv.expect_z_all(state), [sv.expect_z(state, q) for q in range(5)], atol=1e-14)

    def test_matches_oracle_on_random_circuit(self, rng):
        ops = random_ops(rng, 4, 25)
        state = sv.run_ops(ops, 4)
        want = oracle.dense_expect_z(oracle.dense_state(ops, 4), 4)
        np.testing.assert_allclose(sv.expect_z_all(state), want, atol=1e-10)


class TestGateOp:
    def test_cnot_needs_distinct_control(self):
        with pytest.raises(ValidationError):
            sv.GateOp(sv.GateKind.CNOT, 1, control=1)
        with pytest.raises(ValidationError):
            sv.GateOp(sv.GateKind.CNOT, 1)

    def test_control_only_for_cnot(self):
        with pytest.raises(ValidationError):
            sv.GateOp(sv.GateKind.H, 0, control=1)

    def test_ry_inverse(self):
        assert sv.GateOp(sv.GateKind.RY, 0, angle=0.5).inverse().angle == -0.5


class TestBatchedKernels:
    def test_batch_matches_single(self, rng):
        n, B = 4, 6
        batch = np.stack([amps(random_state(rng, n)) for _ in range(B)])
        thetas = rng.uniform(-3, 3, B)
        singles = []
        for b in range(B):
            s = sv.from_amplitudes(batch[b])
            sv.apply_h(s, 2)
            sv.apply_ry(s, 1, thetas[b])
            sv.apply_cnot(s, 3, 0)
            singles.append(amps(s))
        sv.h_kernel(batch, n, 2)
        sv.ry_kernel(batch, n, 1, thetas)
        sv.cnot_kernel(batch, n, 3, 0)
        np.testing.assert_array_equal(batch, np.stack(singles))


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_norm_preserved_by_every_gate(n, seed):
    rng = np.random.default_rng(seed)
    state = random_state(rng, n)
    ops = random_ops(rng, n, 20) if n > 1 else [sv.GateOp(sv.GateKind.H, 0), sv.GateOp(sv.GateKind.RY, 0, angle=1.3)]
    for op in ops:
        sv.apply_op(state, op)
        assert abs(state.norm_squared() - 1) < 1e-10
    z = sv.expect_z_all(state)
    assert np.all(np.abs(z) <= 1 + 1e-12)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 8), n_gates=st.integers(1, 40), seed=st.integers(0, 2**32 - 1))
def test_reversed_inverse_sequence_recovers_state(n, n_gates, seed):
    rng = np.random.default_rng(seed)
    state = random_state(rng, n)
    start = amps(state).copy()
    ops = random_ops(rng, n, n_gates)
    for op in ops:
        sv.apply_op(state, op)
    for op in reversed(ops):
        sv.apply_op(state, op.inverse())
    assert np.max(np.abs(amps(state) - start)) < 1e-9
