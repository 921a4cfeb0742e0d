import itertools
import math

import numpy as np
import pytest

from qhybrid import circuit, oracle
from qhybrid.circuit import CircuitSpec
from qhybrid.errors import ConfigurationError, ValidationError


def product_formula(d):
    """Amplitude k = prod_i (cos d_i if bit i of k is 0 else sin d_i)."""
    n = len(d)
    out = np.empty(1 << n)
    for k in range(1 << n):
        out[k] = math.prod(math.sin(d[i]) if (k >> i) & 1 else math.cos(d[i]) for i in range(n))
    return out


class TestSpec:
    def test_single_qubit_rejected(self):
        with pytest.raises(ConfigurationError) as exc:
            CircuitSpec(1, 1)
        assert exc.value.field == "n_q"

    def test_depth_zero_rejected(self):
        with pytest.raises(ConfigurationError):
            CircuitSpec(3, 0)

    def test_parameter_count(self):
        for n, depth in itertools.product(range(2, 11), range(1, 6)):
            assert CircuitSpec(n, depth).n_params == n * depth

    def test_topologies(self):
        assert CircuitSpec(4, 1, "chain").cnot_pairs() == [(0, 1), (1, 2), (2, 3)]
        assert CircuitSpec(4, 1, "ring").cnot_pairs() == [(0, 1), (1, 2), (2, 3), (3, 0)]


class TestEncode:
    def test_zero_features(self):
        np.testing.assert_array_equal(circuit.encode([0, 0], 2).amplitudes, [1, 0, 0, 0])

    def test_quarter_pi(self):
        s = 1 / math.sqrt(2)
        np.testing.assert_allclose(circuit.encode([math.pi / 4], 1).amplitudes, [s, s], atol=1e-15)

    def test_product_form(self):
        d = [0.3, -0.2]
        np.testing.assert_allclose(circuit.encode(d, 2).amplitudes, product_formula(d), atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            circuit.encode([0.1, 0.2, 0.3], 2)


class TestVqc:
    def test_zero_theta_two_qubits_matches_oracle(self):
        spec = CircuitSpec(2, 1)
        got = circuit.apply_vqc(circuit.encode([0, 0], 2), np.zeros((1, 2)), spec).amplitudes
        want = oracle.dense_state(oracle.hybrid_circuit_ops([0, 0], np.zeros((1, 2))), 2)
        np.testing.assert_allclose(got, want, atol=1e-12)
        # H on both qubits gives the uniform state, which CNOT leaves uniform
        np.testing.assert_allclose(got, [0.5] * 4, atol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            circuit.apply_vqc(circuit.encode([0, 0], 2), np.zeros((2, 3)), CircuitSpec(2, 2))

    def test_norm_preserved(self, rng):
        spec = CircuitSpec(5, 4, "ring")
        state = circuit.apply_vqc(
            circuit.encode(rng.uniform(-1.5, 1.5, 5), 5), rng.uniform(-7, 7, (4, 5)), spec
        )
        assert abs(state.norm_squared() - 1) < 1e-10

    def test_two_pi_shift_leaves_expectations(self, rng):
        spec = CircuitSpec(3, 2)
        d = rng.uniform(-1.5, 1.5, 3)
        theta = rng.uniform(-3, 3, (2, 3))
        base = circuit.forward_quantum(d, theta, spec)
        for l, i in itertools.product(range(2), range(3)):
            t = theta.copy()
            t[l, i] += 2 * math.pi
            np.testing.assert_allclose(circuit.forward_quantum(d, t, spec), base, atol=1e-10)


class TestForward:
    @pytest.mark.parametrize("topology", ["chain", "ring"])
    def test_h_only_regime_is_zero(self, topology):
        for n in range(2, 7):
            z = circuit.forward_quantum(np.zeros(n), np.zeros((1, n)), CircuitSpec(n, 1, topology))
            np.testing.assert_allclose(z, 0, atol=1e-12)

    def test_zero_case_oracle(self):
        want = oracle.dense_forward([0, 0], np.zeros((1, 2)))
        np.testing.assert_allclose(want, [0, 0], atol=1e-12)
        np.testing.assert_allclose(circuit.forward_quantum([0, 0], np.zeros((1, 2)), CircuitSpec(2, 1)), want, atol=1e-12)

    def test_oracle_sweep(self, rng):
        for i in range(200):
            n = int(rng.integers(2, 7))
            depth = int(rng.integers(1, 5))
            topo = ("chain", "ring")[i % 2]
            d = rng.uniform(-np.pi / 2, np.pi / 2, n)
            theta = rng.uniform(-np.pi, np.pi, (depth, n))
            got = circuit.forward_quantum(d, theta, CircuitSpec(n, depth, topo))
            assert np.all(np.abs(got) <= 1)
            np.testing.assert_allclose(got, oracle.dense_forward(d, theta, topo), atol=1e-10)

    def test_deterministic(self, rng):
        spec = CircuitSpec(4, 3)
        d, theta = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, (3, 4))
        a = circuit.forward_quantum(d, theta, spec)
        b = circuit.forward_quantum(d, theta, spec)
        assert a.tobytes() == b.tobytes()


class TestRunBatch:
    def test_matches_single(self, rng):
        spec = CircuitSpec(4, 2, "ring")
        D = rng.uniform(-1.5, 1.5, (7, 4))
        T = rng.uniform(-3, 3, (7, 2, 4))
        got = circuit.run_batch(D, T, spec)
        for b in range(7):
            assert got[b].tobytes() == circuit.forward_quantum(D[b], T[b], spec).tobytes()

    def test_chunking_does_not_change_results(self, rng):
        spec = CircuitSpec(5, 2)
        D = rng.uniform(-1.5, 1.5, (40, 5))
        theta = rng.uniform(-3, 3, (2, 5))
        whole = circuit.run_batch(D, theta, spec)
        chunked = circuit.run_batch(D, theta, spec, max_chunk_bytes=16 * 32 * 3)
        assert whole.tobytes() == chunked.tobytes()

    def test_broadcast(self, rng):
        spec = CircuitSpec(3, 1)
        D = rng.uniform(-1, 1, (2, 1, 3))
        T = rng.uniform(-1, 1, (1, 4, 1, 3))
        assert circuit.run_batch(D, T, spec).shape == (2, 4, 3)
