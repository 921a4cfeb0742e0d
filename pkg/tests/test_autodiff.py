import math

import numpy as np
import pytest

from qhybrid import autodiff, circuit, oracle
from qhybrid.circuit import CircuitSpec
from qhybrid.errors import ValidationError
from qhybrid.model import ModelConfig, forward, forward_batch, init_params, loss, one_hot
from qhybrid.verify import gradient_check, random_model


def fd_theta(d, theta, spec, upstream, h):
    def f(p):
        return float(upstream @ circuit.forward_quantum(d, p.reshape(theta.shape), spec))

    return oracle.fd_gradient(f, theta.ravel(), h).reshape(theta.shape)


def fd_features(d, theta, spec, upstream, h):
    return oracle.fd_gradient(lambda p: float(upstream @ circuit.forward_quantum(p, theta, spec)), d, h)


class TestThetaShift:
    def test_zero_upstream(self, rng):
        spec = CircuitSpec(3, 2)
        g = autodiff.param_shift_grad_theta(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, (2, 3)), spec, np.zeros(3))
        np.testing.assert_array_equal(g, 0)

    def test_matches_finite_differences(self, rng):
        spec = CircuitSpec(2, 1)
        for _ in range(10):
            d, theta, up = rng.uniform(-1.5, 1.5, 2), rng.uniform(-3, 3, (1, 2)), rng.normal(size=2)
            g = autodiff.param_shift_grad_theta(d, theta, spec, up)
            np.testing.assert_allclose(g, fd_theta(d, theta, spec, up, 1e-5), atol=1e-6)

    @pytest.mark.parametrize("d,t", [(0.3, 0.1), (-0.8, 1.7), (1.2, -2.5)])
    def test_closed_form_first_qubit(self, d, t):
        # qubit 0 only controls CNOTs, so <Z_0> = sin(2d - theta) after Ry(2d), H, Ry(theta)
        spec = CircuitSpec(2, 1)
        feats, theta = np.array([d, 0.4]), np.array([[t, -0.6]])
        assert circuit.forward_quantum(feats, theta, spec)[0] == pytest.approx(math.sin(2 * d - t), abs=1e-12)
        g = autodiff.param_shift_grad_theta(feats, theta, spec, np.array([1.0, 0.0]))
        assert g[0, 0] == pytest.approx(-math.cos(2 * d - t), abs=1e-10)
        gd = autodiff.param_shift_grad_features(feats, theta, spec, np.array([1.0, 0.0]))
        assert gd[0] == pytest.approx(2 * math.cos(2 * d - t), abs=1e-10)

    def test_shift_is_exact_not_approximate(self, rng):
        spec = CircuitSpec(3, 2)
        d, theta, up = rng.uniform(-1.5, 1.5, 3), rng.uniform(-3, 3, (2, 3)), rng.normal(size=3)
        g = autodiff.param_shift_grad_theta(d, theta, spec, up)
        err5 = np.max(np.abs(g - fd_theta(d, theta, spec, up, 1e-3)))
        err6 = np.max(np.abs(g - fd_theta(d, theta, spec, up, 1e-4)))
        assert err5 < 1e-6
        assert err6 < err5

    def test_upstream_length_checked(self):
        with pytest.raises(ValidationError):
            autodiff.param_shift_grad_theta([0, 0], np.zeros((1, 2)), CircuitSpec(2, 1), np.zeros(3))


class TestFeatureShift:
    def test_zero_upstream(self, rng):
        g = autodiff.param_shift_grad_features(rng.uniform(-1, 1, 2), np.zeros((1, 2)), CircuitSpec(2, 1), [0, 0])
        np.testing.assert_array_equal(g, 0)

    def test_matches_finite_differences(self, rng):
        for n in range(2, 5):
            spec = CircuitSpec(n, 2, "ring")
            d, theta, up = rng.uniform(-1.5, 1.5, n), rng.uniform(-3, 3, (2, n)), rng.normal(size=n)
            g = autodiff.param_shift_grad_features(d, theta, spec, up)
            np.testing.assert_allclose(g, fd_features(d, theta, spec, up, 1e-5), atol=1e-6)

    def test_linear_in_upstream(self, rng):
        spec = CircuitSpec(3, 1)
        d, theta, up = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, (1, 3)), rng.normal(size=3)
        g1 = autodiff.param_shift_grad_features(d, theta, spec, up)
        g2 = autodiff.param_shift_grad_features(d, theta, spec, 2 * up)
        np.testing.assert_array_equal(g2, 2 * g1)


class TestBackward:
    def test_full_gradient_matches_finite_differences(self, rng):
        cfg = ModelConfig(d_in=5, n_q=3, depth=2)
        model = init_params(cfg, 3)
        model = model.with_parameters({k: v + rng.normal(0, 0.5, v.shape) for k, v in model.parameters().items()})
        X = rng.normal(size=(1, 5))
        T = one_hot([1])
        analytic, fd = gradient_check(model, X, T)
        assert np.all(np.abs(analytic - fd) <= np.maximum(1e-4 * np.abs(fd), 1e-7))

    def test_baseline_gradient(self, rng):
        model = random_model(rng, head_mode="classical_baseline")
        X = rng.normal(size=(3, model.d_in))
        analytic, fd = gradient_check(model, X, one_hot([0, 1, 1]))
        assert np.all(np.abs(analytic - fd) <= np.maximum(1e-4 * np.abs(fd), 1e-7))

    def test_zero_output_layer_blocks_quantum_gradient(self, rng):
        model = init_params(ModelConfig(4, 3, 2), 1)
        p = model.parameters()
        p["W2"] = np.zeros_like(p["W2"])
        p["b2"] = np.zeros_like(p["b2"])
        model = model.with_parameters(p)
        _, grads = autodiff.backward_hybrid(model, rng.normal(size=4), [1, 0])
        np.testing.assert_array_equal(grads.d_theta, 0)
        assert np.any(grads.d_W2 != 0)

    def test_loss_matches_forward_bitwise(self, rng):
        model = init_params(ModelConfig(6, 4, 2), 5)
        x = rng.normal(size=6)
        l, _ = autodiff.backward_hybrid(model, x, [0, 1])
        probs, _ = forward(model, x)
        assert l == loss(probs, [0, 1])

    def test_evaluation_count(self, rng, monkeypatch):
        spec_args = [(2, 1), (3, 2), (4, 4)]
        for n_q, depth in spec_args:
            model = init_params(ModelConfig(5, n_q, depth), 0)
            rows = []
            real = circuit.run_batch

            def counting(features, theta, spec, **kw):
                out = real(features, theta, spec, **kw)
                rows.append(out.size // spec.n_q)
                return out

            monkeypatch.setattr(circuit, "run_batch", counting)
            _, _, _, n_evals = autodiff.backward_batch(model, rng.normal(size=(1, 5)), one_hot([1]))
            monkeypatch.undo()
            expected = 1 + 2 * (depth * n_q + n_q)
            assert sum(rows) == expected == n_evals == autodiff.evals_per_sample(model.circuit)

    def test_batch_gradient_is_mean_of_samples(self, rng):
        model = init_params(ModelConfig(4, 2, 2), 2)
        X = rng.normal(size=(3, 4))
        T = one_hot([0, 1, 1])
        _, g, _, _ = autodiff.backward_batch(model, X, T)
        singles = [autodiff.backward_hybrid(model, X[i], T[i])[1].as_dict() for i in range(3)]
        for k, v in g.as_dict().items():
            np.testing.assert_allclose(v, np.mean([s[k] for s in singles], axis=0), atol=1e-15)

    def test_dimension_mismatch(self):
        model = init_params(ModelConfig(4, 2, 1), 0)
        with pytest.raises(ValidationError):
            autodiff.backward_hybrid(model, np.zeros(5), [1, 0])

    def test_bad_target(self):
        model = init_params(ModelConfig(4, 2, 1), 0)
        with pytest.raises(ValidationError):
            autodiff.backward_hybrid(model, np.zeros(4), [1, 1])


def test_stationary_point_of_one_parameter_problem():
    # minimise (1 - <Z_0>)/2 over one angle, <Z_0> = sin(2d - theta); optimum theta = 2d - pi/2
    spec = CircuitSpec(2, 1)
    d = np.array([0.35, 0.0])
    theta = np.array([[0.0, 0.0]])
    up = np.array([-0.5, 0.0])
    for _ in range(200):
        g = autodiff.param_shift_grad_theta(d, theta, spec, up)
        theta[0, 0] -= 1.0 * g[0, 0]
    g = autodiff.param_shift_grad_theta(d, theta, spec, up)
    assert abs(g[0, 0]) < 1e-6
    assert theta[0, 0] == pytest.approx(2 * 0.35 - math.pi / 2, abs=1e-6)
