"""Exact gradients of the half-squared-error loss.

The quantum layer is treated as a black box that returns Z expectations. Its
derivatives come from the parameter-shift rule: for any Ry angle ``a``,

    d<Z_k>/da = (<Z_k>(a + pi/2) - <Z_k>(a - pi/2)) / 2

which is exact, not an approximation. Encoding rotations use angle ``2 d``,
so the derivative with respect to ``d`` picks up a factor of 2.

For one sample the backward pass runs ``1 + 2 * (depth * n_q + n_q)``
circuits: the primal, then a +/- pair per variational angle and per encoding
angle. All of them go through :func:`qhybrid.circuit.run_batch` in a single
call; sums over the batch use a fixed order so results do not depend on
chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import circuit
from .circuit import CircuitSpec
from .errors import ValidationError
from .model import HALF_PI, HeadMode, HybridModel, check_inputs, check_target, softmax

SHIFT = math.pi / 2


def evals_per_sample(spec: CircuitSpec) -> int:
    return 1 + 2 * (spec.depth * spec.n_q + spec.n_q)


@dataclass
class GradientBundle:
    d_W1: np.ndarray
    d_b1: np.ndarray
    d_theta: np.ndarray
    d_features: np.ndarray
    d_W2: np.ndarray
    d_b2: np.ndarray
    d_Wh: np.ndarray | None = None
    d_bh: np.ndarray | None = None

    def as_dict(self) -> dict[str, np.ndarray]:
        """Gradients keyed like :meth:`HybridModel.parameters`."""
        g = {"W1": self.d_W1, "b1": self.d_b1, "theta": self.d_theta, "W2": self.d_W2, "b2": self.d_b2}
        if self.d_Wh is not None:
            g["Wh"] = self.d_Wh
            g["bh"] = self.d_bh
        return g


def _shift_table(spec: CircuitSpec, theta: np.ndarray):
    """Angle offsets for the primal and every shifted circuit of one sample.

    Row 0 is the primal. Rows ``1 .. 2P`` shift one variational angle (+ then
    -), rows after that shift one encoding angle. Encoding shifts are given in
    feature units: +/- pi/2 on the rotation ``2 d`` is +/- pi/4 on ``d``.
    """
    n_q, P = spec.n_q, spec.n_params
    K = 1 + 2 * P + 2 * n_q
    theta_rows = np.broadcast_to(theta, (K, spec.depth, n_q)).copy()
    flat = theta_rows.reshape(K, P)
    idx = np.arange(P)
    flat[1 + idx, idx] += SHIFT
    flat[1 + P + idx, idx] -= SHIFT
    feat_offsets = np.zeros((K, n_q))
    base = 1 + 2 * P
    j = np.arange(n_q)
    feat_offsets[base + j, j] = SHIFT / 2
    feat_offsets[base + n_q + j, j] = -SHIFT / 2
    return theta_rows, feat_offsets


def quantum_jacobians(features, theta, spec: CircuitSpec):
    """Primal outputs and full Jacobians of the quantum layer for a batch.

    Returns ``(y, jac_theta, jac_features, n_evals)`` with shapes ``(B, n_q)``,
    ``(B, n_q, depth * n_q)`` and ``(B, n_q, n_q)``. Entry ``[b, k, j]`` is the
    derivative of output k with respect to parameter j.
    """
    d = np.atleast_2d(circuit.check_features(features, spec.n_q))
    t = circuit.check_theta(theta, spec)
    n_q, P = spec.n_q, spec.n_params
    theta_rows, feat_offsets = _shift_table(spec, t)
    out = circuit.run_batch(d[:, None, :] + feat_offsets[None], theta_rows[None], spec)
    base = 1 + 2 * P
    jac_theta = 0.5 * (out[:, 1 : 1 + P] - out[:, 1 + P : base])
    # chain factor 2 from rotation angle = 2 d
    jac_feat = out[:, base : base + n_q] - out[:, base + n_q :]
    return out[:, 0], jac_theta.transpose(0, 2, 1), jac_feat.transpose(0, 2, 1), out.shape[0] * out.shape[1]


def _check_upstream(upstream, n_q: int) -> np.ndarray:
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != (n_q,):
        raise ValidationError(f"upstream must have length {n_q}, got shape {g.shape}")
    return g


def param_shift_grad_theta(features, params, spec: CircuitSpec, upstream) -> np.ndarray:
    """Gradient of ``upstream . <Z>`` with respect to the variational angles."""
    g = _check_upstream(upstream, spec.n_q)
    _, jac, _, _ = quantum_jacobians(features, params, spec)
    return (g @ jac[0]).reshape(spec.depth, spec.n_q)


def param_shift_grad_features(features, params, spec: CircuitSpec, upstream) -> np.ndarray:
    """Gradient of ``upstream . <Z>`` with respect to the encoded features ``d``."""
    g = _check_upstream(upstream, spec.n_q)
    _, _, jac, _ = quantum_jacobians(features, params, spec)
    return g @ jac[0]


def backward_batch(model: HybridModel, X, targets):
    """Mean loss over a batch and the gradient of that mean.

    Returns ``(loss, grads, probs, quantum_evals)``. ``grads.d_features`` holds
    per-sample gradients of each sample's own loss with respect to the encoded
    features, shape ``(B, n_q)``.
    """
    X = np.atleast_2d(check_inputs(model, X))
    T = np.atleast_2d(check_target(targets))
    if X.shape[0] != T.shape[0]:
        raise ValidationError(f"{X.shape[0]} inputs but {T.shape[0]} targets")
    B = X.shape[0]
    hybrid = model.head_mode is HeadMode.HYBRID

    pre = model.input_pool.preactivation(X)
    tanh_pre = np.tanh(pre)
    d = HALF_PI * tanh_pre
    if hybrid:
        mid, jac_theta, jac_feat, n_evals = quantum_jacobians(d, model.vqc, model.circuit)
    else:
        hidden = model.classical_hidden
        mid = np.tanh(hidden.preactivation(d))
        n_evals = 0

    W2 = model.output_pool.W
    probs = softmax(model.output_pool.preactivation(mid))
    loss = float(np.mean(0.5 * np.sum((probs - T) ** 2, axis=-1)))

    # per-sample gradients first; the batch mean is taken when reducing
    g_p = probs - T
    g_z = probs * (g_p - np.sum(probs * g_p, axis=-1, keepdims=True))
    g_mid = g_z @ W2
    d_Wh = d_bh = None
    if hybrid:
        d_theta = np.einsum("bkp,bk->p", jac_theta, g_mid).reshape(model.vqc.shape) / B
        g_d = np.einsum("bkj,bk->bj", jac_feat, g_mid)
    else:
        g_h = g_mid * (1.0 - mid * mid)
        d_Wh = g_h.T @ d / B
        d_bh = g_h.sum(axis=0) / B
        g_d = g_h @ hidden.W
        d_theta = np.zeros_like(model.vqc)
    g_pre = g_d * HALF_PI * (1.0 - tanh_pre * tanh_pre)

    grads = GradientBundle(
        d_W1=g_pre.T @ X / B,
        d_b1=g_pre.sum(axis=0) / B,
        d_theta=d_theta,
        d_features=g_d,
        d_W2=g_z.T @ mid / B,
        d_b2=g_z.sum(axis=0) / B,
        d_Wh=d_Wh,
        d_bh=d_bh,
    )
    return loss, grads, probs, n_evals


def backward_hybrid(model: HybridModel, x, target) -> tuple[float, GradientBundle]:
    """Loss and full gradient for a single labelled input."""
    x = check_inputs(model, x)
    if x.ndim != 1:
        raise ValidationError("backward_hybrid takes one input vector; use backward_batch for batches")
    loss, grads, _, _ = backward_batch(model, x[None], np.asarray(target)[None])
    grads.d_features = grads.d_features[0]
    return loss, grads
