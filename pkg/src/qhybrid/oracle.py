"""Brute-force reference implementations used to check the fast paths.

Nothing here touches the statevector kernels: every gate is expanded to a
full ``2**n x 2**n`` matrix with explicit Kronecker products, and gradients
come from central finite differences. Slow on purpose.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ResourceError, ValidationError
from .statevector import GateKind, GateOp

MAX_ORACLE_QUBITS = 10

_I2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)
_P0 = np.array([[1, 0], [0, 0]], dtype=np.complex128)
_P1 = np.array([[0, 0], [0, 1]], dtype=np.complex128)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def embed(factors: dict[int, np.ndarray], n: int) -> np.ndarray:
    """Tensor product with ``factors[q]`` on qubit q and identity elsewhere.

    Qubit 0 is the least-significant index bit, so it is the rightmost factor.
    """
    out = np.ones((1, 1), dtype=np.complex128)
    for q in reversed(range(n)):
        out = np.kron(out, factors.get(q, _I2))
    return out


def gate_matrix(op: GateOp, n: int) -> np.ndarray:
    for q in op.qubits():
        if not 0 <= q < n:
            raise ValidationError(f"qubit {q} out of range for {n} qubits")
    if op.kind is GateKind.H:
        return embed({op.target: _H}, n)
    if op.kind is GateKind.RY:
        return embed({op.target: ry_matrix(op.angle)}, n)
    # CNOT = P0(control) (x) I + P1(control) (x) X(target)
    return embed({op.control: _P0}, n) + embed({op.control: _P1, op.target: _X}, n)


def dense_circuit(ops, n: int) -> np.ndarray:
    """Unitary of ``ops`` applied left to right (first op acts first)."""
    if n > MAX_ORACLE_QUBITS:
        raise ResourceError(f"dense oracle limited to {MAX_ORACLE_QUBITS} qubits, asked for {n}")
    u = np.eye(1 << n, dtype=np.complex128)
    for op in ops:
        u = gate_matrix(op, n) @ u
    return u


def is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    return bool(np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=atol, rtol=0))


def dense_state(ops, n: int) -> np.ndarray:
    return dense_circuit(ops, n)[:, 0]


def dense_expect_z(psi: np.ndarray, n: int) -> np.ndarray:
    return np.array([np.vdot(psi, embed({q: _Z}, n) @ psi).real for q in range(n)])


def encoding_product_state(features) -> np.ndarray:
    """Closed-form angle-encoded state: kron of [cos d_i, sin d_i] with qubit 0 rightmost."""
    out = np.ones(1)
    for d in reversed(list(features)):
        out = np.kron(out, np.array([np.cos(d), np.sin(d)]))
    return out


def hybrid_circuit_ops(features, theta, topology: str = "chain") -> list[GateOp]:
    """Gate list for encoding + H layer + ``depth`` x [Ry layer, CNOT layer]."""
    theta = np.asarray(theta, dtype=float)
    n = len(features)
    ops = [GateOp(GateKind.RY, i, angle=2.0 * float(d)) for i, d in enumerate(features)]
    ops += [GateOp(GateKind.H, i) for i in range(n)]
    pairs = [(i, i + 1) for i in range(n - 1)]
    if topology == "ring":
        pairs.append((n - 1, 0))
    for layer in theta:
        ops += [GateOp(GateKind.RY, i, angle=float(t)) for i, t in enumerate(layer)]
        ops += [GateOp(GateKind.CNOT, t, control=c) for c, t in pairs]
    return ops


def dense_forward(features, theta, topology: str = "chain") -> np.ndarray:
    n = len(features)
    psi = dense_state(hybrid_circuit_ops(features, theta, topology), n)
    return dense_expect_z(psi, n)


def fd_gradient(loss_fn, p, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat parameter vector."""
    if not h > 0:
        raise ValidationError(f"step must be positive, got {h}")
    p = np.array(p, dtype=np.float64).ravel()
    grad = np.empty_like(p)
    for i in range(p.size):
        orig = p[i]
        p[i] = orig + h
        fp = loss_fn(p.copy())
        p[i] = orig - h
        fm = loss_fn(p.copy())
        p[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"loss not finite at coordinate {i}")
        grad[i] = (fp - fm) / (2 * h)
    return grad
