"""Dense statevector engine for the H / Ry / CNOT gate set.

Amplitude index convention is little-endian: qubit ``j`` is bit ``j`` of the
index, so qubit 0 toggles between neighbouring amplitudes.

Two layers live here. The ``*_kernel`` functions act in place on a raw array
of shape ``(..., 2**n)``; any leading axes are treated as a batch of
independent registers, which is how the circuit and autodiff modules evaluate
many shifted circuits in one pass. The :class:`Statevector` wrapper and the
``apply_*`` functions give the single-register API with validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, QubitIndexError, ValidationError

MAX_QUBITS = 24
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class GateKind(str, Enum):
    H = "H"
    RY = "Ry"
    CNOT = "CNOT"


@dataclass(frozen=True)
class GateOp:
    """One gate in a circuit. ``control`` is only set for CNOT, ``angle`` only for Ry."""

    kind: GateKind
    target: int
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind is GateKind.CNOT:
            if self.control is None:
                raise ValidationError("CNOT needs a control qubit")
            if self.control == self.target:
                raise ValidationError(f"CNOT control and target are both {self.target}")
        elif self.control is not None:
            raise ValidationError(f"{self.kind.value} takes no control qubit")
        if self.kind is GateKind.RY:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValidationError(f"Ry angle must be finite, got {self.angle!r}")
        elif self.angle is not None:
            raise ValidationError(f"{self.kind.value} takes no angle")

    def inverse(self) -> "GateOp":
        if self.kind is GateKind.RY:
            return GateOp(GateKind.RY, self.target, angle=-self.angle)
        return self

    def qubits(self) -> tuple[int, ...]:
        return (self.target,) if self.control is None else (self.control, self.target)


# --------------------------------------------------------------------------
# batched in-place kernels


def _pair_view(amps: np.ndarray, n: int, q: int) -> np.ndarray:
    # (..., high, bit q, low); a view, never a copy
    return amps.reshape(amps.shape[:-1] + (1 << (n - 1 - q), 2, 1 << q))


def h_kernel(amps: np.ndarray, n: int, target: int) -> None:
    v = _pair_view(amps, n, target)
    a0 = v[..., 0, :].copy()
    a1 = v[..., 1, :]
    v[..., 0, :] += a1
    v[..., 0, :] *= _INV_SQRT2
    a0 -= a1
    a0 *= _INV_SQRT2
    v[..., 1, :] = a0


def ry_kernel(amps: np.ndarray, n: int, target: int, theta) -> None:
    """Apply Ry(theta) to ``target``.

    ``theta`` is a scalar or an array whose shape is exactly the batch shape
    ``amps.shape[:-1]`` (one angle per register).
    """
    half = np.asarray(theta, dtype=np.float64) * 0.5
    c = np.cos(half).reshape(half.shape + (1, 1))
    s = np.sin(half).reshape(half.shape + (1, 1))
    v = _pair_view(amps, n, target)
    a0 = v[..., 0, :].copy()
    a1 = v[..., 1, :].copy()
    v[..., 0, :] = c * a0 - s * a1
    v[..., 1, :] = s * a0 + c * a1


def cnot_kernel(amps: np.ndarray, n: int, control: int, target: int) -> None:
    hi, lo = max(control, target), min(control, target)
    shape = amps.shape[:-1] + (1 << (n - 1 - hi), 2, 1 << (hi - 1 - lo), 2, 1 << lo)
    v = amps.reshape(shape)
    if control > target:
        sel0 = (Ellipsis, 1, slice(None), 0, slice(None))
        sel1 = (Ellipsis, 1, slice(None), 1, slice(None))
    else:
        sel0 = (Ellipsis, 0, slice(None), 1, slice(None))
        sel1 = (Ellipsis, 1, slice(None), 1, slice(None))
    tmp = v[sel0].copy()
    v[sel0] = v[sel1]
    v[sel1] = tmp


def expect_z_kernel(amps: np.ndarray, n: int) -> np.ndarray:
    """Per-qubit <Z> for every register in the batch; output shape ``(..., n)``."""
    probs = amps.real * amps.real + amps.imag * amps.imag
    out = np.empty(amps.shape[:-1] + (n,), dtype=np.float64)
    for q in range(n):
        v = _pair_view(probs, n, q)
        p = v.sum(axis=-1).sum(axis=-2)
        out[..., q] = p[..., 0] - p[..., 1]
    return out


# --------------------------------------------------------------------------
# single-register API


@dataclass
class Statevector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_num_qubits(self.num_qubits)
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise ValidationError(
                f"expected {1 << self.num_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> "Statevector":
        return Statevector(self.num_qubits, self.amplitudes.copy())


def _check_num_qubits(n) -> None:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise ConfigurationError(f"num_qubits must be in 1..{MAX_QUBITS}, got {n!r}", field="num_qubits")


def _check_qubit(state: Statevector, q, name: str) -> None:
    if not isinstance(q, (int, np.integer)) or not 0 <= q < state.num_qubits:
        raise QubitIndexError(f"{name} qubit {q!r} out of range for {state.num_qubits} qubits")


def new_zero_state(num_qubits: int) -> Statevector:
    _check_num_qubits(num_qubits)
    amps = np.zeros(1 << num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(num_qubits, amps)


def from_amplitudes(amplitudes, *, normalize: bool = False) -> Statevector:
    amps = np.array(amplitudes, dtype=np.complex128).ravel()
    n = amps.size.bit_length() - 1
    if amps.size == 0 or (1 << n) != amps.size:
        raise ValidationError(f"amplitude count {amps.size} is not a power of two")
    if normalize:
        amps /= np.linalg.norm(amps)
    return Statevector(n, amps)


def apply_h(state: Statevector, target: int) -> Statevector:
    _check_qubit(state, target, "target")
    h_kernel(state.amplitudes, state.num_qubits, target)
    return state


def apply_ry(state: Statevector, target: int, theta: float) -> Statevector:
    _check_qubit(state, target, "target")
    if not math.isfinite(theta):
        raise ValidationError(f"Ry angle must be finite, got {theta!r}")
    ry_kernel(state.amplitudes, state.num_qubits, target, theta)
    return state


def apply_cnot(state: Statevector, control: int, target: int) -> Statevector:
    _check_qubit(state, control, "control")
    _check_qubit(state, target, "target")
    if control == target:
        raise ValidationError(f"CNOT control and target are both {target}")
    cnot_kernel(state.amplitudes, state.num_qubits, control, target)
    return state


def apply_op(state: Statevector, op: GateOp) -> Statevector:
    if op.kind is GateKind.H:
        return apply_h(state, op.target)
    if op.kind is GateKind.RY:
        return apply_ry(state, op.target, op.angle)
    return apply_cnot(state, op.control, op.target)


def run_ops(ops, num_qubits: int, state: Statevector | None = None) -> Statevector:
    """Apply ``ops`` in order, starting from ``|0...0>`` unless a state is given."""
    state = new_zero_state(num_qubits) if state is None else state
    for op in ops:
        apply_op(state, op)
    return state


def expect_z(state: Statevector, target: int) -> float:
    _check_qubit(state, target, "target")
    v = _pair_view(np.abs(state.amplitudes) ** 2, state.num_qubits, target)
    return float(v[:, 0, :].sum() - v[:, 1, :].sum())


def expect_z_all(state: Statevector) -> np.ndarray:
    return expect_z_kernel(state.amplitudes, state.num_qubits)
