"""The hybrid model's quantum layer: angle encoding, variational block, Z readout.

Circuit layout for ``n_q`` qubits and ``depth`` layers::

    |0> -- Ry(2 d_i) -- H -- [ Ry(theta[l, i]) -- CNOT layer ] x depth -- <Z_i>

The encoding leaves qubit i in ``cos(d_i)|0> + sin(d_i)|1>``. The CNOT layer is
a chain ``i -> i+1`` or a ring (chain plus ``n_q-1 -> 0``).

All heavy lifting goes through :func:`run_batch`, which evaluates any number of
circuits with a shared topology in one vectorised pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import statevector as sv
from .errors import ConfigurationError, ValidationError


class Topology(str, Enum):
    CHAIN = "chain"
    RING = "ring"


@dataclass(frozen=True)
class CircuitSpec:
    n_q: int
    depth: int = 4
    topology: Topology = Topology.CHAIN

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        if not isinstance(self.n_q, (int, np.integer)) or self.n_q < 1:
            raise ConfigurationError(f"n_q must be a positive integer, got {self.n_q!r}", field="n_q")
        if self.n_q < 2:
            raise ConfigurationError(
                f"n_q={self.n_q}: the CNOT entangling layer needs at least 2 qubits", field="n_q"
            )
        if self.n_q > sv.MAX_QUBITS:
            raise ConfigurationError(f"n_q must be <= {sv.MAX_QUBITS}, got {self.n_q}", field="n_q")
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 1:
            raise ConfigurationError(f"depth must be >= 1, got {self.depth!r}", field="depth")

    @property
    def n_params(self) -> int:
        return self.depth * self.n_q

    def cnot_pairs(self) -> list[tuple[int, int]]:
        pairs = [(i, i + 1) for i in range(self.n_q - 1)]
        if self.topology is Topology.RING:
            pairs.append((self.n_q - 1, 0))
        return pairs


def check_features(features, n_q: int) -> np.ndarray:
    d = np.asarray(features, dtype=np.float64)
    if d.shape[-1:] != (n_q,):
        raise ValidationError(f"expected {n_q} encoded features, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValidationError("encoded features must be finite")
    return d


def check_theta(theta, spec: CircuitSpec) -> np.ndarray:
    t = np.asarray(theta, dtype=np.float64)
    if t.shape[-2:] != (spec.depth, spec.n_q):
        raise ValidationError(f"theta shape {t.shape} does not end in ({spec.depth}, {spec.n_q})")
    if not np.all(np.isfinite(t)):
        raise ValidationError("theta must be finite")
    return t


def _encode_into(amps: np.ndarray, d: np.ndarray, n: int) -> None:
    amps[...] = 0.0
    amps[..., 0] = 1.0
    for i in range(n):
        sv.ry_kernel(amps, n, i, 2.0 * d[..., i])


def _vqc_into(amps: np.ndarray, theta: np.ndarray, spec: CircuitSpec) -> None:
    n = spec.n_q
    for i in range(n):
        sv.h_kernel(amps, n, i)
    pairs = spec.cnot_pairs()
    for layer in range(spec.depth):
        for i in range(n):
            sv.ry_kernel(amps, n, i, theta[..., layer, i])
        for c, t in pairs:
            sv.cnot_kernel(amps, n, c, t)


def encode(features, n_q: int) -> sv.Statevector:
    d = check_features(features, n_q)
    if d.ndim != 1:
        raise ValidationError("encode takes a single feature vector")
    state = sv.new_zero_state(n_q)
    _encode_into(state.amplitudes, d, n_q)
    return state


def apply_vqc(state: sv.Statevector, params, spec: CircuitSpec) -> sv.Statevector:
    theta = check_theta(params, spec)
    if theta.ndim != 2:
        raise ValidationError("apply_vqc takes a single (depth, n_q) parameter matrix")
    if state.num_qubits != spec.n_q:
        raise ValidationError(f"state has {state.num_qubits} qubits, spec has {spec.n_q}")
    _vqc_into(state.amplitudes, theta, spec)
    return state


def forward_quantum(features, params, spec: CircuitSpec) -> np.ndarray:
    return sv.expect_z_all(apply_vqc(encode(features, spec.n_q), params, spec))


def run_batch(features, theta, spec: CircuitSpec, max_chunk_bytes: int = 64 << 20) -> np.ndarray:
    """Z expectations for a batch of circuits.

    ``features`` has shape ``(..., n_q)`` and ``theta`` shape ``(..., depth, n_q)``;
    the leading axes broadcast against each other. Returns ``(..., n_q)``.
    Work is split into chunks so the amplitude buffer stays under
    ``max_chunk_bytes``.
    """
    d = check_features(features, spec.n_q)
    t = check_theta(theta, spec)
    lead = np.broadcast_shapes(d.shape[:-1], t.shape[:-2])
    d = np.broadcast_to(d, lead + d.shape[-1:]).reshape(-1, spec.n_q)
    t = np.broadcast_to(t, lead + t.shape[-2:]).reshape(-1, spec.depth, spec.n_q)
    total = d.shape[0]
    dim = 1 << spec.n_q
    chunk = max(1, max_chunk_bytes // (16 * dim))
    out = np.empty((total, spec.n_q))
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        amps = np.empty((stop - start, dim), dtype=np.complex128)
        _encode_into(amps, d[start:stop], spec.n_q)
        _vqc_into(amps, t[start:stop], spec)
        out[start:stop] = sv.expect_z_kernel(amps, spec.n_q)
    return out.reshape(lead + (spec.n_q,))
