"""Hybrid classical-quantum text-embedding classifier.

A dense statevector simulator (H, Ry, CNOT, Pauli-Z readout) sits between two
classical pooling layers and is trained end to end with exact
parameter-shift gradients.
"""

from .circuit import CircuitSpec, Topology, encode, apply_vqc, forward_quantum
from .model import HeadMode, HybridModel, ModelConfig, forward, init_params, loss, predict
from .statevector import GateKind, GateOp, Statevector, new_zero_state
from .training import TrainConfig, TrainReport, evaluate, train

__version__ = "0.1.0"
