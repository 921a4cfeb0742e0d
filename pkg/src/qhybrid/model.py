"""End-to-end binary classifier: input pooling, middle layer, output pooling, softmax.

The middle layer is either the quantum circuit (``hybrid``) or a plain
``tanh`` dense layer of the same width (``classical_baseline``). Everything
around it is shared, so the two heads can be compared like for like.

Checkpoint format (``QHM1``), all little-endian::

    b"QHM1"
    u32 d_in, u32 n_q, u32 depth, u32 topology (0 chain, 1 ring),
    u32 head_mode (0 hybrid, 1 classical_baseline)
    f64 blocks: W1 (n_q x d_in, row-major), b1 (n_q), theta (depth x n_q,
    row-major), W2 (2 x n_q, row-major), b2 (2)
    classical_baseline only: Wh (n_q x n_q, row-major), bh (n_q)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import circuit
from ._fileio import atomic_write_bytes
from .circuit import CircuitSpec, Topology
from .errors import (
    BadMagicError,
    ConfigurationError,
    DataFormatError,
    TrailingBytesError,
    TruncatedFileError,
    ValidationError,
)

HALF_PI = math.pi / 2
N_CLASSES = 2
QUANTUM_INIT_SCALE = 0.01


class Activation(str, Enum):
    TANH_HALFPI = "tanh_halfpi"
    TANH = "tanh"
    IDENTITY = "identity"
    SOFTMAX = "softmax"


class HeadMode(str, Enum):
    HYBRID = "hybrid"
    CLASSICAL_BASELINE = "classical_baseline"


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class DenseLayer:
    W: np.ndarray
    b: np.ndarray
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.activation = Activation(self.activation)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValidationError(f"inconsistent layer shapes W{self.W.shape} b{self.b.shape}")
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))):
            raise ValidationError("layer parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    def preactivation(self, x: np.ndarray) -> np.ndarray:
        return x @ self.W.T + self.b

    def __call__(self, x: np.ndarray) -> np.ndarray:
        z = self.preactivation(x)
        if self.activation is Activation.TANH_HALFPI:
            return HALF_PI * np.tanh(z)
        if self.activation is Activation.TANH:
            return np.tanh(z)
        if self.activation is Activation.SOFTMAX:
            return softmax(z)
        return z


@dataclass(frozen=True)
class ModelConfig:
    d_in: int
    n_q: int
    depth: int = 4
    topology: Topology = Topology.CHAIN
    head_mode: HeadMode = HeadMode.HYBRID

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        object.__setattr__(self, "head_mode", HeadMode(self.head_mode))
        if not isinstance(self.d_in, (int, np.integer)) or self.d_in < 1:
            raise ConfigurationError(f"d_in must be a positive integer, got {self.d_in!r}", field="d_in")
        CircuitSpec(self.n_q, self.depth, self.topology)

    @property
    def circuit(self) -> CircuitSpec:
        return CircuitSpec(self.n_q, self.depth, self.topology)


@dataclass
class HybridModel:
    input_pool: DenseLayer
    circuit: CircuitSpec
    vqc: np.ndarray
    output_pool: DenseLayer
    head_mode: HeadMode = HeadMode.HYBRID
    classical_hidden: DenseLayer | None = None

    def __post_init__(self):
        self.head_mode = HeadMode(self.head_mode)
        self.vqc = circuit.check_theta(self.vqc, self.circuit)
        if self.vqc.ndim != 2:
            raise ValidationError("vqc must be a single (depth, n_q) matrix")
        n_q = self.circuit.n_q
        if self.input_pool.out_dim != n_q:
            raise ValidationError(f"input pool emits {self.input_pool.out_dim} features, circuit has {n_q} qubits")
        if self.input_pool.activation is not Activation.TANH_HALFPI:
            raise ValidationError("input pool must use the tanh_halfpi activation")
        if self.output_pool.W.shape != (N_CLASSES, n_q):
            raise ValidationError(f"output pool must map {n_q} -> {N_CLASSES}, got W{self.output_pool.W.shape}")
        if self.head_mode is HeadMode.CLASSICAL_BASELINE:
            h = self.classical_hidden
            if h is None or h.W.shape != (n_q, n_q) or h.activation is not Activation.TANH:
                raise ValidationError("classical_baseline needs a tanh hidden layer of shape (n_q, n_q)")

    @property
    def d_in(self) -> int:
        return self.input_pool.in_dim

    @property
    def config(self) -> ModelConfig:
        return ModelConfig(self.d_in, self.circuit.n_q, self.circuit.depth, self.circuit.topology, self.head_mode)

    def parameters(self) -> dict[str, np.ndarray]:
        """Trainable arrays by name, in checkpoint order. Arrays are not copied."""
        p = {
            "W1": self.input_pool.W,
            "b1": self.input_pool.b,
            "theta": self.vqc,
            "W2": self.output_pool.W,
            "b2": self.output_pool.b,
        }
        if self.classical_hidden is not None:
            p["Wh"] = self.classical_hidden.W
            p["bh"] = self.classical_hidden.b
        return p

    def with_parameters(self, params: dict[str, np.ndarray]) -> "HybridModel":
        hidden = self.classical_hidden
        if hidden is not None:
            hidden = replace(hidden, W=np.array(params["Wh"]), b=np.array(params["bh"]))
        return HybridModel(
            input_pool=replace(self.input_pool, W=np.array(params["W1"]), b=np.array(params["b1"])),
            circuit=self.circuit,
            vqc=np.array(params["theta"]),
            output_pool=replace(self.output_pool, W=np.array(params["W2"]), b=np.array(params["b2"])),
            head_mode=self.head_mode,
            classical_hidden=hidden,
        )

    def copy(self) -> "HybridModel":
        return self.with_parameters(self.parameters())


@dataclass
class ForwardCache:
    """Intermediates of a batched forward pass, kept for the backward pass."""

    x: np.ndarray
    pool_pre: np.ndarray
    features: np.ndarray
    middle: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    quantum_evals: int = 0


def check_inputs(model: HybridModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (model.d_in,):
        raise ValidationError(f"input has dimension {x.shape[-1:]} but the model expects {model.d_in}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("inputs must be finite")
    return x


def forward_batch(model: HybridModel, X) -> ForwardCache:
    X = np.atleast_2d(check_inputs(model, X))
    pre = model.input_pool.preactivation(X)
    d = HALF_PI * np.tanh(pre)
    if model.head_mode is HeadMode.HYBRID:
        mid = circuit.run_batch(d, model.vqc, model.circuit)
        evals = X.shape[0]
    else:
        mid = model.classical_hidden(d)
        evals = 0
    logits = model.output_pool.preactivation(mid)
    return ForwardCache(X, pre, d, mid, logits, softmax(logits), evals)


def forward(model: HybridModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Class probabilities and the quantum layer's output for one input.

    The second element is empty for the classical baseline.
    """
    x = check_inputs(model, x)
    if x.ndim != 1:
        raise ValidationError("forward takes a single input vector; use forward_batch for batches")
    cache = forward_batch(model, x)
    q = cache.middle[0] if model.head_mode is HeadMode.HYBRID else np.empty(0)
    return cache.probs[0], q


def predict_from_probs(probs: np.ndarray) -> np.ndarray:
    # argmax returns the first maximum, so exact ties go to class 0
    return np.argmax(probs, axis=-1)


def predict(model: HybridModel, x) -> int:
    probs, _ = forward(model, x)
    return int(predict_from_probs(probs))


def predict_batch(model: HybridModel, X) -> np.ndarray:
    return predict_from_probs(forward_batch(model, X).probs)


def one_hot(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if not np.all((labels == 0) | (labels == 1)):
        raise ValidationError("labels must be 0 or 1")
    return np.eye(N_CLASSES)[labels.astype(np.int64)]


def check_target(target) -> np.ndarray:
    t = np.asarray(target, dtype=np.float64)
    if t.shape[-1:] != (N_CLASSES,):
        raise ValidationError(f"target must be a one-hot pair, got shape {t.shape}")
    if not (np.all((t == 0) | (t == 1)) and np.all(t.sum(axis=-1) == 1)):
        raise ValidationError(f"target must be one-hot, got {t}")
    return t


def loss(probs, target_onehot) -> float:
    """Half squared error between the predicted distribution and a one-hot target."""
    t = check_target(target_onehot)
    p = np.asarray(probs, dtype=np.float64)
    if p.shape != t.shape:
        raise ValidationError(f"probs shape {p.shape} does not match target shape {t.shape}")
    return float(np.mean(0.5 * np.sum((p - t) ** 2, axis=-1)))


def _glorot(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    s = math.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-s, s, size=(out_dim, in_dim))


def init_params(config: ModelConfig, seed: int) -> HybridModel:
    """Fresh model. Draw order is fixed (W1, theta, W2, Wh) so both head modes share W1/W2 for a seed."""
    rng = np.random.default_rng(seed)
    n_q = config.n_q
    W1 = _glorot(rng, n_q, config.d_in)
    theta = rng.uniform(-QUANTUM_INIT_SCALE, QUANTUM_INIT_SCALE, size=(config.depth, n_q))
    W2 = _glorot(rng, N_CLASSES, n_q)
    hidden = None
    if config.head_mode is HeadMode.CLASSICAL_BASELINE:
        hidden = DenseLayer(_glorot(rng, n_q, n_q), np.zeros(n_q), Activation.TANH)
    return HybridModel(
        input_pool=DenseLayer(W1, np.zeros(n_q), Activation.TANH_HALFPI),
        circuit=config.circuit,
        vqc=theta,
        output_pool=DenseLayer(W2, np.zeros(N_CLASSES), Activation.IDENTITY),
        head_mode=config.head_mode,
        classical_hidden=hidden,
    )


# --------------------------------------------------------------------------
# checkpoint I/O

CHECKPOINT_MAGIC = b"QHM1"
_HEADER = struct.Struct("<4s5I")
_TOPOLOGY_CODES = {Topology.CHAIN: 0, Topology.RING: 1}
_HEAD_CODES = {HeadMode.HYBRID: 0, HeadMode.CLASSICAL_BASELINE: 1}


def _block_shapes(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    n_q = config.n_q
    shapes = [
        ("W1", (n_q, config.d_in)),
        ("b1", (n_q,)),
        ("theta", (config.depth, n_q)),
        ("W2", (N_CLASSES, n_q)),
        ("b2", (N_CLASSES,)),
    ]
    if config.head_mode is HeadMode.CLASSICAL_BASELINE:
        shapes += [("Wh", (n_q, n_q)), ("bh", (n_q,))]
    return shapes


def checkpoint_bytes(model: HybridModel) -> bytes:
    cfg = model.config
    parts = [
        _HEADER.pack(
            CHECKPOINT_MAGIC, cfg.d_in, cfg.n_q, cfg.depth,
            _TOPOLOGY_CODES[cfg.topology], _HEAD_CODES[cfg.head_mode],
        )
    ]
    params = model.parameters()
    for name, shape in _block_shapes(cfg):
        parts.append(np.ascontiguousarray(params[name], dtype="<f8").reshape(shape).tobytes())
    return b"".join(parts)


def model_from_bytes(buf: bytes) -> HybridModel:
    if len(buf) < 4 or buf[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"not a QHM1 checkpoint (magic {buf[:4]!r})")
    if len(buf) < _HEADER.size:
        raise TruncatedFileError(f"checkpoint header truncated at byte {len(buf)}", offset=len(buf))
    _, d_in, n_q, depth, topo, head = _HEADER.unpack_from(buf)
    topologies = {v: k for k, v in _TOPOLOGY_CODES.items()}
    heads = {v: k for k, v in _HEAD_CODES.items()}
    if topo not in topologies or head not in heads:
        raise DataFormatError(f"unknown topology code {topo} or head mode code {head}")
    cfg = ModelConfig(d_in, n_q, depth, topologies[topo], heads[head])
    offset = _HEADER.size
    params = {}
    for name, shape in _block_shapes(cfg):
        nbytes = 8 * math.prod(shape)
        if offset + nbytes > len(buf):
            raise TruncatedFileError(
                f"checkpoint truncated inside block {name} at byte {len(buf)} (block starts at {offset})",
                offset=len(buf),
            )
        params[name] = np.frombuffer(buf, dtype="<f8", count=math.prod(shape), offset=offset).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(buf):
        raise TrailingBytesError(f"{len(buf) - offset} trailing bytes after byte {offset}", offset=offset)
    hidden = None
    if cfg.head_mode is HeadMode.CLASSICAL_BASELINE:
        hidden = DenseLayer(params["Wh"], params["bh"], Activation.TANH)
    return HybridModel(
        input_pool=DenseLayer(params["W1"], params["b1"], Activation.TANH_HALFPI),
        circuit=cfg.circuit,
        vqc=params["theta"],
        output_pool=DenseLayer(params["W2"], params["b2"], Activation.IDENTITY),
        head_mode=cfg.head_mode,
        classical_hidden=hidden,
    )


def save_checkpoint(model: HybridModel, path) -> None:
    atomic_write_bytes(path, checkpoint_bytes(model))


def load_checkpoint(path) -> HybridModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
