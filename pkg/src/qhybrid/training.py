"""Mini-batch training, optimisers and classification metrics."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import autodiff
from .data import EmbeddingDataset, split
from .errors import ConfigurationError, ValidationError
from .model import HeadMode, HybridModel, forward_batch, one_hot, predict_from_probs

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Optimizer(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: Optimizer = Optimizer.ADAM
    seed: int = 0
    val_fraction: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        for name in ("epochs", "batch_size"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}", field=name)
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ConfigurationError(f"learning_rate must be finite and >= 0, got {self.learning_rate}", field="learning_rate")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigurationError(f"seed must be a non-negative integer, got {self.seed!r}", field="seed")
        if not 0 < self.val_fraction < 1:
            raise ConfigurationError(f"val_fraction must be in (0, 1), got {self.val_fraction}", field="val_fraction")


# --------------------------------------------------------------------------
# optimisers


def sgd_step(params: dict, grads: dict, lr: float) -> dict:
    _check_shapes(params, grads)
    return {k: p - lr * grads[k] for k, p in params.items()}


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> dict:
    """One bias-corrected Adam update. ``state`` is advanced in place."""
    _check_shapes(params, grads)
    state.t += 1
    c1 = 1.0 - ADAM_BETA1**state.t
    c2 = 1.0 - ADAM_BETA2**state.t
    out = {}
    for k, p in params.items():
        g = grads[k]
        m = ADAM_BETA1 * state.m.get(k, np.zeros_like(p)) + (1 - ADAM_BETA1) * g
        v = ADAM_BETA2 * state.v.get(k, np.zeros_like(p)) + (1 - ADAM_BETA2) * g * g
        state.m[k], state.v[k] = m, v
        out[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
    return out


def _check_shapes(params: dict, grads: dict) -> None:
    if params.keys() != grads.keys():
        raise ValidationError(f"parameter names {sorted(params)} do not match gradient names {sorted(grads)}")
    for k, p in params.items():
        if np.shape(grads[k]) != np.shape(p):
            raise ValidationError(f"gradient for {k} has shape {np.shape(grads[k])}, parameter has {np.shape(p)}")


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    macro_f1: float
    confusion: np.ndarray  # confusion[true, predicted]


def confusion_matrix(labels, predictions) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    cm = np.zeros((2, 2), dtype=np.int64)
    np.add.at(cm, (labels, predictions), 1)
    return cm


def macro_f1(cm: np.ndarray) -> float:
    scores = []
    for c in range(cm.shape[0]):
        tp = cm[c, c]
        fp = cm[:, c].sum() - tp
        fn = cm[c, :].sum() - tp
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def metrics_from_predictions(labels, predictions) -> EvalResult:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValidationError("cannot compute metrics on an empty dataset")
    cm = confusion_matrix(labels, predictions)
    return EvalResult(float(np.trace(cm) / cm.sum()), macro_f1(cm), cm)


def _probs(model: HybridModel, X: np.ndarray, chunk: int = 256) -> np.ndarray:
    return np.concatenate([forward_batch(model, X[i : i + chunk]).probs for i in range(0, len(X), chunk)])


def evaluate(model: HybridModel, dataset: EmbeddingDataset) -> EvalResult:
    if len(dataset) == 0:
        raise ValidationError("cannot evaluate on an empty dataset")
    preds = predict_from_probs(_probs(model, dataset.features))
    return metrics_from_predictions(dataset.labels, preds)


def dataset_loss(model: HybridModel, dataset: EmbeddingDataset) -> float:
    p = _probs(model, dataset.features)
    return float(np.mean(0.5 * np.sum((p - one_hot(dataset.labels)) ** 2, axis=-1)))


# --------------------------------------------------------------------------
# training loop


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    train_f1: float
    val_acc: float | None
    val_f1: float | None
    wall_seconds: float
    quantum_evals: int


@dataclass
class TrainReport:
    config: TrainConfig
    n_q: int
    depth: int
    head_mode: str
    n_train: int
    n_val: int
    split_hash: str
    initial_train_loss: float
    epochs: list[EpochRecord] = field(default_factory=list)
    steps: int = 0
    total_quantum_evals: int = 0
    amplitude_array_size: int = 0

    @property
    def final(self) -> EpochRecord:
        return self.epochs[-1]

    def summary(self) -> dict:
        last = self.final
        return {
            "n_q": self.n_q,
            "depth": self.depth,
            "head_mode": self.head_mode,
            "seed": self.config.seed,
            "initial_train_loss": self.initial_train_loss,
            "train_loss": last.train_loss,
            "train_acc": last.train_acc,
            "train_f1": last.train_f1,
            "val_acc": last.val_acc,
            "val_f1": last.val_f1,
            "steps": self.steps,
            "total_quantum_evals": self.total_quantum_evals,
            "amplitude_array_size": self.amplitude_array_size,
            "split_hash": self.split_hash,
            "wall_seconds": sum(e.wall_seconds for e in self.epochs),
        }

    def config_echo(self) -> dict:
        cfg = asdict(self.config)
        cfg["optimizer"] = self.config.optimizer.value
        return cfg


def train(model: HybridModel, dataset: EmbeddingDataset, config: TrainConfig) -> tuple[HybridModel, TrainReport]:
    """Train a copy of ``model``; the argument is never modified.

    ``total_quantum_evals`` counts circuit evaluations issued by the gradient
    steps only (``1 + 2 * (depth * n_q + n_q)`` per training sample per
    epoch); the metric passes at the end of each epoch are not included.
    """
    if len(dataset) == 0:
        raise ValidationError("cannot train on an empty dataset")
    if dataset.dim != model.d_in:
        raise ValidationError(f"dataset dimension {dataset.dim} does not match model input {model.d_in}")

    train_set, val_set = split(dataset, config.val_fraction, config.seed)
    if len(train_set) == 0:
        raise ValidationError("training split is empty; use a smaller val_fraction or more data")
    shuffle_rng = np.random.default_rng([config.seed, 1])
    model = model.copy()
    spec = model.circuit
    hybrid = model.head_mode is HeadMode.HYBRID

    report = TrainReport(
        config=config,
        n_q=spec.n_q,
        depth=spec.depth,
        head_mode=model.head_mode.value,
        n_train=len(train_set),
        n_val=len(val_set),
        split_hash=train_set.fingerprint() + val_set.fingerprint(),
        initial_train_loss=dataset_loss(model, train_set),
        amplitude_array_size=(1 << spec.n_q) if hybrid else 0,
    )
    targets = one_hot(train_set.labels)
    params = {k: v.copy() for k, v in model.parameters().items()}
    adam = AdamState()

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        epoch_evals = 0
        order = shuffle_rng.permutation(len(train_set))
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grads, _, n_evals = autodiff.backward_batch(model, train_set.features[idx], targets[idx])
            g = grads.as_dict()
            if config.optimizer is Optimizer.ADAM:
                params = adam_step(params, g, adam, config.learning_rate)
            else:
                params = sgd_step(params, g, config.learning_rate)
            model = model.with_parameters(params)
            epoch_evals += n_evals
            report.steps += 1

        tr = evaluate(model, train_set)
        va = evaluate(model, val_set) if len(val_set) else None
        rec = EpochRecord(
            epoch=epoch,
            train_loss=dataset_loss(model, train_set),
            train_acc=tr.accuracy,
            train_f1=tr.macro_f1,
            val_acc=va.accuracy if va else None,
            val_f1=va.macro_f1 if va else None,
            wall_seconds=time.perf_counter() - t0,
            quantum_evals=epoch_evals,
        )
        report.epochs.append(rec)
        report.total_quantum_evals += epoch_evals
        log.info(
            "epoch %d loss=%.6f train_acc=%.4f val_acc=%s (%.2fs)",
            epoch, rec.train_loss, rec.train_acc, rec.val_acc, rec.wall_seconds,
        )
    return model, report
