"""Embedding datasets: CSV and QEMB binary I/O, synthetic generators, splits.

CSV layout: header ``label,f0,f1,...,f{d-1}``, one row per sample, label 0/1.
Floats are written with 17 significant digits so a round trip is exact.

QEMB layout, all little-endian::

    b"QEMB", u32 version (=1), u32 count, u32 dim,
    then per row: u32 label, dim x f32

Features are stored as f32 on disk and held as f64 in memory.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    BadMagicError,
    ColumnCountError,
    ConfigurationError,
    HeaderError,
    LabelError,
    NonNumericCellError,
    TrailingBytesError,
    TruncatedFileError,
    UnsupportedVersionError,
    ValidationError,
)
from ._fileio import atomic_write_bytes


class Provenance(str, Enum):
    CSV = "csv"
    BINARY = "binary"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True, eq=False)
class EmbeddingDataset:
    features: np.ndarray  # (N, dim) float64
    labels: np.ndarray  # (N,) int64, values in {0, 1}
    provenance: Provenance = Provenance.SYNTHETIC

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise ValidationError(f"features must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValidationError(f"{X.shape[0]} feature rows but labels have shape {y.shape}")
        if not np.all(np.isfinite(X)):
            raise ValidationError("features must be finite")
        if not np.all((y == 0) | (y == 1)):
            raise ValidationError("labels must be 0 or 1")
        X.setflags(write=False)
        y = y.astype(np.int64)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]

    def subset(self, idx) -> "EmbeddingDataset":
        return EmbeddingDataset(self.features[idx], self.labels[idx], self.provenance)

    def fingerprint(self) -> str:
        """Short content hash, used to show two runs saw the same rows."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.labels, dtype="<i8").tobytes())
        return h.hexdigest()[:16]


# --------------------------------------------------------------------------
# CSV


def load_csv(path) -> EmbeddingDataset:
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise HeaderError(f"{path}: empty file, expected header 'label,f0,...'")
        header = [h.strip() for h in header]
        dim = len(header) - 1
        if dim < 1 or header[0] != "label" or header[1:] != [f"f{i}" for i in range(dim)]:
            raise HeaderError(f"{path}: header must be 'label,f0,...,f{{d-1}}', got {','.join(header)!r}")
        feats, labels = [], []
        # row numbers count data rows from 0; the header is not a row
        for row_idx, row in enumerate(reader):
            if not row:
                continue
            if len(row) != dim + 1:
                raise ColumnCountError(
                    f"{path}: row {row_idx} has {len(row)} columns, expected {dim + 1}", row=row_idx
                )
            try:
                label = float(row[0])
            except ValueError:
                raise NonNumericCellError(
                    f"{path}: row {row_idx}, column 0 (label): {row[0]!r} is not numeric", row_idx, 0
                ) from None
            if label not in (0.0, 1.0):
                raise LabelError(f"{path}: row {row_idx}: label {row[0]!r} is not 0 or 1", row=row_idx)
            values = []
            for col, cell in enumerate(row[1:], start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericCellError(
                        f"{path}: row {row_idx}, column {col}: {cell!r} is not numeric", row_idx, col
                    ) from None
                if not math.isfinite(v):
                    raise NonNumericCellError(
                        f"{path}: row {row_idx}, column {col}: {cell!r} is not finite", row_idx, col
                    )
                values.append(v)
            feats.append(values)
            labels.append(int(label))
    X = np.array(feats, dtype=np.float64).reshape(len(feats), dim)
    return EmbeddingDataset(X, np.array(labels, dtype=np.int64), Provenance.CSV)


def write_csv(dataset: EmbeddingDataset, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label"] + [f"f{i}" for i in range(dataset.dim)])
    for x, y in zip(dataset.features, dataset.labels):
        writer.writerow([str(int(y))] + [format(float(v), ".17g") for v in x])
    atomic_write_bytes(path, buf.getvalue().encode())


# --------------------------------------------------------------------------
# QEMB binary

QEMB_MAGIC = b"QEMB"
QEMB_VERSION = 1
_QEMB_HEADER = struct.Struct("<4s3I")


def dataset_to_bytes(dataset: EmbeddingDataset) -> bytes:
    n, dim = len(dataset), dataset.dim
    rec = np.dtype([("label", "<u4"), ("x", "<f4", (dim,))])
    rows = np.empty(n, dtype=rec)
    rows["label"] = dataset.labels
    rows["x"] = dataset.features
    return _QEMB_HEADER.pack(QEMB_MAGIC, QEMB_VERSION, n, dim) + rows.tobytes()


def dataset_from_bytes(buf: bytes) -> EmbeddingDataset:
    if len(buf) < 4 or buf[:4] != QEMB_MAGIC:
        raise BadMagicError(f"not a QEMB file (magic {buf[:4]!r})")
    if len(buf) < _QEMB_HEADER.size:
        raise TruncatedFileError(f"QEMB header truncated at byte offset {len(buf)}", offset=len(buf))
    _, version, n, dim = _QEMB_HEADER.unpack_from(buf)
    if version != QEMB_VERSION:
        raise UnsupportedVersionError(f"QEMB version {version} is not supported (expected {QEMB_VERSION})")
    row_size = 4 + 4 * dim
    end = _QEMB_HEADER.size + n * row_size
    if len(buf) < end:
        done = (len(buf) - _QEMB_HEADER.size) // row_size
        raise TruncatedFileError(
            f"QEMB truncated at byte offset {len(buf)}: row {done} of {n} is incomplete "
            f"(expected {end} bytes)",
            offset=len(buf),
        )
    if len(buf) > end:
        raise TrailingBytesError(f"QEMB has {len(buf) - end} trailing bytes after byte offset {end}", offset=end)
    rec = np.dtype([("label", "<u4"), ("x", "<f4", (dim,))])
    rows = np.frombuffer(buf, dtype=rec, count=n, offset=_QEMB_HEADER.size)
    labels = rows["label"].astype(np.int64)
    bad = np.flatnonzero(labels > 1)
    if bad.size:
        raise LabelError(f"QEMB row {bad[0]}: label {labels[bad[0]]} is not 0 or 1", row=int(bad[0]))
    X = rows["x"].astype(np.float64).reshape(n, dim)
    if not np.all(np.isfinite(X)):
        raise ValidationError("QEMB contains non-finite features")
    return EmbeddingDataset(X, labels, Provenance.BINARY)


def write_binary(dataset: EmbeddingDataset, path) -> None:
    atomic_write_bytes(path, dataset_to_bytes(dataset))


def load_binary(path) -> EmbeddingDataset:
    with open(path, "rb") as fh:
        return dataset_from_bytes(fh.read())


def load(path) -> EmbeddingDataset:
    """Load by extension: ``.csv`` as CSV, anything else as QEMB."""
    if os.fspath(path).lower().endswith(".csv"):
        return load_csv(path)
    return load_binary(path)


def save(dataset: EmbeddingDataset, path) -> None:
    if os.fspath(path).lower().endswith(".csv"):
        write_csv(dataset, path)
    else:
        write_binary(dataset, path)


# --------------------------------------------------------------------------
# synthetic data and splitting


class SyntheticKind(str, Enum):
    GAUSSIAN_BLOBS = "gaussian_blobs"
    XOR_RINGS = "xor_rings"


def make_synthetic(kind, n: int, dim: int, seed: int, margin: float = 4.0, sigma: float = 1.0) -> EmbeddingDataset:
    """Seeded toy embeddings with balanced labels.

    ``gaussian_blobs`` puts isotropic Gaussians at ``-margin * e1`` (class 0)
    and ``+margin * e1`` (class 1). ``xor_rings`` places four clusters at
    distance ``margin`` from the origin in the first two coordinates, labelled
    by the XOR of the coordinate signs; the remaining coordinates are noise.
    """
    kind = SyntheticKind(kind)
    if n < 2:
        raise ConfigurationError(f"n must be >= 2, got {n}", field="n")
    if dim < 2:
        raise ConfigurationError(f"dim must be >= 2, got {dim}", field="dim")
    if not margin >= 0:
        raise ConfigurationError(f"margin must be >= 0, got {margin}", field="margin")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    rng.shuffle(labels)
    X = rng.normal(0.0, sigma, size=(n, dim))
    if kind is SyntheticKind.GAUSSIAN_BLOBS:
        X[:, 0] += np.where(labels == 1, margin, -margin)
    else:
        s0 = rng.choice([-1.0, 1.0], size=n)
        s1 = np.where(labels == 1, -s0, s0)
        X[:, 0] += s0 * margin / math.sqrt(2)
        X[:, 1] += s1 * margin / math.sqrt(2)
    return EmbeddingDataset(X, labels, Provenance.SYNTHETIC)


def split_indices(n: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < val_fraction < 1:
        raise ConfigurationError(f"val_fraction must be in (0, 1), got {val_fraction}", field="val_fraction")
    perm = np.random.default_rng(seed).permutation(n)
    n_val = int(math.floor(n * val_fraction + 0.5))
    return perm[n_val:], perm[:n_val]


def split(dataset: EmbeddingDataset, val_fraction: float, seed: int) -> tuple[EmbeddingDataset, EmbeddingDataset]:
    train_idx, val_idx = split_indices(len(dataset), val_fraction, seed)
    return dataset.subset(train_idx), dataset.subset(val_idx)
