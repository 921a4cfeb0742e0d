"""Command-line front end.

Subcommands: ``train``, ``evaluate``, ``sweep``, ``compare``, ``verify``,
``make-data``. Settings come from built-in defaults, then an optional
``--config`` file, then command-line flags (last one wins).

The config file is flat ``key = value`` text using the :class:`RunConfig`
field names; blank lines and ``#`` comments are ignored.

Structured output is JSON lines. Per-epoch records carry ``run_id, epoch,
train_loss, train_acc, train_f1, val_acc, val_f1, wall_seconds, n_q, depth,
head_mode, seed, quantum_evals``; the closing ``"record": "summary"`` line
repeats the final metrics with run totals. Set ``QHYBRID_LOG_LEVEL`` (e.g.
``INFO``) for progress logging on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import data as data_mod
from . import training, verify
from ._fileio import atomic_write_bytes
from .circuit import CircuitSpec, Topology
from .errors import ConfigurationError, QHybridError
from .model import HeadMode, ModelConfig, init_params, load_checkpoint, save_checkpoint
from .training import Optimizer, TrainConfig

log = logging.getLogger("qhybrid")


@dataclass
class RunConfig:
    qubits: int = 4
    depth: int = 4
    topology: str = "chain"
    head_mode: str = "hybrid"
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 7
    val_fraction: float = 0.2
    data: str | None = None
    synthetic_kind: str = "gaussian_blobs"
    n_samples: int = 400
    dim: int = 16
    margin: float = 4.0
    out: str = "runs"

    def validate(self) -> None:
        """Check every field up front so no work starts on a bad config."""
        try:
            Topology(self.topology)
        except ValueError:
            raise ConfigurationError(f"topology: must be chain or ring, got {self.topology!r}", "topology") from None
        try:
            HeadMode(self.head_mode)
        except ValueError:
            raise ConfigurationError(
                f"head_mode: must be hybrid or classical_baseline, got {self.head_mode!r}", "head_mode"
            ) from None
        try:
            Optimizer(self.optimizer)
        except ValueError:
            raise ConfigurationError(f"optimizer: must be sgd or adam, got {self.optimizer!r}", "optimizer") from None
        _wrap_field("qubits", lambda: CircuitSpec(self.qubits, 1, self.topology))
        _wrap_field("depth", lambda: CircuitSpec(2, self.depth))
        self.train_config()
        if self.data is None:
            try:
                data_mod.SyntheticKind(self.synthetic_kind)
            except ValueError:
                raise ConfigurationError(
                    f"synthetic_kind: unknown kind {self.synthetic_kind!r}", "synthetic_kind"
                ) from None
            if self.n_samples < 2:
                raise ConfigurationError(f"n_samples: must be >= 2, got {self.n_samples}", "n_samples")
            if self.dim < 2:
                raise ConfigurationError(f"dim: must be >= 2, got {self.dim}", "dim")
            if not self.margin >= 0:
                raise ConfigurationError(f"margin: must be >= 0, got {self.margin}", "margin")

    def train_config(self) -> TrainConfig:
        return _wrap_field(
            None,
            lambda: TrainConfig(
                epochs=self.epochs,
                batch_size=self.batch_size,
                learning_rate=self.learning_rate,
                optimizer=self.optimizer,
                seed=self.seed,
                val_fraction=self.val_fraction,
            ),
        )

    def model_config(self, d_in: int, head_mode: str | None = None) -> ModelConfig:
        return ModelConfig(d_in, self.qubits, self.depth, self.topology, head_mode or self.head_mode)

    def load_data(self) -> data_mod.EmbeddingDataset:
        if self.data is not None:
            return data_mod.load(self.data)
        return data_mod.make_synthetic(self.synthetic_kind, self.n_samples, self.dim, self.seed, self.margin)

    def echo(self) -> dict:
        return dataclasses.asdict(self)

    def run_id(self) -> str:
        # the output directory does not change the run, so it stays out of the id
        echo = {k: v for k, v in self.echo().items() if k != "out"}
        blob = json.dumps(echo, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _wrap_field(name, fn):
    try:
        return fn()
    except ConfigurationError as exc:
        field = name or exc.field
        msg = str(exc)
        raise ConfigurationError(msg if msg.startswith(f"{field}:") else f"{field}: {msg}", field) from None


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"{key}: expected {kind}, got {raw!r}", key) from None
    if kind == "str | None" and raw.lower() in ("", "none"):
        return None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}", key)
        values[key] = _coerce(key, raw)
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            values.update(parse_config_text(fh.read(), args.config))
    for name in _FIELD_TYPES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# output helpers


def _json_line(record: dict) -> str:
    return json.dumps(record, sort_keys=False)


def report_records(report: training.TrainReport, cfg: RunConfig) -> list[dict]:
    run_id = cfg.run_id()
    rows = []
    for e in report.epochs:
        rows.append(
            {
                "record": "epoch",
                "run_id": run_id,
                "epoch": e.epoch,
                "train_loss": e.train_loss,
                "train_acc": e.train_acc,
                "train_f1": e.train_f1,
                "val_acc": e.val_acc,
                "val_f1": e.val_f1,
                "wall_seconds": e.wall_seconds,
                "n_q": report.n_q,
                "depth": report.depth,
                "head_mode": report.head_mode,
                "seed": report.config.seed,
                "quantum_evals": e.quantum_evals,
            }
        )
    rows.append({"record": "summary", "run_id": run_id, **report.summary(), "config": cfg.echo()})
    return rows


def _write_lines(path: str, records: list[dict]) -> None:
    atomic_write_bytes(path, "".join(_json_line(r) + "\n" for r in records).encode())


def _train_one(cfg: RunConfig, dataset, head_mode: str | None = None, seed: int | None = None):
    tc = cfg.train_config()
    if seed is not None:
        tc = dataclasses.replace(tc, seed=seed)
    model = init_params(cfg.model_config(dataset.dim, head_mode), tc.seed)
    return training.train(model, dataset, tc)


# --------------------------------------------------------------------------
# commands


def cmd_train(cfg: RunConfig, out=sys.stdout) -> int:
    dataset = cfg.load_data()
    model, report = _train_one(cfg, dataset)
    os.makedirs(cfg.out, exist_ok=True)
    save_checkpoint(model, os.path.join(cfg.out, "model.qhm"))
    records = report_records(report, cfg)
    _write_lines(os.path.join(cfg.out, "report.jsonl"), records)
    print(_json_line(records[-1]), file=out)
    return 0


def cmd_evaluate(cfg: RunConfig, checkpoint: str, out=sys.stdout) -> int:
    model = load_checkpoint(checkpoint)
    dataset = cfg.load_data()
    res = training.evaluate(model, dataset)
    print(
        _json_line(
            {
                "record": "evaluate",
                "checkpoint": checkpoint,
                "n": len(dataset),
                "accuracy": res.accuracy,
                "macro_f1": res.macro_f1,
                "confusion": res.confusion.tolist(),
                "n_q": model.circuit.n_q,
                "depth": model.circuit.depth,
                "head_mode": model.head_mode.value,
                "seed": cfg.seed,
            }
        ),
        file=out,
    )
    return 0


def parse_qubit_list(text: str) -> list[int]:
    try:
        qubits = [int(q) for q in text.split(",") if q.strip()]
    except ValueError:
        raise ConfigurationError(f"qubit_list: expected comma-separated integers, got {text!r}", "qubit_list") from None
    if not qubits:
        raise ConfigurationError("qubit_list: empty", "qubit_list")
    for q in qubits:
        if not 2 <= q <= 24:
            raise ConfigurationError(f"qubit_list: {q} is outside 2..24", "qubit_list")
    return qubits


def sweep_rows(cfg: RunConfig, qubits: list[int], repeats: int) -> list[dict]:
    if repeats < 1:
        raise ConfigurationError(f"repeats: must be >= 1, got {repeats}", "repeats")
    dataset = cfg.load_data()
    rows = []
    for q in qubits:
        qcfg = dataclasses.replace(cfg, qubits=q)
        accs, seconds, evals = [], [], []
        for r in range(repeats):
            _, report = _train_one(qcfg, dataset, seed=cfg.seed + r)
            accs.append(report.final.val_acc if report.final.val_acc is not None else report.final.train_acc)
            seconds.append(sum(e.wall_seconds for e in report.epochs))
            evals.append(report.total_quantum_evals)
            amp = report.amplitude_array_size
        rows.append(
            {
                "record": "sweep",
                "qubits": q,
                "depth": cfg.depth,
                "head_mode": cfg.head_mode,
                "repeats": repeats,
                "mean_accuracy": float(np.mean(accs)),
                "std_accuracy": float(np.std(accs)),
                "seconds": float(np.mean(seconds)),
                "quantum_evals": int(evals[0]),
                "amplitude_array_size": amp,
                "seed": cfg.seed,
            }
        )
    return rows


def cmd_sweep(cfg: RunConfig, qubits: list[int], repeats: int, out=sys.stdout) -> int:
    rows = sweep_rows(cfg, qubits, repeats)
    os.makedirs(cfg.out, exist_ok=True)
    _write_lines(os.path.join(cfg.out, "sweep.jsonl"), rows)
    buf = io.StringIO()
    cols = ["qubits", "seconds", "mean_accuracy", "std_accuracy", "quantum_evals", "amplitude_array_size", "seed"]
    writer = csv.DictWriter(buf, cols, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    atomic_write_bytes(os.path.join(cfg.out, "sweep.csv"), buf.getvalue().encode())
    for row in rows:
        print(_json_line(row), file=out)
    return 0


def compare_rows(cfg: RunConfig) -> list[dict]:
    dataset = cfg.load_data()
    rows = []
    for mode in (HeadMode.HYBRID, HeadMode.CLASSICAL_BASELINE):
        _, report = _train_one(cfg, dataset, head_mode=mode.value)
        rows.append(
            {
                "record": "compare",
                "head_mode": mode.value,
                "train_f1": report.final.train_f1,
                "val_f1": report.final.val_f1,
                "split_hash": report.split_hash,
                "seed": cfg.seed,
            }
        )
    return rows


def cmd_compare(cfg: RunConfig, out=sys.stdout) -> int:
    rows = compare_rows(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    records = rows + [{"record": "config", "run_id": cfg.run_id(), "config": cfg.echo()}]
    _write_lines(os.path.join(cfg.out, "compare.jsonl"), records)
    for r in records:
        print(_json_line(r), file=out)
    return 0


def cmd_verify(seed: int = 0, fault: str | None = None, out=sys.stdout) -> int:
    results = verify.run_all(seed=seed, fault=fault)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} ({r.checks} checks)", file=out)
        for msg in r.failures:
            print(f"  - {msg}", file=out)
    return 0 if all(r.passed for r in results) else 1


def cmd_make_data(cfg: RunConfig, path: str, out=sys.stdout) -> int:
    ds = data_mod.make_synthetic(cfg.synthetic_kind, cfg.n_samples, cfg.dim, cfg.seed, cfg.margin)
    data_mod.save(ds, path)
    print(_json_line({"record": "make-data", "path": path, "n": len(ds), "dim": ds.dim, "seed": cfg.seed}), file=out)
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _add_run_flags(p: argparse.ArgumentParser, data_flags: bool = True, model_flags: bool = True) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int)
    if model_flags:
        p.add_argument("--qubits", type=int)
        p.add_argument("--depth", type=int)
        p.add_argument("--topology", choices=[t.value for t in Topology])
        p.add_argument("--head-mode", dest="head_mode", choices=[h.value for h in HeadMode])
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--optimizer", choices=[o.value for o in Optimizer])
        p.add_argument("--val-fraction", dest="val_fraction", type=float)
        p.add_argument("--out", help="output directory")
    if data_flags:
        p.add_argument("--data", help="dataset file (.csv or QEMB); synthetic data if omitted")
        p.add_argument("--synthetic-kind", dest="synthetic_kind", choices=[k.value for k in data_mod.SyntheticKind])
        p.add_argument("--n-samples", dest="n_samples", type=int)
        p.add_argument("--dim", type=int)
        p.add_argument("--margin", type=float)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qhybrid", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model, write model.qhm and report.jsonl")
    _add_run_flags(p)

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset")
    _add_run_flags(p, model_flags=False)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("sweep", help="train across qubit counts, report mean/std accuracy and timing")
    _add_run_flags(p)
    p.add_argument("--qubit-list", dest="qubit_list", default="2,4,6,8,10")
    p.add_argument("--repeats", type=int, default=1)

    p = sub.add_parser("compare", help="hybrid vs classical head on identical splits")
    _add_run_flags(p)

    p = sub.add_parser("verify", help="run oracle, gradient and invariant self-checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", dest="inject_fault", choices=sorted(verify.FAULTS), help=argparse.SUPPRESS)

    p = sub.add_parser("make-data", help="write a synthetic dataset")
    _add_run_flags(p, model_flags=False)
    p.add_argument("--out", required=True, help="output path (.csv or QEMB)")
    return parser


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    logging.basicConfig(
        level=os.environ.get("QHYBRID_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = make_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.seed, args.inject_fault, out=out)
        if args.command == "make-data":
            path = args.out
            args.out = None
            return cmd_make_data(build_config(args), path, out=out)
        cfg = build_config(args)
        if args.command == "train":
            return cmd_train(cfg, out=out)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint, out=out)
        if args.command == "sweep":
            return cmd_sweep(cfg, parse_qubit_list(args.qubit_list), args.repeats, out=out)
        return cmd_compare(cfg, out=out)
    except (QHybridError, OSError) as exc:
        print(f"qhybrid {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
