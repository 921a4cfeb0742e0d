"""Self-check suites behind ``qhybrid verify``.

Each suite compares a fast path against an independent reference and returns
a :class:`SuiteResult`. ``cnot_direction_fault`` swaps control and target in
the engine's CNOT kernel so the suites can be shown to notice a wiring bug.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import numpy as np

from . import autodiff, circuit, oracle
from . import statevector as sv
from .model import ModelConfig, forward_batch, init_params, loss, one_hot


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, ok: bool, message: str) -> None:
        self.checks += 1
        if not ok and len(self.failures) < 20:
            self.failures.append(message)


def random_ops(rng: np.random.Generator, n: int, n_gates: int) -> list[sv.GateOp]:
    ops = []
    for _ in range(n_gates):
        kind = rng.integers(3)
        if kind == 0:
            ops.append(sv.GateOp(sv.GateKind.H, int(rng.integers(n))))
        elif kind == 1:
            ops.append(sv.GateOp(sv.GateKind.RY, int(rng.integers(n)), angle=float(rng.uniform(-2 * np.pi, 2 * np.pi))))
        else:
            c, t = rng.choice(n, size=2, replace=False)
            ops.append(sv.GateOp(sv.GateKind.CNOT, int(t), control=int(c)))
    return ops


def random_state(rng: np.random.Generator, n: int) -> sv.Statevector:
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return sv.from_amplitudes(amps, normalize=True)


def oracle_suite(seed: int = 0, n_circuits: int = 200, n_forward: int = 200) -> SuiteResult:
    """Engine vs dense matrices on random circuits, and the full quantum layer vs its dense twin."""
    res = SuiteResult("oracle-equivalence")
    rng = np.random.default_rng(seed)
    for i in range(n_circuits):
        n = int(rng.integers(2, 7))
        ops = random_ops(rng, n, int(rng.integers(1, 31)))
        got = sv.run_ops(ops, n).amplitudes
        want = oracle.dense_state(ops, n)
        err = float(np.max(np.abs(got - want)))
        res.check(err <= 1e-10, f"circuit {i} (n={n}, {len(ops)} gates): max amplitude error {err:.3e}")
    for i in range(n_forward):
        n_q = int(rng.integers(2, 7))
        depth = int(rng.integers(1, 5))
        topo = ("chain", "ring")[i % 2]
        spec = circuit.CircuitSpec(n_q, depth, topo)
        d = rng.uniform(-np.pi / 2, np.pi / 2, n_q)
        theta = rng.uniform(-np.pi, np.pi, (depth, n_q))
        err = float(np.max(np.abs(circuit.forward_quantum(d, theta, spec) - oracle.dense_forward(d, theta, topo))))
        res.check(err <= 1e-10, f"forward {i} (n_q={n_q}, depth={depth}, {topo}): max error {err:.3e}")
    return res


def _flatten(params: dict) -> tuple[np.ndarray, list]:
    layout = [(k, v.shape) for k, v in params.items()]
    return np.concatenate([v.ravel() for v in params.values()]), layout


def _unflatten(flat: np.ndarray, layout: list) -> dict:
    out, i = {}, 0
    for k, shape in layout:
        size = int(np.prod(shape))
        out[k] = flat[i : i + size].reshape(shape)
        i += size
    return out


def gradient_check(model, X, T, h: float = 1e-5):
    """Parameter-shift + chain-rule gradient and its finite-difference twin, flattened."""
    _, grads, _, _ = autodiff.backward_batch(model, X, T)
    flat, layout = _flatten(model.parameters())
    analytic, _ = _flatten(grads.as_dict())

    def f(p):
        return loss(forward_batch(model.with_parameters(_unflatten(p, layout)), X).probs, T)

    return analytic, oracle.fd_gradient(f, flat, h)


def random_model(rng: np.random.Generator, max_nq: int = 4, max_depth: int = 3, max_din: int = 8, head_mode="hybrid"):
    n_q = int(rng.integers(2, max_nq + 1))
    cfg = ModelConfig(
        d_in=int(rng.integers(2, max_din + 1)),
        n_q=n_q,
        depth=int(rng.integers(1, max_depth + 1)),
        topology=("chain", "ring")[int(rng.integers(2))],
        head_mode=head_mode,
    )
    model = init_params(cfg, int(rng.integers(2**31)))
    # move away from the near-zero init so every block has a generic gradient
    params = {k: v + rng.normal(0, 0.5, v.shape) for k, v in model.parameters().items()}
    return model.with_parameters(params)


def gradient_suite(seed: int = 0, n_models: int = 20, rel_tol: float = 1e-4, abs_floor: float = 1e-7) -> SuiteResult:
    res = SuiteResult("gradient-check")
    rng = np.random.default_rng(seed)
    for i in range(n_models):
        model = random_model(rng)
        B = int(rng.integers(1, 4))
        X = rng.normal(size=(B, model.d_in))
        T = one_hot(rng.integers(0, 2, B))
        analytic, fd = gradient_check(model, X, T)
        err = np.abs(analytic - fd)
        bad = err > np.maximum(rel_tol * np.abs(fd), abs_floor)
        res.check(not bad.any(), f"model {i}: {int(bad.sum())} coordinates off, worst abs error {err.max():.3e}")
    return res


def invariant_suite(seed: int = 0, trials: int = 100) -> SuiteResult:
    res = SuiteResult("invariants")
    rng = np.random.default_rng(seed)
    for i in range(trials):
        n = int(rng.integers(1, 9))
        state = random_state(rng, n)
        ops = random_ops(rng, n, 30) if n > 1 else [
            sv.GateOp(sv.GateKind.RY, 0, angle=float(rng.uniform(-7, 7))) for _ in range(10)
        ]
        start = state.amplitudes.copy()
        for op in ops:
            sv.apply_op(state, op)
            drift = abs(state.norm_squared() - 1.0)
            if drift >= 1e-10:
                res.check(False, f"trial {i}: norm drift {drift:.3e} after {op}")
                break
        else:
            res.check(True, "")
        z = sv.expect_z_all(state)
        res.check(bool(np.all(np.abs(z) <= 1 + 1e-12)), f"trial {i}: <Z> out of bounds {z}")
        for op in reversed(ops):
            sv.apply_op(state, op.inverse())
        err = float(np.max(np.abs(state.amplitudes - start)))
        res.check(err < 1e-9, f"trial {i}: inverse sequence error {err:.3e}")
    for n in range(1, 9):
        for j in range(n):
            amps = sv.apply_h(sv.new_zero_state(n), j).amplitudes
            touched = set(np.flatnonzero(np.abs(amps) > 1e-15).tolist())
            res.check(touched == {0, 1 << j}, f"H on qubit {j} of {n} touched indices {sorted(touched)}")
    return res


SUITES = {
    "oracle-equivalence": oracle_suite,
    "gradient-check": gradient_suite,
    "invariants": invariant_suite,
}


def _swapped_cnot(original):
    def cnot(amps, n, control, target):
        original(amps, n, target, control)

    return cnot


@contextlib.contextmanager
def cnot_direction_fault():
    """Temporarily make every engine CNOT act with control and target exchanged."""
    original = sv.cnot_kernel
    sv.cnot_kernel = _swapped_cnot(original)
    try:
        yield
    finally:
        sv.cnot_kernel = original


FAULTS = {"cnot-direction": cnot_direction_fault}


def run_all(seed: int = 0, fault: str | None = None) -> list[SuiteResult]:
    ctx = FAULTS[fault]() if fault else contextlib.nullcontext()
    with ctx:
        return [suite(seed=seed) for suite in SUITES.values()]
