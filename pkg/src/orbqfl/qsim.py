"""Small exact statevector simulator.

Bit order is little-endian: qubit k is bit k of the basis index, so on two
qubits the basis |q1 q0> = |10> is index 2. Gate kernels accept a leading
batch axis so a whole dataset can be pushed through one circuit at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_QUBITS = 12
ONE_QUBIT = frozenset({"H", "RX", "RY", "RZ"})
TWO_QUBIT = frozenset({"CX", "CZ"})
ROTATIONS = frozenset({"RX", "RY", "RZ"})

_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class ParamRef:
    """Late-bound angle: ``scale * prod(source[i] for i in indices)``."""

    source: str  # "x" (features) or "theta" (trainable)
    indices: tuple[int, ...]
    scale: float = 1.0

    def resolve(self, features, params) -> float:
        values = features if self.source == "x" else params
        if values is None:
            raise CircuitError(f"unbound {self.source} slot {self.indices}")
        try:
            return self.scale * math.prod(float(values[i]) for i in self.indices)
        except IndexError:
            raise CircuitError(f"{self.source} slot {self.indices} out of range") from None


@dataclass(frozen=True)
class GateOp:
    kind: str
    targets: tuple[int, ...]
    angle: float | None = None
    param: ParamRef | None = None

    def __post_init__(self):
        if self.kind not in ONE_QUBIT | TWO_QUBIT:
            raise CircuitError(f"unknown gate {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        arity = 1 if self.kind in ONE_QUBIT else 2
        if len(self.targets) != arity or len(set(self.targets)) != arity:
            raise CircuitError(f"{self.kind} needs {arity} distinct target(s), got {self.targets}")
        if self.angle is not None and not math.isfinite(self.angle):
            raise CircuitError("gate angle must be finite")

    @property
    def bound(self) -> bool:
        return self.kind not in ROTATIONS or self.angle is not None


@dataclass(frozen=True, eq=False)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass
class Circuit:
    n_qubits: int
    ops: list[GateOp] = field(default_factory=list)

    def append(self, kind: str, targets, angle=None, param=None) -> "Circuit":
        if isinstance(targets, int):
            targets = (targets,)
        self.ops.append(GateOp(kind, tuple(targets), angle, param))
        return self

    def extend(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise CircuitError("qubit count mismatch")
        self.ops.extend(other.ops)
        return self

    def bind(self, features=None, params=None) -> list[GateOp]:
        bound = []
        for op in self.ops:
            if op.param is not None:
                op = GateOp(op.kind, op.targets, op.param.resolve(features, params))
            elif not op.bound:
                raise CircuitError(f"{op.kind} on {op.targets} has no angle")
            bound.append(op)
        return bound

    def feature_slots(self) -> set[int]:
        return {i for op in self.ops if op.param and op.param.source == "x" for i in op.param.indices}

    def param_slots(self) -> set[int]:
        return {i for op in self.ops if op.param and op.param.source == "theta" for i in op.param.indices}


def rotation_matrix(kind: str, angle) -> np.ndarray:
    """2x2 unitary, or a (B, 2, 2) stack when ``angle`` is an array."""
    t = np.asarray(angle, dtype=float) / 2.0
    c, s = np.cos(t), np.sin(t)
    if kind == "RX":
        m = [[c, -1j * s], [-1j * s, c]]
    elif kind == "RY":
        m = [[c, -s], [s, c]]
    elif kind == "RZ":
        m = [[np.exp(-1j * t), 0 * t], [0 * t, np.exp(1j * t)]]
    else:
        raise CircuitError(f"{kind} is not a rotation")
    m = np.array(m, dtype=complex)
    return m if m.ndim == 2 else np.moveaxis(m, -1, 0)


def gate_matrix(op: GateOp) -> np.ndarray:
    if op.kind == "H":
        return _H
    if op.angle is None:
        raise CircuitError(f"{op.kind} has no angle bound")
    return rotation_matrix(op.kind, op.angle)


@lru_cache(maxsize=None)
def _cx_permutation(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return np.where((idx >> control) & 1, idx ^ (1 << target), idx)


@lru_cache(maxsize=None)
def _cz_phase(n: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return np.where(((idx >> a) & 1) & ((idx >> b) & 1), -1.0, 1.0)


def apply_1q(amps: np.ndarray, mat: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Apply a one-qubit matrix to ``amps`` of shape (B, 2**n)."""
    b = amps.shape[0]
    view = amps.reshape(b, 1 << (n - 1 - qubit), 2, 1 << qubit)
    if mat.ndim == 2:
        out = np.einsum("ij,bhjl->bhil", mat, view)
    else:
        out = np.einsum("bij,bhjl->bhil", mat, view)
    return out.reshape(b, 1 << n)


def apply_2q(amps: np.ndarray, kind: str, targets: tuple[int, int], n: int) -> np.ndarray:
    a, t = targets
    if kind == "CX":
        return amps[:, _cx_permutation(n, a, t)]
    return amps * _cz_phase(n, min(a, t), max(a, t))


def _check_targets(op: GateOp, n: int) -> None:
    if any(t < 0 or t >= n for t in op.targets):
        raise CircuitError(f"{op.kind} target {op.targets} out of range for {n} qubits")


def init_zero(n_qubits: int) -> StateVector:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CircuitError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(1 << n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    n = state.n_qubits
    _check_targets(gate, n)
    amps = state.amplitudes[None, :]
    if gate.kind in TWO_QUBIT:
        out = apply_2q(amps, gate.kind, gate.targets, n)
    else:
        out = apply_1q(amps, gate_matrix(gate), gate.targets[0], n)
    return StateVector(n, out[0])


def run(circuit: Circuit, features=None, params=None) -> StateVector:
    state = init_zero(circuit.n_qubits)
    for op in circuit.bind(features, params):
        state = apply_gate(state, op)
    return state


def run_batch(
    circuit: Circuit,
    features: np.ndarray | None = None,
    params: Sequence[float] | None = None,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Run one circuit per row of ``features`` (shared ``params``).

    Returns amplitudes of shape (B, 2**n). ``initial`` overrides the |0...0>
    start and fixes B when there are no features.
    """
    n = circuit.n_qubits
    if initial is not None:
        amps = np.array(initial, dtype=complex)
    else:
        batch = 1 if features is None else len(features)
        amps = np.zeros((batch, 1 << n), dtype=complex)
        amps[:, 0] = 1.0
    feats = None if features is None else np.asarray(features, dtype=float)
    for op in circuit.ops:
        _check_targets(op, n)
        if op.kind in TWO_QUBIT:
            amps = apply_2q(amps, op.kind, op.targets, n)
            continue
        if op.kind == "H":
            mat = _H
        elif op.param is None:
            mat = gate_matrix(op)
        elif op.param.source == "x":
            if feats is None:
                raise CircuitError(f"unbound x slot {op.param.indices}")
            try:
                angles = op.param.scale * np.prod(feats[:, list(op.param.indices)], axis=1)
            except IndexError:
                raise CircuitError(f"x slot {op.param.indices} out of range") from None
            mat = rotation_matrix(op.kind, angles)
        else:
            mat = rotation_matrix(op.kind, op.param.resolve(None, params))
        amps = apply_1q(amps, mat, op.targets[0], n)
    return amps


def probabilities(state: StateVector | np.ndarray) -> np.ndarray:
    amps = state.amplitudes if isinstance(state, StateVector) else state
    return np.abs(amps) ** 2
