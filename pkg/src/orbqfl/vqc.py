"""Variational quantum classifier: feature map, RY/CZ ansatz, modular readout.

Class c collects the probability of every basis index b with
``readout[b] == c`` (default ``b % n_classes``). Training minimises mean
cross-entropy with the trust-region optimizer in :mod:`orbqfl.cobyla`.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .cobyla import OptimizerConfig, TrustRegionTrace, minimize
from .qsim import Circuit, ParamRef
from .rng import substream

LOG_EPS = 1e-12
ENCODINGS = ("angle", "zz")
ENTANGLERS = ("ring", "line")

PARAM_MAGIC = b"QPRM"
PARAM_VERSION = 1
PARAM_HEADER = struct.Struct("<4sHHQ")  # magic, version, reserved, count -> 16 bytes


@dataclass(frozen=True)
class FeatureMapSpec:
    """Angle encoding repeats ``H; RY(pi x)``. Because H RY(a) H = RY(-a), an
    even number of angle reps cancels to the identity, so the default is 1."""

    n_qubits: int = 4
    reps: int = 1
    encoding: str = "angle"

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("feature map needs reps >= 1")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {self.encoding!r}")


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int = 4
    reps: int = 2
    entangle: str = "ring"

    def __post_init__(self):
        if self.reps < 0:
            raise ValueError("ansatz reps must be >= 0")
        if self.entangle not in ENTANGLERS:
            raise ValueError(f"unknown entanglement {self.entangle!r}")

    @property
    def n_params(self) -> int:
        return self.n_qubits * (self.reps + 1)


@dataclass(frozen=True)
class ClassifierSpec:
    n_classes: int = 2
    readout: tuple[int, ...] | None = None

    def class_of(self, n_qubits: int) -> np.ndarray:
        size = 1 << n_qubits
        if self.readout is None:
            return np.arange(size) % self.n_classes
        if len(self.readout) != size:
            raise ValueError(f"readout must cover all {size} bitstrings")
        mapping = np.asarray(self.readout, dtype=int)
        if mapping.min() < 0 or mapping.max() >= self.n_classes:
            raise ValueError("readout maps to a class outside range")
        return mapping


@dataclass
class FitResult:
    theta: np.ndarray
    objective_trace: list[float]
    iterations: int
    start_loss: float | None
    final_loss: float
    optimizer_trace: TrustRegionTrace = field(repr=False)
    warm_start: bool = False

    @property
    def evals(self) -> int:
        return len(self.objective_trace)


def ring_pairs(n: int) -> list[tuple[int, int]]:
    if n < 2:
        return []
    if n == 2:
        return [(0, 1)]
    return [(j, (j + 1) % n) for j in range(n)]


def line_pairs(n: int) -> list[tuple[int, int]]:
    return [(j, j + 1) for j in range(n - 1)]


def _check_features(x: np.ndarray, n_qubits: int) -> None:
    if x.shape[-1] != n_qubits:
        raise ValueError(f"expected {n_qubits} features, got {x.shape[-1]}")
    if np.any(x < -1e-9) or np.any(x > 1 + 1e-9) or not np.all(np.isfinite(x)):
        raise ValueError("features must be normalised to [0, 1]")


def feature_map_circuit(spec: FeatureMapSpec) -> Circuit:
    n = spec.n_qubits
    c = Circuit(n)
    for _ in range(spec.reps):
        for j in range(n):
            c.append("H", j)
        for j in range(n):
            c.append("RY", j, param=ParamRef("x", (j,), math.pi))
        if spec.encoding == "zz":
            # exp(-i phi Z_j Z_k / 2) with phi = pi x_j x_k
            for j, k in ring_pairs(n):
                c.append("CX", (j, k))
                c.append("RZ", k, param=ParamRef("x", (j, k), math.pi))
                c.append("CX", (j, k))
    return c


def ansatz_circuit(spec: AnsatzSpec) -> Circuit:
    n = spec.n_qubits
    pairs = ring_pairs(n) if spec.entangle == "ring" else line_pairs(n)
    c = Circuit(n)
    slot = 0
    for _ in range(spec.reps):
        for j in range(n):
            c.append("RY", j, param=ParamRef("theta", (slot,)))
            slot += 1
        for a, b in pairs:
            c.append("CZ", (a, b))
    for j in range(n):
        c.append("RY", j, param=ParamRef("theta", (slot,)))
        slot += 1
    return c


class VQC:
    """Feature map + ansatz + readout, evaluated exactly on a statevector."""

    def __init__(
        self,
        feature_map: FeatureMapSpec = FeatureMapSpec(),
        ansatz: AnsatzSpec = AnsatzSpec(),
        classifier: ClassifierSpec = ClassifierSpec(),
    ):
        if feature_map.n_qubits != ansatz.n_qubits:
            raise ValueError("feature map and ansatz disagree on qubit count")
        self.feature_map = feature_map
        self.ansatz = ansatz
        self.classifier = classifier
        self.n_qubits = ansatz.n_qubits
        self._fm = feature_map_circuit(feature_map)
        self._ansatz = ansatz_circuit(ansatz)
        cls = classifier.class_of(self.n_qubits)
        self._readout = np.zeros((1 << self.n_qubits, classifier.n_classes))
        self._readout[np.arange(len(cls)), cls] = 1.0

    @property
    def n_params(self) -> int:
        return self.ansatz.n_params

    @property
    def n_classes(self) -> int:
        return self.classifier.n_classes

    def encode(self, x) -> Circuit:
        """Feature-map segment with the sample's angles bound in."""
        x = np.asarray(x, dtype=float)
        _check_features(x, self.n_qubits)
        bound = Circuit(self.n_qubits)
        bound.ops = self._fm.bind(features=x)
        return bound

    def circuit(self, x, theta) -> Circuit:
        full = self.encode(x)
        full.ops.extend(self._ansatz.bind(params=self._check_theta(theta)))
        return full

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {theta.size}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("parameters must be finite")
        return theta

    def encode_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        _check_features(X, self.n_qubits)
        return qsim.run_batch(self._fm, features=X)

    def proba_from_encoded(self, encoded: np.ndarray, theta) -> np.ndarray:
        theta = self._check_theta(theta)
        amps = qsim.run_batch(self._ansatz, params=theta, initial=encoded)
        return qsim.probabilities(amps) @ self._readout

    def predict_proba(self, X, theta) -> np.ndarray:
        return self.proba_from_encoded(self.encode_batch(X), theta)

    def forward(self, x, theta) -> np.ndarray:
        return self.predict_proba(np.asarray(x, dtype=float)[None, :], theta)[0]

    def _targets(self, y) -> np.ndarray:
        y = np.asarray(y)
        if y.ndim == 1:
            out = np.zeros((len(y), self.n_classes))
            out[np.arange(len(y)), y.astype(int)] = 1.0
            return out
        return y.astype(float)

    def loss_from_encoded(self, encoded: np.ndarray, targets: np.ndarray, theta) -> float:
        p = self.proba_from_encoded(encoded, theta)
        return float(np.mean(-np.sum(targets * np.log(np.maximum(p, LOG_EPS)), axis=1)))

    def loss(self, X, y, theta) -> float:
        """Mean cross-entropy; ``y`` is labels or one-hot rows."""
        if len(y) == 0:
            raise ValueError("loss of an empty dataset")
        return self.loss_from_encoded(self.encode_batch(X), self._targets(y), theta)

    def accuracy(self, X, labels, theta) -> float:
        if len(labels) == 0:
            raise ValueError("accuracy of an empty dataset")
        pred = np.argmax(self.predict_proba(X, theta), axis=1)
        return float(np.mean(pred == np.asarray(labels)))

    def initial_point(self, seed: int, stream: str = "init") -> np.ndarray:
        return substream(seed, stream).uniform(-math.pi, math.pi, size=self.n_params)

    def fit(
        self,
        X,
        y,
        theta_init=None,
        warm_start: bool = False,
        config: OptimizerConfig = OptimizerConfig(),
        seed: int = 0,
        stream: str = "init",
    ) -> FitResult:
        """Train from ``theta_init`` (warm) or a seeded uniform draw in [-pi, pi) (cold)."""
        if warm_start:
            if theta_init is None:
                raise ValueError("warm start needs theta_init")
            start = self._check_theta(theta_init).copy()
        else:
            if theta_init is not None:
                raise ValueError("theta_init given without warm_start")
            start = self.initial_point(seed, stream)
        if len(y) == 0:
            raise ValueError("cannot fit an empty dataset")
        encoded = self.encode_batch(X)
        targets = self._targets(y)

        def objective(theta):
            return self.loss_from_encoded(encoded, targets, theta)

        theta, trace = minimize(objective, start, config)
        evals = list(trace.evaluations)
        final = min(evals) if evals else objective(theta)
        return FitResult(
            theta=theta,
            objective_trace=evals,
            iterations=max(len(trace.iterates) - 1, 0),
            start_loss=evals[0] if evals else None,
            final_loss=final,
            optimizer_trace=trace,
            warm_start=warm_start,
        )


def params_to_bytes(theta) -> bytes:
    theta = np.asarray(theta, dtype="<f8").reshape(-1)
    return PARAM_HEADER.pack(PARAM_MAGIC, PARAM_VERSION, 0, theta.size) + theta.tobytes()


def params_from_bytes(blob: bytes) -> np.ndarray:
    if len(blob) < PARAM_HEADER.size:
        raise ValueError("truncated parameter blob")
    magic, version, _, count = PARAM_HEADER.unpack_from(blob)
    if magic != PARAM_MAGIC or version != PARAM_VERSION:
        raise ValueError("not a parameter blob")
    body = blob[PARAM_HEADER.size :]
    if len(body) != 8 * count:
        raise ValueError("parameter blob length does not match its header")
    return np.frombuffer(body, dtype="<f8").astype(float)


def payload_bits(n_params: int) -> int:
    """fileS(theta) in bits: header plus one float64 per parameter."""
    return 8 * (PARAM_HEADER.size + 8 * n_params)
