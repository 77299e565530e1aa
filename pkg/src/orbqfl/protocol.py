"""Ring-pass (orb) and server/FedAvg quantum federated learning over the constellation.

Both runners share the same clock model: local training costs
``local_train_walltime`` seconds, a transmission costs the link delay and
starts at the current clock. The server baseline serves satellites one at
a time over a single ground/GEO terminal, so every event gets its own slot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import linkbudget, orbital
from .cobyla import OptimizerConfig
from .dataio import Dataset
from .linkbudget import LinkSpec
from .orbital import ConstellationConfig
from .vqc import VQC, AnsatzSpec, ClassifierSpec, FeatureMapSpec, FitResult, payload_bits

SERVER = "server"
NodeId = Union[int, str]


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    mode: str = "orb"
    rounds: int = 3
    constellation: ConstellationConfig = ConstellationConfig()
    s2s: LinkSpec = linkbudget.L3
    s2g: LinkSpec = linkbudget.L2
    g2s: LinkSpec = linkbudget.L1
    seed: int = 0
    qubits: int = 4
    n_classes: int = 2
    fm_reps: int = 1
    ansatz_reps: int = 2
    encoding: str = "angle"
    entangle: str = "ring"
    optimizer: OptimizerConfig = OptimizerConfig()
    enforce_line_of_sight: bool = False
    local_train_walltime: float = 0.0
    los_retry_interval: float = 60.0
    max_los_wait: float = 86_400.0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("need at least one communication round")
        if self.constellation.n_sats < 2:
            raise ValueError("need at least two satellites")
        if self.mode not in ("orb", "server"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.local_train_walltime < 0 or self.los_retry_interval <= 0:
            raise ValueError("walltime must be >= 0 and retry interval > 0")

    @property
    def n_sats(self) -> int:
        return self.constellation.n_sats

    def model(self) -> VQC:
        return VQC(
            FeatureMapSpec(self.qubits, self.fm_reps, self.encoding),
            AnsatzSpec(self.qubits, self.ansatz_reps, self.entangle),
            ClassifierSpec(self.n_classes),
        )


@dataclass(frozen=True)
class CommEvent:
    sim_time: float
    src: NodeId
    dst: NodeId
    payload: int
    distance: float
    delay: float
    margin: float
    blocked: bool = False


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    device: NodeId
    train_accuracy: float
    test_accuracy: float
    final_objective: float
    evals_used: int
    cumulative_sim_time: float
    cumulative_bits: int


@dataclass(frozen=True)
class FitCall:
    round: int
    device: int
    warm_start: bool
    start_loss: float | None
    final_loss: float
    evals: int


@dataclass
class RunResult:
    mode: str
    metrics: list[RoundMetrics] = field(default_factory=list)
    events: list[CommEvent] = field(default_factory=list)
    fit_calls: list[FitCall] = field(default_factory=list)
    theta: np.ndarray | None = None

    def server_rows(self) -> list[RoundMetrics]:
        return [m for m in self.metrics if m.device == SERVER]


def fedavg(params: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """Elementwise weighted mean with weights on the simplex."""
    if len(params) == 0 or len(params) != len(weights):
        raise ValueError("need one weight per parameter vector")
    arr = np.array([np.asarray(p, dtype=float).reshape(-1) for p in params])
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to 1")
    return w @ arr


def server_eval(model: VQC, theta, holdout: Dataset) -> tuple[float, float]:
    """(accuracy, objective) of ``theta`` on the holdout; never used for training."""
    if len(holdout) == 0:
        raise ValueError("holdout is empty")
    return (
        model.accuracy(holdout.features, holdout.labels, theta),
        model.loss(holdout.features, holdout.labels, theta),
    )


class _Link:
    """Sim clock, geometry and event log shared by both runners."""

    def __init__(self, config: SimConfig, n_params: int):
        self.config = config
        self.orbits = orbital.build_constellation(config.constellation)
        self.payload = payload_bits(n_params)
        self.clock = 0.0
        self.bits = 0
        self.events: list[CommEvent] = []

    def position(self, node: NodeId, t: float):
        if node == SERVER:
            return orbital.server_position(self.config.constellation, t)
        st = orbital.propagate(self.orbits[node], t, sat_id=node)
        return orbital.EciPoint(st.position, st.time)

    def train(self) -> None:
        self.clock += self.config.local_train_walltime

    def transmit(self, src: NodeId, dst: NodeId, spec: LinkSpec) -> CommEvent:
        waited = 0.0
        while True:
            a, b = self.position(src, self.clock), self.position(dst, self.clock)
            dist = orbital.distance(a, b)
            delay = linkbudget.transmission_delay(self.payload, spec.bitrate, dist)
            margin = linkbudget.link_budget(spec, dist).margin
            visible = not self.config.enforce_line_of_sight or orbital.line_of_sight(a, b)
            ev = CommEvent(self.clock, src, dst, self.payload, dist, delay, margin, blocked=not visible)
            self.events.append(ev)
            if visible:
                self.clock += delay
                self.bits += self.payload
                return ev
            if waited >= self.config.max_los_wait:
                raise ProtocolError(
                    f"no line of sight {src}->{dst} within {self.config.max_los_wait} s"
                )
            self.clock += self.config.los_retry_interval
            waited += self.config.los_retry_interval


def _check_shards(config: SimConfig, shards: Sequence[Dataset]) -> None:
    if len(shards) != config.n_sats:
        raise ValueError(f"{len(shards)} shards for {config.n_sats} satellites")
    if any(len(s) == 0 for s in shards):
        raise ValueError("every satellite needs a nonempty shard")


def _pooled(shards: Sequence[Dataset]) -> Dataset:
    return Dataset(
        np.concatenate([s.features for s in shards]),
        np.concatenate([s.labels for s in shards]),
        shards[0].class_names,
    )


def _device_row(model, r, i, fit: FitResult, shard, test, link) -> RoundMetrics:
    holdout = test if test is not None else shard
    return RoundMetrics(
        round=r,
        device=i,
        train_accuracy=model.accuracy(shard.features, shard.labels, fit.theta),
        test_accuracy=model.accuracy(holdout.features, holdout.labels, fit.theta),
        final_objective=fit.final_loss,
        evals_used=fit.evals,
        cumulative_sim_time=link.clock,
        cumulative_bits=link.bits,
    )


def _server_row(model, r, theta, pool, test, link) -> RoundMetrics:
    holdout = test if test is not None else pool
    acc, obj = server_eval(model, theta, holdout)
    return RoundMetrics(
        round=r,
        device=SERVER,
        train_accuracy=model.accuracy(pool.features, pool.labels, theta),
        test_accuracy=acc,
        final_objective=obj,
        evals_used=0,
        cumulative_sim_time=link.clock,
        cumulative_bits=link.bits,
    )


def run_orb_qfl(config: SimConfig, shards: Sequence[Dataset], test: Dataset | None = None) -> RunResult:
    """Pass the model around the ring; each node warm-starts from what it received.

    Only node 0 in round 0 starts cold. A hypothetical server scores the
    circulating model after every round (``device == "server"`` rows); it
    never feeds anything back.
    """
    _check_shards(config, shards)
    model = config.model()
    link = _Link(config, model.n_params)
    pool = _pooled(shards)
    out = RunResult("orb")
    theta_s = None
    n = config.n_sats
    for r in range(config.rounds):
        for i in range(n):
            shard = shards[i]
            cold = r == 0 and i == 0
            fit = model.fit(
                shard.features,
                shard.labels,
                theta_init=None if cold else theta_s,
                warm_start=not cold,
                config=config.optimizer,
                seed=config.seed,
            )
            link.train()
            theta_s = fit.theta
            out.fit_calls.append(FitCall(r, i, not cold, fit.start_loss, fit.final_loss, fit.evals))
            link.transmit(i, (i + 1) % n, config.s2s)
            out.metrics.append(_device_row(model, r, i, fit, shard, test, link))
        out.metrics.append(_server_row(model, r, theta_s, pool, test, link))
    out.events = link.events
    out.theta = theta_s
    return out


def run_server_qfl(config: SimConfig, shards: Sequence[Dataset], test: Dataset | None = None) -> RunResult:
    """Classic QFL: fit from the global model, uplink, FedAvg, downlink to everyone."""
    _check_shards(config, shards)
    model = config.model()
    link = _Link(config, model.n_params)
    pool = _pooled(shards)
    out = RunResult("server")
    n = config.n_sats
    sizes = np.array([len(s) for s in shards], dtype=float)
    weights = sizes / sizes.sum()
    theta_g = model.initial_point(config.seed)
    for r in range(config.rounds):
        # satellites train concurrently from the same global model
        link.train()
        local = []
        for i in range(n):
            fit = model.fit(
                shards[i].features,
                shards[i].labels,
                theta_init=theta_g,
                warm_start=True,
                config=config.optimizer,
                seed=config.seed,
            )
            local.append(fit)
            out.fit_calls.append(FitCall(r, i, True, fit.start_loss, fit.final_loss, fit.evals))
        for i, fit in enumerate(local):
            link.transmit(i, SERVER, config.s2g)
            out.metrics.append(_device_row(model, r, i, fit, shards[i], test, link))
        theta_g = fedavg([f.theta for f in local], weights)
        for i in range(n):
            link.transmit(SERVER, i, config.g2s)
        out.metrics.append(_server_row(model, r, theta_g, pool, test, link))
    out.events = link.events
    out.theta = theta_g
    return out


def run(config: SimConfig, shards: Sequence[Dataset], test: Dataset | None = None) -> RunResult:
    runner = run_orb_qfl if config.mode == "orb" else run_server_qfl
    return runner(config, shards, test)


BOUND_KEYS = (
    "L", "mu", "delta_schedule", "N", "K", "R", "gamma_c", "tau_c", "delta_c",
    "rho_loss", "rho", "epsilon_c", "B", "T", "alpha_q", "sigma_q", "N_q",
    "theta0_minus_thetastar_sq",
)
INTEGRAL_KEYS = ("N", "K", "R", "N_q")


@dataclass(frozen=True)
class BoundConstants:
    L: float = 0.0
    mu: float = 0.0
    delta_schedule: tuple[float, ...] = ()
    N: int = 0
    K: int = 0
    R: int = 0
    gamma_c: float = 0.0
    tau_c: float = 0.0
    delta_c: float = 0.0
    rho_loss: float = 0.0
    rho: float = 0.0
    epsilon_c: float = 0.0
    B: float = 0.0
    T: float = 0.0
    alpha_q: float = 0.0
    sigma_q: float = 0.0
    N_q: int = 0
    theta0_minus_thetastar_sq: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "delta_schedule", tuple(float(d) for d in self.delta_schedule))
        for key in BOUND_KEYS:
            value = getattr(self, key)
            values = value if isinstance(value, tuple) else (value,)
            for v in values:
                if not math.isfinite(v) or v < 0:
                    raise ValueError(f"bound constant {key} must be finite and nonnegative")
        for key in INTEGRAL_KEYS:
            if float(getattr(self, key)) != int(getattr(self, key)):
                raise ValueError(f"bound constant {key} must be an integer")


def _ratio(num: float, den: float, what: str) -> float:
    if num == 0.0:
        return 0.0
    if den == 0.0:
        raise ValueError(f"{what} is zero while its numerator is not")
    return num / den


def theorem1_bound(c: BoundConstants, r: int) -> float:
    """Convergence bound after ``r`` rounds.

    The radius sum runs over the first ``r`` schedule entries; the single-radius
    terms use the last of those entries (the radius in force at round r).
    """
    if r < 0:
        raise ValueError("round must be >= 0")
    sched = c.delta_schedule[:r]
    delta_r = sched[-1] if sched else 0.0
    nk = float(c.N * c.K)
    optimizer = c.L * sum(sched)
    fl = c.mu * c.theta0_minus_thetastar_sq * math.exp(-c.mu * delta_r * r / 2.0)
    local = _ratio(delta_r, nk, "N*K") + _ratio(c.L * delta_r**2, nk, "N*K")
    satcom = c.gamma_c * c.tau_c * r + c.delta_c * c.rho_loss * c.rho
    satcom += c.epsilon_c * c.T * _ratio(c.rho, c.B, "bandwidth B") if c.epsilon_c * c.T else 0.0
    quantum = c.alpha_q * c.sigma_q**2 * c.N_q
    return optimizer + fl + local + satcom + quantum


def bound_curve(c: BoundConstants) -> list[tuple[int, float]]:
    return [(r, theorem1_bound(c, r)) for r in range(1, c.R + 1)]
