"""Derivative-free trust-region minimization by linear interpolation.

Unconstrained COBYLA core: keep m+1 interpolation points, fit the linear
model through them, step a distance rho down the model gradient, and halve
rho when a step fails on an acceptable simplex. Geometry repair follows
Powell's thresholds (a vertex is "far" beyond 2.1*rho, the simplex is "flat"
when a vertex sits within 0.25*rho of its opposite face).

The trace records one iterate per trust-region iteration together with the
radius used for the step taken from it, so ``|theta[t+1] - theta[t]| <=
radius[t]`` can be checked directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FAR_FACTOR = 2.1
FLAT_FACTOR = 0.25
GEOMETRY_STEP = 0.5
SHRINK = 0.5
# a trust step counts as short below this fraction of the predicted decrease
ACCEPT_RATIO = 0.1


@dataclass(frozen=True)
class OptimizerConfig:
    rho_begin: float = 1.0
    rho_end: float = 1e-4
    max_fun: int = 100

    def __post_init__(self):
        if not 0 < self.rho_end <= self.rho_begin:
            raise ValueError("need 0 < rho_end <= rho_begin")
        if self.max_fun < 0:
            raise ValueError("max_fun must be >= 0")


@dataclass
class TrustRegionTrace:
    iterates: list[np.ndarray] = field(default_factory=list)
    objectives: list[float] = field(default_factory=list)
    radii: list[float] = field(default_factory=list)
    evaluations: list[float] = field(default_factory=list)
    # iteration indices at which a vertex was replaced for geometry only
    geometry_steps: list[int] = field(default_factory=list)

    def record(self, x: np.ndarray, fx: float, rho: float) -> None:
        self.iterates.append(np.array(x, dtype=float))
        self.objectives.append(float(fx))
        self.radii.append(float(rho))

    @property
    def n_evals(self) -> int:
        return len(self.evaluations)

    def step_lengths(self) -> list[float]:
        return [float(np.linalg.norm(b - a)) for a, b in zip(self.iterates, self.iterates[1:])]

    def best_so_far(self) -> list[float]:
        return list(np.minimum.accumulate(self.evaluations)) if self.evaluations else []


def _opposite_face_direction(D: np.ndarray, j: int) -> np.ndarray:
    """Unit vector orthogonal to every simplex edge except edge j."""
    m = D.shape[1]
    others = np.delete(D, j, axis=0)
    if others.shape[0] == 0:
        return np.ones(m)
    _, _, vt = np.linalg.svd(others)
    return vt[-1]


def minimize(
    f: Callable[[np.ndarray], float],
    x0,
    config: OptimizerConfig = OptimizerConfig(),
) -> tuple[np.ndarray, TrustRegionTrace]:
    """Minimize ``f`` from ``x0``; returns the best evaluated point and its trace."""
    x0 = np.array(x0, dtype=float).reshape(-1)
    m = x0.size
    if m < 1:
        raise ValueError("need at least one variable")
    trace = TrustRegionTrace()
    if config.max_fun == 0:
        return x0.copy(), trace

    def evaluate(x: np.ndarray) -> float:
        v = float(f(x))
        if not math.isfinite(v):
            v = math.inf
        trace.evaluations.append(v)
        return v

    f0 = float(f(x0))
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")
    trace.evaluations.append(f0)

    rho = config.rho_begin
    trace.record(x0, f0, rho)

    # vertex -> (point, value, evaluation index); ties go to the earlier evaluation
    pts = [x0.copy()]
    vals = [f0]
    order = [0]
    for i in range(m):
        if trace.n_evals >= config.max_fun:
            break
        x = x0.copy()
        x[i] += rho
        pts.append(x)
        vals.append(evaluate(x))
        order.append(trace.n_evals - 1)

    def best_index() -> int:
        return min(range(len(pts)), key=lambda k: (vals[k], order[k]))

    if len(pts) < m + 1:
        b = best_index()
        trace.record(pts[b], vals[b], rho)
        return pts[b].copy(), trace

    # geometry is examined only after a trust step falls short
    short = False
    while trace.n_evals < config.max_fun:
        b = best_index()
        xb, fb = pts[b], vals[b]
        trace.record(xb, fb, rho)
        t = len(trace.iterates) - 1
        rows = [k for k in range(m + 1) if k != b]
        D = np.array([pts[k] - xb for k in rows])
        df = np.array([vals[k] - fb for k in rows])

        veta = np.linalg.norm(D, axis=1)
        dirs = [_opposite_face_direction(D, j) for j in range(m)]
        vsig = np.array([abs(D[j] @ dirs[j]) for j in range(m)])
        finite = np.isfinite(df)

        grad = None
        if finite.all() and vsig.min() > 0:
            try:
                grad = np.linalg.solve(D, df)
            except np.linalg.LinAlgError:
                grad = None

        repair = None
        if not finite.all():
            repair = int(np.flatnonzero(~finite)[0])
        elif grad is None:
            repair = int(np.argmin(vsig))
        elif short:
            if veta.max() > FAR_FACTOR * rho:
                repair = int(np.argmax(veta))
            elif vsig.min() < FLAT_FACTOR * rho:
                repair = int(np.argmin(vsig))
            else:
                # acceptable simplex, so the model is trusted and rho was too big
                if rho <= config.rho_end:
                    break
                rho = max(rho * SHRINK, config.rho_end)
                short = False

        if repair is not None:
            v = dirs[repair]
            if grad is not None and grad @ v > 0:
                v = -v
            x_new = xb + GEOMETRY_STEP * rho * v
            k = rows[repair]
            pts[k], vals[k], order[k] = x_new, evaluate(x_new), trace.n_evals - 1
            trace.geometry_steps.append(t)
            short = False
            continue

        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            short = True
            continue
        d = -rho * grad / gnorm
        x_new = xb + d
        # rounding in xb + d can overshoot rho by an ulp or two
        while np.linalg.norm(x_new - xb) > rho:
            d *= 1.0 - 1e-10
            x_new = xb + d
        f_new = evaluate(x_new)
        short = fb - f_new < ACCEPT_RATIO * rho * gnorm
        # drop the vertex whose replacement keeps the simplex volume largest,
        # favouring vertices that have drifted far from the base
        Dinv = np.linalg.inv(D)
        score = np.abs(d @ Dinv) * np.maximum(1.0, veta / rho) ** 2
        j = int(np.argmax(score))
        k = rows[j]
        pts[k], vals[k], order[k] = x_new, f_new, trace.n_evals - 1

    b = best_index()
    trace.record(pts[b], vals[b], rho)
    return pts[b].copy(), trace


def regret(trace: TrustRegionTrace, f_star: float, lipschitz: float = 1.0) -> tuple[float, float]:
    """Empirical regret sum(F(theta_t) - f_star) and the radius bound L * sum(radius_t)."""
    if not trace.objectives:
        return 0.0, 0.0
    if f_star > min(trace.objectives):
        raise ValueError("f_star exceeds the best objective in the trace")
    r = float(sum(v - f_star for v in trace.objectives))
    return r, float(lipschitz * sum(trace.radii))
