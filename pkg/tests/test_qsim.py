import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_gate, dense_run
from orbqfl.qsim import (
    Circuit,
    CircuitError,
    GateOp,
    ParamRef,
    StateVector,
    apply_gate,
    init_zero,
    probabilities,
    run,
    run_batch,
)

INV_SQRT2 = 1 / math.sqrt(2)


def random_state(n, rng):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(n, v / np.linalg.norm(v))


def test_init_zero():
    np.testing.assert_array_equal(init_zero(1).amplitudes, [1, 0])
    s = init_zero(3)
    assert s.amplitudes.shape == (8,) and s.amplitudes[0] == 1 and np.count_nonzero(s.amplitudes) == 1
    for bad in (0, 13):
        with pytest.raises(CircuitError):
            init_zero(bad)


def test_basic_gates():
    h = apply_gate(init_zero(1), GateOp("H", (0,)))
    np.testing.assert_allclose(h.amplitudes, [INV_SQRT2, INV_SQRT2], atol=1e-12)
    ry = apply_gate(init_zero(1), GateOp("RY", (0,), math.pi))
    np.testing.assert_allclose(np.abs(ry.amplitudes), [0, 1], atol=1e-12)
    # basis index 1 has the control (qubit 0) set, so CX flips qubit 1 -> index 3
    one = StateVector(2, np.array([0, 1, 0, 0], dtype=complex))
    out = apply_gate(one, GateOp("CX", (0, 1)))
    np.testing.assert_array_equal(out.amplitudes, [0, 0, 0, 1])


def test_bad_targets():
    with pytest.raises(CircuitError):
        apply_gate(init_zero(2), GateOp("H", (2,)))
    with pytest.raises(CircuitError):
        GateOp("CX", (1, 1))
    with pytest.raises(CircuitError):
        GateOp("RY", (0,), float("nan"))
    with pytest.raises(CircuitError):
        GateOp("SWAP", (0, 1))


def test_run_cases():
    np.testing.assert_array_equal(run(Circuit(2)).amplitudes, init_zero(2).amplitudes)
    hh = Circuit(1).append("H", 0).append("H", 0)
    np.testing.assert_allclose(run(hh).amplitudes, [1, 0], atol=1e-12)
    c = Circuit(2).append("RY", 0, param=ParamRef("theta", (0,)))
    with pytest.raises(CircuitError):
        run(c)
    with pytest.raises(CircuitError):
        Circuit(1).append("RY", 0).bind()


def test_probabilities():
    np.testing.assert_allclose(probabilities(init_zero(1)), [1, 0])
    np.testing.assert_allclose(probabilities(apply_gate(init_zero(1), GateOp("H", (0,)))), [0.5, 0.5])


def all_gates(n):
    for q in range(n):
        yield GateOp("H", (q,))
        for kind in ("RX", "RY", "RZ"):
            yield GateOp(kind, (q,), 0.7 + q)
    for a, b in itertools.permutations(range(n), 2):
        yield GateOp("CX", (a, b))
        yield GateOp("CZ", (a, b))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_every_gate_matches_dense_oracle(n):
    rng = np.random.default_rng(n)
    for gate in all_gates(n):
        s = random_state(n, rng)
        got = apply_gate(s, gate).amplitudes
        want = dense_gate(gate.kind, gate.targets, gate.angle, n) @ s.amplitudes
        np.testing.assert_allclose(got, want, atol=1e-9)


def test_batch_matches_single():
    c = Circuit(3)
    for j in range(3):
        c.append("H", j).append("RY", j, param=ParamRef("x", (j,), math.pi))
    c.append("CX", (0, 2)).append("RZ", 1, param=ParamRef("x", (0, 1), 2.0))
    c.append("RX", 2, param=ParamRef("theta", (0,)))
    X = np.random.default_rng(0).uniform(size=(5, 3))
    batch = run_batch(c, X, params=[0.3])
    for row, x in zip(batch, X):
        np.testing.assert_allclose(row, run(c, features=x, params=[0.3]).amplitudes, atol=1e-12)


gate_strategy = st.builds(
    lambda kind, a, b, angle: (kind, (a,) if kind in ("H", "RX", "RY", "RZ") else (a, b), angle),
    st.sampled_from(["H", "RX", "RY", "RZ", "CX", "CZ"]),
    st.integers(0, 3),
    st.integers(0, 3),
    st.floats(-10, 10, allow_nan=False),
).filter(lambda g: len(set(g[1])) == len(g[1]))


@settings(max_examples=60, deadline=None)
@given(st.lists(gate_strategy, max_size=25))
def test_random_circuits_match_oracle_and_keep_norm(gates):
    n = 4
    c = Circuit(n)
    for kind, targets, angle in gates:
        c.append(kind, targets, angle=angle if kind in ("RX", "RY", "RZ") else None)
    got = run(c).amplitudes
    want = dense_run([(k, t, a) for k, t, a in gates], n)
    np.testing.assert_allclose(got, want, atol=1e-9)
    assert abs(np.linalg.norm(got) - 1) < 1e-10
    p = probabilities(got)
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(-7, 7), st.floats(-7, 7), st.integers(0, 2**32 - 1))
def test_gate_identities(a, b, seed):
    rng = np.random.default_rng(seed)
    s = random_state(3, rng)
    twice = lambda g: apply_gate(apply_gate(s, g), g).amplitudes
    np.testing.assert_allclose(twice(GateOp("H", (1,))), s.amplitudes, atol=1e-10)
    np.testing.assert_allclose(twice(GateOp("CX", (2, 0))), s.amplitudes, atol=1e-10)
    ab = apply_gate(apply_gate(s, GateOp("RY", (1,), a)), GateOp("RY", (1,), b)).amplitudes
    np.testing.assert_allclose(ab, apply_gate(s, GateOp("RY", (1,), a + b)).amplitudes, atol=1e-10)
