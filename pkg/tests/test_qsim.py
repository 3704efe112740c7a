import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qugeo.ansatz import AnsatzConfig, build_ansatz, init_params
from qugeo.decode import LayerReadout, PixelReadout
from qugeo.errors import ConfigurationError, NumericError
from qugeo.qsim import (CU3, SWAP, U3, Circuit, GateOp, Statevector, apply_gate,
                        basis_probabilities, dense_unitary, run_batch, run_circuit,
                        value_and_grad, z_expectations)

from . import oracles


def random_state(rng, n):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return Statevector(n, v / np.linalg.norm(v))


def random_circuit(rng, n, n_gates):
    ops, n_params = [], 0
    for _ in range(n_gates):
        kind = rng.choice([U3, CU3, SWAP]) if n > 1 else U3
        t = int(rng.integers(n))
        if kind == SWAP:
            c = int(rng.choice([q for q in range(n) if q != t]))
            ops.append(GateOp(SWAP, t, control=c))
            continue
        c = None if kind == U3 else int(rng.choice([q for q in range(n) if q != t]))
        if rng.random() < 0.5:
            ops.append(GateOp(kind, t, control=c, slots=(n_params, n_params + 1, n_params + 2)))
            n_params += 3
        else:
            ops.append(GateOp(kind, t, control=c, angles=tuple(rng.uniform(-np.pi, np.pi, 3))))
    return Circuit(n, ops, n_params), rng.uniform(-np.pi, np.pi, n_params)


def test_little_endian_convention():
    # X on qubit 0 of |00> gives basis index 1
    out = apply_gate(Statevector.zero(2), GateOp(U3, 0, angles=(np.pi, 0, np.pi)))
    assert np.argmax(np.abs(out.amplitudes)) == 1
    out = apply_gate(Statevector.zero(2), GateOp(U3, 1, angles=(np.pi, 0, np.pi)))
    assert np.argmax(np.abs(out.amplitudes)) == 2


def test_u3_identity_and_x():
    rng = np.random.default_rng(0)
    s = random_state(rng, 3)
    same = apply_gate(s, GateOp(U3, 1, angles=(0.0, 0.0, 0.0)))
    np.testing.assert_allclose(same.amplitudes, s.amplitudes, atol=1e-15)
    flipped = apply_gate(Statevector.zero(1), GateOp(U3, 0, angles=(np.pi, 0.0, np.pi)))
    np.testing.assert_allclose(flipped.amplitudes, [0, 1], atol=1e-15)


def test_gate_matrix_matches_oracle_convention():
    rng = np.random.default_rng(1)
    angles = tuple(rng.uniform(-3, 3, 3))
    np.testing.assert_allclose(GateOp(U3, 0, angles=angles).matrix(), oracles.u3(*angles),
                               atol=1e-15)
    m = GateOp(CU3, 1, control=0, angles=angles).matrix()
    np.testing.assert_allclose(m, oracles.controlled(2, 0, 1, oracles.u3(*angles)), atol=1e-15)


@pytest.mark.parametrize("kind", [U3, CU3, SWAP])
def test_gate_matrices_unitary(kind):
    rng = np.random.default_rng(2)
    op = GateOp(kind, 0, control=None if kind == U3 else 1,
                angles=() if kind == SWAP else tuple(rng.uniform(-3, 3, 3)))
    m = op.matrix()
    np.testing.assert_allclose(m.conj().T @ m, np.eye(len(m)), atol=1e-12)


def test_four_qubit_circuit_vs_dense_oracle():
    rng = np.random.default_rng(3)
    circ, p = random_circuit(rng, 4, 20)
    s = random_state(rng, 4)
    out = run_circuit(circ, p, s).amplitudes
    ref = oracles.circuit_unitary(circ, p) @ s.amplitudes
    assert np.max(np.abs(out - ref)) < 1e-10


def test_default_ansatz_vs_dense_oracle():
    cfg = AnsatzConfig()
    circ = build_ansatz(cfg)
    p = init_params(cfg, 7)
    s = random_state(np.random.default_rng(4), 8)
    out = run_circuit(circ, p, s).amplitudes
    ref = oracles.circuit_unitary(circ, p) @ s.amplitudes
    assert np.max(np.abs(out - ref)) < 1e-9


def test_package_dense_unitary_agrees_with_oracle():
    rng = np.random.default_rng(5)
    circ, p = random_circuit(rng, 3, 12)
    np.testing.assert_allclose(dense_unitary(circ, p), oracles.circuit_unitary(circ, p),
                               atol=1e-12)


def test_empty_circuit_and_inverse():
    rng = np.random.default_rng(6)
    s = random_state(rng, 4)
    out = run_circuit(Circuit(4), (), s)
    np.testing.assert_array_equal(out.amplitudes, s.amplitudes)
    circ, p = random_circuit(rng, 4, 25)
    fwd = run_circuit(circ, p, s)
    back = run_circuit(circ.inverse(p), (), fwd)
    assert abs(np.vdot(s.amplitudes, back.amplitudes)) ** 2 > 1 - 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31), n=st.integers(1, 5), gates=st.integers(0, 30))
def test_norm_preserved(seed, n, gates):
    rng = np.random.default_rng(seed)
    circ, p = random_circuit(rng, n, gates)
    out = run_circuit(circ, p, random_state(rng, n))
    assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-10


def test_deterministic_repeat():
    rng = np.random.default_rng(8)
    circ, p = random_circuit(rng, 5, 30)
    s = random_state(rng, 5)
    a = run_circuit(circ, p, s).amplitudes
    b = run_circuit(circ, p, s).amplitudes
    assert np.array_equal(a, b)


def test_z_expectations():
    np.testing.assert_allclose(z_expectations(Statevector.zero(3), [0, 1, 2]), [1, 1, 1])
    h = Circuit(3, [GateOp(U3, q, angles=(np.pi / 2, 0, np.pi)) for q in range(3)])
    plus = run_circuit(h, (), Statevector.zero(3))
    np.testing.assert_allclose(z_expectations(plus, [0, 1, 2]), 0, atol=1e-10)
    s = random_state(np.random.default_rng(9), 4)
    ref = [oracles.z_expectation_loop(s.amplitudes, q) for q in range(4)]
    np.testing.assert_allclose(z_expectations(s, range(4)), ref, atol=1e-14)


def test_basis_probabilities():
    np.testing.assert_array_equal(basis_probabilities(Statevector.zero(2)), [1, 0, 0, 0])
    v = np.zeros(256)
    v[:64] = 1 / 8
    np.testing.assert_allclose(basis_probabilities(Statevector.from_vector(v))[:64], 1 / 64)
    s = random_state(np.random.default_rng(10), 6)
    assert abs(basis_probabilities(s).sum() - 1) < 1e-10


def test_validation_errors():
    with pytest.raises(ConfigurationError):
        Circuit(2, [GateOp(U3, 2, angles=(0, 0, 0))])
    with pytest.raises(ConfigurationError):
        Circuit(2, [GateOp(U3, 0, slots=(0, 1, 2))], n_params=2)
    with pytest.raises(ConfigurationError):
        GateOp(U3, 0, angles=(0, 0))
    with pytest.raises(ConfigurationError):
        GateOp(CU3, 0, control=0, angles=(0, 0, 0))
    with pytest.raises(ConfigurationError):
        GateOp(SWAP, 0, control=1, angles=(1, 2, 3))
    with pytest.raises(NumericError):
        Statevector(1, np.array([1.0, 1.0]))
    with pytest.raises(ConfigurationError):
        apply_gate(Statevector.zero(2), GateOp(U3, 3, angles=(0, 0, 0)))
    circ = Circuit(1, [GateOp(U3, 0, slots=(0, 1, 2))], 3)
    with pytest.raises(NumericError, match="index 1"):
        run_circuit(circ, [0.0, np.nan, 0.0], Statevector.zero(1))


def test_no_trainable_slots_empty_gradient():
    circ = Circuit(2, [GateOp(SWAP, 0, control=1)])
    loss, g = value_and_grad(circ, (), Statevector.zero(2), LayerReadout(np.zeros((1, 2, 2))))
    assert g.shape == (0,)


class _OneMinusZ:
    def loss_and_dprob(self, probs):
        z = probs[:, 0] - probs[:, 1]
        return float(np.sum(1 - z)), np.stack([-np.ones(len(probs)), np.ones(len(probs))], 1)


def test_single_u3_gradient_analytic():
    circ = Circuit(1, [GateOp(U3, 0, slots=(0, None, None), angles=(0, 0, 0))], 1)
    for theta in (0.0, 0.3, -1.2):
        loss, g = value_and_grad(circ, [theta], Statevector.zero(1), _OneMinusZ())
        assert loss == pytest.approx(1 - np.cos(theta))
        assert g[0] == pytest.approx(np.sin(theta), abs=1e-14)


@pytest.mark.parametrize("decoder", ["layer", "pixel"])
def test_small_circuit_gradient_vs_finite_differences(decoder):
    rng = np.random.default_rng(11)
    circ, p = random_circuit(rng, 6, 30)
    states = np.stack([random_state(rng, 6).amplitudes for _ in range(3)])
    targets = rng.uniform(size=(3, 8, 8))
    readout = (LayerReadout(targets[:, :6, :6]) if decoder == "layer"
               else PixelReadout(targets, 3.0))
    _, g = value_and_grad(circ, p, states, readout)
    fd = oracles.finite_difference_grad(lambda x: value_and_grad(circ, x, states, readout)[0], p)
    assert np.max(np.abs(g - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_run_batch_matches_single_runs():
    rng = np.random.default_rng(12)
    circ, p = random_circuit(rng, 4, 15)
    states = np.stack([random_state(rng, 4).amplitudes for _ in range(5)])
    out = run_batch(circ, p, states)
    for k in range(5):
        np.testing.assert_allclose(
            out[k], run_circuit(circ, p, Statevector(4, states[k])).amplitudes, atol=1e-15)
