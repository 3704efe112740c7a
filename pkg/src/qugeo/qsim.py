"""Exact dense statevector simulation with adjoint gradients.

Conventions
-----------
* Qubit ``q`` is bit ``q`` of the basis-state index (little-endian), so on
  two qubits ``|q1 q0>`` the amplitude of ``q0=1, q1=0`` sits at index 1.
* ``U3(theta, phi, lam) = [[cos(theta/2), -e^{i lam} sin(theta/2)],
  [e^{i phi} sin(theta/2), e^{i(phi+lam)} cos(theta/2)]]``.
* ``CU3`` applies ``U3`` to the target when the control qubit is ``|1>``.
* Gradients use the adjoint (reverse-sweep) method: one forward pass, then a
  backward pass that un-computes the state while propagating dL/d(conj psi).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Protocol, Sequence

import numpy as np

from . import _qkernels as K
from .errors import ConfigurationError, NumericError

U3 = "U3"
CU3 = "CU3"
SWAP = "SWAP"
STATE_PREP = "StatePrepRotation"

_KIND_CODES = {U3: K.K_U3, CU3: K.K_CU3, SWAP: K.K_SWAP, STATE_PREP: K.K_UCRY}
NORM_TOL = 1e-10


@dataclass(frozen=True)
class GateOp:
    """One gate in a circuit.

    ``slots`` reference trainable parameters; ``angles`` hold fixed values.
    A U3/CU3 op carries exactly three angles through one of the two, with
    ``None`` slot entries falling back to the matching fixed angle. For SWAP,
    ``control`` is the second qubit. A StatePrepRotation is a uniformly
    controlled RY on ``target``: ``angles[p]`` is used when the control
    qubits, read as a little-endian integer, equal ``p``.
    """

    kind: str
    target: int
    control: int | None = None
    slots: tuple = ()
    angles: tuple = ()
    controls: tuple = ()

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ConfigurationError(f"unknown gate kind {self.kind!r}")
        if self.kind in (U3, CU3):
            if self.slots and len(self.slots) != 3:
                raise ConfigurationError(f"{self.kind} needs exactly 3 parameter slots")
            if not self.slots and len(self.angles) != 3:
                raise ConfigurationError(f"{self.kind} needs exactly 3 angles")
            if self.slots and any(s is None for s in self.slots) and len(self.angles) != 3:
                raise ConfigurationError("partially fixed gate needs 3 fallback angles")
        if self.kind == U3 and self.control is not None:
            raise ConfigurationError("U3 takes no control qubit")
        if self.kind in (CU3, SWAP):
            if self.control is None:
                raise ConfigurationError(f"{self.kind} needs two qubits")
            if self.control == self.target:
                raise ConfigurationError(f"{self.kind} qubits must differ")
        if self.kind == SWAP and (self.slots or self.angles):
            raise ConfigurationError("SWAP carries no angles")
        if self.kind == STATE_PREP:
            if self.slots:
                raise ConfigurationError("state-preparation rotations are not trainable")
            if len(self.angles) != 2 ** len(self.controls):
                raise ConfigurationError("uniformly controlled rotation needs 2**n_controls angles")
            if self.target in self.controls:
                raise ConfigurationError("target cannot also be a control")

    @property
    def qubits(self) -> tuple:
        if self.kind == STATE_PREP:
            return (self.target, *self.controls)
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)

    @property
    def trainable_slots(self) -> tuple:
        return tuple(s for s in self.slots if s is not None)

    def resolved_angles(self, params) -> tuple:
        if self.kind not in (U3, CU3):
            return tuple(self.angles)
        if not self.slots:
            return tuple(float(a) for a in self.angles)
        return tuple(float(params[s]) if s is not None else float(self.angles[a])
                     for a, s in enumerate(self.slots))

    def matrix(self, params=()) -> np.ndarray:
        """Dense matrix on the op's own qubits, ordered as :attr:`qubits`
        with the first listed qubit as the least significant bit."""
        if self.kind == SWAP:
            return np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]],
                            dtype=complex)
        if self.kind == STATE_PREP:
            n_c = len(self.controls)
            dim = 2 ** (n_c + 1)
            m = np.zeros((dim, dim), dtype=complex)
            for pat, theta in enumerate(self.angles):
                c, s = np.cos(theta / 2), np.sin(theta / 2)
                i0 = pat << 1
                i1 = i0 | 1
                m[i0, i0], m[i0, i1], m[i1, i0], m[i1, i1] = c, -s, s, c
            return m
        u = u3_matrix(*self.resolved_angles(params))
        if self.kind == U3:
            return u
        # qubit order (control, target): control is bit 0, target is bit 1
        m = np.eye(4, dtype=complex)
        idx = [1, 3]
        m[np.ix_(idx, idx)] = u
        return m


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s],
                     [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]])


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: tuple = ()
    n_params: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if self.n_qubits < 1:
            raise ConfigurationError("circuit needs at least one qubit")
        for op in self.ops:
            for q in op.qubits:
                if not 0 <= q < self.n_qubits:
                    raise ConfigurationError(
                        f"qubit index {q} out of range for {self.n_qubits}-qubit circuit")
            for s in op.trainable_slots:
                if not 0 <= s < self.n_params:
                    raise ConfigurationError(f"parameter slot {s} out of range ({self.n_params})")

    def __len__(self):
        return len(self.ops)

    def inverse(self, params=()) -> "Circuit":
        """Exact inverse with all trainable angles frozen at ``params``."""
        inv = []
        for op in reversed(self.ops):
            if op.kind in (U3, CU3):
                th, ph, la = op.resolved_angles(params)
                inv.append(GateOp(op.kind, op.target, op.control, angles=(-th, -la, -ph)))
            elif op.kind == STATE_PREP:
                inv.append(GateOp(op.kind, op.target, angles=tuple(-a for a in op.angles),
                                  controls=op.controls))
            else:
                inv.append(op)
        return Circuit(self.n_qubits, inv, 0)

    def depth(self) -> int:
        """Greedy layer count (ops on disjoint qubits share a layer)."""
        level = [0] * self.n_qubits
        for op in self.ops:
            d = max(level[q] for q in op.qubits) + 1
            for q in op.qubits:
                level[q] = d
        return max(level, default=0)

    @cached_property
    def compiled(self) -> tuple:
        n = len(self.ops)
        kind = np.zeros(n, dtype=np.int64)
        target = np.zeros(n, dtype=np.int64)
        control = np.full(n, -1, dtype=np.int64)
        slot = np.full((n, 3), -1, dtype=np.int64)
        fixed = np.zeros((n, 3), dtype=np.float64)
        max_c = max((len(op.controls) for op in self.ops), default=0)
        sp_ctl = np.zeros((n, max(max_c, 1)), dtype=np.int64)
        sp_nc = np.zeros(n, dtype=np.int64)
        sp_off = np.zeros(n, dtype=np.int64)
        table = [0.0]
        for k, op in enumerate(self.ops):
            kind[k] = _KIND_CODES[op.kind]
            target[k] = op.target
            if op.control is not None:
                control[k] = op.control
            if op.kind in (U3, CU3):
                if op.angles:
                    fixed[k] = op.angles
                for a, s in enumerate(op.slots):
                    if s is not None:
                        slot[k, a] = s
            elif op.kind == STATE_PREP:
                sp_nc[k] = len(op.controls)
                sp_ctl[k, :len(op.controls)] = op.controls
                sp_off[k] = len(table)
                table.extend(float(a) for a in op.angles)
        return (kind, target, control, slot, fixed, sp_ctl, sp_nc, sp_off,
                np.asarray(table, dtype=np.float64))


@dataclass(frozen=True)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2 ** self.n_qubits,):
            raise ConfigurationError(
                f"expected {2 ** self.n_qubits} amplitudes, got shape {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise NumericError(f"statevector norm {norm!r} is not 1")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        a = np.zeros(2 ** n_qubits, dtype=np.complex128)
        a[0] = 1.0
        return cls(n_qubits, a)

    @classmethod
    def from_vector(cls, vector) -> "Statevector":
        v = np.asarray(vector, dtype=np.complex128)
        n = int(round(np.log2(v.size))) if v.size else 0
        if v.ndim != 1 or v.size < 2 or 2 ** n != v.size:
            raise ConfigurationError("amplitude vector length must be a power of two >= 2")
        return cls(n, v)

    def __len__(self):
        return self.amplitudes.size


def check_params(params, n_params: int) -> np.ndarray:
    p = np.asarray(params, dtype=np.float64).reshape(-1)
    if p.size != n_params:
        raise ConfigurationError(f"expected {n_params} parameters, got {p.size}")
    bad = np.flatnonzero(~np.isfinite(p))
    if bad.size:
        raise NumericError(f"non-finite parameter at index {int(bad[0])}")
    return p


def _as_states(states, n_qubits: int) -> np.ndarray:
    st = np.array(states, dtype=np.complex128, copy=True)
    if st.ndim == 1:
        st = st[None, :]
    if st.ndim != 2 or st.shape[1] != 2 ** n_qubits:
        raise ConfigurationError(
            f"states must have {2 ** n_qubits} amplitudes per row, got shape {st.shape}")
    return st


def run_batch(circuit: Circuit, params, states) -> np.ndarray:
    """Apply ``circuit`` to every row of ``states``; returns a new array."""
    p = check_params(params, circuit.n_params)
    st = _as_states(states, circuit.n_qubits)
    if circuit.ops:
        K.forward(st, *circuit.compiled, p)
    return st


def apply_gate(state: Statevector, op: GateOp, params=()) -> Statevector:
    for q in op.qubits:
        if not 0 <= q < state.n_qubits:
            raise ConfigurationError(f"qubit index {q} out of range for {state.n_qubits} qubits")
    slots = op.trainable_slots
    n_params = max(slots) + 1 if slots else 0
    p = np.asarray(params, dtype=np.float64).reshape(-1)
    if p.size < n_params:
        raise ConfigurationError(f"gate references slot {n_params - 1}, only {p.size} params")
    if slots and not np.all(np.isfinite(p[list(slots)])):
        raise NumericError(f"non-finite parameter at slots {slots}")
    circuit = Circuit(state.n_qubits, (op,), p.size)
    return Statevector(state.n_qubits, run_batch(circuit, p, state.amplitudes)[0])


def run_circuit(circuit: Circuit, params, initial: Statevector) -> Statevector:
    if initial.n_qubits != circuit.n_qubits:
        raise ConfigurationError(
            f"circuit has {circuit.n_qubits} qubits, state has {initial.n_qubits}")
    out = run_batch(circuit, params, initial.amplitudes)[0]
    return Statevector(circuit.n_qubits, out)


def basis_probabilities(state) -> np.ndarray:
    amps = state.amplitudes if isinstance(state, Statevector) else np.asarray(state)
    return (amps.real ** 2 + amps.imag ** 2)


def _z_signs(n_qubits: int, qubits) -> np.ndarray:
    idx = np.arange(2 ** n_qubits)
    return np.stack([1.0 - 2.0 * ((idx >> q) & 1) for q in qubits])


def z_expectations(state: Statevector, qubits: Sequence[int]) -> np.ndarray:
    for q in qubits:
        if not 0 <= q < state.n_qubits:
            raise ConfigurationError(f"qubit index {q} out of range for {state.n_qubits} qubits")
    if len(qubits) == 0:
        return np.zeros(0)
    return _z_signs(state.n_qubits, qubits) @ basis_probabilities(state)


class Readout(Protocol):
    """Scalar loss of the measured probabilities of a batch of final states."""

    def loss_and_dprob(self, probs: np.ndarray) -> tuple[float, np.ndarray]:
        ...


def value_and_grad(circuit: Circuit, params, states, readout: Readout):
    """Loss and its exact gradient with respect to every parameter slot.

    ``states`` is one input state or a 2D array of inputs; ``readout`` maps
    the final probabilities ``(n_states, dim)`` to ``(loss, dL/dprob)``.
    """
    p = check_params(params, circuit.n_params)
    if isinstance(states, Statevector):
        states = states.amplitudes
    st = _as_states(states, circuit.n_qubits)
    comp = circuit.compiled
    if circuit.ops:
        K.forward(st, *comp, p)
    probs = st.real ** 2 + st.imag ** 2
    loss, dprob = readout.loss_and_dprob(probs)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss value")
    lam = np.asarray(dprob, dtype=np.float64) * st
    grad = np.zeros(circuit.n_params)
    if circuit.n_params and circuit.ops:
        K.adjoint(st, lam, *comp, p, grad)
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        raise NumericError(f"non-finite gradient for parameter index {int(bad[0])}")
    return float(loss), grad


def gradients(circuit: Circuit, params, initial, loss_readout: Readout) -> np.ndarray:
    return value_and_grad(circuit, params, initial, loss_readout)[1]


# -- dense reference simulator (test oracle, small registers only) ---------

def embed_operator(matrix: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    """Full ``2**n x 2**n`` matrix of an operator acting on ``qubits``.

    Built from Kronecker products of single-qubit projector/transition
    matrices, independent of the kernels above.
    """
    k = len(qubits)
    full = np.zeros((2 ** n_qubits, 2 ** n_qubits), dtype=complex)
    units = [np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]]),
             np.array([[0, 0], [1, 0]]), np.array([[0, 0], [0, 1]])]
    for r in range(2 ** k):
        for c in range(2 ** k):
            if matrix[r, c] == 0:
                continue
            factors = [np.eye(2)] * n_qubits
            for pos, q in enumerate(qubits):
                rb, cb = (r >> pos) & 1, (c >> pos) & 1
                factors[q] = units[2 * rb + cb]
            term = np.array([[1.0]])
            for q in reversed(range(n_qubits)):
                term = np.kron(term, factors[q])
            full += matrix[r, c] * term
    return full


def dense_unitary(circuit: Circuit, params=()) -> np.ndarray:
    u = np.eye(2 ** circuit.n_qubits, dtype=complex)
    for op in circuit.ops:
        u = embed_operator(op.matrix(params), op.qubits, circuit.n_qubits) @ u
    return u
