"""Grouped amplitude encoding of seismic data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError
from .qsim import STATE_PREP, Circuit, GateOp


@dataclass(frozen=True)
class EncodedInput:
    groups: tuple
    group_qubits: int
    norm_factors: tuple

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def amplitudes(self) -> np.ndarray:
        """Product state of all groups; group ``g`` sits on qubits
        ``[g*group_qubits, (g+1)*group_qubits)``."""
        out = np.ones(1)
        for g in self.groups:
            out = np.kron(g, out)
        return out


def _log2_exact(n: int) -> int:
    k = n.bit_length() - 1
    if n < 1 or 2 ** k != n:
        raise ConfigurationError(f"length {n} is not a power of two")
    return k


def partition_by_source(seismic, n_groups: int) -> list[np.ndarray]:
    """Split a seismic tensor into ``n_groups`` flat vectors.

    A 3D tensor is read as (source, time, receiver) and groups never split a
    source; anything else is flattened and cut into equal contiguous pieces.
    """
    a = np.asarray(seismic, dtype=np.float64)
    if n_groups < 1:
        raise ConfigurationError("n_groups must be >= 1")
    if a.size % n_groups:
        raise ConfigurationError(f"{a.size} values cannot be split into {n_groups} groups")
    if a.ndim == 3 and a.shape[0] % n_groups:
        raise ConfigurationError(
            f"{a.shape[0]} sources cannot be grouped into {n_groups} equal groups")
    flat = a.reshape(-1)
    return [chunk.copy() for chunk in np.split(flat, n_groups)]


def normalize_group(v) -> tuple[np.ndarray, float]:
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if not np.isfinite(norm):
        raise DataError("group contains non-finite values")
    if norm == 0.0:
        raise DataError("cannot amplitude-encode an all-zero group")
    return v / norm, norm


def encode(seismic, n_groups: int = 1) -> EncodedInput:
    groups, norms = [], []
    for part in partition_by_source(seismic, n_groups):
        unit, norm = normalize_group(part)
        groups.append(unit)
        norms.append(norm)
    k = _log2_exact(groups[0].size)
    return EncodedInput(tuple(groups), k, tuple(norms))


def amplitude_rows(inputs) -> np.ndarray:
    """Normalize each row of ``inputs`` into a complex amplitude vector."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigurationError("expected a 2D array of input rows")
    _log2_exact(x.shape[1])
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(~(norms > 0) | ~np.isfinite(norms))
    if bad.size:
        raise DataError(f"sample {int(bad[0])} has zero or non-finite norm")
    return (x / norms[:, None]).astype(np.complex128)


def state_prep_circuit(vector, tol: float = 1e-9) -> Circuit:
    """Real-amplitude state preparation by a tree of uniformly controlled RYs.

    Qubit ``k-1`` (most significant) is rotated first to split the squared
    mass between the two halves of the vector; each lower qubit is then
    rotated conditioned on all qubits above it. The last level uses signed
    angles so negative amplitudes are reproduced exactly. Rotations whose
    angles are all zero are dropped.
    """
    v = np.asarray(vector)
    if np.iscomplexobj(v):
        if np.abs(v.imag).max(initial=0.0) > 0:
            raise ConfigurationError("only real amplitude vectors are supported")
        v = v.real
    v = v.astype(np.float64)
    k = _log2_exact(v.size)
    if k == 0:
        raise ConfigurationError("need at least two amplitudes")
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ConfigurationError("state preparation needs a unit-norm vector")

    ops = []
    for t in range(k - 1, -1, -1):
        blocks = v.reshape(-1, 2, 2 ** t)  # (pattern of bits above t, bit t, bits below t)
        if t == 0:
            angles = 2.0 * np.arctan2(blocks[:, 1, 0], blocks[:, 0, 0])
        else:
            n0 = np.linalg.norm(blocks[:, 0, :], axis=1)
            n1 = np.linalg.norm(blocks[:, 1, :], axis=1)
            angles = 2.0 * np.arctan2(n1, n0)
        if np.any(angles != 0.0):
            ops.append(GateOp(STATE_PREP, t, angles=tuple(float(a) for a in angles),
                              controls=tuple(range(t + 1, k))))
    return Circuit(k, ops, 0)


def shift_circuit(circuit: Circuit, offset: int, n_qubits: int) -> Circuit:
    """Relabel qubit ``q`` as ``q + offset`` on a wider register."""
    def move(q):
        return None if q is None else q + offset
    ops = [GateOp(op.kind, op.target + offset, move(op.control), op.slots, op.angles,
                  tuple(q + offset for q in op.controls)) for op in circuit.ops]
    return Circuit(n_qubits, ops, circuit.n_params)


def grouped_prep_circuit(encoded: EncodedInput) -> Circuit:
    k = encoded.group_qubits
    n = k * encoded.n_groups
    ops = []
    for g, vec in enumerate(encoded.groups):
        ops.extend(shift_circuit(state_prep_circuit(vec), g * k, n).ops)
    return Circuit(n, ops, 0)
