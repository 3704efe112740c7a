"""Batched execution of one circuit on 2**N samples held in superposition.

Layout of a lifted register: all data qubits keep their base indices; group
``g`` owns a batch register of ``N`` qubits starting at
``n_data + g * N``. A single-group batch state is therefore the plain
concatenation ``[D_1; ...; D_B] / sqrt(B)``.

With several groups each group is batch-encoded on its own register, so the
joint state is a product over groups. Because lifted gates never touch the
batch registers, every register configuration ``(b_0, ..., b_{G-1})``
evolves independently; the configurations with all indices equal carry the
per-sample results and are the partitions read out by :func:`batch_partitions`.
Inter-group gates are wrapped in register swaps so both registers are
exchanged while the two groups interact and restored afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .ansatz import AnsatzConfig
from .decode import _renorm_grad, layer_rows_from_probs, pixel_map_from_probs
from .errors import ConfigurationError, DataError, NumericError
from .qsim import SWAP, Circuit, GateOp

MASS_TOL = 1e-300


@dataclass(frozen=True)
class BatchConfig:
    batch_qubits: int
    n_data_qubits: int
    n_groups: int = 1

    def __post_init__(self):
        if self.batch_qubits < 0:
            raise ConfigurationError("batch_qubits must be >= 0")
        if self.n_groups < 1 or self.n_data_qubits % self.n_groups:
            raise ConfigurationError("data qubits must split evenly into groups")

    @classmethod
    def from_ansatz(cls, ansatz: AnsatzConfig, batch_qubits: int) -> "BatchConfig":
        return cls(batch_qubits, ansatz.n_qubits, ansatz.n_groups)

    @property
    def batch_size(self) -> int:
        return 2 ** self.batch_qubits

    @property
    def group_size(self) -> int:
        return self.n_data_qubits // self.n_groups

    @property
    def extra_qubits(self) -> int:
        return self.n_groups * self.batch_qubits

    @property
    def n_qubits(self) -> int:
        return self.n_data_qubits + self.extra_qubits

    def group_of(self, q: int) -> int:
        return q // self.group_size

    def register(self, g: int) -> range:
        start = self.n_data_qubits + g * self.batch_qubits
        return range(start, start + self.batch_qubits)


def batch_encode(samples: Sequence, config: BatchConfig | None = None) -> np.ndarray:
    """Amplitudes of ``B`` samples batched on the lifted register.

    Each sample is a unit vector (single group) or a sequence of one unit
    vector per group.
    """
    B = len(samples)
    n_bits = B.bit_length() - 1
    if B < 1 or 2 ** n_bits != B:
        raise ConfigurationError(f"batch size {B} is not a power of two")
    if config is not None and config.batch_size != B:
        raise ConfigurationError(f"config expects {config.batch_size} samples, got {B}")
    per_group = []
    for s in samples:
        groups = [s] if np.ndim(s) == 1 else list(s)
        per_group.append([np.asarray(g, dtype=np.complex128) for g in groups])
    n_groups = len(per_group[0])
    tensors = []
    for g in range(n_groups):
        rows = np.stack([groups[g] for groups in per_group])
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms == 0):
            raise DataError("cannot batch an all-zero sample")
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ConfigurationError("batched samples must be unit vectors")
        tensors.append(rows / np.sqrt(B))
    # joint tensor with axes (b_0, x_0, b_1, x_1, ...)
    joint = np.ones(())
    for t in tensors:
        joint = np.multiply.outer(joint, t)
    G = n_groups
    order = [2 * g for g in reversed(range(G))] + [2 * g + 1 for g in reversed(range(G))]
    return np.transpose(joint, order).reshape(-1)


def _register_swaps(config: BatchConfig, a: int, b: int) -> list[GateOp]:
    return [GateOp(SWAP, qa, control=qb)
            for qa, qb in zip(config.register(a), config.register(b))]


def lift_circuit(base: Circuit, config: BatchConfig) -> Circuit:
    """Realize ``I_batch (x) U`` for ``base`` on the lifted register."""
    if base.n_qubits > config.n_data_qubits:
        raise ConfigurationError(
            f"base circuit uses {base.n_qubits} qubits, only {config.n_data_qubits} are data qubits")
    ops = []
    for op in base.ops:
        if any(q >= config.n_data_qubits for q in op.qubits):
            raise ConfigurationError(f"base gate {op} touches a batch qubit")
        groups = sorted({config.group_of(q) for q in op.qubits})
        if config.batch_qubits and len(groups) == 2:
            swaps = _register_swaps(config, *groups)
            ops.extend(swaps)
            ops.append(op)
            ops.extend(swaps)
        elif len(groups) > 2:
            raise ConfigurationError("gates spanning more than two groups are not supported")
        else:
            ops.append(op)
    return Circuit(config.n_qubits, ops, base.n_params)


def _partition_view(probs: np.ndarray, config: BatchConfig) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal-register partitions ``(..., B, dim_data)`` and the full index map."""
    B, G = config.batch_size, config.n_groups
    dim = 2 ** config.n_data_qubits
    idx = np.arange(B)
    # register index of the all-equal configuration b for every group
    reg = np.zeros(B, dtype=np.int64)
    for g in range(G):
        reg |= idx << (g * config.batch_qubits)
    flat_idx = reg[:, None] * dim + np.arange(dim)[None, :]
    return probs[..., flat_idx], flat_idx


def batch_partitions(probs, config: BatchConfig) -> np.ndarray:
    """Per-sample probability vectors ``(B, 2**n_data)``, each renormalized."""
    p = np.asarray(probs, dtype=np.float64)
    if p.shape[-1] != 2 ** config.n_qubits:
        raise ConfigurationError(f"expected {2 ** config.n_qubits} probabilities")
    parts, _ = _partition_view(p, config)
    mass = parts.sum(axis=-1, keepdims=True)
    if np.any(mass <= MASS_TOL):
        raise NumericError("batch partition has zero probability mass")
    return parts / mass


def partition_masses(probs, config: BatchConfig) -> np.ndarray:
    parts, _ = _partition_view(np.asarray(probs, dtype=np.float64), config)
    return parts.sum(axis=-1)


def batch_decode(probs, config: BatchConfig, decoder: str | None = None,
                 scale: float | None = None) -> list:
    """Per-sample readouts of a lifted state.

    ``decoder`` ``None`` returns the renormalized probability vectors;
    ``"pixel"`` returns 8x8 maps and ``"layer"`` the 8 row values.
    """
    if hasattr(probs, "amplitudes"):
        a = probs.amplitudes
        probs = a.real ** 2 + a.imag ** 2
    parts = batch_partitions(probs, config)
    if decoder is None:
        return list(parts)
    if decoder == "pixel":
        return list(pixel_map_from_probs(parts, scale))
    if decoder == "layer":
        return list(layer_rows_from_probs(parts))
    raise ConfigurationError(f"unknown decoder {decoder!r}")


class BatchReadout:
    """Mean of a base readout over the batch partitions of lifted states.

    ``base`` must be built for ``n_states * B`` targets in sample order.
    """

    def __init__(self, base, config: BatchConfig):
        self.base = base
        self.config = config

    def loss_and_dprob(self, probs):
        p = np.asarray(probs)
        n_states = p.shape[0]
        parts, flat_idx = _partition_view(p, self.config)
        mass = parts.sum(axis=-1, keepdims=True)
        if np.any(mass <= MASS_TOL):
            raise NumericError("batch partition has zero probability mass")
        q = parts / mass
        B, dim = q.shape[-2:]
        loss, dq = self.base.loss_and_dprob(q.reshape(n_states * B, dim))
        dp = _renorm_grad(dq.reshape(n_states, B, dim), q, mass)
        dprob = np.zeros_like(p)
        dprob[:, flat_idx] = dp
        return loss, dprob


class BatchCost(NamedTuple):
    extra_qubits: int
    batched_cost: float
    independent_cost: float


def complexity_estimate(config: BatchConfig, base_cost: float) -> BatchCost:
    """Qubit overhead ``G*N`` and time-space estimate ``G*N**2*X``.

    Without batching (``N = 0``) the cost is ``X``; running the ``B`` samples
    one after another would cost ``B*X``.
    """
    N, G = config.batch_qubits, config.n_groups
    cost = base_cost if N == 0 else G * N ** 2 * base_cost
    return BatchCost(G * N, float(cost), float(config.batch_size * base_cost))
