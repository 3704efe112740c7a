"""Trainable circuit: per-group sub-circuits of U3+CU3 blocks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .qsim import CU3, U3, Circuit, GateOp


@dataclass(frozen=True)
class AnsatzConfig:
    n_qubits: int = 8
    n_blocks: int = 12
    n_groups: int = 1
    inter_group_order: tuple | None = None

    def __post_init__(self):
        if self.n_qubits < 1 or self.n_groups < 1 or self.n_blocks < 0:
            raise ConfigurationError("n_qubits, n_groups must be >= 1 and n_blocks >= 0")
        if self.n_qubits % self.n_groups:
            raise ConfigurationError(
                f"{self.n_qubits} qubits cannot be split into {self.n_groups} groups")
        if self.inter_group_order is None:
            order = tuple((g, g + 1) for g in range(self.n_groups - 1))
        else:
            order = tuple(tuple(int(x) for x in pair) for pair in self.inter_group_order)
        for pair in order:
            if len(pair) != 2:
                raise ConfigurationError(f"group pair {pair} must have two entries")
            a, b = pair
            if a == b or not (0 <= a < self.n_groups and 0 <= b < self.n_groups):
                raise ConfigurationError(f"invalid group pair {pair}")
        object.__setattr__(self, "inter_group_order", order)

    @property
    def group_size(self) -> int:
        return self.n_qubits // self.n_groups

    def group_qubits(self, g: int) -> range:
        m = self.group_size
        return range(g * m, (g + 1) * m)

    @property
    def n_params(self) -> int:
        per_round = self.n_groups * block_param_count(self.group_size)
        per_round += 3 * len(self.inter_group_order)
        return self.n_blocks * per_round

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "n_blocks": self.n_blocks,
                "n_groups": self.n_groups,
                "inter_group_order": [list(p) for p in self.inter_group_order]}

    @classmethod
    def from_dict(cls, d: dict) -> "AnsatzConfig":
        order = d.get("inter_group_order")
        return cls(int(d["n_qubits"]), int(d["n_blocks"]), int(d["n_groups"]),
                   None if order is None else tuple(tuple(p) for p in order))


def block_param_count(m: int) -> int:
    return 3 * m if m == 1 else 6 * m


def build_block(qubits: Sequence[int], param_offset: int) -> list[GateOp]:
    """U3 on every qubit, then a ring of CU3 (q_i controls q_{i+1 mod m})."""
    qubits = list(qubits)
    m = len(qubits)
    if m == 0:
        raise ConfigurationError("a block needs at least one qubit")
    ops, s = [], param_offset
    for q in qubits:
        ops.append(GateOp(U3, q, slots=(s, s + 1, s + 2)))
        s += 3
    if m > 1:
        for i in range(m):
            ops.append(GateOp(CU3, qubits[(i + 1) % m], control=qubits[i],
                              slots=(s, s + 1, s + 2)))
            s += 3
    return ops


def build_ansatz(config: AnsatzConfig = AnsatzConfig()) -> Circuit:
    """Parameter layout: for each block round, the groups' blocks in group
    order, then one CU3 per inter-group pair (control = first qubit of the
    first group, target = first qubit of the second)."""
    ops, s = [], 0
    for _ in range(config.n_blocks):
        for g in range(config.n_groups):
            block = build_block(config.group_qubits(g), s)
            ops.extend(block)
            s += block_param_count(config.group_size)
        for a, b in config.inter_group_order:
            ops.append(GateOp(CU3, config.group_qubits(b)[0],
                              control=config.group_qubits(a)[0], slots=(s, s + 1, s + 2)))
            s += 3
    assert s == config.n_params, (s, config.n_params)
    return Circuit(config.n_qubits, ops, s)


def init_params(config: AnsatzConfig, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-np.pi, np.pi, config.n_params)
