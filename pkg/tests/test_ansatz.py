import numpy as np
import pytest
from hypothesis import given, strategies as st

from qugeo.ansatz import AnsatzConfig, block_param_count, build_ansatz, build_block, init_params
from qugeo.errors import ConfigurationError
from qugeo.qsim import CU3, U3, Statevector, run_circuit


def count_by_enumeration(circ):
    return sum(len(op.trainable_slots) for op in circ.ops)


def test_block_counts():
    assert block_param_count(8) == 48
    assert len(build_block(range(8), 0)) == 16
    ops = build_block([0], 0)
    assert len(ops) == 1 and ops[0].kind == U3 and block_param_count(1) == 3
    ops = build_block([0, 1], 0)
    assert [op.kind for op in ops] == [U3, U3, CU3, CU3] and block_param_count(2) == 12
    with pytest.raises(ConfigurationError):
        build_block([], 0)


def test_block_ring_topology():
    ops = build_block(range(4), 0)
    ring = [(op.control, op.target) for op in ops if op.kind == CU3]
    assert ring == [(0, 1), (1, 2), (2, 3), (3, 0)]


def test_default_has_576_parameters():
    circ = build_ansatz(AnsatzConfig())
    assert circ.n_params == 576 == count_by_enumeration(circ)


def test_zero_blocks_identity():
    circ = build_ansatz(AnsatzConfig(n_blocks=0))
    assert circ.n_params == 0 and len(circ.ops) == 0


def test_two_group_count():
    cfg = AnsatzConfig(n_qubits=4, n_blocks=2, n_groups=2)
    circ = build_ansatz(cfg)
    assert cfg.n_params == 54 == circ.n_params == count_by_enumeration(circ)
    inter = [op for op in circ.ops if op.kind == CU3 and op.control == 0 and op.target == 2]
    assert len(inter) == 2


@given(n_groups=st.integers(1, 4), group_size=st.integers(1, 4), n_blocks=st.integers(0, 5),
       extra=st.integers(0, 2))
def test_param_formula_property(n_groups, group_size, n_blocks, extra):
    order = None
    if n_groups > 1:
        order = tuple((g, g + 1) for g in range(n_groups - 1)) + ((n_groups - 1, 0),) * extra
    cfg = AnsatzConfig(n_groups * group_size, n_blocks, n_groups, order)
    circ = build_ansatz(cfg)
    assert circ.n_params == count_by_enumeration(circ) == cfg.n_params
    if n_groups == 1 and group_size >= 2:
        assert cfg.n_params == 6 * cfg.n_qubits * n_blocks


def test_config_validation():
    with pytest.raises(ConfigurationError):
        AnsatzConfig(n_qubits=5, n_groups=2)
    with pytest.raises(ConfigurationError):
        AnsatzConfig(n_qubits=4, n_groups=2, inter_group_order=((0, 0),))
    with pytest.raises(ConfigurationError):
        AnsatzConfig(n_qubits=4, n_groups=2, inter_group_order=((0, 2),))


def test_zero_params_act_as_identity():
    rng = np.random.default_rng(0)
    v = rng.normal(size=256) + 1j * rng.normal(size=256)
    s = Statevector.from_vector(v / np.linalg.norm(v))
    circ = build_ansatz(AnsatzConfig())
    out = run_circuit(circ, np.zeros(576), s)
    np.testing.assert_allclose(out.amplitudes, s.amplitudes, atol=1e-10)


def test_init_params_seeded():
    cfg = AnsatzConfig()
    a, b = init_params(cfg, 3), init_params(cfg, 3)
    assert np.array_equal(a, b) and a.shape == (576,)
    assert np.all(np.abs(a) <= np.pi)
    assert not np.array_equal(a, init_params(cfg, 4))


def test_config_round_trip():
    cfg = AnsatzConfig(n_qubits=6, n_blocks=3, n_groups=3, inter_group_order=((0, 2), (1, 2)))
    assert AnsatzConfig.from_dict(cfg.to_dict()) == cfg
