"""Numba kernels for dense statevector evolution and adjoint gradients.

States are stored as a 2D array ``(n_states, 2**n_qubits)`` so that many
independent registers (for instance a whole training set) share a single
pass over the gate list. Qubit ``q`` is bit ``q`` of the basis index.

A compiled circuit is a tuple of flat arrays (see ``qsim.Circuit.compiled``):

    kind     int64[n_ops]       0=U3, 1=CU3, 2=SWAP, 3=uniformly controlled RY
    target   int64[n_ops]
    control  int64[n_ops]       -1 when absent; second qubit for SWAP
    slot     int64[n_ops, 3]    parameter index, -1 means "use fixed"
    fixed    float64[n_ops, 3]
    sp_ctl   int64[n_ops, m]    control qubits of the uniformly controlled RY
    sp_nc    int64[n_ops]
    sp_off   int64[n_ops]       offset into sp_table
    sp_table float64[...]
"""

import math

import numpy as np
from numba import njit

K_U3 = 0
K_CU3 = 1
K_SWAP = 2
K_UCRY = 3


@njit(cache=True, inline="always")
def _angle(k, a, slot, fixed, params):
    s = slot[k, a]
    if s >= 0:
        return params[s]
    return fixed[k, a]


@njit(cache=True, inline="always")
def u3_entries(theta, phi, lam):
    c = math.cos(0.5 * theta)
    s = math.sin(0.5 * theta)
    el = complex(math.cos(lam), math.sin(lam))
    ep = complex(math.cos(phi), math.sin(phi))
    return (complex(c, 0.0), -el * s, ep * s, ep * el * c)


@njit(cache=True)
def _apply_2x2(st, t, c, m00, m01, m10, m11):
    n_states, dim = st.shape
    tb = 1 << t
    low = tb - 1
    for s in range(n_states):
        for h in range(dim >> 1):
            i = ((h >> t) << (t + 1)) | (h & low)
            if c >= 0 and ((i >> c) & 1) == 0:
                continue
            j = i | tb
            a = st[s, i]
            b = st[s, j]
            st[s, i] = m00 * a + m01 * b
            st[s, j] = m10 * a + m11 * b


@njit(cache=True)
def _apply_swap(st, q1, q2):
    n_states, dim = st.shape
    b1 = 1 << q1
    b2 = 1 << q2
    for s in range(n_states):
        for i in range(dim):
            if (i & b1) != 0 and (i & b2) == 0:
                j = i ^ (b1 | b2)
                tmp = st[s, i]
                st[s, i] = st[s, j]
                st[s, j] = tmp


@njit(cache=True)
def _apply_ucry(st, t, ctl, nc, table, off, sign):
    n_states, dim = st.shape
    tb = 1 << t
    low = tb - 1
    for h in range(dim >> 1):
        i = ((h >> t) << (t + 1)) | (h & low)
        pat = 0
        for m in range(nc):
            pat |= ((i >> ctl[m]) & 1) << m
        theta = sign * table[off + pat]
        c = math.cos(0.5 * theta)
        sn = math.sin(0.5 * theta)
        j = i | tb
        for s in range(n_states):
            a = st[s, i]
            b = st[s, j]
            st[s, i] = c * a - sn * b
            st[s, j] = sn * a + c * b


@njit(cache=True)
def apply_op(st, k, kind, target, control, slot, fixed, sp_ctl, sp_nc, sp_off,
             sp_table, params, dagger):
    kd = kind[k]
    if kd == K_SWAP:
        _apply_swap(st, target[k], control[k])
    elif kd == K_UCRY:
        sign = -1.0 if dagger else 1.0
        _apply_ucry(st, target[k], sp_ctl[k], sp_nc[k], sp_table, sp_off[k], sign)
    else:
        th = _angle(k, 0, slot, fixed, params)
        ph = _angle(k, 1, slot, fixed, params)
        la = _angle(k, 2, slot, fixed, params)
        m00, m01, m10, m11 = u3_entries(th, ph, la)
        c = control[k] if kd == K_CU3 else -1
        if dagger:
            _apply_2x2(st, target[k], c, m00.conjugate(), m10.conjugate(),
                       m01.conjugate(), m11.conjugate())
        else:
            _apply_2x2(st, target[k], c, m00, m01, m10, m11)


@njit(cache=True)
def forward(st, kind, target, control, slot, fixed, sp_ctl, sp_nc, sp_off,
            sp_table, params):
    for k in range(kind.shape[0]):
        apply_op(st, k, kind, target, control, slot, fixed, sp_ctl, sp_nc,
                 sp_off, sp_table, params, False)


@njit(cache=True)
def _u3_grad(lam_st, psi, t, c, th, ph, la):
    """Return 2 Re <lam| dU/dx |psi> for x in (theta, phi, lambda)."""
    cs = 0.5 * math.cos(0.5 * th)
    sn = 0.5 * math.sin(0.5 * th)
    el = complex(math.cos(la), math.sin(la))
    ep = complex(math.cos(ph), math.sin(ph))
    epl = ep * el
    # d/dtheta
    t00 = complex(-sn, 0.0)
    t01 = -el * cs
    t10 = ep * cs
    t11 = -epl * sn
    # d/dphi (top row vanishes)
    p10 = 1j * ep * (2.0 * sn)
    p11 = 1j * epl * (2.0 * cs)
    # d/dlambda (left column vanishes)
    l01 = -1j * el * (2.0 * sn)
    l11 = 1j * epl * (2.0 * cs)
    n_states, dim = psi.shape
    tb = 1 << t
    low = tb - 1
    g0 = 0.0
    g1 = 0.0
    g2 = 0.0
    for s in range(n_states):
        for h in range(dim >> 1):
            i = ((h >> t) << (t + 1)) | (h & low)
            if c >= 0 and ((i >> c) & 1) == 0:
                continue
            j = i | tb
            a = psi[s, i]
            b = psi[s, j]
            li = lam_st[s, i].conjugate()
            lj = lam_st[s, j].conjugate()
            g0 += (li * (t00 * a + t01 * b) + lj * (t10 * a + t11 * b)).real
            g1 += (lj * (p10 * a + p11 * b)).real
            g2 += (li * (l01 * b) + lj * (l11 * b)).real
    return 2.0 * g0, 2.0 * g1, 2.0 * g2


@njit(cache=True)
def adjoint(st, lam_st, kind, target, control, slot, fixed, sp_ctl, sp_nc,
            sp_off, sp_table, params, grad):
    """Reverse sweep. ``st`` holds the final states and ``lam_st`` dL/d(conj psi).

    Both arrays are overwritten (they end up at the circuit input).
    Gradients are accumulated into ``grad``.
    """
    for k in range(kind.shape[0] - 1, -1, -1):
        apply_op(st, k, kind, target, control, slot, fixed, sp_ctl, sp_nc,
                 sp_off, sp_table, params, True)
        kd = kind[k]
        if kd == K_U3 or kd == K_CU3:
            trainable = slot[k, 0] >= 0 or slot[k, 1] >= 0 or slot[k, 2] >= 0
            if trainable:
                th = _angle(k, 0, slot, fixed, params)
                ph = _angle(k, 1, slot, fixed, params)
                la = _angle(k, 2, slot, fixed, params)
                c = control[k] if kd == K_CU3 else -1
                g0, g1, g2 = _u3_grad(lam_st, st, target[k], c, th, ph, la)
                if slot[k, 0] >= 0:
                    grad[slot[k, 0]] += g0
                if slot[k, 1] >= 0:
                    grad[slot[k, 1]] += g1
                if slot[k, 2] >= 0:
                    grad[slot[k, 2]] += g2
        apply_op(lam_st, k, kind, target, control, slot, fixed, sp_ctl, sp_nc,
                 sp_off, sp_table, params, True)


def empty_tables(n_ops):
    """Placeholder uniformly-controlled-rotation tables for circuits without them."""
    return (np.zeros((n_ops, 1), dtype=np.int64), np.zeros(n_ops, dtype=np.int64),
            np.zeros(n_ops, dtype=np.int64), np.zeros(1, dtype=np.float64))
