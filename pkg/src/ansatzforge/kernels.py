"""Hot statevector and Pauli-string kernels.

Every kernel exists twice: an explicit-loop version compiled by numba
(``*_nb``) and a vectorised numpy version (``*_np``). The public names bind
to one or the other according to :data:`ansatzforge._accel.USE_NUMBA`.

Bit convention: qubit ``q`` of an ``n``-qubit register is bit ``n - 1 - q``
of the basis index, i.e. qubit 0 is the most significant bit.

Gate programs are encoded as four parallel arrays ``(codes, q0, q1, angles)``
with the integer codes below.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

H, X, RX, RY, RZ, CX, CRZ, Y, Z = range(9)
GATE_CODES = {"H": H, "X": X, "RX": RX, "RY": RY, "RZ": RZ, "CX": CX,
              "CRZ": CRZ, "Y": Y, "Z": Z}
TWO_QUBIT_CODES = (CX, CRZ)

_SQRT1_2 = 1.0 / np.sqrt(2.0)


def gate_matrix(code, angle=0.0):
    """2x2 matrix of a single-qubit gate code."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if code == H:
        return np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2
    if code == X:
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if code == Y:
        return np.array([[0, -1j], [1j, 0]], dtype=complex)
    if code == Z:
        return np.array([[1, 0], [0, -1]], dtype=complex)
    if code == RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if code == RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    if code == RZ:
        return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]],
                        dtype=complex)
    raise ValueError(f"not a single-qubit gate code: {code}")


# --------------------------------------------------------------------------
# numba loop kernels

@njit
def _parity(x):
    x ^= x >> 32
    x ^= x >> 16
    x ^= x >> 8
    x ^= x >> 4
    x ^= x >> 2
    x ^= x >> 1
    return x & 1


@njit
def apply_1q_nb(psi, n, q, u00, u01, u10, u11):
    bit = 1 << (n - 1 - q)
    dim = psi.shape[0]
    for base in range(0, dim, 2 * bit):
        for i in range(base, base + bit):
            j = i + bit
            a = psi[i]
            b = psi[j]
            psi[i] = u00 * a + u01 * b
            psi[j] = u10 * a + u11 * b


@njit
def apply_cx_nb(psi, n, control, target):
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    for i in range(psi.shape[0]):
        if (i & cbit) and not (i & tbit):
            j = i | tbit
            tmp = psi[i]
            psi[i] = psi[j]
            psi[j] = tmp


@njit
def apply_cphase_nb(psi, n, a, b, phase):
    mask = (1 << (n - 1 - a)) | (1 << (n - 1 - b))
    for i in range(psi.shape[0]):
        if i & mask == mask:
            psi[i] *= phase


@njit
def run_program_nb(psi, n, codes, q0, q1, angles):
    s = 0.7071067811865476
    for g in range(codes.shape[0]):
        code = codes[g]
        t = angles[g]
        c = np.cos(t / 2)
        sn = np.sin(t / 2)
        if code == 0:
            apply_1q_nb(psi, n, q0[g], s + 0j, s + 0j, s + 0j, -s + 0j)
        elif code == 1:
            apply_1q_nb(psi, n, q0[g], 0j, 1 + 0j, 1 + 0j, 0j)
        elif code == 2:
            apply_1q_nb(psi, n, q0[g], c + 0j, -1j * sn, -1j * sn, c + 0j)
        elif code == 3:
            apply_1q_nb(psi, n, q0[g], c + 0j, -sn + 0j, sn + 0j, c + 0j)
        elif code == 4:
            apply_1q_nb(psi, n, q0[g], c - 1j * sn, 0j, 0j, c + 1j * sn)
        elif code == 5:
            apply_cx_nb(psi, n, q0[g], q1[g])
        elif code == 6:
            apply_cphase_nb(psi, n, q0[g], q1[g], np.cos(t) + 1j * np.sin(t))
        elif code == 7:
            apply_1q_nb(psi, n, q0[g], 0j, -1j, 1j, 0j)
        elif code == 8:
            apply_1q_nb(psi, n, q0[g], 1 + 0j, 0j, 0j, -1 + 0j)


@njit
def pauli_expectation_nb(psi, xmasks, zmasks, coeffs):
    total = 0j
    dim = psi.shape[0]
    for t in range(xmasks.shape[0]):
        x = xmasks[t]
        z = zmasks[t]
        acc = 0j
        for i in range(dim):
            v = np.conj(psi[i ^ x]) * psi[i]
            if _parity(i & z):
                acc -= v
            else:
                acc += v
        total += coeffs[t] * acc
    return total


@njit
def pauli_matvec_nb(psi, xmasks, zmasks, coeffs, out):
    dim = psi.shape[0]
    for i in range(dim):
        out[i] = 0
    for t in range(xmasks.shape[0]):
        x = xmasks[t]
        z = zmasks[t]
        c = coeffs[t]
        for i in range(dim):
            if _parity(i & z):
                out[i ^ x] -= c * psi[i]
            else:
                out[i ^ x] += c * psi[i]
    return out


# --------------------------------------------------------------------------
# numpy fallbacks

def _parity_np(arr):
    if hasattr(np, "bitwise_count"):
        return (np.bitwise_count(arr) & 1).astype(np.int64)
    out = np.zeros_like(arr)
    a = arr.copy()
    while np.any(a):
        out ^= a & 1
        a >>= 1
    return out


def apply_1q_np(psi, n, q, u00, u01, u10, u11):
    view = psi.reshape(1 << q, 2, -1)
    a = view[:, 0, :].copy()
    b = view[:, 1, :]
    view[:, 0, :] = u00 * a + u01 * b
    view[:, 1, :] = u10 * a + u11 * b


def _pair_view(psi, n, a, b):
    lo, hi = min(a, b), max(a, b)
    return psi.reshape(1 << lo, 2, 1 << (hi - lo - 1), 2, -1), lo


def apply_cx_np(psi, n, control, target):
    view, lo = _pair_view(psi, n, control, target)
    if control == lo:
        sub = view[:, 1, :, :, :]
        sub[:] = sub[:, :, ::-1, :].copy()
    else:
        sub = view[:, :, :, 1, :]
        sub[:] = sub[:, ::-1, :, :].copy()


def apply_cphase_np(psi, n, a, b, phase):
    view, _ = _pair_view(psi, n, a, b)
    view[:, 1, :, 1, :] *= phase


def run_program_np(psi, n, codes, q0, q1, angles):
    for code, a, b, t in zip(codes, q0, q1, angles):
        if code == CX:
            apply_cx_np(psi, n, a, b)
        elif code == CRZ:
            apply_cphase_np(psi, n, a, b, np.exp(1j * t))
        else:
            u = gate_matrix(code, t)
            apply_1q_np(psi, n, a, u[0, 0], u[0, 1], u[1, 0], u[1, 1])


def pauli_expectation_np(psi, xmasks, zmasks, coeffs):
    idx = np.arange(psi.shape[0], dtype=np.int64)
    total = 0j
    for x, z, c in zip(xmasks, zmasks, coeffs):
        sign = 1 - 2 * _parity_np(idx & z)
        total += c * np.vdot(psi[idx ^ x], sign * psi)
    return total


def pauli_matvec_np(psi, xmasks, zmasks, coeffs, out):
    idx = np.arange(psi.shape[0], dtype=np.int64)
    out[:] = 0
    for x, z, c in zip(xmasks, zmasks, coeffs):
        sign = 1 - 2 * _parity_np(idx & z)
        out[idx ^ x] += c * sign * psi
    return out


if USE_NUMBA:
    apply_1q = apply_1q_nb
    apply_cx = apply_cx_nb
    apply_cphase = apply_cphase_nb
    run_program = run_program_nb
    pauli_expectation = pauli_expectation_nb
    pauli_matvec = pauli_matvec_nb
else:
    apply_1q = apply_1q_np
    apply_cx = apply_cx_np
    apply_cphase = apply_cphase_np
    run_program = run_program_np
    pauli_expectation = pauli_expectation_np
    pauli_matvec = pauli_matvec_np
