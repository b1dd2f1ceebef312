"""Matrix-product-state simulation of shallow nearest-neighbour circuits.

Site tensors have shape ``(chi_left, 2, chi_right)``. The chain is kept in
mixed canonical form: every tensor left of ``center`` is left-canonical,
every tensor right of it is right-canonical. A two-qubit gate on ``(i, i+1)``
first moves the center to ``i``, contracts the pair, applies the gate and
splits it again by SVD, leaving the center on ``i + 1``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import kernels
from .pauli import PauliSum
from .statevector import GateOp

DEFAULT_CHI_MAX = 64
DEFAULT_EPS = 1e-12

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _two_qubit_matrix(gate: GateOp):
    """4x4 matrix on (first target, second target), first target as high bit."""
    if gate.kind == "CX":
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
                        dtype=complex)
    if gate.kind == "CRZ":
        return np.diag([1, 1, 1, np.exp(1j * gate.angle)]).astype(complex)
    raise ValueError(f"not a two-qubit gate: {gate.kind}")


class MPSState:
    def __init__(self, n_qubits: int, chi_max: int = DEFAULT_CHI_MAX, eps: float = DEFAULT_EPS):
        if n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        self.n_qubits = n_qubits
        self.chi_max = int(chi_max)
        self.eps = float(eps)
        self.tensors = []
        for _ in range(n_qubits):
            t = np.zeros((1, 2, 1), dtype=complex)
            t[0, 0, 0] = 1.0
            self.tensors.append(t)
        self.center = 0
        self.discarded_weight = 0.0
        self.truncations = 0

    @property
    def bond_dims(self):
        return [t.shape[2] for t in self.tensors[:-1]]

    def apply_1q(self, q, u):
        self.tensors[q] = np.einsum("ab,lbr->lar", u, self.tensors[q])

    def _move_center(self, target):
        while self.center < target:
            i = self.center
            t = self.tensors[i]
            l, d, r = t.shape
            qm, rm = np.linalg.qr(t.reshape(l * d, r))
            self.tensors[i] = qm.reshape(l, d, -1)
            self.tensors[i + 1] = np.einsum("ab,bdr->adr", rm, self.tensors[i + 1])
            self.center += 1
        while self.center > target:
            i = self.center
            t = self.tensors[i]
            l, d, r = t.shape
            qm, rm = np.linalg.qr(t.reshape(l, d * r).T)
            self.tensors[i] = qm.T.reshape(-1, d, r)
            self.tensors[i - 1] = np.einsum("ldb,ab->lda", self.tensors[i - 1], rm)
            self.center -= 1

    def apply_2q(self, i, u4, reverse=False):
        """Apply a 4x4 gate to sites ``(i, i+1)``.

        With ``reverse`` the gate's first qubit is site ``i + 1``.
        """
        self._move_center(i)
        a, b = self.tensors[i], self.tensors[i + 1]
        theta = np.einsum("lar,rbs->labs", a, b)
        g = u4.reshape(2, 2, 2, 2)
        if reverse:
            g = g.transpose(1, 0, 3, 2)
        theta = np.einsum("abcd,lcds->labs", g, theta)
        l, _, _, s = theta.shape
        uu, sv, vh = np.linalg.svd(theta.reshape(l * 2, 2 * s), full_matrices=False)
        total = float(np.sum(sv ** 2))
        keep = len(sv)
        # smallest kept rank whose discarded weight is <= eps
        tail = np.cumsum((sv ** 2)[::-1])[::-1] / total
        while keep > 1 and tail[keep - 1] <= self.eps:
            keep -= 1
        keep = min(keep, self.chi_max)
        discarded = float(np.sum(sv[keep:] ** 2) / total)
        if keep < len(sv):
            self.truncations += 1
        self.discarded_weight += discarded
        sv = sv[:keep] / np.linalg.norm(sv[:keep])
        self.tensors[i] = uu[:, :keep].reshape(l, 2, keep)
        self.tensors[i + 1] = (sv[:, None] * vh[:keep]).reshape(keep, 2, s)
        self.center = i + 1

    def norm(self):
        env = np.ones((1, 1), dtype=complex)
        for t in self.tensors:
            env = np.einsum("ab,adr,bds->rs", env, t.conj(), t)
        return float(np.sqrt(abs(env[0, 0])))

    def to_statevector(self):
        if self.n_qubits > 26:
            raise ValueError("too many qubits for a dense statevector")
        psi = self.tensors[0]
        for t in self.tensors[1:]:
            psi = np.tensordot(psi, t, axes=([-1], [0]))
        return psi.reshape(-1)


def mps_run_circuit(gates: Sequence[GateOp], n: int, chi_max: int = DEFAULT_CHI_MAX,
                    eps: float = DEFAULT_EPS) -> MPSState:
    """Run ``gates`` on ``|0...0>``; two-qubit gates must act on neighbours."""
    state = MPSState(n, chi_max, eps)
    for g in gates:
        if any(t < 0 or t >= n for t in g.targets):
            raise ValueError(f"gate {g} outside register of {n} qubits")
        if len(g.targets) == 1:
            state.apply_1q(g.targets[0], kernels.gate_matrix(kernels.GATE_CODES[g.kind],
                                                             g.angle or 0.0))
            continue
        a, b = g.targets
        if abs(a - b) != 1:
            raise ValueError(f"gate {g} is not nearest-neighbour")
        state.apply_2q(min(a, b), _two_qubit_matrix(g), reverse=a > b)
    state._move_center(n - 1)
    return state


def _contiguous(term):
    sup = term.support
    return not sup or sup[-1] - sup[0] == len(sup) - 1


def mps_expectation(state: MPSState, op: PauliSum) -> float:
    """``<psi|op|psi>`` for operators made of contiguous Pauli strings."""
    if op.n_qubits != state.n_qubits:
        raise ValueError(f"operator has {op.n_qubits} qubits, state {state.n_qubits}")
    for t in op.terms:
        if not _contiguous(t):
            raise ValueError(f"non-local term {t.label()}")
    ts = state.tensors
    n = state.n_qubits
    left = [np.ones((1, 1), dtype=complex)]
    for t in ts:
        left.append(np.einsum("ab,adr,bds->rs", left[-1], t.conj(), t))
    right = [np.ones((1, 1), dtype=complex)]
    for t in reversed(ts):
        right.append(np.einsum("rs,adr,bds->ab", right[-1], t.conj(), t))
    right = right[::-1]
    norm2 = left[-1][0, 0].real
    total = 0.0
    for term in op.terms:
        if not term.letters:
            total += term.coefficient
            continue
        letters = dict(term.letters)
        lo, hi = term.support[0], term.support[-1]
        env = left[lo]
        for q in range(lo, hi + 1):
            p = _PAULI[letters.get(q, "I")]
            t = ts[q]
            env = np.einsum("ab,adr,de,bes->rs", env, t.conj(), p, t)
        val = np.einsum("rs,rs->", env, right[hi + 1])
        total += term.coefficient * val.real
    return float(total / norm2)
