"""Hermitian operators as real-weighted Pauli sums.

Text form, one term per line::

    # n_qubits 2
    1.0 X0 X1
    -0.5 Z1
    3.25

A line with only a coefficient is an identity term. Coefficients are written
with ``repr`` so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import kernels
from .statevector import StateVector

log = logging.getLogger(__name__)

DENSE_MAX_QUBITS = 14
LANCZOS_MAX_QUBITS = 26
_LETTERS = "IXYZ"


class ConvergenceError(RuntimeError):
    """An iterative eigensolver stopped before reaching its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class PauliTerm:
    """``coefficient * P`` where ``letters`` maps qubit -> 'X' | 'Y' | 'Z'.

    ``letters`` is stored as a tuple of ``(qubit, letter)`` sorted by qubit;
    identity factors are dropped.
    """

    coefficient: float
    letters: tuple = ()

    def __post_init__(self):
        c = self.coefficient
        if isinstance(c, complex) or np.iscomplexobj(c):
            raise TypeError("Pauli coefficients must be real")
        c = float(c)
        if not math.isfinite(c):
            raise ValueError(f"non-finite coefficient {c!r}")
        items = self.letters.items() if isinstance(self.letters, Mapping) else self.letters
        cleaned = {}
        for q, letter in items:
            q = int(q)
            letter = str(letter).upper()
            if letter not in _LETTERS:
                raise ValueError(f"unknown Pauli letter {letter!r}")
            if q < 0:
                raise ValueError(f"negative qubit index {q}")
            if q in cleaned:
                raise ValueError(f"duplicate qubit index {q}")
            cleaned[q] = letter
        object.__setattr__(self, "coefficient", c)
        object.__setattr__(self, "letters", tuple(sorted(
            (q, l) for q, l in cleaned.items() if l != "I")))

    @property
    def support(self):
        return tuple(q for q, _ in self.letters)

    @property
    def key(self):
        return self.letters

    def label(self):
        return " ".join(f"{l}{q}" for q, l in self.letters)


class PauliSum:
    """A list of :class:`PauliTerm` acting on ``n_qubits`` qubits."""

    def __init__(self, terms: Iterable, n_qubits: int):
        self.n_qubits = int(n_qubits)
        out = []
        for t in terms:
            if not isinstance(t, PauliTerm):
                t = PauliTerm(*t)
            if t.letters and t.letters[-1][0] >= self.n_qubits:
                raise ValueError(
                    f"term {t.label()} outside register of {self.n_qubits} qubits")
            out.append(t)
        self.terms = tuple(out)
        self._masks = None

    def __repr__(self):
        return f"PauliSum({len(self.terms)} terms, n_qubits={self.n_qubits})"

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other):
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit-count mismatch")
        return PauliSum(self.terms + other.terms, self.n_qubits)

    def scaled(self, factor):
        return PauliSum([PauliTerm(t.coefficient * factor, t.letters) for t in self.terms],
                        self.n_qubits)

    def canonical(self, atol=0.0):
        """Merge equal strings, drop terms with ``|c| <= atol``, sort by string."""
        merged = {}
        for t in self.terms:
            merged[t.key] = merged.get(t.key, 0.0) + t.coefficient
        order = sorted(merged, key=lambda k: (len(k), k))
        return PauliSum([PauliTerm(merged[k], k) for k in order if abs(merged[k]) > atol],
                        self.n_qubits)

    def permuted(self, perm):
        """Relabel qubit ``q`` as ``perm[q]``."""
        return PauliSum([PauliTerm(t.coefficient, [(perm[q], l) for q, l in t.letters])
                         for t in self.terms], self.n_qubits)

    def identity_coefficient(self):
        return sum(t.coefficient for t in self.terms if not t.letters)

    def is_real(self):
        """True when every string has an even number of Y factors."""
        return all(sum(l == "Y" for _, l in t.letters) % 2 == 0 for t in self.terms)

    def masks(self):
        """``(xmask, zmask, phase-folded coefficient)`` arrays for the kernels."""
        if self._masks is None:
            n = self.n_qubits
            xs, zs, cs = [], [], []
            for t in self.terms:
                x = z = ny = 0
                for q, l in t.letters:
                    bit = 1 << (n - 1 - q)
                    if l in "XY":
                        x |= bit
                    if l in "ZY":
                        z |= bit
                    ny += l == "Y"
                xs.append(x)
                zs.append(z)
                cs.append(t.coefficient * 1j ** ny)
            self._masks = (np.array(xs, dtype=np.int64), np.array(zs, dtype=np.int64),
                           np.array(cs, dtype=complex))
        return self._masks

    # text form ---------------------------------------------------------

    def to_text(self):
        lines = [f"# n_qubits {self.n_qubits}"]
        for t in self.terms:
            lines.append(" ".join([repr(t.coefficient)] + [f"{l}{q}" for q, l in t.letters]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, n_qubits=None):
        terms = []
        declared = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "n_qubits":
                    declared = int(parts[1])
                continue
            fields = line.split()
            try:
                coeff = float(fields[0])
                letters = [(int(f[1:]), f[0]) for f in fields[1:]]
                terms.append(PauliTerm(coeff, letters))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {lineno}: cannot parse {raw!r}: {exc}") from None
        if n_qubits is None:
            n_qubits = declared
        if n_qubits is None:
            n_qubits = max((t.letters[-1][0] + 1 for t in terms if t.letters), default=1)
        return cls(terms, n_qubits)


# --------------------------------------------------------------------------
# operations

def _check_state(state, op):
    if state.n_qubits != op.n_qubits:
        raise ValueError(f"state has {state.n_qubits} qubits, operator {op.n_qubits}")


def expectation(state: StateVector, op: PauliSum) -> float:
    """``<psi|op|psi>`` for a normalised state."""
    _check_state(state, op)
    norm = np.linalg.norm(state.amplitudes)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"state not normalised (norm {norm:.12g})")
    x, z, c = op.masks()
    val = kernels.pauli_expectation(state.amplitudes, x, z, c)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"expectation has imaginary residue {val.imag:.3e}")
    return float(val.real)


def matvec(op: PauliSum, state) -> StateVector:
    """``op|psi>`` (unnormalised)."""
    vec = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
    if vec.shape != (1 << op.n_qubits,):
        raise ValueError(f"vector of shape {vec.shape} does not match {op.n_qubits} qubits")
    return StateVector(_apply(op, vec), op.n_qubits, check=False)


def _apply(op, vec, out=None):
    x, z, c = op.masks()
    if np.isrealobj(vec):
        c = c.real.copy()
    if out is None:
        out = np.empty_like(vec)
    return kernels.pauli_matvec(vec, x, z, c, out)


def to_dense(op: PauliSum) -> np.ndarray:
    """Dense ``2^N x 2^N`` matrix with qubit 0 as the most significant bit."""
    n = op.n_qubits
    if n > DENSE_MAX_QUBITS:
        raise ValueError(f"dense realisation limited to {DENSE_MAX_QUBITS} qubits, got {n}")
    dim = 1 << n
    idx = np.arange(dim, dtype=np.int64)
    mat = np.zeros((dim, dim), dtype=complex)
    x, z, c = op.masks()
    for xm, zm, cm in zip(x, z, c):
        sign = 1 - 2 * kernels._parity_np(idx & zm)
        mat[idx ^ xm, idx] += cm * sign
    return mat


def lanczos(apply, dim, *, dtype=float, k=1, seed=0, krylov_dim=200, tol=1e-9,
            max_restarts=60, deflate=(), memory_bytes=1.5e9):
    """Lowest ``k`` eigenpairs of a Hermitian linear map by restarted Lanczos.

    Full reorthogonalisation inside each Krylov block. Eigenpairs are found
    one at a time; later ones are deflated against earlier ones. Returns
    ``(energies, vectors)`` with vectors as columns.
    """
    rng = np.random.default_rng(seed)
    itemsize = np.dtype(dtype).itemsize
    m = int(min(krylov_dim, dim, max(8, memory_bytes // (dim * itemsize))))
    locked = [np.asarray(v, dtype=dtype) for v in deflate]
    energies, vectors = [], []

    def project(w):
        for u in locked:
            w -= u * np.vdot(u, w)
        return w

    for level in range(k):
        v = rng.standard_normal(dim).astype(dtype)
        if np.iscomplexobj(v):
            v += 1j * rng.standard_normal(dim)
        v = project(v)
        v /= np.linalg.norm(v)
        residual = np.inf
        for _restart in range(max_restarts):
            V = np.empty((m, dim), dtype=dtype)
            alpha = np.zeros(m)
            beta = np.zeros(m)
            V[0] = v
            size = m
            for j in range(m):
                w = project(apply(V[j]))
                alpha[j] = np.vdot(V[j], w).real
                for _ in range(2):
                    w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
                beta[j] = np.linalg.norm(w)
                if j + 1 == m or beta[j] < 1e-12:
                    size = j + 1
                    break
                if j >= 4 and j % 5 == 0:
                    theta, s = _tridiag_lowest(alpha[: j + 1], beta[:j])
                    if beta[j] * abs(s[-1]) < 0.1 * tol:
                        size = j + 1
                        break
                V[j + 1] = w / beta[j]
            theta, s = _tridiag_lowest(alpha[:size], beta[: size - 1])
            v = s @ V[:size]
            v /= np.linalg.norm(v)
            hv = project(apply(v))
            residual = float(np.linalg.norm(hv - theta * v))
            if residual < tol * max(1.0, abs(theta)):
                break
        else:
            raise ConvergenceError(
                f"Lanczos did not converge after {max_restarts} restarts "
                f"(residual {residual:.3e})", residual)
        energies.append(float(np.vdot(v, hv).real))
        vectors.append(v)
        locked.append(v)
    return np.array(energies), np.array(vectors).T


def _tridiag_lowest(alpha, beta):
    from scipy.linalg import eigh_tridiagonal
    w, s = eigh_tridiagonal(alpha, beta, select="i", select_range=(0, 0))
    return w[0], s[:, 0]


def ground_state(op: PauliSum, method: str = "dense", *, seed: int = 0, tol: float = 1e-9):
    """Lowest eigenvalue and a normalised ground vector of ``op``."""
    energies, vectors = lowest_states(op, 1, method=method, seed=seed, tol=tol)
    return energies[0], vectors[0]


def lowest_states(op: PauliSum, k: int = 1, method: str = "dense", *, seed=0, tol=1e-9):
    """The ``k`` lowest eigenpairs as ``(energies, [StateVector, ...])``."""
    n = op.n_qubits
    if method == "dense":
        if n > DENSE_MAX_QUBITS:
            raise ValueError(f"dense method limited to {DENSE_MAX_QUBITS} qubits")
        w, v = np.linalg.eigh(to_dense(op))
        return w[:k], [StateVector(v[:, i], n) for i in range(k)]
    if method == "lanczos":
        if n > LANCZOS_MAX_QUBITS:
            raise ValueError(f"lanczos method limited to {LANCZOS_MAX_QUBITS} qubits")
        dtype = float if op.is_real() else complex
        buf = np.empty(1 << n, dtype=dtype)
        w, v = lanczos(lambda vec: _apply(op, vec, buf).copy(), 1 << n, dtype=dtype,
                       k=k, seed=seed, tol=tol)
        return w, [StateVector(v[:, i].astype(complex), n) for i in range(k)]
    raise ValueError(f"unknown method {method!r}")
