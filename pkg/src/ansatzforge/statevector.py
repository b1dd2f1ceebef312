"""Dense statevector simulation.

Gate conventions (qubit 0 is the most significant bit of the basis index):

* ``RX/RY/RZ(t) = exp(-i t P / 2)``
* ``CX`` takes ``targets = (control, target)``
* ``CRZ(t) = diag(1, 1, 1, exp(i t))``; it is symmetric in its two qubits,
  but ``targets[0]`` is still called the control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels

MAX_QUBITS = 26
ONE_QUBIT_KINDS = ("H", "X", "RX", "RY", "RZ", "Y", "Z")
TWO_QUBIT_KINDS = ("CX", "CRZ")
ROTATIONS = ("RX", "RY", "RZ", "CRZ")


@dataclass(frozen=True)
class GateOp:
    kind: str
    targets: tuple
    angle: float | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        targets = tuple(int(t) for t in (
            self.targets if isinstance(self.targets, (tuple, list)) else (self.targets,)))
        object.__setattr__(self, "targets", targets)
        if kind in ONE_QUBIT_KINDS:
            if len(targets) != 1:
                raise ValueError(f"{kind} acts on one qubit, got {targets}")
        elif kind in TWO_QUBIT_KINDS:
            if len(targets) != 2 or targets[0] == targets[1]:
                raise ValueError(f"{kind} needs two distinct qubits, got {targets}")
        else:
            raise ValueError(f"unknown gate kind {kind!r}")
        if kind in ROTATIONS:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"{kind} needs a finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ValueError(f"{kind} takes no angle")

    def __str__(self):
        args = ",".join(map(str, self.targets))
        return f"{self.kind}({self.angle:.6g})[{args}]" if self.angle is not None \
            else f"{self.kind}[{args}]"


class StateVector:
    """``2^n`` complex amplitudes."""

    def __init__(self, amplitudes, n_qubits: int, check: bool = True):
        amps = np.ascontiguousarray(amplitudes, dtype=complex)
        if amps.shape != (1 << n_qubits,):
            raise ValueError(f"expected {1 << n_qubits} amplitudes, got {amps.shape}")
        if check:
            norm = np.linalg.norm(amps)
            if abs(norm - 1.0) > 1e-8:
                raise ValueError(f"state not normalised (norm {norm:.12g})")
        self.amplitudes = amps
        self.n_qubits = int(n_qubits)

    @classmethod
    def zero(cls, n_qubits):
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps, n_qubits, check=False)

    @classmethod
    def basis(cls, index, n_qubits):
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps, n_qubits, check=False)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def copy(self):
        return StateVector(self.amplitudes.copy(), self.n_qubits, check=False)

    def probabilities(self):
        p = np.abs(self.amplitudes) ** 2
        return p / p.sum()

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits})"


def compile_gates(gates: Sequence[GateOp], n_qubits: int):
    """Encode a gate list as the kernel program arrays."""
    m = len(gates)
    codes = np.empty(m, dtype=np.int64)
    q0 = np.zeros(m, dtype=np.int64)
    q1 = np.zeros(m, dtype=np.int64)
    angles = np.zeros(m)
    for i, g in enumerate(gates):
        if any(t < 0 or t >= n_qubits for t in g.targets):
            raise ValueError(f"gate {g} outside register of {n_qubits} qubits")
        codes[i] = kernels.GATE_CODES[g.kind]
        q0[i] = g.targets[0]
        if len(g.targets) == 2:
            q1[i] = g.targets[1]
        if g.angle is not None:
            angles[i] = g.angle
    return codes, q0, q1, angles


def apply_gates(state: StateVector, gates: Sequence[GateOp]) -> StateVector:
    """Apply ``gates`` to a copy of ``state``."""
    out = state.copy()
    kernels.run_program(out.amplitudes, out.n_qubits, *compile_gates(gates, out.n_qubits))
    return out


def run_circuit(gates: Sequence[GateOp], n_qubits: int) -> StateVector:
    """Run ``gates`` on ``|0...0>``."""
    if n_qubits > MAX_QUBITS:
        raise ValueError(f"statevector limited to {MAX_QUBITS} qubits, got {n_qubits}")
    psi = StateVector.zero(n_qubits)
    kernels.run_program(psi.amplitudes, n_qubits, *compile_gates(gates, n_qubits))
    return psi


def fidelity(a: StateVector, b: StateVector) -> float:
    """``|<a|b>|^2``."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit-count mismatch: {a.n_qubits} vs {b.n_qubits}")
    f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(min(1.0, f))


def single_qubit_fidelity(f: float, n_qubits: int) -> float:
    """Per-qubit fidelity ``F ** (1 / N)``."""
    if f <= 0:
        raise ValueError(f"fidelity must be positive, got {f}")
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    return float(f ** (1.0 / n_qubits))


def bitstring(index, n_qubits):
    return format(index, f"0{n_qubits}b")


def sample_indices(state: StateVector, shots: int, rng) -> np.ndarray:
    """Basis indices of ``shots`` independent measurements."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = state.probabilities()
    return rng.choice(p.shape[0], size=shots, p=p)


def sample_bitstrings(state: StateVector, shots: int, rng_seed=None) -> dict:
    """Counts of measured bitstrings (qubit 0 is the leftmost character)."""
    rng = np.random.default_rng(rng_seed)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    counts = rng.multinomial(shots, state.probabilities())
    return {bitstring(i, state.n_qubits): int(c) for i, c in enumerate(counts) if c}
