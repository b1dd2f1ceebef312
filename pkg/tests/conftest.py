import functools
import sys

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

I2 = np.eye(2)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def kron_string(letters, n):
    """Dense Pauli string with qubit 0 as the leftmost tensor factor."""
    mats = [PAULI[dict(letters).get(q, "I")] for q in range(n)]
    return functools.reduce(np.kron, mats)


def dense_oracle(op):
    return sum(t.coefficient * kron_string(t.letters, op.n_qubits) for t in op.terms)


def rx(t):
    return np.array([[np.cos(t / 2), -1j * np.sin(t / 2)], [-1j * np.sin(t / 2), np.cos(t / 2)]])


def ry(t):
    return np.array([[np.cos(t / 2), -np.sin(t / 2)], [np.sin(t / 2), np.cos(t / 2)]], dtype=complex)


def rz(t):
    return np.diag([np.exp(-1j * t / 2), np.exp(1j * t / 2)])


def embed_1q(u, q, n):
    mats = [u if k == q else I2 for k in range(n)]
    return functools.reduce(np.kron, mats)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s[1:].split()[0])):
            terminalreporter.write_line(line)
