import numpy as np
import pytest
from hypothesis import given, strategies as st

from ansatzforge.models import XYModelSpec, build_xy
from ansatzforge.mps import MPSState, mps_expectation, mps_run_circuit
from ansatzforge.pauli import PauliSum, PauliTerm, expectation
from ansatzforge.statevector import GateOp, run_circuit


@st.composite
def local_circuits(draw):
    n = draw(st.integers(2, 7))
    gates = []
    for _ in range(draw(st.integers(1, 25))):
        kind = draw(st.sampled_from(["H", "RX", "RY", "RZ", "CX", "CRZ"]))
        angle = draw(st.floats(-4, 4)) if kind in ("RX", "RY", "RZ", "CRZ") else None
        if kind in ("CX", "CRZ"):
            a = draw(st.integers(0, n - 2))
            pair = (a, a + 1) if draw(st.booleans()) else (a + 1, a)
            gates.append(GateOp(kind, pair, angle))
        else:
            gates.append(GateOp(kind, (draw(st.integers(0, n - 1)),), angle))
    return n, gates


@given(local_circuits())
def test_mps_matches_statevector(case):
    n, gates = case
    mps = mps_run_circuit(gates, n)
    psi = run_circuit(gates, n)
    np.testing.assert_allclose(mps.to_statevector(), psi.amplitudes, atol=1e-10)
    assert mps.norm() == pytest.approx(1.0, abs=1e-10)
    assert all(1 <= d <= 2 ** min(k + 1, n - k - 1) for k, d in enumerate(mps.bond_dims))


def test_bell_pair_bond_dims():
    mps = mps_run_circuit([GateOp("H", 0), GateOp("CX", (0, 1))], 3)
    assert mps.bond_dims == [2, 1]
    assert mps.discarded_weight < 1e-20


def test_product_state_stays_bond_one():
    mps = mps_run_circuit([GateOp("RY", q, 0.3 * q) for q in range(6)], 6)
    assert mps.bond_dims == [1] * 5


def test_truncation_records_weight():
    rng = np.random.default_rng(0)
    n = 8
    gates = []
    for layer in range(6):
        gates += [GateOp("RY", q, float(rng.uniform(0, 6))) for q in range(n)]
        gates += [GateOp("CX", (q, q + 1)) for q in range(layer % 2, n - 1, 2)]
    full = mps_run_circuit(gates, n)
    cut = mps_run_circuit(gates, n, chi_max=2)
    assert max(cut.bond_dims) <= 2
    assert cut.truncations > 0 and cut.discarded_weight > 1e-6
    assert full.discarded_weight < 1e-10


def test_expectation_matches_statevector():
    n = 6
    gates = [GateOp("RY", q, 0.4 + 0.2 * q) for q in range(n)]
    gates += [GateOp("CX", (q, q + 1)) for q in range(n - 1)]
    gates += [GateOp("RX", q, 0.3) for q in range(n)]
    op = build_xy(XYModelSpec(n, 0.6, 0.8))
    assert mps_expectation(mps_run_circuit(gates, n), op) == pytest.approx(
        expectation(run_circuit(gates, n), op), abs=1e-12)


def test_rejects_nonlocal():
    with pytest.raises(ValueError, match="nearest"):
        mps_run_circuit([GateOp("CX", (0, 2))], 3)
    with pytest.raises(ValueError, match="non-local"):
        mps_expectation(MPSState(3), PauliSum([PauliTerm(1.0, {0: "Z", 2: "Z"})], 3))
