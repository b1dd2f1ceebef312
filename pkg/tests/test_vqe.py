import json

import numpy as np
import pytest

from ansatzforge.ansatz import AngleExpr, CircuitIR, LayerSpec, default_xy_template, expand
from ansatzforge.models import XYModelSpec, build_xy
from ansatzforge.pauli import PauliSum, PauliTerm, lowest_states
from ansatzforge.statevector import run_circuit
from ansatzforge.vqe import CompiledAnsatz, VQEConfig, cost, minimize, stability_sigma


def single_qubit_ir():
    return CircuitIR("chain", 2, ["a"], [LayerSpec("RY", [0], AngleExpr.param(0))])


def test_compiled_matches_expand():
    ir = default_xy_template(6)
    theta = [0.3, -1.2, 0.8, 2.0]
    a = CompiledAnsatz(ir, 6).state(theta).amplitudes
    b = run_circuit(expand(ir, 6, theta), 6).amplitudes
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_cost_backends_agree():
    ir = default_xy_template(6)
    ham = build_xy(XYModelSpec(6))
    theta = [0.3, -1.2, 0.8, 2.0]
    assert cost(ir, theta, ham, n=6) == pytest.approx(cost(ir, theta, ham, "mps", n=6), abs=1e-10)
    with pytest.raises(ValueError):
        cost(ir, theta, build_xy(XYModelSpec(5)), n=6)


def test_one_parameter_minimum():
    # <Z0> under RY(a) is cos(a); minimum -1 at a = pi
    ham = PauliSum([PauliTerm(1.0, {0: "Z"})], 2)
    res = minimize(single_qubit_ir(), ham, VQEConfig(restarts=3))
    assert res.e_vqe == pytest.approx(-1.0, abs=1e-8)
    assert np.cos(res.theta_star[0]) == pytest.approx(-1.0, abs=1e-6)


@pytest.mark.parametrize("optimizer", ["nelder_mead", "powell"])
def test_xy_small_chain(optimizer):
    ham = build_xy(XYModelSpec(4))
    e, vecs = lowest_states(ham, 1)
    res = minimize(default_xy_template(4), ham, VQEConfig(optimizer, restarts=4), vecs[0], n=4)
    assert abs(res.e_vqe - e[0]) / abs(e[0]) < 0.01
    assert res.fidelity > 0.95
    assert len(res.energies) == 4
    assert res.e_vqe == pytest.approx(min(res.energies), abs=1e-9)


def test_determinism_and_warm_start():
    ham = build_xy(XYModelSpec(4))
    cfg = VQEConfig(restarts=3, seed=7)
    a = minimize(default_xy_template(4), ham, cfg, n=4)
    b = minimize(default_xy_template(4), ham, cfg, n=4)
    assert a.to_json() == b.to_json()
    c = minimize(default_xy_template(4), ham, VQEConfig(restarts=1), n=4, init=a.theta_star)
    assert c.e_vqe <= a.e_vqe + 1e-9
    doc = json.loads(a.to_json())
    assert len(doc["restarts"]) == 3


def test_budget_flag():
    ham = build_xy(XYModelSpec(4))
    res = minimize(default_xy_template(4), ham, VQEConfig(restarts=2, max_evals=5), n=4)
    assert res.budget_exhausted


def test_stability_sigma():
    ham = PauliSum([PauliTerm(1.0, {0: "Z"})], 2)
    res = minimize(single_qubit_ir(), ham, VQEConfig(restarts=4))
    assert stability_sigma(res) == pytest.approx(np.std(res.energies, ddof=1))
    one = minimize(single_qubit_ir(), ham, VQEConfig(restarts=1))
    with pytest.raises(ValueError):
        stability_sigma(one)


def test_config_validation():
    with pytest.raises(ValueError):
        VQEConfig(optimizer="adam")
    with pytest.raises(ValueError):
        VQEConfig(restarts=0)
