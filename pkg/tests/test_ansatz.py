import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ansatzforge.ansatz import (AngleExpr, CircuitIR, IRError, IRParseError, LayerSpec,
                                build_tentative, decompose, default_xy_template, expand, from_doc,
                                parse, scalar_template, serialize, to_doc, transpile_metrics)
from ansatzforge.models import ScalarFieldSpec, grid_edges, grid_symmetries
from ansatzforge.statevector import GateOp, fidelity, run_circuit


def permute_state(amps, perm, n_qubits):
    """State after relabelling qubit q as perm[q]."""
    t = amps.reshape((2,) * n_qubits)
    inv = np.argsort(perm)
    return t.transpose(inv).reshape(-1)


@st.composite
def grid_meta_circuits(draw):
    n = draw(st.sampled_from([2, 3]))
    layers = []
    k = draw(st.integers(1, 6))
    for _ in range(k):
        if draw(st.booleans()):
            layers.append(LayerSpec("MCZ", "grid_edges_periodic", AngleExpr.param(0)))
        else:
            gate = draw(st.sampled_from(["H", "X", "RX", "RY", "RZ"]))
            angle = AngleExpr.param(draw(st.integers(0, 1))) if gate.startswith("R") else None
            layers.append(LayerSpec("MC_U", angle=angle, gate=gate))
    theta = draw(st.lists(st.floats(-3, 3), min_size=2, max_size=2))
    return CircuitIR("grid_periodic", n, ["a", "b"], layers), n, theta


@given(grid_meta_circuits())
def test_meta_circuits_commute_with_lattice_symmetries(case):
    ir, n, theta = case
    # start from a non-symmetric state so commuting is actually tested
    prep = [GateOp("RY", q, 0.3 + 0.4 * q) for q in range(n * n)]
    gates = expand(ir, n, theta)
    for perm in grid_symmetries(n):
        prep_p = [GateOp(g.kind, tuple(perm[q] for q in g.targets), g.angle) for g in prep]
        lhs = permute_state(run_circuit(prep + gates, n * n).amplitudes, perm, n * n)
        rhs = run_circuit(prep_p + gates, n * n).amplitudes
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@given(st.permutations(range(18)), st.floats(-3, 3))
def test_mcz_edge_order_invariance(order, theta):
    prep = [GateOp("H", q) for q in range(9)] + [GateOp("RY", q, 0.1 * q) for q in range(9)]
    edges = grid_edges(3)
    a = run_circuit(prep + [GateOp("CRZ", e, theta) for e in edges], 9).amplitudes
    b = run_circuit(prep + [GateOp("CRZ", edges[k], theta) for k in order], 9).amplitudes
    assert np.max(np.abs(a - b)) <= 1e-12


def test_decomposition_is_exact():
    ir = scalar_template("qaoa2", 2)
    theta = np.linspace(0.2, 1.7, 6)
    gates = expand(ir, 2, theta)
    a = run_circuit(gates, 4)
    b = run_circuit(decompose(gates), 4)
    assert fidelity(a, b) == pytest.approx(1.0, abs=1e-12)
    assert all(g.kind != "CRZ" for g in decompose(gates))


def test_transpile_metrics_counts():
    rep = transpile_metrics(default_xy_template(9))
    assert rep.n_cx == 16 and rep.n_params == 4
    rep = transpile_metrics(scalar_template("qaoa2", 3))
    assert rep.n_cx == 2 * 2 * 18 and rep.n_params == 6
    rep = transpile_metrics(build_tentative(2, ScalarFieldSpec(3)))
    assert rep.n_params == 6 and rep.n_cx == 72


def test_site_profile_values():
    ir = default_xy_template(4)
    gates = expand(ir, 4, [0.0, 0.5, 1.0, 0.0])
    mid = [g for g in gates if g.kind == "RY"][4:8]
    want = [0.5 + np.cos(i * np.pi / 4) ** 8 for i in range(4)]
    np.testing.assert_allclose([g.angle for g in mid], want)


def test_rzz_expansion():
    ir = CircuitIR("chain", 2, ["t"], [LayerSpec("RZZ", [(0, 1)], AngleExpr.param(0, 2.0))])
    gates = expand(ir, 2, [0.3])
    assert [g.kind for g in gates] == ["CX", "RZ", "CX"]
    assert gates[1].angle == pytest.approx(0.6)


TEMPLATES = [default_xy_template(9), default_xy_template(9, "sin"),
             default_xy_template(9, variant="hrz"), scalar_template("compact3"),
             scalar_template("qaoa2"), build_tentative(2, ScalarFieldSpec(3)),
             build_tentative(1, ScalarFieldSpec(2, edge_convention="simple"), "zero")]


@pytest.mark.parametrize("ir", TEMPLATES)
def test_round_trip(ir):
    text = serialize(ir)
    back = parse(text)
    assert back == ir
    assert serialize(back) == text


@given(st.lists(st.tuples(st.sampled_from(["RX", "RY", "RZ", "H", "CX"]),
                          st.integers(0, 2), st.floats(-5, 5)), min_size=1, max_size=8))
def test_random_chain_round_trip(spec):
    layers = []
    for op, j, f in spec:
        if op == "CX":
            layers.append(LayerSpec("CX", "chain_nn_pairs"))
        elif op == "H":
            layers.append(LayerSpec("H", [0, 2]))
        else:
            layers.append(LayerSpec(op, "all_sites", AngleExpr.param(j, f)))
    ir = CircuitIR("chain", 5, ["a", "b", "c"], layers)
    assert parse(serialize(ir)) == ir


def test_pruned_renumbers():
    ir = CircuitIR("chain", 3, ["a", "b", "c"], [LayerSpec("RY", "all_sites", AngleExpr.param(2))])
    p = ir.pruned()
    assert p.params == ("c",) and p.layers[0].angle.index == 0


def test_parse_errors_point_at_layer_line():
    doc = to_doc(default_xy_template(4))
    doc["layers"][2]["op"] = "FOO"
    text = json.dumps(doc, indent=2)
    with pytest.raises(IRParseError) as exc:
        parse(text)
    line = text.splitlines()[exc.value.line - 1]
    assert '"FOO"' in line
    assert exc.value.path == "layers[2]"
    with pytest.raises(IRParseError) as exc:
        parse('{"register": {"kind": "chain", "n": 4},\n "params": [,]}')
    assert exc.value.line == 2


@pytest.mark.parametrize("mutate, match", [
    (lambda d: d["layers"].append({"op": "MCZ", "targets": "grid_edges_periodic",
                                   "angle": {"form": "param", "index": 0}}), "meta"),
    (lambda d: d["layers"].append({"op": "RX", "targets": "all_sites",
                                   "angle": {"form": "param", "index": 9}}), "out of range"),
    (lambda d: d["layers"].append({"op": "CX", "targets": "grid_edges_periodic"}), "grid"),
    (lambda d: d["layers"].append({"op": "RY"}), "needs an angle"),
    (lambda d: d["layers"].append({"op": "H", "angle": {"form": "const", "value": 1}}),
     "takes no angle"),
    (lambda d: d["layers"].append({"op": "RY", "angle": {"form": "site_profile", "base": 0,
                                   "scale": 1, "profile": "cos_pow", "exponent": 3}}), "even"),
    (lambda d: d.update(extra=1), "unexpected"),
])
def test_validation_errors(mutate, match):
    doc = to_doc(default_xy_template(4))
    mutate(doc)
    with pytest.raises(IRError, match=match):
        from_doc(doc)


def test_expand_checks_parameter_count():
    with pytest.raises(IRError):
        expand(default_xy_template(4), 4, [0.1])
