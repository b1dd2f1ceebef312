import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ansatzforge import search
from ansatzforge.ansatz import (AngleExpr, CircuitIR, LayerSpec, default_xy_template, parse,
                                scalar_template, serialize)
from ansatzforge.models import XYModelSpec, build_xy
from ansatzforge.search import (Candidate, EndpointConfig, EvalContext, GeneratorRequest,
                                LLMConfigError, Metrics, evolve, extract_irs, genetic_step,
                                layer_distance, llm_propose, score, select, stab_penalty,
                                write_search_outputs)
from ansatzforge.vqe import VQEConfig

from score_cases import CASES


@pytest.mark.parametrize("metrics, expected", CASES)
def test_score_hand_values(metrics, expected):
    total, parts = score(metrics)
    assert total == expected
    assert sum(parts.values()) == total


def test_stability_tiers():
    assert [stab_penalty(s) for s in (0.9, 0.5, 0.3, 0.2, 0.0)] == [5, 2, 2, 0, 0]


def test_score_rejects_missing_metric():
    with pytest.raises(ValueError):
        score(Metrics(None, 1, 0, 0, 0, 0))


def chain_seed(n=4):
    return CircuitIR("chain", n, ["a"], [LayerSpec("RY", "all_sites", AngleExpr.param(0)),
                                         LayerSpec("CX", "chain_nn_pairs")])


@given(st.integers(0, 10_000))
def test_genetic_children_are_valid(seed):
    rng = np.random.default_rng(seed)
    parents = [default_xy_template(5), chain_seed(5), default_xy_template(5, variant="hrz")]
    kids = genetic_step(parents, rng, n_children=6)
    assert len(kids) == 6
    for ir, op, src in kids:
        assert ir.register == "chain" and ir.layers
        assert ir.used_params() == set(range(ir.n_params))
        assert parse(serialize(ir)) == ir
        assert all(0 <= i < len(parents) for i in src)


@given(st.integers(0, 10_000))
def test_genetic_children_keep_grid_symmetry_ops(seed):
    rng = np.random.default_rng(seed)
    kids = genetic_step([scalar_template("compact3", 2), scalar_template("qaoa2", 2)], rng, 4)
    for ir, _, _ in kids:
        assert ir.register == "grid_periodic"
        assert all(l.op in ("MC_U", "MCZ") for l in ir.layers)


def test_layer_distance_and_select():
    a, b = default_xy_template(4), default_xy_template(4, variant="hrz")
    assert layer_distance(a, a) == 0
    assert layer_distance(a, b) == 3  # first, middle (renumbered), last
    cands = [Candidate(i, a if i % 2 else chain_seed(), loss=float(10 - i)) for i in range(6)]
    chosen = select(cands, n_elite=2, n_diverse=1)
    assert [c.id for c in chosen[:2]] == [5, 4]
    assert len(chosen) == 3


@pytest.fixture(scope="module")
def ctx():
    return EvalContext.build(build_xy(XYModelSpec(4)), 4, VQEConfig(restarts=2, max_evals=300))


def test_evaluate_populates_metrics(ctx):
    m, loss, parts, theta, e = search.evaluate(default_xy_template(4), ctx)
    assert m.n_params == 4 and m.n_cx == 6
    assert m.f2 is None and m.f4 is None
    assert loss == pytest.approx(float(sum(parts.values())))
    assert e >= ctx.e0 - 1e-9


def test_evolve_is_deterministic(ctx, tmp_path):
    a = evolve([chain_seed()], ctx, budget=6, seed=3)
    b = evolve([chain_seed()], ctx, budget=6, seed=3)
    assert [serialize(c.ir) for c in a.pool] == [serialize(c.ir) for c in b.pool]
    assert a.lineage == b.lineage
    assert a.evaluations == 7
    losses = [c.loss for c in a.pool]
    assert losses == sorted(losses)
    write_search_outputs(a, tmp_path / "x")
    write_search_outputs(b, tmp_path / "y")
    for name in ("pool.json", "lineage.jsonl", "best.circuit.json"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()


def fake_reply(text):
    return {"choices": [{"message": {"content": text}}]}


def test_llm_round_trip_with_fake_transport(ctx):
    proposal = serialize(default_xy_template(4))
    seen = {}

    def transport(url, payload, headers, timeout):
        seen.update(url=url, payload=payload, headers=headers)
        return fake_reply(f"Here:\n```json\n{proposal}```\n```json\n{{\"bad\": 1}}\n```")

    cfg = EndpointConfig("http://example.invalid/v1", key="k", model="m")
    cand = Candidate(0, chain_seed(), loss=1.5, breakdown={"energy": 1.5})
    resp = llm_propose(GeneratorRequest([cand]), cfg, transport)
    assert [serialize(ir) for ir in resp.irs] == [proposal]
    assert resp.rejected == 1
    assert seen["payload"]["model"] == "m"
    assert seen["headers"]["Authorization"] == "Bearer k"
    assert "loss=1.5" in seen["payload"]["messages"][1]["content"]


def test_llm_retries_then_raises():
    calls = []

    def transport(*args):
        calls.append(1)
        raise TimeoutError("slow")

    with pytest.raises(ConnectionError):
        llm_propose(GeneratorRequest([]), EndpointConfig("http://x", attempts=2), transport)
    assert len(calls) == 2


def test_llm_requires_endpoint():
    with pytest.raises(LLMConfigError):
        EndpointConfig.from_env({})


def test_evolve_degrades_without_endpoint(ctx, monkeypatch):
    monkeypatch.delenv("ANSATZFORGE_LLM_URL", raising=False)
    res = evolve([chain_seed()], ctx, budget=3, generator="llm", seed=1)
    assert any(ev["event"] == "degrade" for ev in res.lineage)
    assert res.evaluations == 4


def test_evolve_uses_llm_proposals(ctx):
    proposal = serialize(default_xy_template(4))
    res = evolve([chain_seed()], ctx, budget=1, generator="llm",
                 endpoint=EndpointConfig("http://x"),
                 transport=lambda *a: fake_reply(f"```json\n{proposal}```"))
    ops = [ev.get("operator") for ev in res.lineage if ev["event"] == "evaluate"]
    assert ops == ["seed", "llm"]


def test_extract_irs_ignores_prose():
    assert extract_irs("no code here").irs == []
