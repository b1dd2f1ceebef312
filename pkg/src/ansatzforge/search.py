"""Evolutionary search over circuit templates.

Candidates are scored with a penalty loss over energy error, fidelity,
circuit cost, optimisation stability and (for grid templates) cross-size
fidelities. New candidates come from a deterministic genetic engine, from an
external chat-completion endpoint, or from both.
"""

from __future__ import annotations

import json
import logging
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .ansatz import (MC_U_GATES, AngleExpr, CircuitIR, IRError, LayerSpec, parse,
                     serialize, to_doc, transpile_metrics)
from .pauli import PauliSum, expectation, lowest_states
from .statevector import StateVector, fidelity
from .vqe import CompiledAnsatz, VQEConfig, minimize

log = logging.getLogger(__name__)

F = Fraction


# --------------------------------------------------------------------------
# loss

@dataclass(frozen=True)
class ScoreConfig:
    """Loss constants. Fractions keep exact inputs exact."""
    w_energy: Fraction = F(10)
    w_fid: Fraction = F(80)
    fid_target: Fraction = F("0.95")
    w_depth: Fraction = F("0.8")
    depth_free: Fraction = F(16)
    w_cx: Fraction = F("0.3")
    cx_free: Fraction = F(40)
    w_params: Fraction = F("1.5")
    params_free: Fraction = F(4)
    w_f2: Fraction = F(50)
    f2_target: Fraction = F("0.99")
    cap_f2: Fraction = F(45)
    w_f4: Fraction = F(150)
    f4_target: Fraction = F("0.94")
    cap_f4: Fraction = F(45)
    stab_edges: tuple = (F("0.5"), F("0.2"))
    stab_values: tuple = (F(5), F(2), F(0))


@dataclass(frozen=True)
class Metrics:
    delta_e: object
    fidelity: object
    depth: object
    n_cx: object
    n_params: object
    sigma: object
    # cross-size fidelities; None means not evaluated (chain searches)
    f2: object = None
    f4: object = None


def _pos(x):
    return x if x > 0 else 0 * x


def stab_penalty(sigma, cfg: ScoreConfig = ScoreConfig()):
    hi, lo = cfg.stab_edges
    if isinstance(sigma, float):
        # float(0.2) sits just above Fraction(1, 5); compare like with like
        hi, lo = float(hi), float(lo)
    if sigma > hi:
        return cfg.stab_values[0]
    if sigma > lo:
        return cfg.stab_values[1]
    return cfg.stab_values[2]


def score(metrics: Metrics, cfg: ScoreConfig = ScoreConfig()):
    """Return ``(L, breakdown)``; the breakdown values sum to ``L``."""
    for name in ("delta_e", "fidelity", "depth", "n_cx", "n_params", "sigma"):
        if getattr(metrics, name) is None:
            raise ValueError(f"missing metric {name}")
    m = metrics
    parts = {
        "energy": cfg.w_energy * _pos(m.delta_e),
        "fidelity": (cfg.w_fid * _pos(cfg.fid_target - m.fidelity)) ** 2,
        "depth": cfg.w_depth * _pos(m.depth - cfg.depth_free),
        "cx": cfg.w_cx * _pos(m.n_cx - cfg.cx_free),
        "params": (cfg.w_params * _pos(m.n_params - cfg.params_free)) ** 2,
        "stability": stab_penalty(m.sigma, cfg),
        "f2": 0 if m.f2 is None else min((cfg.w_f2 * _pos(cfg.f2_target - m.f2)) ** 2,
                                         cfg.cap_f2),
        "f4": 0 if m.f4 is None else min((cfg.w_f4 * _pos(cfg.f4_target - m.f4)) ** 2,
                                         cfg.cap_f4),
    }
    total = 0
    for v in parts.values():
        total = total + v
    return total, parts


# --------------------------------------------------------------------------
# candidates and evaluation

@dataclass
class Candidate:
    id: int
    ir: CircuitIR
    parents: tuple = ()
    operator: str = "seed"
    generation: int = 0
    metrics: Metrics | None = None
    loss: float | None = None
    breakdown: dict | None = None
    theta: list | None = None
    e_vqe: float | None = None

    def to_doc(self):
        return {
            "id": self.id, "generation": self.generation, "parents": list(self.parents),
            "operator": self.operator, "loss": self.loss,
            "breakdown": {k: float(v) for k, v in (self.breakdown or {}).items()},
            "metrics": None if self.metrics is None else
            {f.name: (None if getattr(self.metrics, f.name) is None
                      else float(getattr(self.metrics, f.name)))
             for f in fields(self.metrics)},
            "theta": self.theta, "e_vqe": self.e_vqe, "ir": to_doc(self.ir),
        }


@dataclass
class CrossSize:
    n: int
    hamiltonian: PauliSum
    ground: StateVector


@dataclass
class EvalContext:
    """Everything needed to score a template at the search size."""
    hamiltonian: PauliSum
    n: int
    e0: float
    ground: StateVector
    vqe: VQEConfig = field(default_factory=lambda: VQEConfig(restarts=8, max_evals=1500))
    cross: list = field(default_factory=list)
    score_cfg: ScoreConfig = field(default_factory=ScoreConfig)
    cross_max_evals: int = 400

    @classmethod
    def build(cls, hamiltonian, n, vqe=None, cross_hamiltonians=None, **kw):
        """Compute the exact references, dense up to 14 qubits."""
        method = "dense" if hamiltonian.n_qubits <= 14 else "lanczos"
        e, vecs = lowest_states(hamiltonian, 1, method=method)
        cross = []
        for n2, h2 in sorted((cross_hamiltonians or {}).items()):
            m2 = "dense" if h2.n_qubits <= 14 else "lanczos"
            _, v2 = lowest_states(h2, 1, method=m2)
            cross.append(CrossSize(n2, h2, v2[0]))
        ctx = cls(hamiltonian, n, float(e[0]), vecs[0], cross=cross, **kw)
        if vqe is not None:
            ctx.vqe = vqe
        return ctx


def cross_size_fidelity(ir: CircuitIR, theta, target: CrossSize, max_evals=400) -> float:
    """One VQE run at the target size started from ``theta``."""
    if target.hamiltonian.n_qubits > 20:
        raise ValueError(f"exact ground state at {target.hamiltonian.n_qubits} qubits "
                         "is beyond the 20-qubit limit")
    cfg = VQEConfig(restarts=1, max_evals=max_evals)
    res = minimize(ir, target.hamiltonian, cfg, target.ground, n=target.n, init=theta)
    return res.fidelity


def evaluate(ir: CircuitIR, ctx: EvalContext):
    """Metrics, loss, breakdown, best parameters and energy of a template."""
    rep = transpile_metrics(ir, ctx.n)
    if ir.n_params == 0:
        state = CompiledAnsatz(ir, ctx.n).state([])
        e, fid, sigma, theta = expectation(state, ctx.hamiltonian), \
            fidelity(state, ctx.ground), 0.0, []
    else:
        res = minimize(ir, ctx.hamiltonian, ctx.vqe, ctx.ground, n=ctx.n)
        e, fid, sigma, theta = res.e_vqe, res.fidelity, res.sigma, res.theta_star
    f2 = f4 = None
    for cs in ctx.cross:
        fx = cross_size_fidelity(ir, theta, cs, ctx.cross_max_evals) if theta else None
        if cs.n == 2:
            f2 = fx
        elif cs.n == 4:
            f4 = fx
    m = Metrics(e - ctx.e0, fid, rep.depth, rep.n_cx, rep.n_params, sigma, f2, f4)
    loss, parts = score(m, ctx.score_cfg)
    return m, float(loss), parts, list(theta), float(e)


# --------------------------------------------------------------------------
# genetic operators

def _palette(register):
    p = AngleExpr.param(0)
    if register == "grid_periodic":
        out = [LayerSpec("MCZ", "grid_edges_periodic", p)]
        out += [LayerSpec("MC_U", angle=p if g.startswith("R") else None, gate=g)
                for g in MC_U_GATES]
        return out
    return [LayerSpec(k, "all_sites", p) for k in ("RX", "RY", "RZ")] + [
        LayerSpec("H", "all_sites"), LayerSpec("CX", "chain_nn_pairs"),
        LayerSpec("CRZ", "chain_nn_pairs", p)]


def _fresh(ir):
    return ir.n_params, list(ir.params) + [f"theta{ir.n_params + 1}"]


def _rename(params):
    return [f"theta{k + 1}" for k in range(len(params))]


def _finish(ir: CircuitIR, layers, params):
    if not layers:
        return None
    try:
        child = CircuitIR(ir.register, ir.n, params, layers).pruned()
        return CircuitIR(child.register, child.n, _rename(child.params), child.layers)
    except IRError:
        return None


def _with_new_param(ir, layer):
    j, params = _fresh(ir)
    return _retarget_angle(layer, AngleExpr.param(j)), params


def _retarget_angle(layer, angle):
    return replace(layer, angle=angle)


def mutate_insert(ir, rng):
    pal = _palette(ir.register)
    new = pal[int(rng.integers(len(pal)))]
    params = list(ir.params)
    if new.angle is not None:
        # reuse an existing parameter half the time
        if params and rng.random() < 0.5:
            new = _retarget_angle(new, AngleExpr.param(int(rng.integers(len(params)))))
        else:
            new, params = _with_new_param(ir, new)
    layers = list(ir.layers)
    layers.insert(int(rng.integers(len(layers) + 1)), new)
    return _finish(ir, layers, params)


def mutate_delete(ir, rng):
    if len(ir.layers) <= 1:
        return None
    layers = list(ir.layers)
    del layers[int(rng.integers(len(layers)))]
    return _finish(ir, layers, ir.params)


def mutate_swap(ir, rng):
    if len(ir.layers) < 2:
        return None
    layers = list(ir.layers)
    k = int(rng.integers(len(layers) - 1))
    layers[k], layers[k + 1] = layers[k + 1], layers[k]
    return _finish(ir, layers, ir.params)


def mutate_kind(ir, rng):
    layers = list(ir.layers)
    k = int(rng.integers(len(layers)))
    lay = layers[k]
    params = list(ir.params)
    rot = ("RX", "RY", "RZ")
    if lay.op == "MC_U":
        options = [g for g in MC_U_GATES if g != lay.gate]
        g = options[int(rng.integers(len(options)))]
        angle = lay.angle
        if g.startswith("R") and angle is None:
            j, params = _fresh(ir)
            angle = AngleExpr.param(j)
        elif not g.startswith("R"):
            angle = None
        layers[k] = LayerSpec("MC_U", angle=angle, gate=g)
    elif lay.op in rot:
        options = [g for g in rot if g != lay.op]
        layers[k] = replace(lay, op=options[int(rng.integers(2))])
    elif lay.op == "H":
        j, params = _fresh(ir)
        layers[k] = LayerSpec(rot[int(rng.integers(3))], lay.targets, AngleExpr.param(j))
    elif lay.op == "CX":
        j, params = _fresh(ir)
        layers[k] = LayerSpec("CRZ", lay.targets, AngleExpr.param(j))
    elif lay.op == "CRZ":
        layers[k] = LayerSpec("CX", lay.targets)
    else:
        return None
    return _finish(ir, layers, params)


def mutate_angle(ir, rng):
    """Cycle an angle form: const -> param -> site_profile -> param, or flip the profile."""
    idx = [k for k, l in enumerate(ir.layers) if l.angle is not None]
    if not idx:
        return None
    k = idx[int(rng.integers(len(idx)))]
    layers = list(ir.layers)
    lay = layers[k]
    a = lay.angle
    params = list(ir.params)
    chain_1q = ir.register == "chain" and lay.op in ("RX", "RY", "RZ")
    if a.form == "const":
        j, params = _fresh(ir)
        new = AngleExpr.param(j)
    elif a.form == "param":
        if chain_1q and rng.random() < 0.7:
            j, params = _fresh(ir)
            new = AngleExpr.site_profile(a.index, j, "cos_pow" if rng.random() < 0.5 else "sin")
        else:
            new = AngleExpr.const(float(np.round(rng.uniform(0, 2 * np.pi), 3)))
    else:
        if rng.random() < 0.5:
            new = AngleExpr.param(a.base)
        elif a.profile == "sin":
            new = AngleExpr.site_profile(a.base, a.scale, "cos_pow", "2n")
        else:
            new = AngleExpr.site_profile(a.base, a.scale, "sin")
    layers[k] = replace(lay, angle=new)
    return _finish(ir, layers, params)


def mutate_add_param(ir, rng):
    """Give one parametrised layer its own fresh parameter."""
    idx = [k for k, l in enumerate(ir.layers) if l.angle is not None and l.angle.form == "param"]
    if not idx:
        return None
    k = idx[int(rng.integers(len(idx)))]
    layers = list(ir.layers)
    layers[k], params = _with_new_param(ir, layers[k])
    return _finish(ir, layers, params)


def mutate_remove_param(ir, rng):
    """Tie one parameter to another."""
    if ir.n_params < 2:
        return None
    src, dst = (int(v) for v in rng.choice(ir.n_params, 2, replace=False))
    mapping = {j: (dst if j == src else j) for j in range(ir.n_params)}
    layers = [replace(l, angle=l.angle.renumbered(mapping)) if l.angle else l
              for l in ir.layers]
    return _finish(ir, layers, ir.params)


def mutate_duplicate(ir, rng):
    """Repeat a contiguous block of layers right after itself."""
    m = len(ir.layers)
    i = int(rng.integers(m))
    j = int(rng.integers(i + 1, min(m, i + 3) + 1))
    layers = list(ir.layers[:j]) + list(ir.layers[i:j]) + list(ir.layers[j:])
    return _finish(ir, layers, ir.params)


def crossover(a: CircuitIR, b: CircuitIR, rng):
    """``a[:cut] + b[cut:]`` with parameter indices kept as they are."""
    if a.register != b.register:
        return None
    cut = int(rng.integers(1, max(1, min(len(a.layers), len(b.layers))) + 1))
    layers = list(a.layers[:cut]) + list(b.layers[cut:])
    params = _rename(range(max(a.n_params, b.n_params)))
    return _finish(a, layers, params)


MUTATIONS = {
    "insert": mutate_insert, "delete": mutate_delete, "swap": mutate_swap,
    "kind": mutate_kind, "angle": mutate_angle, "add_param": mutate_add_param,
    "remove_param": mutate_remove_param, "duplicate": mutate_duplicate,
}


def _tournament(rng, n, k=3):
    # parents are ranked best first, so the smallest index wins
    return int(min(rng.integers(n, size=min(k, n))))


def genetic_step(parents, rng, n_children=12, p_crossover=0.25, max_tries=50):
    """Children as ``(ir, operator, parent_indices)`` triples.

    ``parents`` are expected best first; parents are drawn by 3-way
    tournament on rank. Invalid or empty children are discarded and a new parent is drawn.
    """
    names = list(MUTATIONS)
    out = []
    tries = 0
    while len(out) < n_children and tries < n_children * max_tries:
        tries += 1
        if len(parents) > 1 and rng.random() < p_crossover:
            i = _tournament(rng, len(parents))
            j = int(rng.integers(len(parents)))
            if i == j:
                continue
            child = crossover(parents[i], parents[j], rng)
            op, src = "crossover", (i, j)
        else:
            i = _tournament(rng, len(parents))
            op = names[int(rng.integers(len(names)))]
            child = MUTATIONS[op](parents[i], rng)
            src = (i,)
        if child is not None and child.layers:
            out.append((child, op, src))
    return out


# --------------------------------------------------------------------------
# external generator

class LLMConfigError(RuntimeError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    key: str | None = None
    model: str = "default"
    timeout: float = 60.0
    attempts: int = 2
    system_prompt: str = ("You design parameterised quantum circuits. Reply with new "
                          "circuit documents in the same JSON format, each in its own "
                          "```json fenced block.")

    @classmethod
    def from_env(cls, env=None):
        env = os.environ if env is None else env
        url = env.get("ANSATZFORGE_LLM_URL")
        if not url:
            raise LLMConfigError("ANSATZFORGE_LLM_URL is not set")
        return cls(url, env.get("ANSATZFORGE_LLM_KEY"),
                   env.get("ANSATZFORGE_LLM_MODEL", "default"))


@dataclass
class GeneratorRequest:
    candidates: list
    instructions: str = ("Propose improved circuits: lower loss, few parameters, "
                         "shallow depth.")

    def prompt(self):
        parts = [self.instructions, ""]
        for c in self.candidates:
            parts.append(f"Candidate {c.id} loss={c.loss!r}")
            parts.append("breakdown: " + json.dumps(
                {k: float(v) for k, v in (c.breakdown or {}).items()}, sort_keys=True))
            parts.append("```json\n" + serialize(c.ir) + "```")
        return "\n".join(parts)


@dataclass
class GeneratorResponse:
    irs: list
    rejected: int = 0


_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.S)


def extract_irs(text):
    good, bad = [], 0
    for block in _FENCE.findall(text):
        try:
            good.append(parse(block))
        except IRError as exc:
            bad += 1
            log.info("dropping generated circuit: %s", exc)
    return GeneratorResponse(good, bad)


def _http_post(url, payload, headers, timeout):
    req = urllib.request.Request(url, json.dumps(payload).encode(), headers, method="POST")
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read().decode())


def llm_propose(request: GeneratorRequest, config: EndpointConfig | None = None,
                transport=_http_post) -> GeneratorResponse:
    """Ask a chat-completion endpoint for new circuits.

    Raises :class:`LLMConfigError` when no endpoint is configured and
    ``ConnectionError`` after the last failed attempt.
    """
    config = config or EndpointConfig.from_env()
    payload = {"model": config.model, "messages": [
        {"role": "system", "content": config.system_prompt},
        {"role": "user", "content": request.prompt()}]}
    headers = {"Content-Type": "application/json"}
    if config.key:
        headers["Authorization"] = f"Bearer {config.key}"
    last = None
    for attempt in range(config.attempts):
        try:
            reply = transport(config.url, payload, headers, config.timeout)
            break
        except (urllib.error.URLError, TimeoutError, OSError, ValueError) as exc:
            last = exc
            log.warning("endpoint attempt %d failed: %s", attempt + 1, exc)
    else:
        raise ConnectionError(f"endpoint unreachable: {last}")
    try:
        text = reply["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        log.warning("unexpected endpoint reply shape")
        return GeneratorResponse([], 0)
    return extract_irs(text)


# --------------------------------------------------------------------------
# evolution

def layer_distance(a: CircuitIR, b: CircuitIR) -> int:
    """Levenshtein distance between layer sequences."""
    x, y = a.layers, b.layers
    prev = list(range(len(y) + 1))
    for i, la in enumerate(x, 1):
        cur = [i]
        for j, lb in enumerate(y, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (la != lb)))
        prev = cur
    return prev[-1]


def select(cands, n_elite=8, n_diverse=4):
    ranked = sorted(cands, key=lambda c: (c.loss, c.id))
    elite = ranked[:n_elite]
    rest = ranked[n_elite:]
    chosen = list(elite)
    for _ in range(n_diverse):
        if not rest:
            break
        best = max(rest, key=lambda c: (min(layer_distance(c.ir, e.ir) for e in chosen),
                                        -c.loss, -c.id))
        chosen.append(best)
        rest.remove(best)
    return sorted(chosen, key=lambda c: (c.loss, c.id))


@dataclass
class SearchResult:
    pool: list
    lineage: list
    evaluations: int

    @property
    def best(self):
        return self.pool[0]


def evolve(seed_pool, ctx: EvalContext, budget: int = 100, generator: str = "genetic",
           seed: int = 0, children_per_generation: int = 12, n_elite: int = 8,
           n_diverse: int = 4, endpoint: EndpointConfig | None = None,
           transport=_http_post, max_params: int = 8, max_layers: int = 14,
           target_loss: float | None = None) -> SearchResult:
    """Generate, evaluate, score and select until ``budget`` new evaluations.

    Seeds are evaluated first and do not count against the budget. Duplicate
    templates (same serialised form) are evaluated once.
    """
    if generator not in ("genetic", "llm", "hybrid"):
        raise ValueError(f"unknown generator {generator!r}")
    if not seed_pool:
        raise ValueError("empty seed pool")
    rng = np.random.default_rng(seed)
    lineage = []
    cache = {}
    next_id = [0]

    def add(ir, parents, op, gen):
        key = serialize(ir)
        if key in cache:
            return None
        m, loss, parts, theta, e = evaluate(ir, ctx)
        c = Candidate(next_id[0], ir, tuple(parents), op, gen, m, loss, parts, theta, e)
        next_id[0] += 1
        cache[key] = c
        lineage.append({"event": "evaluate", "id": c.id, "generation": gen,
                        "parents": list(parents), "operator": op, "loss": loss})
        return c

    pool = []
    for ir in seed_pool:
        ir = parse(ir) if isinstance(ir, str) else ir
        c = add(ir, (), "seed", 0)
        if c is not None:
            pool.append(c)
    pool = select(pool, n_elite, n_diverse)
    lineage.append({"event": "select", "generation": 0, "pool": [c.id for c in pool]})
    spent = 0
    gen = 0
    stale = 0
    while spent < budget:
        if target_loss is not None and pool[0].loss <= target_loss:
            break
        gen += 1
        proposals = []
        if generator in ("llm", "hybrid"):
            try:
                resp = llm_propose(GeneratorRequest(pool[:4]), endpoint, transport)
                proposals += [(ir, "llm", tuple(c.id for c in pool[:4])) for ir in resp.irs]
            except (LLMConfigError, ConnectionError) as exc:
                log.warning("generator endpoint unavailable, using genetic step: %s", exc)
                lineage.append({"event": "degrade", "generation": gen, "reason": str(exc)})
        if generator != "llm" or not proposals:
            kids = genetic_step([c.ir for c in pool], rng, children_per_generation)
            proposals += [(ir, op, tuple(pool[i].id for i in src)) for ir, op, src in kids]
        fresh = []
        for ir, op, parents in proposals:
            if spent >= budget:
                break
            if ir.n_params > max_params or len(ir.layers) > max_layers:
                continue
            if ir.register != pool[0].ir.register:
                continue
            c = add(ir, parents, op, gen)
            if c is not None:
                fresh.append(c)
                spent += 1
        stale = stale + 1 if not fresh else 0
        if stale > 50:
            log.warning("no new candidates for 50 generations; stopping")
            break
        pool = select(pool + fresh, n_elite, n_diverse)
        lineage.append({"event": "select", "generation": gen, "pool": [c.id for c in pool]})
    return SearchResult(pool, lineage, len(cache))


def write_search_outputs(result: SearchResult, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "pool.json").write_text(json.dumps([c.to_doc() for c in result.pool], indent=2) + "\n")
    with open(out / "lineage.jsonl", "w") as fh:
        for ev in result.lineage:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")
    (out / "best.circuit.json").write_text(serialize(result.best.ir))
