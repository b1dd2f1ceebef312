"""Parameterised circuit templates (the circuit IR).

A :class:`CircuitIR` is a register kind plus an ordered list of layers. Each
layer names an operation, a target pattern and optionally an angle
expression. Templates are size-generic: :func:`expand` turns one into a
concrete :class:`~ansatzforge.statevector.GateOp` list for any register size.

Document format (JSON)::

    {
      "register": {"kind": "chain", "n": 9},
      "params": ["theta1", "theta2"],
      "layers": [
        {"op": "RY", "targets": "all_sites", "angle": {"form": "param", "index": 0}},
        {"op": "CX", "targets": "chain_nn_pairs"},
        {"op": "RY", "targets": "all_sites",
         "angle": {"form": "site_profile", "base": 0, "scale": 1,
                   "profile": "cos_pow", "exponent": "2n"}}
      ]
    }

Parameter indices are zero-based. Angle forms:

* ``{"form": "const", "value": c}``
* ``{"form": "param", "index": j}`` with optional ``"factor": f`` (angle
  ``f * theta_j``)
* ``{"form": "site_profile", "base": j, "scale": k, "profile": p, "exponent": e}``
  evaluating to ``theta_j + theta_k * prof(i pi / n)`` at chain site ``i``,
  where ``prof`` is ``sin`` or ``cos ** e`` (``e`` even, or ``"2n"``).

Target patterns: ``all_sites``, ``chain_nn_pairs``, ``grid_edges_periodic``
(the ``2 n^2`` directed bonds, horizontal then vertical, both row-major),
``grid_bonds`` (the same list without repeated pairs), or an explicit list
of sites / ``[a, b]`` pairs.

Meta-circuits on grid registers: ``MC_U`` applies one gate from
``{H, X, RX, RY, RZ}`` to every site and ``MCZ`` applies ``CRZ`` to every
entry of ``grid_edges_periodic``. ``RZZ(t) = exp(-i t/2 ZZ)`` expands to
``CX, RZ(t), CX``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .models import ScalarFieldSpec, grid_edges, scalar_parts
from .statevector import GateOp

ONE_QUBIT_OPS = ("H", "X", "Y", "Z", "RX", "RY", "RZ")
ROTATION_OPS = ("RX", "RY", "RZ", "CRZ", "RZZ")
TWO_QUBIT_OPS = ("CX", "CRZ", "RZZ")
META_OPS = ("MC_U", "MCZ")
MC_U_GATES = ("H", "X", "RX", "RY", "RZ")
SITE_PATTERNS = ("all_sites",)
PAIR_PATTERNS = ("chain_nn_pairs", "grid_edges_periodic", "grid_bonds")
REGISTER_KINDS = ("chain", "grid_periodic")


class IRError(ValueError):
    """Structural problem in a circuit IR."""


class IRParseError(IRError):
    def __init__(self, message, line=None, path=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if path:
            where.append(path)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.line = line
        self.path = path


# --------------------------------------------------------------------------
# angle expressions

@dataclass(frozen=True)
class AngleExpr:
    form: str
    value: float | None = None
    index: int | None = None
    factor: float = 1.0
    base: int | None = None
    scale: int | None = None
    profile: str | None = None
    exponent: int | str | None = None

    @classmethod
    def const(cls, value):
        return cls("const", value=float(value))

    @classmethod
    def param(cls, index, factor=1.0):
        return cls("param", index=int(index), factor=float(factor))

    @classmethod
    def site_profile(cls, base, scale, profile="cos_pow", exponent="2n"):
        if profile == "sin":
            exponent = None
        return cls("site_profile", base=int(base), scale=int(scale),
                   profile=profile, exponent=exponent)

    def __post_init__(self):
        if self.form == "const":
            if self.value is None or not math.isfinite(self.value):
                raise IRError("const angle needs a finite value")
        elif self.form == "param":
            if self.index is None or self.index < 0:
                raise IRError("param angle needs a non-negative index")
            if not math.isfinite(self.factor):
                raise IRError("param factor must be finite")
        elif self.form == "site_profile":
            if self.base is None or self.scale is None or min(self.base, self.scale) < 0:
                raise IRError("site_profile needs non-negative base and scale indices")
            if self.profile == "cos_pow":
                e = self.exponent
                if e != "2n" and not (isinstance(e, int) and not isinstance(e, bool)
                                      and e >= 2 and e % 2 == 0):
                    raise IRError(f"cos_pow exponent must be even and >= 2 or '2n', got {e!r}")
            elif self.profile != "sin":
                raise IRError(f"unknown profile {self.profile!r}")
        else:
            raise IRError(f"unknown angle form {self.form!r}")

    @property
    def param_indices(self):
        if self.form == "param":
            return (self.index,)
        if self.form == "site_profile":
            return (self.base, self.scale)
        return ()

    def profile_value(self, i, n):
        x = i * math.pi / n
        if self.profile == "sin":
            return math.sin(x)
        e = 2 * n if self.exponent == "2n" else self.exponent
        return math.cos(x) ** e

    def evaluate(self, params, site=0, n=1):
        if self.form == "const":
            return self.value
        if self.form == "param":
            return self.factor * params[self.index]
        return params[self.base] + params[self.scale] * self.profile_value(site, n)

    def renumbered(self, mapping):
        if self.form == "param":
            return replace(self, index=mapping[self.index])
        if self.form == "site_profile":
            return replace(self, base=mapping[self.base], scale=mapping[self.scale])
        return self

    def to_doc(self):
        if self.form == "const":
            return {"form": "const", "value": self.value}
        if self.form == "param":
            doc = {"form": "param", "index": self.index}
            if self.factor != 1.0:
                doc["factor"] = self.factor
            return doc
        doc = {"form": "site_profile", "base": self.base, "scale": self.scale,
               "profile": self.profile}
        if self.profile == "cos_pow":
            doc["exponent"] = self.exponent
        return doc

    @classmethod
    def from_doc(cls, doc):
        if not isinstance(doc, dict):
            raise IRError("angle must be an object")
        form = doc.get("form")
        allowed = {"const": {"form", "value"}, "param": {"form", "index", "factor"},
                   "site_profile": {"form", "base", "scale", "profile", "exponent"}}
        if form not in allowed:
            raise IRError(f"unknown angle form {form!r}")
        extra = set(doc) - allowed[form]
        if extra:
            raise IRError(f"unexpected angle keys {sorted(extra)}")
        if form == "const":
            return cls.const(_number(doc.get("value"), "value"))
        if form == "param":
            return cls.param(_index(doc.get("index"), "index"),
                             _number(doc.get("factor", 1.0), "factor"))
        profile = doc.get("profile")
        if profile == "sin" and "exponent" in doc:
            raise IRError("sin profile takes no exponent")
        return cls("site_profile", base=_index(doc.get("base"), "base"),
                   scale=_index(doc.get("scale"), "scale"), profile=profile,
                   exponent=doc.get("exponent") if profile == "cos_pow" else None)


def _number(x, name):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise IRError(f"{name} must be a number")
    return float(x)


def _index(x, name):
    if isinstance(x, bool) or not isinstance(x, int):
        raise IRError(f"{name} must be an integer")
    return x


# --------------------------------------------------------------------------
# layers and circuits

@dataclass(frozen=True)
class LayerSpec:
    op: str
    targets: str | tuple = "all_sites"
    angle: AngleExpr | None = None
    gate: str | None = None

    def __post_init__(self):
        if isinstance(self.targets, list):
            object.__setattr__(self, "targets", tuple(
                tuple(t) if isinstance(t, (list, tuple)) else t for t in self.targets))
        op = self.op
        if op not in ONE_QUBIT_OPS + TWO_QUBIT_OPS + META_OPS:
            raise IRError(f"unknown gate kind {op!r}")
        if op == "MC_U":
            if self.gate not in MC_U_GATES:
                raise IRError(f"MC_U gate must be one of {MC_U_GATES}, got {self.gate!r}")
            if self.targets != "all_sites":
                raise IRError("MC_U always targets all_sites")
        elif self.gate is not None:
            raise IRError(f"{op} takes no gate field")
        if op == "MCZ" and self.targets != "grid_edges_periodic":
            raise IRError("MCZ always targets grid_edges_periodic")
        kind = self.gate if op == "MC_U" else ("CRZ" if op == "MCZ" else op)
        needs_angle = kind in ROTATION_OPS
        if needs_angle and self.angle is None:
            raise IRError(f"{kind} needs an angle")
        if not needs_angle and self.angle is not None:
            raise IRError(f"{kind} takes no angle")
        pair_op = op in TWO_QUBIT_OPS or op == "MCZ"
        t = self.targets
        if isinstance(t, str):
            if pair_op and t not in PAIR_PATTERNS:
                raise IRError(f"{op} needs a pair pattern, got {t!r}")
            if not pair_op and t not in SITE_PATTERNS:
                raise IRError(f"{op} needs a site pattern, got {t!r}")
        else:
            if not t:
                raise IRError("empty target list")
            for item in t:
                if pair_op:
                    if not (isinstance(item, tuple) and len(item) == 2
                            and all(isinstance(q, int) and q >= 0 for q in item)
                            and item[0] != item[1]):
                        raise IRError(f"{op} targets must be distinct site pairs, got {item!r}")
                elif isinstance(item, bool) or not isinstance(item, int) or item < 0:
                    raise IRError(f"{op} targets must be site indices, got {item!r}")

    @property
    def kind(self):
        """Elementary gate kind the layer applies."""
        if self.op == "MC_U":
            return self.gate
        if self.op == "MCZ":
            return "CRZ"
        return self.op

    def to_doc(self):
        doc = {"op": self.op}
        if self.gate is not None:
            doc["gate"] = self.gate
        doc["targets"] = self.targets if isinstance(self.targets, str) else [
            list(t) if isinstance(t, tuple) else t for t in self.targets]
        if self.angle is not None:
            doc["angle"] = self.angle.to_doc()
        return doc


@dataclass(frozen=True)
class CircuitIR:
    register: str
    n: int
    params: tuple
    layers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.register not in REGISTER_KINDS:
            raise IRError(f"unknown register kind {self.register!r}")
        if self.n < 2:
            raise IRError("register size must be >= 2")
        if len(set(self.params)) != len(self.params):
            raise IRError("duplicate parameter names")
        for k, layer in enumerate(self.layers):
            self._check_layer(layer, k)

    def _check_layer(self, layer, k):
        grid = self.register == "grid_periodic"
        if layer.op in META_OPS and not grid:
            raise IRError(f"layer {k}: meta-circuit {layer.op} on a chain register")
        t = layer.targets
        if t in ("grid_edges_periodic", "grid_bonds") and not grid:
            raise IRError(f"layer {k}: pattern {t} needs a grid register")
        if t == "chain_nn_pairs" and grid:
            raise IRError(f"layer {k}: pattern chain_nn_pairs needs a chain register")
        if layer.angle is not None:
            if layer.angle.form == "site_profile" and grid:
                raise IRError(f"layer {k}: site_profile angles need a chain register")
            for j in layer.angle.param_indices:
                if j >= len(self.params):
                    raise IRError(f"layer {k}: parameter index {j} out of range "
                                  f"(N_P = {len(self.params)})")

    @property
    def n_params(self):
        return len(self.params)

    def n_sites(self, n=None):
        n = self.n if n is None else n
        return n * n if self.register == "grid_periodic" else n

    def used_params(self):
        used = set()
        for layer in self.layers:
            if layer.angle is not None:
                used.update(layer.angle.param_indices)
        return used

    def pruned(self):
        """Drop unreferenced parameters and renumber the rest in order."""
        used = sorted(self.used_params())
        mapping = {old: new for new, old in enumerate(used)}
        layers = [replace(l, angle=l.angle.renumbered(mapping)) if l.angle else l
                  for l in self.layers]
        return CircuitIR(self.register, self.n, [self.params[j] for j in used], layers)

    def with_layers(self, layers, params=None):
        return CircuitIR(self.register, self.n, self.params if params is None else params,
                         layers)


def _pairs(pattern, register, n):
    if pattern == "chain_nn_pairs":
        return [(i, i + 1) for i in range(n - 1)]
    if pattern == "grid_edges_periodic":
        return grid_edges(n)
    if pattern == "grid_bonds":
        seen, out = set(), []
        for a, b in grid_edges(n):
            key = (min(a, b), max(a, b))
            if key not in seen:
                seen.add(key)
                out.append((a, b))
        return out
    return list(pattern)


def expand(ir: CircuitIR, n: int | None = None, params: Sequence[float] = ()) -> list:
    """Concrete gate list of ``ir`` on a register of side ``n``."""
    n = ir.n if n is None else n
    if n < 2:
        raise IRError("register size must be >= 2")
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.shape[0] != ir.n_params:
        raise IRError(f"expected {ir.n_params} parameters, got {params.shape[0]}")
    sites = ir.n_sites(n)
    gates = []
    for layer in ir.layers:
        kind = layer.kind
        if layer.op in TWO_QUBIT_OPS or layer.op == "MCZ":
            for a, b in _pairs(layer.targets, ir.register, n):
                if max(a, b) >= sites:
                    raise IRError(f"pair {(a, b)} outside register of {sites} sites")
                theta = layer.angle.evaluate(params) if layer.angle else None
                if kind == "RZZ":
                    gates += [GateOp("CX", (a, b)), GateOp("RZ", b, theta), GateOp("CX", (a, b))]
                else:
                    gates.append(GateOp(kind, (a, b), theta))
            continue
        targets = range(sites) if layer.targets == "all_sites" else layer.targets
        for q in targets:
            if q >= sites:
                raise IRError(f"site {q} outside register of {sites} sites")
            theta = layer.angle.evaluate(params, q, n) if layer.angle else None
            gates.append(GateOp(kind, q, theta))
    return gates


# --------------------------------------------------------------------------
# transpile metrics

@dataclass(frozen=True)
class TranspileReport:
    depth: int
    n_cx: int
    n_params: int


def decompose(gates):
    """Rewrite CRZ into ``{1q rotations, CX}``.

    ``diag(1, 1, 1, e^{it}) = RZ(t/2)_c RZ(t/2)_t CX RZ(-t/2)_t CX`` up to a
    global phase.
    """
    out = []
    for g in gates:
        if g.kind == "CRZ":
            c, t = g.targets
            out += [GateOp("RZ", c, g.angle / 2), GateOp("RZ", t, g.angle / 2),
                    GateOp("CX", (c, t)), GateOp("RZ", t, -g.angle / 2),
                    GateOp("CX", (c, t))]
        else:
            out.append(g)
    return out


def dag_depth(gates):
    level = {}
    depth = 0
    for g in gates:
        t = 1 + max((level.get(q, 0) for q in g.targets), default=0)
        for q in g.targets:
            level[q] = t
        depth = max(depth, t)
    return depth


def transpile_metrics(ir: CircuitIR, n: int | None = None) -> TranspileReport:
    # angles are irrelevant to the structure; any finite values do
    gates = decompose(expand(ir, n, np.full(ir.n_params, 0.5)))
    n_cx = sum(1 for g in gates if g.kind == "CX")
    return TranspileReport(dag_depth(gates), n_cx, len(ir.used_params()))


# --------------------------------------------------------------------------
# stock templates

def _p(j, factor=1.0):
    return AngleExpr.param(j, factor)


def default_xy_template(n=9, profile="cos_pow", variant="ry"):
    """Four-parameter chain template.

    ``variant="ry"`` wraps RY rotations around two CX ladders with the
    site-modulated middle layer. ``variant="hrz"`` opens with H on all sites
    and closes with ``RZ(theta4)``.
    """
    mid = AngleExpr.site_profile(1, 2, profile, "2n" if profile == "cos_pow" else None)
    if variant == "ry":
        first = LayerSpec("RY", "all_sites", _p(0))
        last = LayerSpec("RY", "all_sites", _p(3))
        params = ["theta1", "theta2", "theta3", "theta4"]
    elif variant == "hrz":
        first = LayerSpec("H", "all_sites")
        last = LayerSpec("RZ", "all_sites", _p(3))
        params = ["theta1", "theta2", "theta3", "theta4"]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    layers = [first, LayerSpec("CX", "chain_nn_pairs"), LayerSpec("RY", "all_sites", mid),
              LayerSpec("CX", "chain_nn_pairs"), last]
    ir = CircuitIR("chain", n, params, layers)
    return ir.pruned() if variant == "hrz" else ir


def _minus_reference():
    return [LayerSpec("MC_U", gate="X"), LayerSpec("MC_U", gate="H")]


def scalar_template(kind="qaoa2", n=3):
    """Symmetry-preserving grid templates built from MC_U and MCZ blocks.

    Both start from ``|->`` on every site. ``compact3`` repeats one
    ``MCZ, RZ, RX`` block twice with shared angles; ``qaoa2`` gives each of the
    six blocks its own angle.
    """
    if kind == "compact3":
        idx, params = [0, 1, 2, 0, 1, 2], ["theta1", "theta2", "theta3"]
    elif kind == "qaoa2":
        idx, params = list(range(6)), [f"theta{k + 1}" for k in range(6)]
    else:
        raise ValueError(f"unknown scalar template {kind!r}")
    layers = _minus_reference()
    for rep in range(2):
        a, b, c = idx[3 * rep:3 * rep + 3]
        layers += [LayerSpec("MCZ", "grid_edges_periodic", _p(a)),
                   LayerSpec("MC_U", angle=_p(b), gate="RZ"),
                   LayerSpec("MC_U", angle=_p(c), gate="RX")]
    return CircuitIR("grid_periodic", n, params, layers)


def build_tentative(r: int, spec: ScalarFieldSpec, reference: str = "minus") -> CircuitIR:
    """Trotter-like ansatz ``prod_l exp(-i H_phi a_l) exp(-i H_int b_l) exp(-i H_k c_l)``.

    Factors act in the written order (``H_phi`` first). Identity parts only
    contribute global phases and are dropped. ``reference="minus"`` prepares
    ``|->`` on every site first, the ground state of ``H_k``; ``"zero"``
    starts from ``|0...0>``.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    h_k, h_phi, h_int = scalar_parts(spec)
    c_x = spec.a ** 2 / (8 * spec.phi_max ** 2)
    c_int = spec.a ** 2 * spec.lam * spec.phi_max ** 3 / 6
    c_zz = -spec.phi_max ** 2
    pattern = "grid_edges_periodic" if spec.edge_convention == "laplacian" else "grid_bonds"
    if reference == "minus":
        layers = _minus_reference()
    elif reference == "zero":
        layers = []
    else:
        raise ValueError(f"unknown reference {reference!r}")
    params = []
    for rep in range(r):
        j = 3 * rep
        params += [f"phi_{rep + 1}", f"int_{rep + 1}", f"kin_{rep + 1}"]
        layers.append(LayerSpec("RZZ", pattern, _p(j, 2 * c_zz)))
        if c_int:
            layers.append(LayerSpec("MC_U", angle=_p(j + 1, 2 * c_int), gate="RZ"))
        else:
            layers.append(LayerSpec("MC_U", angle=_p(j + 1, 0.0), gate="RZ"))
        layers.append(LayerSpec("MC_U", angle=_p(j + 2, 2 * c_x), gate="RX"))
    return CircuitIR("grid_periodic", spec.n, params, layers)


# --------------------------------------------------------------------------
# serialisation

def to_doc(ir: CircuitIR) -> dict:
    return {"register": {"kind": ir.register, "n": ir.n}, "params": list(ir.params),
            "layers": [l.to_doc() for l in ir.layers]}


def serialize(ir: CircuitIR) -> str:
    return json.dumps(to_doc(ir), indent=2) + "\n"


def _layer_lines(text):
    return [text.count("\n", 0, m.start()) + 1 for m in re.finditer(r'"op"\s*:', text)]


def from_doc(doc, text=None) -> CircuitIR:
    lines = _layer_lines(text) if text else []

    def fail(msg, k=None):
        line = lines[k] if k is not None and k < len(lines) else None
        raise IRParseError(msg, line, f"layers[{k}]" if k is not None else None)

    if not isinstance(doc, dict):
        fail("document must be an object")
    extra = set(doc) - {"register", "params", "layers"}
    if extra:
        fail(f"unexpected keys {sorted(extra)}")
    reg = doc.get("register")
    if not isinstance(reg, dict) or set(reg) != {"kind", "n"}:
        fail("register must be an object with kind and n")
    if reg["kind"] not in REGISTER_KINDS:
        fail(f"unknown register kind {reg['kind']!r}")
    if isinstance(reg["n"], bool) or not isinstance(reg["n"], int) or reg["n"] < 2:
        fail("register n must be an integer >= 2")
    params = doc.get("params")
    if not isinstance(params, list) or not all(isinstance(p, str) for p in params):
        fail("params must be a list of names")
    layers_doc = doc.get("layers")
    if not isinstance(layers_doc, list):
        fail("layers must be a list")
    layers = []
    for k, ld in enumerate(layers_doc):
        if not isinstance(ld, dict):
            fail("layer must be an object", k)
        extra = set(ld) - {"op", "gate", "targets", "angle"}
        if extra:
            fail(f"unexpected layer keys {sorted(extra)}", k)
        try:
            angle = AngleExpr.from_doc(ld["angle"]) if "angle" in ld else None
            targets = ld.get("targets", "all_sites")
            if not isinstance(targets, (str, list)):
                raise IRError("targets must be a pattern name or a list")
            layer = LayerSpec(ld.get("op"), targets, angle, ld.get("gate"))
            CircuitIR(reg["kind"], reg["n"], params, [layer])
        except IRError as exc:
            fail(str(exc).replace("layer 0: ", ""), k)
        layers.append(layer)
    try:
        return CircuitIR(reg["kind"], reg["n"], params, layers)
    except IRError as exc:
        fail(str(exc))


def parse(text: str) -> CircuitIR:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IRParseError(exc.msg, exc.lineno) from None
    return from_doc(doc, text)
