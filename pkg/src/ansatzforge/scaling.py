"""Parameter-versus-size fits and extrapolated circuit evaluation."""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.optimize import minimize as _scipy_minimize

from .ansatz import CircuitIR, expand
from .models import ScalarFieldSpec, XYModelSpec, build_scalar, build_xy, xy_exact_energy
from .mps import DEFAULT_CHI_MAX, mps_expectation, mps_run_circuit
from .pauli import expectation, lowest_states
from .statevector import MAX_QUBITS, fidelity, single_qubit_fidelity
from .vqe import CompiledAnsatz, VQEConfig, minimize

log = logging.getLogger(__name__)

FAMILIES = ("constant", "inverse", "exponential")
# exact ground vectors are only attempted up to this many qubits
FIDELITY_MAX_QUBITS = 20
RSS_FLOOR = 1e-20
# keeps the exponential family from degenerating into a straight line
EXP_RATE_MIN, EXP_RATE_MAX = 0.01, 10.0


@dataclass
class TraceEntry:
    n: int
    theta: list
    e_vqe: float
    e_exact: float

    @property
    def rel_err(self):
        return abs(self.e_vqe - self.e_exact) / abs(self.e_exact)


@dataclass
class FittedCurve:
    model: str
    coeffs: tuple
    rss: float
    aicc: float
    flagged: bool = False

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        c = self.coeffs
        if self.model == "constant":
            return c[0] + 0 * n
        if self.model == "inverse":
            return c[0] + c[1] / n
        return c[0] + c[1] * np.exp(-c[2] * n)


@dataclass
class ParamTrace:
    entries: list
    curves: list = field(default_factory=list)

    def __post_init__(self):
        ns = [e.n for e in self.entries]
        if len(set(ns)) != len(ns):
            raise ValueError("trace sizes must be distinct")
        if len({len(e.theta) for e in self.entries}) > 1:
            raise ValueError("parameter vectors differ in length")
        self.entries = sorted(self.entries, key=lambda e: e.n)

    @property
    def sizes(self):
        return np.array([e.n for e in self.entries])

    def thetas(self):
        return np.array([e.theta for e in self.entries])

    def theta_at(self, n):
        if not self.curves:
            raise ValueError("trace has not been fitted")
        return np.array([float(c(n)) for c in self.curves])

    def to_csv(self):
        k = len(self.entries[0].theta) if self.entries else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n"] + [f"theta_{j + 1}" for j in range(k)] + ["e_vqe", "e_exact", "rel_err"])
        for e in self.entries:
            w.writerow([e.n] + [repr(float(t)) for t in e.theta]
                       + [repr(e.e_vqe), repr(e.e_exact), repr(e.rel_err)])
        return buf.getvalue()


def aicc(rss, m, k):
    rss = max(rss, RSS_FLOOR * m)
    if m - k - 1 <= 0:
        return float("inf")
    return m * math.log(rss / m) + 2 * k + 2 * k * (k + 1) / (m - k - 1)


def _fit_one(n, y, family):
    m = len(n)
    if family == "constant":
        c = (float(np.mean(y)),)
        return c, float(np.sum((y - c[0]) ** 2))
    if family == "inverse":
        a = np.column_stack([np.ones(m), 1.0 / n])
        c, *_ = np.linalg.lstsq(a, y, rcond=None)
        return tuple(float(v) for v in c), float(np.sum((a @ c - y) ** 2))
    best = None

    def f(x, c1, c2, c3):
        return c1 + c2 * np.exp(-c3 * x)

    for c3 in (0.1, 0.5, 1.0, 2.0):
        e = np.exp(-c3 * n)
        a = np.column_stack([np.ones(m), e])
        c12, *_ = np.linalg.lstsq(a, y, rcond=None)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", OptimizeWarning)
                p, _ = curve_fit(f, n, y, p0=[c12[0], c12[1], c3], maxfev=5000,
                                 bounds=([-np.inf, -np.inf, EXP_RATE_MIN],
                                         [np.inf, np.inf, EXP_RATE_MAX]))
        except RuntimeError:
            continue
        if not np.all(np.isfinite(p)):
            continue
        rss = float(np.sum((f(n, *p) - y) ** 2))
        if best is None or rss < best[1]:
            best = (tuple(float(v) for v in p), rss)
    if best is None:
        raise RuntimeError("exponential fit failed")
    return best


def fit_param_curves(trace: ParamTrace, families=FAMILIES) -> ParamTrace:
    """Per-parameter model choice by AICc.

    Families: ``constant`` (``c``), ``inverse`` (``c1 + c2/n``) and
    ``exponential`` (``c1 + c2 exp(-c3 n)``). A family is skipped when the
    AICc correction is undefined for the number of sizes. Residual sums are
    floored at ``1e-20`` per point so exact fits compare by parameter count.
    A constant-only fit accepts two or more sizes; otherwise four are needed.
    """
    n = trace.sizes.astype(float)
    m = len(n)
    need = 2 if tuple(families) == ("constant",) else 4
    if m < need:
        raise ValueError(f"need at least {need} sizes to fit")
    ys = trace.thetas()
    curves = []
    k_of = {"constant": 1, "inverse": 2, "exponential": 3}
    for j in range(ys.shape[1]):
        y = ys[:, j]
        best = None
        for fam in families:
            k = k_of[fam]
            if m - k - 1 <= 0 and len(families) > 1:
                continue
            try:
                c, rss = _fit_one(n, y, fam)
            except (RuntimeError, np.linalg.LinAlgError) as exc:
                log.info("%s fit of theta_%d failed: %s", fam, j + 1, exc)
                continue
            score = aicc(rss, m, k)
            if best is None or score < best.aicc - 1e-9:
                best = FittedCurve(fam, c, rss, score)
        if best is None:
            c, rss = _fit_one(n, y, "constant")
            best = FittedCurve("constant", c, rss, aicc(rss, m, 1), flagged=True)
        curves.append(best)
    trace.curves = curves
    return trace


def reference(ir: CircuitIR, n, model):
    """Hamiltonian and exact ground energy for a template at size ``n``."""
    if ir.register == "chain":
        spec = model if isinstance(model, XYModelSpec) else XYModelSpec(n)
        spec = XYModelSpec(n, spec.gamma, spec.g_z)
        return build_xy(spec), xy_exact_energy(spec)
    spec = model if isinstance(model, ScalarFieldSpec) else ScalarFieldSpec(n)
    spec = ScalarFieldSpec(n, spec.lam, spec.phi_max, spec.a,
                           edge_convention=spec.edge_convention)
    if n * n > MAX_QUBITS:
        raise ValueError(f"grid n={n} needs {n * n} qubits; limit is {MAX_QUBITS}")
    ham = build_scalar(spec)
    e, _ = lowest_states(ham, 1, method="dense" if n * n <= 10 else "lanczos")
    return ham, float(e[0])


def collect_trace(ir: CircuitIR, sizes, model=None, config: VQEConfig = VQEConfig(),
                  start=None, warm="chain") -> ParamTrace:
    """Optimise at each size with warm starts.

    Without ``start`` the smallest size gets the full multi-start search.
    Every later run is one local optimisation, started from the previous
    size's optimum (``warm="chain"``) or always from ``start``
    (``warm="anchor"``), so the parameters follow one branch.
    """
    if warm not in ("chain", "anchor"):
        raise ValueError(f"unknown warm-start mode {warm!r}")
    if warm == "anchor" and start is None:
        raise ValueError("anchor mode needs a start vector")
    sizes = sorted(sizes)
    entries = []
    prev = None if start is None else np.asarray(start, dtype=float)
    for n in sizes:
        ham, e_exact = reference(ir, n, model)
        if prev is None:
            res = minimize(ir, ham, config, n=n)
        else:
            cfg = VQEConfig(config.optimizer, 1, config.max_evals, config.tol, config.seed)
            res = minimize(ir, ham, cfg, n=n, init=prev)
        if warm == "chain":
            prev = np.asarray(res.theta_star)
        entries.append(TraceEntry(n, [float(t) for t in res.theta_star], res.e_vqe, e_exact))
    return ParamTrace(entries)


@dataclass
class Extrapolation:
    n: int
    theta: list
    energy: float
    reference: float
    rel_err: float
    backend: str
    fidelity: float | None = None
    f_s: float | None = None
    discarded_weight: float = 0.0


def evaluate_at(ir: CircuitIR, theta, n, model=None, backend="auto",
                chi_max=DEFAULT_CHI_MAX, with_fidelity=True) -> Extrapolation:
    """Energy, relative error and (when feasible) fidelity of ``ir`` at ``theta``."""
    ham, e_ref = reference(ir, n, model)
    sites = ir.n_sites(n)
    if backend == "auto":
        backend = "mps" if ir.register == "chain" and sites > 14 else "statevector"
    theta = [float(t) for t in theta]
    fid = f_s = None
    dw = 0.0
    if backend == "mps":
        if ir.register != "chain":
            raise ValueError("mps backend needs a chain register")
        state = mps_run_circuit(expand(ir, n, theta), n, chi_max)
        energy = mps_expectation(state, ham)
        dw = state.discarded_weight
    elif backend == "statevector":
        if sites > MAX_QUBITS:
            raise ValueError(f"statevector limited to {MAX_QUBITS} qubits, need {sites}")
        psi = CompiledAnsatz(ir, n).state(theta)
        energy = expectation(psi, ham)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if with_fidelity and sites <= FIDELITY_MAX_QUBITS:
        if backend == "mps":
            psi = CompiledAnsatz(ir, n).state(theta)
        _, vecs = lowest_states(ham, 1, method="dense" if sites <= 10 else "lanczos")
        fid = fidelity(psi, vecs[0])
        f_s = single_qubit_fidelity(fid, sites) if fid > 0 else 0.0
    return Extrapolation(n, theta, float(energy), e_ref, abs(energy - e_ref) / abs(e_ref),
                         backend, fid, f_s, dw)


def extrapolate_and_eval(trace: ParamTrace, ir: CircuitIR, n_target, model=None,
                         backend="auto", chi_max=DEFAULT_CHI_MAX, with_fidelity=True):
    return evaluate_at(ir, trace.theta_at(n_target), n_target, model, backend, chi_max,
                       with_fidelity)


def joint_constant_theta(ir: CircuitIR, sizes, model=None, start=None,
                         config: VQEConfig = VQEConfig(restarts=1, max_evals=20000)):
    """One parameter vector minimising the mean of ``E_n(theta) / E0_n`` over sizes.

    Energies are normalised by the exact ground energies so that each size
    weighs the same.
    """
    comps, hams, refs = [], [], []
    for n in sizes:
        ham, e0 = reference(ir, n, model)
        comps.append(CompiledAnsatz(ir, n))
        hams.append(ham)
        refs.append(e0)

    def f(theta):
        return float(np.mean([expectation(c.state(theta), h) / abs(e0)
                              for c, h, e0 in zip(comps, hams, refs)]))

    best = None
    for k in range(config.restarts):
        if k == 0 and start is not None:
            x0 = np.asarray(start, dtype=float)
        else:
            x0 = np.random.default_rng((config.seed, k)).uniform(0, 2 * np.pi, ir.n_params)
        res = _scipy_minimize(f, x0, method="Nelder-Mead",
                              options={"maxfev": config.max_evals, "xatol": 1e-8,
                                       "fatol": 1e-12, "adaptive": ir.n_params > 4})
        if best is None or res.fun < best.fun:
            best = res
    return [float(t) for t in best.x]
