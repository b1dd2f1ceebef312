"""Zero-noise extrapolation on a simulated noisy device.

Noise is modelled by stochastic Pauli trajectories: after every gate a
uniformly random non-identity Pauli hits the touched qubits with probability
``p1`` (one-qubit gates) or ``p2`` (CX). Noise is amplified by replacing
randomly chosen CX gates with ``CX CX CX``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from . import kernels
from .pauli import PauliSum
from .statevector import GateOp, compile_gates

log = logging.getLogger(__name__)

DEFAULT_STRENGTHS = (1.0, 1.5, 2.0, 2.5, 3.0)
MODELS = ("linear", "quadratic", "exponential")


@dataclass(frozen=True)
class NoiseModel:
    p2: float = 0.01
    p1: float = 0.002

    def __post_init__(self):
        for p in (self.p1, self.p2):
            if not 0 <= p <= 0.25:
                raise ValueError(f"error probability {p} outside [0, 0.25]")


@dataclass(frozen=True)
class ZNEPoint:
    n_s: float
    energy: float
    stderr: float
    replicas: int = 1


# --------------------------------------------------------------------------
# folding

def count_cx(gates):
    return sum(1 for g in gates if g.kind == "CX")


def noise_strength(gates, n) -> float:
    """``N_s = N_CX / (2n - 2)``."""
    if n < 2:
        raise ValueError("noise strength needs n >= 2")
    n_s = count_cx(gates) / (2 * n - 2)
    if n_s < 1:
        log.warning("noise strength %.3g is below 1", n_s)
    return n_s


def fold_to_strength(gates, n, target, rng, replicas=5):
    """Replicas with ``k`` randomly chosen CX gates tripled.

    ``k = round((target (2n-2) - N_CX) / 2)``; each replica draws its own
    ``k`` gates without replacement.
    """
    n_cx = count_cx(gates)
    if n_cx == 0:
        raise ValueError("circuit has no CX gates to fold")
    k = round((target * (2 * n - 2) - n_cx) / 2)
    if k < 0 or k > n_cx:
        lo, hi = n_cx / (2 * n - 2), 3 * n_cx / (2 * n - 2)
        nearest = min(max(target, lo), hi)
        raise ValueError(f"strength {target} not reachable; nearest achievable is {nearest:.6g}")
    cx_pos = [i for i, g in enumerate(gates) if g.kind == "CX"]
    out = []
    for _ in range(replicas):
        chosen = set(int(i) for i in rng.choice(cx_pos, size=k, replace=False)) if k else set()
        folded = []
        for i, g in enumerate(gates):
            folded.append(g)
            if i in chosen:
                folded += [g, g]
        out.append(folded)
    return out


# --------------------------------------------------------------------------
# measurement groups

@dataclass
class MeasurementGroup:
    basis: tuple          # per-qubit letter, "Z" where unconstrained
    zmasks: np.ndarray    # after rotation every term is a Z string
    coeffs: np.ndarray


def group_terms(op: PauliSum):
    """Greedy qubit-wise commuting groups; the identity term is returned apart."""
    n = op.n_qubits
    groups = []
    identity = 0.0
    for term in op.canonical().terms:
        if not term.letters:
            identity += term.coefficient
            continue
        letters = dict(term.letters)
        for g in groups:
            if all(g["basis"].get(q, p) == p for q, p in letters.items()):
                g["basis"].update(letters)
                g["terms"].append(term)
                break
        else:
            groups.append({"basis": dict(letters), "terms": [term]})
    out = []
    for g in groups:
        basis = tuple(g["basis"].get(q, "Z") for q in range(n))
        masks = [sum(1 << (n - 1 - q) for q, _ in t.letters) for t in g["terms"]]
        out.append(MeasurementGroup(basis, np.array(masks, dtype=np.int64),
                                    np.array([t.coefficient for t in g["terms"]])))
    return out, identity


def basis_rotation(basis):
    gates = []
    for q, p in enumerate(basis):
        if p == "X":
            gates.append(GateOp("H", q))
        elif p == "Y":
            gates += [GateOp("RZ", q, -math.pi / 2), GateOp("H", q)]
    return gates


# --------------------------------------------------------------------------
# noisy sampling

_PAULI_CODES = np.array([kernels.X, kernels.Y, kernels.Z])


def _sample_patterns(rng, shots, probs):
    """Per-shot error pattern: gate index -> Pauli choice index (1..15 or 1..3)."""
    hits = rng.random((shots, probs.shape[0])) < probs
    rows, cols = np.nonzero(hits)
    kinds = rng.integers(1, 16, size=rows.shape[0])
    patterns = [[] for _ in range(shots)]
    for r, c, k in zip(rows.tolist(), cols.tolist(), kinds.tolist()):
        patterns[r].append((c, k))
    return [tuple(p) for p in patterns]


def _program_with_errors(prog, pattern, two_qubit):
    codes, q0, q1, angles = prog
    if not pattern:
        return prog
    out = ([], [], [], [])
    errs = dict(pattern)
    for i in range(codes.shape[0]):
        for arr, src in zip(out, prog):
            arr.append(src[i])
        if i in errs:
            k = errs[i]
            if two_qubit[i]:
                # k in 1..15 encodes (pa, pb) with pa, pb in {I, X, Y, Z}
                pa, pb = divmod(k, 4)
                pairs = [(q0[i], pa), (q1[i], pb)]
            else:
                pairs = [(q0[i], (k - 1) % 3 + 1)]
            for q, p in pairs:
                if p:
                    out[0].append(_PAULI_CODES[p - 1])
                    out[1].append(q)
                    out[2].append(0)
                    out[3].append(0.0)
    return (np.array(out[0], dtype=np.int64), np.array(out[1], dtype=np.int64),
            np.array(out[2], dtype=np.int64), np.array(out[3], dtype=float))


def _parity(x):
    return kernels._parity_np(x)


def noisy_energy(gates, hamiltonian: PauliSum, noise: NoiseModel, shots: int, rng):
    """Per-shot energy estimates.

    Shot ``i`` runs one noisy trajectory per measurement group and adds up
    the group estimators, so every entry of the result is an unbiased
    single-shot estimate of the noisy energy. Trajectories with the same
    error pattern are simulated once.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = hamiltonian.n_qubits
    groups, identity = group_terms(hamiltonian)
    prog = compile_gates(gates, n)
    two_qubit = np.array([g.kind in ("CX", "CRZ") for g in gates])
    probs = np.where(two_qubit, noise.p2, noise.p1)
    dim = 1 << n
    total = np.full(shots, identity)
    for grp in groups:
        rot = compile_gates(basis_rotation(grp.basis), n)
        patterns = _sample_patterns(rng, shots, probs)
        # odd Pauli choices on one-qubit gates must stay within 1..3
        by_pattern = {}
        for i, p in enumerate(patterns):
            by_pattern.setdefault(p, []).append(i)
        values = np.empty(shots)
        for pattern in sorted(by_pattern):
            idx = by_pattern[pattern]
            psi = np.zeros(dim, dtype=complex)
            psi[0] = 1.0
            kernels.run_program(psi, n, *_program_with_errors(prog, pattern, two_qubit))
            kernels.run_program(psi, n, *rot)
            p = np.abs(psi) ** 2
            p /= p.sum()
            outcomes = rng.choice(dim, size=len(idx), p=p)
            signs = 1 - 2 * _parity(outcomes[:, None] & grp.zmasks[None, :])
            values[idx] = signs @ grp.coeffs
        total += values
    return total


# --------------------------------------------------------------------------
# statistics and fits

def jackknife(samples, statistic=None):
    """Leave-one-out estimate and standard error (default statistic: mean)."""
    x = np.asarray(samples, dtype=float)
    m = x.shape[0]
    if m < 2:
        raise ValueError("jackknife needs at least 2 samples")
    if statistic is None:
        loo = (x.sum() - x) / (m - 1)
        full = x.mean()
    else:
        loo = np.array([statistic(np.delete(x, i)) for i in range(m)])
        full = statistic(x)
    est = m * full - (m - 1) * loo.mean()
    err = math.sqrt((m - 1) / m * float(np.sum((loo - loo.mean()) ** 2)))
    return float(est), err


@dataclass
class FitResult:
    model: str
    coeffs: list
    covariance: list
    chi2: float
    dof: int
    chi2_dof: float
    e_zero: float
    e_zero_err: float
    converged: bool = True
    reliable: bool = True

    def to_doc(self):
        return {"model": self.model, "coeffs": self.coeffs, "covariance": self.covariance,
                "chi2": self.chi2, "dof": self.dof, "chi2_dof": self.chi2_dof,
                "e_zero": self.e_zero, "e_zero_err": self.e_zero_err,
                "converged": self.converged, "reliable": self.reliable}


def _model_fn(model):
    if model == "linear":
        return lambda x, a, b: a + b * x
    if model == "quadratic":
        return lambda x, a, b, c: a + b * x + c * x * x
    return lambda x, a, b, c: a + b * np.exp(-c * x)


def fit_zne(points, model="linear") -> FitResult:
    """Weighted least squares of ``E(N_s)`` with weights ``1 / stderr^2``.

    Linear ``a + b N``, quadratic ``a + b N + c N^2``, exponential
    ``a + b exp(-c N)``. The zero-noise value is ``a`` (``a + b`` for the
    exponential) with its 1-sigma error propagated from the covariance.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    x = np.array([p.n_s for p in points], dtype=float)
    y = np.array([p.energy for p in points], dtype=float)
    s = np.array([p.stderr for p in points], dtype=float)
    k = 2 if model == "linear" else 3
    if len(x) - k < 1:
        raise ValueError(f"{model} fit needs at least {k + 1} points")
    if np.any(s <= 0):
        raise ValueError("stderrs must be positive")
    f = _model_fn(model)
    converged = reliable = True
    if model in ("linear", "quadratic"):
        a = np.vander(x, k, increasing=True)
        aw = a / s[:, None]
        coef, *_ = np.linalg.lstsq(aw, y / s, rcond=None)
        cov = np.linalg.inv(aw.T @ aw)
        grad = np.zeros(k)
        grad[0] = 1.0
    else:
        best = None
        for c0 in (0.1, 0.5, 1.0, 2.0):
            e = np.exp(-c0 * x)
            aw = np.column_stack([np.ones_like(x), e]) / s[:, None]
            ab, *_ = np.linalg.lstsq(aw, y / s, rcond=None)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", OptimizeWarning)
                    p, pcov = curve_fit(f, x, y, p0=[ab[0], ab[1], c0], sigma=s,
                                        absolute_sigma=True, maxfev=20000)
            except RuntimeError:
                continue
            chi2 = float(np.sum(((y - f(x, *p)) / s) ** 2))
            if np.all(np.isfinite(p)) and (best is None or chi2 < best[2]):
                best = (p, pcov, chi2)
        if best is None:
            converged = reliable = False
            log.warning("exponential fit did not converge")
            coef, cov = np.full(3, np.nan), np.full((3, 3), np.inf)
        else:
            coef, cov = best[0], best[1]
        grad = np.array([1.0, 1.0, 0.0])
    if not np.all(np.isfinite(cov)) or np.any(np.diag(cov) < 0):
        reliable = False
    elif np.any(np.sqrt(np.abs(np.diag(cov))) > 1.0):
        # parameters with error bars beyond unity: covariance not to be trusted
        reliable = False
    chi2 = float(np.sum(((y - f(x, *coef)) / s) ** 2)) if converged else float("nan")
    dof = len(x) - k
    e0 = float(coef[0] + (coef[1] if model == "exponential" else 0.0))
    var = float(grad @ cov @ grad) if converged else float("nan")
    err = math.sqrt(var) if converged and var >= 0 else float("nan")
    return FitResult(model, [float(c) for c in coef], np.asarray(cov, dtype=float).tolist(),
                     chi2, dof, chi2 / dof if converged else float("nan"), e0, err,
                     converged, reliable)


# --------------------------------------------------------------------------
# pipeline

@dataclass
class ZNERun:
    points: list
    fits: dict
    noiseless: float
    rows: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_s", "energy", "stderr", "replica"])
        for r in self.rows:
            w.writerow([repr(r[0]), repr(r[1]), repr(r[2]), r[3]])
        return buf.getvalue()

    def fits_json(self):
        doc = {"noiseless": self.noiseless,
               "fits": {m: f.to_doc() for m, f in self.fits.items()}}
        return json.dumps(doc, indent=2) + "\n"


def run_zne(gates, n, hamiltonian: PauliSum, noiseless: float, noise=NoiseModel(),
            strengths=DEFAULT_STRENGTHS, replicas=5, shots=8192, seed=0) -> ZNERun:
    """Fold, sample and extrapolate.

    Each (strength, replica) pair draws from its own generator seeded by
    ``(seed, strength index, replica)``. Per replica the shots are reduced by
    jackknife; at strengths where folding leaves a choice, the replica
    means are combined by a second jackknife, otherwise the replicas are one
    pooled sample.
    """
    points, rows = [], []
    n_cx = count_cx(gates)
    for si, target in enumerate(strengths):
        fold_rng = np.random.default_rng((seed, si, 10 ** 6))
        circuits = fold_to_strength(gates, n, target, fold_rng, replicas)
        actual = count_cx(circuits[0]) / (2 * n - 2)
        k = round((target * (2 * n - 2) - n_cx) / 2)
        pooled, means = [], []
        for r, circ in enumerate(circuits):
            rng = np.random.default_rng((seed, si, r))
            samples = noisy_energy(circ, hamiltonian, noise, shots, rng)
            mean, se = jackknife(samples)
            rows.append((actual, mean, se, r))
            pooled.append(samples)
            means.append(mean)
        if k in (0, n_cx) or replicas < 2:
            mean, se = jackknife(np.concatenate(pooled))
        else:
            mean, se = jackknife(means)
        points.append(ZNEPoint(actual, mean, se, replicas))
    fits = {}
    for model in MODELS:
        try:
            fits[model] = fit_zne(points, model)
        except ValueError as exc:
            log.warning("%s fit skipped: %s", model, exc)
    return ZNERun(points, fits, float(noiseless), rows)
