"""Multi-start VQE on exact expectation values."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from . import kernels
from .ansatz import CircuitIR, expand
from .mps import DEFAULT_CHI_MAX, mps_expectation, mps_run_circuit
from .pauli import PauliSum, expectation
from .statevector import MAX_QUBITS, StateVector, compile_gates, fidelity

log = logging.getLogger(__name__)

OPTIMIZERS = ("nelder_mead", "powell")


class CompiledAnsatz:
    """A template expanded once for a fixed register size.

    Every angle in an expanded template is affine in the parameters, so the
    gate program is stored as kernel arrays plus ``angles = M @ theta + c``.
    """

    def __init__(self, ir: CircuitIR, n: int | None = None):
        self.ir = ir
        self.n = ir.n if n is None else n
        self.n_qubits = ir.n_sites(self.n)
        if self.n_qubits > MAX_QUBITS:
            raise ValueError(f"statevector limited to {MAX_QUBITS} qubits")
        k = ir.n_params
        base = expand(ir, self.n, np.zeros(k))
        self.codes, self.q0, self.q1, self.offset = compile_gates(base, self.n_qubits)
        self.matrix = np.zeros((len(base), k))
        for j in range(k):
            e = np.zeros(k)
            e[j] = 1.0
            self.matrix[:, j] = compile_gates(expand(ir, self.n, e), self.n_qubits)[3] - self.offset

    def angles(self, theta):
        return self.matrix @ np.asarray(theta, dtype=float) + self.offset

    def state(self, theta) -> StateVector:
        psi = StateVector.zero(self.n_qubits)
        kernels.run_program(psi.amplitudes, self.n_qubits, self.codes, self.q0, self.q1,
                            self.angles(theta))
        return psi


def cost(ir: CircuitIR, params, hamiltonian: PauliSum, backend: str = "statevector",
         n: int | None = None, chi_max: int = DEFAULT_CHI_MAX) -> float:
    """Energy of the template at ``params``."""
    n = ir.n if n is None else n
    if ir.n_sites(n) != hamiltonian.n_qubits:
        raise ValueError(f"template has {ir.n_sites(n)} qubits, "
                         f"Hamiltonian {hamiltonian.n_qubits}")
    if backend == "statevector":
        return expectation(CompiledAnsatz(ir, n).state(params), hamiltonian)
    if backend == "mps":
        if ir.register != "chain":
            raise ValueError("mps backend needs a chain register")
        return mps_expectation(mps_run_circuit(expand(ir, n, params), n, chi_max), hamiltonian)
    raise ValueError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class VQEConfig:
    optimizer: str = "nelder_mead"
    restarts: int = 60
    max_evals: int = 4000
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")


@dataclass
class VQEResult:
    theta_star: list
    e_vqe: float
    energies: list
    thetas: list
    sigma: float
    fidelity: float | None = None
    n_evals: int = 0
    budget_exhausted: bool = False
    state: StateVector | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> str:
        doc = {"theta_star": self.theta_star, "e_vqe": self.e_vqe, "sigma": self.sigma,
               "fidelity": self.fidelity, "n_evals": self.n_evals,
               "budget_exhausted": self.budget_exhausted,
               "restarts": [{"energy": e, "theta": t}
                            for e, t in zip(self.energies, self.thetas)]}
        return json.dumps(doc, indent=2) + "\n"


def restart_rng(seed, k):
    return np.random.default_rng((int(seed), int(k)))


def _local_minimize(f, x0, cfg: VQEConfig):
    if cfg.optimizer == "nelder_mead":
        opts = {"maxfev": cfg.max_evals, "xatol": cfg.tol, "fatol": cfg.tol,
                "adaptive": len(x0) > 4}
        res = _scipy_minimize(f, x0, method="Nelder-Mead", options=opts)
    else:
        res = _scipy_minimize(f, x0, method="Powell",
                              options={"maxfev": cfg.max_evals, "xtol": cfg.tol,
                                       "ftol": cfg.tol})
    return res.x, float(res.fun), int(res.nfev)


def minimize(ir: CircuitIR, hamiltonian: PauliSum, config: VQEConfig = VQEConfig(),
             exact_ground: StateVector | None = None, n: int | None = None,
             init=None) -> VQEResult:
    """Best of ``config.restarts`` local optimisations.

    Restart ``k`` draws its start uniformly from ``[0, 2 pi)`` with the
    generator seeded by ``(config.seed, k)``. ``init`` replaces the first
    start point (warm start).
    """
    if ir.n_params < 1:
        raise ValueError("template has no parameters")
    comp = CompiledAnsatz(ir, n)
    if comp.n_qubits != hamiltonian.n_qubits:
        raise ValueError(f"template has {comp.n_qubits} qubits, "
                         f"Hamiltonian {hamiltonian.n_qubits}")
    x, z, c = hamiltonian.masks()
    scratch = np.empty(1 << comp.n_qubits, dtype=complex)
    zero = np.zeros_like(scratch)
    zero[0] = 1.0

    def f(theta):
        scratch[:] = zero
        kernels.run_program(scratch, comp.n_qubits, comp.codes, comp.q0, comp.q1,
                            comp.angles(theta))
        return kernels.pauli_expectation(scratch, x, z, c).real

    energies, thetas = [], []
    n_evals, exhausted = 0, False
    for k in range(config.restarts):
        if k == 0 and init is not None:
            x0 = np.asarray(init, dtype=float)
            if x0.shape != (ir.n_params,):
                raise ValueError(f"init needs {ir.n_params} values")
        else:
            x0 = restart_rng(config.seed, k).uniform(0, 2 * np.pi, ir.n_params)
        theta, e, nfev = _local_minimize(f, x0, config)
        n_evals += nfev
        exhausted |= nfev >= config.max_evals
        energies.append(e)
        thetas.append([float(t) for t in theta])
    best = int(np.argmin(energies))
    state = comp.state(thetas[best])
    e_best = expectation(state, hamiltonian)
    sigma = float(np.std(energies, ddof=1)) if len(energies) > 1 else 0.0
    fid = fidelity(state, exact_ground) if exact_ground is not None else None
    if exhausted:
        log.info("VQE evaluation budget exhausted in at least one restart")
    return VQEResult(thetas[best], e_best, [float(e) for e in energies], thetas, sigma, fid,
                     n_evals, exhausted, state)


def stability_sigma(result: VQEResult) -> float:
    """Sample standard deviation (``ddof=1``) of per-restart energies."""
    if len(result.energies) < 2:
        raise ValueError("stability needs at least two restarts")
    return float(np.std(result.energies, ddof=1))
