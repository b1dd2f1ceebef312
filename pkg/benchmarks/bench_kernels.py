"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--qubits 12 16 20] [--repeat 5]

Both variants are imported directly, so the ANSATZFORGE_DISABLE_NUMBA flag
does not matter here. Each row also checks that the two agree.
"""

import argparse
import time

import numpy as np

from ansatzforge import kernels
from ansatzforge.ansatz import default_xy_template, expand
from ansatzforge.models import XYModelSpec, build_xy
from ansatzforge.statevector import compile_gates


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(n, repeat):
    ham = build_xy(XYModelSpec(n))
    xm, zm, cs = ham.masks()
    ir = default_xy_template(n)
    prog = compile_gates(expand(ir, n, [1.45, 0.61, -0.36, 1.58]), n)
    rng = np.random.default_rng(0)
    psi = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    psi /= np.linalg.norm(psi)

    rows = []

    def circuit(run):
        out = np.zeros(2 ** n, dtype=complex)
        out[0] = 1.0
        run(out, n, *prog)
        return out

    def matvec(kernel):
        out = np.zeros_like(psi)
        kernel(psi, xm, zm, cs, out)
        return out

    cases = [
        ("run_program", lambda: circuit(kernels.run_program_nb),
         lambda: circuit(kernels.run_program_np)),
        ("expectation", lambda: kernels.pauli_expectation_nb(psi, xm, zm, cs),
         lambda: kernels.pauli_expectation_np(psi, xm, zm, cs)),
        ("matvec", lambda: matvec(kernels.pauli_matvec_nb),
         lambda: matvec(kernels.pauli_matvec_np)),
    ]
    for name, f_nb, f_np in cases:
        a, b = f_nb(), f_np()  # also warms up the jit
        err = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        t_nb, t_np = best_of(f_nb, repeat), best_of(f_np, repeat)
        rows.append((name, n, t_nb, t_np, err))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--qubits", type=int, nargs="+", default=[10, 14, 18])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':<12} {'n':>3} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8} {'max diff':>9}")
    for n in args.qubits:
        for name, n_, t_nb, t_np, err in bench(n, args.repeat):
            print(f"{name:<12} {n_:>3} {1e3 * t_nb:10.3f} {1e3 * t_np:10.3f} "
                  f"{t_np / t_nb:8.2f} {err:9.1e}")


if __name__ == "__main__":
    main()
