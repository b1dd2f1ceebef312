import os
import subprocess
import sys

import numpy as np
import pytest

from ansatzforge import kernels
from ansatzforge.ansatz import default_xy_template, expand
from ansatzforge.models import XYModelSpec, build_xy
from ansatzforge.statevector import compile_gates


def random_state(n, seed=0):
    r = np.random.default_rng(seed)
    v = r.normal(size=2 ** n) + 1j * r.normal(size=2 ** n)
    return v / np.linalg.norm(v)


@pytest.mark.parametrize("n", [3, 7])
def test_numba_and_numpy_kernels_agree(n):
    ham = build_xy(XYModelSpec(n, 0.5, 0.7))
    xm, zm, cs = ham.masks()
    psi = random_state(n)
    assert kernels.pauli_expectation_nb(psi, xm, zm, cs) == pytest.approx(
        kernels.pauli_expectation_np(psi, xm, zm, cs), abs=1e-12)
    a, b = np.zeros_like(psi), np.zeros_like(psi)
    kernels.pauli_matvec_nb(psi, xm, zm, cs, a)
    kernels.pauli_matvec_np(psi, xm, zm, cs, b)
    np.testing.assert_allclose(a, b, atol=1e-12)
    prog = compile_gates(expand(default_xy_template(n), n, [0.3, 1.0, -0.4, 2.2]), n)
    a, b = psi.copy(), psi.copy()
    kernels.run_program_nb(a, n, *prog)
    kernels.run_program_np(b, n, *prog)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_disable_flag_selects_numpy():
    env = dict(os.environ, ANSATZFORGE_DISABLE_NUMBA="1")
    code = ("from ansatzforge import kernels, _accel;"
            "print(_accel.USE_NUMBA, kernels.run_program is kernels.run_program_np)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.split() == ["False", "True"]
