import math

import numpy as np
import pytest

from ansatzforge.ansatz import default_xy_template
from ansatzforge.models import XYModelSpec
from ansatzforge.scaling import (ParamTrace, TraceEntry, aicc, collect_trace, evaluate_at,
                                 extrapolate_and_eval, fit_param_curves)
from ansatzforge.vqe import VQEConfig

SIZES = np.arange(4, 11)


def synthetic(*columns):
    return ParamTrace([TraceEntry(int(n), [float(c[i]) for c in columns], -1.0, -1.0)
                       for i, n in enumerate(SIZES)])


def test_fit_recovers_each_family():
    const = np.full(len(SIZES), 0.7)
    inv = 1.2 - 0.8 / SIZES
    expo = 0.3 + 2.0 * np.exp(-0.5 * SIZES)
    trace = fit_param_curves(synthetic(const, inv, expo))
    models = [c.model for c in trace.curves]
    assert models == ["constant", "inverse", "exponential"]
    np.testing.assert_allclose(trace.curves[1].coeffs, [1.2, -0.8], atol=1e-9)
    np.testing.assert_allclose(trace.curves[2].coeffs, [0.3, 2.0, 0.5], atol=1e-5)
    np.testing.assert_allclose(trace.theta_at(35), [0.7, 1.2 - 0.8 / 35,
                                                    0.3 + 2 * math.exp(-17.5)], atol=1e-6)


def test_noisy_line_prefers_fewer_parameters():
    rng = np.random.default_rng(0)
    y = 0.5 + 1e-3 * rng.normal(size=len(SIZES))
    trace = fit_param_curves(synthetic(y))
    assert trace.curves[0].model == "constant"


def test_aicc_undefined_region():
    assert aicc(1.0, 3, 2) == float("inf")
    assert aicc(0.0, 7, 1) < aicc(0.0, 7, 2)


def test_trace_validation():
    with pytest.raises(ValueError):
        ParamTrace([TraceEntry(4, [1.0], -1, -1), TraceEntry(4, [2.0], -1, -1)])
    with pytest.raises(ValueError):
        fit_param_curves(ParamTrace([TraceEntry(n, [1.0], -1, -1) for n in (4, 5, 6)]))
    fit_param_curves(ParamTrace([TraceEntry(n, [1.0], -1, -1) for n in (4, 5)]), ("constant",))
    with pytest.raises(ValueError):
        ParamTrace([TraceEntry(4, [1.0], -1, -1)]).theta_at(5)


def test_csv_header():
    text = synthetic(np.ones(len(SIZES)), np.zeros(len(SIZES))).to_csv()
    assert text.splitlines()[0] == "n,theta_1,theta_2,e_vqe,e_exact,rel_err"


def test_collect_and_extrapolate_small():
    ir = default_xy_template(4)
    model = XYModelSpec(4)
    trace = collect_trace(ir, [4, 5, 6, 7], model, VQEConfig(restarts=4))
    assert list(trace.sizes) == [4, 5, 6, 7]
    assert all(e.rel_err < 0.02 for e in trace.entries)
    fit_param_curves(trace, ("constant", "inverse"))
    r = extrapolate_and_eval(trace, ir, 10, model)
    assert r.rel_err < 0.03 and r.fidelity > 0.8 and r.backend == "statevector"
    anchored = collect_trace(ir, [5, 6], model, VQEConfig(restarts=4),
                             start=trace.entries[0].theta, warm="anchor")
    assert len(anchored.entries) == 2
    with pytest.raises(ValueError):
        collect_trace(ir, [5], model, warm="anchor")


def test_mps_and_statevector_agree():
    ir = default_xy_template(4)
    theta = [1.45, 0.61, -0.36, 1.58]
    a = evaluate_at(ir, theta, 10, XYModelSpec(4), backend="statevector", with_fidelity=False)
    b = evaluate_at(ir, theta, 10, XYModelSpec(4), backend="mps", with_fidelity=False)
    assert a.energy == pytest.approx(b.energy, abs=1e-10)
    assert a.reference == pytest.approx(-12.381489999654754, abs=1e-9)
