"""Command-line entry point: ``ansatzforge <group> <command> [options]``.

Exit codes: 0 success, 1 domain error, 2 usage error. Every command that
takes ``--out`` writes its outputs plus ``config.json`` (the parsed
arguments) into that directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import ansatz, models, scaling, search, vqe, zne
from .pauli import ConvergenceError, lowest_states

log = logging.getLogger("ansatzforge")

TEMPLATES = ("default", "default-sin", "compact3", "qaoa2", "tentative")


class DomainError(Exception):
    pass


def _floats(text):
    """``"0.1,0.2"`` or ``"start:stop:step"`` (stop inclusive)."""
    if ":" in text:
        a, b, s = (float(v) for v in text.split(":"))
        k = int(round((b - a) / s))
        return [round(a + i * s, 12) for i in range(k + 1)]
    return [float(v) for v in text.split(",") if v]


def _ints(text):
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out += list(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _write(out, name, text):
    path = Path(out) / name
    path.write_text(text)
    return path


def _start_run(args):
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "verbose")}
    _write(out, "config.json", json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return out


def _xy_spec(args, n=None):
    return models.XYModelSpec(n or args.n, args.gamma, args.gz)


def _scalar_spec(args, n=None):
    return models.ScalarFieldSpec(n or args.n, lam=args.lam, phi_max=args.phi_max,
                                  edge_convention=args.edge_convention)


def _hamiltonian(args, n=None):
    if args.model == "xy":
        return models.build_xy(_xy_spec(args, n))
    return models.build_scalar(_scalar_spec(args, n))


def _template(args):
    if getattr(args, "ir", None):
        return ansatz.parse(Path(args.ir).read_text())
    name = args.template
    if args.model == "xy":
        if name == "default":
            return ansatz.default_xy_template(args.n)
        if name == "default-sin":
            return ansatz.default_xy_template(args.n, profile="sin")
        raise DomainError(f"template {name} is not a chain template")
    if name in ("compact3", "qaoa2"):
        return ansatz.scalar_template(name, args.n)
    if name == "tentative":
        return ansatz.build_tentative(args.r, _scalar_spec(args))
    raise DomainError(f"template {name} is not a grid template")


# --------------------------------------------------------------------------
# commands

def cmd_spectrum(args):
    rep = models.spectrum(_hamiltonian(args))
    doc = {"e0": rep.e0, "e1": rep.e1, "gap": rep.gap, "entropy": rep.entropy}
    print(json.dumps(doc, indent=2))
    out = _start_run(args)
    if out:
        _write(out, "spectrum.json", json.dumps(doc, indent=2) + "\n")


def cmd_heatmap(args):
    rows = models.heatmap_sweep(_floats(args.lambdas), _floats(args.phis), args.n,
                                args.edge_convention)
    text = models.heatmap_csv(rows)
    out = _start_run(args)
    if out:
        _write(out, "heatmap.csv", text)
    else:
        sys.stdout.write(text)


def cmd_vqe(args):
    ir = _template(args)
    ham = _hamiltonian(args)
    e, vecs = lowest_states(ham, 1, method="dense" if ham.n_qubits <= 12 else "lanczos")
    cfg = vqe.VQEConfig(args.optimizer, args.restarts, args.max_evals, seed=args.seed)
    res = vqe.minimize(ir, ham, cfg, vecs[0], n=args.n)
    print(f"E_VQE = {res.e_vqe:.10g}  E0 = {e[0]:.10g}  "
          f"|dE/E| = {abs(res.e_vqe - e[0]) / abs(e[0]):.4%}  F = {res.fidelity:.6f}")
    out = _start_run(args)
    if out:
        _write(out, "result.json", res.to_json())
        _write(out, "circuit.json", ansatz.serialize(ir))


def cmd_search(args):
    ham = _hamiltonian(args)
    cross = None
    if args.model == "scalar" and args.cross_sizes:
        cross = {m: models.build_scalar(_scalar_spec(args, m)) for m in _ints(args.cross_sizes)}
    ctx = search.EvalContext.build(
        ham, args.n, vqe.VQEConfig(restarts=args.restarts, max_evals=args.max_evals,
                                   seed=args.seed), cross)
    if args.seeds:
        seeds = [ansatz.parse(Path(p).read_text()) for p in args.seeds]
    elif args.model == "xy":
        seeds = [ansatz.CircuitIR("chain", args.n, ["theta1"], [
            ansatz.LayerSpec("RY", "all_sites", ansatz.AngleExpr.param(0)),
            ansatz.LayerSpec("CX", "chain_nn_pairs")]),
            ansatz.default_xy_template(args.n, variant="hrz")]
    else:
        seeds = [ansatz.CircuitIR("grid_periodic", args.n, ["theta1", "theta2"], [
            ansatz.LayerSpec("MC_U", gate="X"), ansatz.LayerSpec("MC_U", gate="H"),
            ansatz.LayerSpec("MCZ", "grid_edges_periodic", ansatz.AngleExpr.param(0)),
            ansatz.LayerSpec("MC_U", angle=ansatz.AngleExpr.param(1), gate="RX")])]
    res = search.evolve(seeds, ctx, args.budget, args.generator, args.seed)
    best = res.best
    print(f"evaluations: {res.evaluations}  best loss: {best.loss:.6g}  "
          f"|dE/E| = {abs(best.metrics.delta_e) / abs(ctx.e0):.4%}  "
          f"F = {best.metrics.fidelity:.4f}  N_P = {best.metrics.n_params}")
    out = _start_run(args)
    if out:
        search.write_search_outputs(res, out)


def cmd_scaling_fit(args):
    ir = _template(args)
    model = _xy_spec(args) if args.model == "xy" else _scalar_spec(args)
    start = [float(v) for v in args.start.split(",")] if args.start else None
    trace = scaling.collect_trace(ir, _ints(args.sizes), model,
                                  vqe.VQEConfig(restarts=args.restarts, seed=args.seed),
                                  start=start, warm=args.warm)
    families = tuple(args.families.split(","))
    scaling.fit_param_curves(trace, families)
    doc = {
        "model": args.model, "gamma": args.gamma, "gz": args.gz, "lam": args.lam,
        "phi_max": args.phi_max, "edge_convention": args.edge_convention,
        "ir": ansatz.to_doc(ir),
        "entries": [vars(e) for e in trace.entries],
        "curves": [{"model": c.model, "coeffs": list(c.coeffs), "rss": c.rss,
                    "aicc": c.aicc, "flagged": c.flagged} for c in trace.curves],
    }
    sys.stdout.write(trace.to_csv())
    for j, c in enumerate(trace.curves):
        print(f"theta_{j + 1}: {c.model} {list(c.coeffs)}")
    out = _start_run(args)
    if out:
        _write(out, "trace.csv", trace.to_csv())
        _write(out, "fit.json", json.dumps(doc, indent=2) + "\n")


def cmd_scaling_eval(args):
    doc = json.loads(Path(args.fit).read_text())
    ir = ansatz.from_doc(doc["ir"])
    trace = scaling.ParamTrace([scaling.TraceEntry(**e) for e in doc["entries"]])
    trace.curves = [scaling.FittedCurve(c["model"], tuple(c["coeffs"]), c["rss"], c["aicc"],
                                        c["flagged"]) for c in doc["curves"]]
    if doc["model"] == "xy":
        model = models.XYModelSpec(2, doc["gamma"], doc["gz"])
    else:
        model = models.ScalarFieldSpec(2, doc["lam"], doc["phi_max"],
                                       edge_convention=doc["edge_convention"])
    rows = []
    for n in _ints(args.n):
        r = scaling.extrapolate_and_eval(trace, ir, n, model, args.backend, args.chi_max,
                                         not args.no_fidelity)
        rows.append(r)
        fid = "" if r.fidelity is None else f"  F = {r.fidelity:.6f}  F_s = {r.f_s:.6f}"
        print(f"n = {n}: E = {r.energy:.10g}  E_ref = {r.reference:.10g}  "
              f"|dE/E| = {r.rel_err:.4%}{fid}")
    k = len(rows[0].theta)
    lines = ["n," + ",".join(f"theta_{j + 1}" for j in range(k)) + ",e_vqe,e_exact,rel_err"]
    for r in rows:
        lines.append(",".join([str(r.n)] + [repr(t) for t in r.theta]
                              + [repr(r.energy), repr(r.reference), repr(r.rel_err)]))
    out = _start_run(args)
    if out:
        _write(out, "eval.csv", "\n".join(lines) + "\n")


def cmd_zne(args):
    spec = models.XYModelSpec(args.n, args.gamma, args.gz)
    ham = models.build_xy(spec)
    ir = ansatz.default_xy_template(args.n)
    res = vqe.minimize(ir, ham, vqe.VQEConfig(restarts=args.restarts, seed=args.seed))
    gates = ansatz.expand(ir, args.n, res.theta_star)
    noise = zne.NoiseModel(args.p2, args.p1)
    run = zne.run_zne(gates, args.n, ham, res.e_vqe, noise, _floats(args.strengths),
                      args.replicas, args.shots, args.seed)
    print(f"noiseless energy: {run.noiseless:.10g}")
    for p in run.points:
        print(f"N_s = {p.n_s:.4f}: {p.energy:.6f} +- {p.stderr:.6f}")
    for m, f in run.fits.items():
        print(f"{m}: E(0) = {f.e_zero:.6f} +- {f.e_zero_err:.6f}  chi2/dof = {f.chi2_dof:.4g}")
    out = _start_run(args)
    if out:
        _write(out, "zne.csv", run.to_csv())
        _write(out, "fits.json", run.fits_json())


def cmd_inspect(args):
    ir = ansatz.parse(Path(args.ir).read_text())
    rep = ansatz.transpile_metrics(ir, args.n)
    print(f"D = {rep.depth}")
    print(f"N_CX = {rep.n_cx}")
    print(f"N_P = {rep.n_params}")


def cmd_xy_exact(args):
    print(repr(models.xy_exact_energy(models.XYModelSpec(args.n, args.gamma, args.gz))))


# --------------------------------------------------------------------------
# parser

def _model_args(p, n_default):
    p.add_argument("--model", choices=("xy", "scalar"), default="xy")
    p.add_argument("--n", type=int, default=n_default)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--gz", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=models.BENCHMARK_LAMBDA)
    p.add_argument("--phi-max", type=float, default=models.DEFAULT_PHI_MAX)
    p.add_argument("--edge-convention", choices=("laplacian", "simple"), default="laplacian")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="run directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ansatzforge", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True)

    g = groups.add_parser("model").add_subparsers(dest="command", required=True)
    p = g.add_parser("spectrum", parents=[common])
    _model_args(p, 3)
    p.set_defaults(func=cmd_spectrum)
    p = g.add_parser("heatmap", parents=[common])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--lambdas", default="0.2")
    p.add_argument("--phis", default="0.3:0.6:0.05")
    p.add_argument("--edge-convention", choices=("laplacian", "simple"), default="laplacian")
    p.set_defaults(func=cmd_heatmap)

    g = groups.add_parser("vqe").add_subparsers(dest="command", required=True)
    p = g.add_parser("run", parents=[common])
    _model_args(p, 9)
    p.add_argument("--template", choices=TEMPLATES, default="default")
    p.add_argument("--ir", help="circuit document to use instead of --template")
    p.add_argument("--r", type=int, default=2, help="tentative-ansatz repetitions")
    p.add_argument("--restarts", type=int, default=60)
    p.add_argument("--max-evals", type=int, default=4000)
    p.add_argument("--optimizer", choices=vqe.OPTIMIZERS, default="nelder_mead")
    p.set_defaults(func=cmd_vqe)

    g = groups.add_parser("search").add_subparsers(dest="command", required=True)
    p = g.add_parser("run", parents=[common])
    _model_args(p, 9)
    p.add_argument("--budget", type=int, default=480)
    p.add_argument("--generator", choices=("genetic", "llm", "hybrid"), default="genetic")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-evals", type=int, default=1500)
    p.add_argument("--cross-sizes", default="2", help="grid sizes for cross-size fidelity")
    p.add_argument("--seeds", nargs="*", help="seed circuit documents")
    p.set_defaults(func=cmd_search)

    g = groups.add_parser("scaling").add_subparsers(dest="command", required=True)
    p = g.add_parser("fit", parents=[common])
    _model_args(p, 9)
    p.add_argument("--template", choices=TEMPLATES, default="default")
    p.add_argument("--ir")
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--sizes", default="4-10")
    p.add_argument("--start", help="comma-separated warm start for the first size")
    p.add_argument("--warm", choices=("chain", "anchor"), default="chain")
    p.add_argument("--families", default=",".join(scaling.FAMILIES))
    p.add_argument("--restarts", type=int, default=60)
    p.set_defaults(func=cmd_scaling_fit)
    p = g.add_parser("eval", parents=[common])
    p.add_argument("--fit", required=True, help="fit.json from 'scaling fit'")
    p.add_argument("--n", default="12,16,20,28,35")
    p.add_argument("--backend", choices=("auto", "statevector", "mps"), default="auto")
    p.add_argument("--chi-max", type=int, default=64)
    p.add_argument("--no-fidelity", action="store_true")
    p.set_defaults(func=cmd_scaling_eval)

    g = groups.add_parser("zne").add_subparsers(dest="command", required=True)
    p = g.add_parser("run", parents=[common])
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--gz", type=float, default=1.0)
    p.add_argument("--p2", type=float, default=0.01)
    p.add_argument("--p1", type=float, default=0.002)
    p.add_argument("--strengths", default="1,1.5,2,2.5,3")
    p.add_argument("--replicas", type=int, default=5)
    p.add_argument("--shots", type=int, default=8192)
    p.add_argument("--restarts", type=int, default=8)
    p.set_defaults(func=cmd_zne)

    g = groups.add_parser("circuit").add_subparsers(dest="command", required=True)
    p = g.add_parser("inspect", parents=[common])
    p.add_argument("--ir", required=True)
    p.add_argument("--n", type=int, default=None)
    p.set_defaults(func=cmd_inspect)

    g = groups.add_parser("oracle").add_subparsers(dest="command", required=True)
    p = g.add_parser("xy-exact", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--gz", type=float, default=1.0)
    p.set_defaults(func=cmd_xy_exact)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (DomainError, ValueError, ConvergenceError, OSError, ConnectionError,
            search.LLMConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
