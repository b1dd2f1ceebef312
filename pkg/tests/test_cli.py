import json
import subprocess
import sys

import pytest

from ansatzforge.ansatz import scalar_template, serialize
from ansatzforge.cli import main


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_xy_exact_oracle(capsys):
    code, out, _ = run(["oracle", "xy-exact", "--n", "2", "--gamma", "1", "--gz", "1"], capsys)
    assert code == 0
    assert out.startswith("-2.2360679")


def test_exit_codes(capsys):
    assert run(["oracle", "xy-exact", "--n", "1"], capsys)[0] == 1
    assert run(["nonsense"], capsys)[0] == 2
    assert run(["oracle", "xy-exact"], capsys)[0] == 2
    assert run(["vqe", "run", "--model", "xy", "--template", "qaoa2", "--n", "4"], capsys)[0] == 1


def test_circuit_inspect(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(serialize(scalar_template("qaoa2", 3)))
    code, out, _ = run(["circuit", "inspect", "--ir", str(path), "--n", "3"], capsys)
    assert code == 0
    assert "N_CX = 72" in out and "N_P = 6" in out


def test_inspect_reports_parse_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"register": {"kind": "ring", "n": 3}, "params": [], "layers": []}')
    code, _, err = run(["circuit", "inspect", "--ir", str(path)], capsys)
    assert code == 1 and "ring" in err


def test_runs_are_byte_identical(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        code, _, _ = run(["vqe", "run", "--model", "xy", "--n", "4", "--restarts", "2",
                          "--seed", "3", "--out", str(d)], capsys)
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"config.json", "result.json", "circuit.json"}
    assert json.loads(outs[0]["config.json"])["seed"] == 3


def test_model_and_scaling_commands(tmp_path, capsys):
    code, _, _ = run(["model", "heatmap", "--n", "2", "--phis", "0.4,0.5",
                      "--out", str(tmp_path / "h")], capsys)
    assert code == 0
    assert (tmp_path / "h" / "heatmap.csv").read_text().count("\n") == 3
    code, _, _ = run(["scaling", "fit", "--model", "xy", "--sizes", "4-7", "--restarts", "2",
                      "--families", "constant,inverse", "--out", str(tmp_path / "f")], capsys)
    assert code == 0
    code, out, _ = run(["scaling", "eval", "--fit", str(tmp_path / "f" / "fit.json"),
                        "--n", "8", "--out", str(tmp_path / "e")], capsys)
    assert code == 0 and "n = 8" in out
    assert (tmp_path / "e" / "eval.csv").exists()


def test_search_and_zne_commands(tmp_path, capsys):
    code, _, _ = run(["search", "run", "--model", "xy", "--n", "4", "--budget", "2",
                      "--restarts", "2", "--max-evals", "200", "--out", str(tmp_path / "s")],
                     capsys)
    assert code == 0
    assert (tmp_path / "s" / "best.circuit.json").exists()
    code, out, _ = run(["zne", "run", "--n", "4", "--shots", "64", "--replicas", "2",
                        "--restarts", "1", "--out", str(tmp_path / "z")], capsys)
    assert code == 0 and "chi2/dof" in out
    assert (tmp_path / "z" / "fits.json").exists()


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "ansatzforge.cli", "oracle", "xy-exact",
                          "--n", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("-2.23606797")
