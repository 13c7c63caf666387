import itertools
import json

import pytest

from conftest import semilattice, z2_linear
from fewsubpowers import io
from fewsubpowers.benchmarks import linear_template, twosat_template
from fewsubpowers.cli import run_cli
from fewsubpowers.csp import Constraint, CspInstance, Relation, RelationalTemplate


@pytest.fixture
def files(tmp_path):
    t = linear_template(2)
    _, sat = z2_linear([("lin_11_1", ("x", "y")), ("lin_11_1", ("y", "z"))])
    _, unsat = z2_linear([("lin_11_1", ("x", "y")), ("lin_11_1", ("y", "z")), ("lin_11_1", ("x", "z"))])
    paths = {"t": tmp_path / "t.json", "sat": tmp_path / "sat.json", "unsat": tmp_path / "unsat.json"}
    paths["t"].write_text(io.dumps(t.to_json()))
    paths["sat"].write_text(io.dumps(sat.to_json()))
    paths["unsat"].write_text(io.dumps(unsat.to_json()))
    return {k: str(v) for k, v in paths.items()}


def _run(capsys, argv):
    code = run_cli(argv)
    return code, capsys.readouterr().out


def _json(capsys, argv):
    code, out = _run(capsys, argv + ["--json"])
    doc = json.loads(out)
    io.validate(doc, "report")
    return code, doc


def test_solve_sat_and_unsat(files, capsys):
    code, doc = _json(capsys, ["solve", "--template", files["t"], "--instance", files["sat"]])
    assert code == 0 and doc["decision"] == "SAT" and doc["witness"] == {"x": 0, "y": 1, "z": 0}
    code, out = _run(capsys, ["solve", "--template", files["t"], "--instance", files["unsat"]])
    assert code == 1 and out.startswith("UNSAT")


@pytest.mark.parametrize("cmd,sat_status,unsat_status", [
    ("oracle", "SAT", "UNSAT"), ("pc23", "CONSISTENT", "CONTRADICTION"), ("slac", "CONSISTENT", "CONTRADICTION"),
    ("lac", "CONSISTENT", "CONSISTENT"), ("affine", "CONSISTENT", "CONTRADICTION"),
])
def test_stage_subcommands(files, capsys, cmd, sat_status, unsat_status):
    for inst, status in (("sat", sat_status), ("unsat", unsat_status)):
        code, doc = _json(capsys, [cmd, "--template", files["t"], "--instance", files[inst], "--trace"])
        assert doc["command"] == cmd and doc["status"] == status
        assert code == (0 if status in ("SAT", "CONSISTENT") else 1)


def test_absorb_and_polysearch(tmp_path, capsys):
    alg = tmp_path / "sl.json"
    alg.write_text(io.dumps(semilattice().to_json()))
    code, doc = _json(capsys, ["absorb", "--algebra", str(alg)])
    assert code == 0 and doc["absorbers"] == [{"target": "algebra", "subuniverse": [0], "witness": "and(x0, x1)"}]
    t = tmp_path / "2sat.json"
    t.write_text(io.dumps(twosat_template().to_json()))
    code, doc = _json(capsys, ["polysearch", "--template", str(t), "--kind", "majority"])
    assert code == 0 and doc["status"] == "FOUND"
    one_in_three = RelationalTemplate.build(2, [Relation("1in3", 3, {(1, 0, 0), (0, 1, 0), (0, 0, 1)})])
    t.write_text(io.dumps(one_in_three.to_json()))
    code, doc = _json(capsys, ["polysearch", "--template", str(t), "--kind", "maltsev"])
    assert code == 1 and doc["status"] == "NOT_FOUND" and doc["complete"]


def test_absorb_on_affine_instance(files, capsys):
    code, doc = _json(capsys, ["absorb", "--template", files["t"], "--instance", files["sat"]])
    assert code == 1 and all(e["subuniverse"] is None for e in doc["absorbers"])


def test_gen_is_byte_identical(tmp_path, capsys):
    argv = ["gen", "--kind", "linear_mod_p", "--p", "2", "--vars", "5", "--eqs", "6", "--seed", "1"]
    outs = []
    for d in ("a", "b"):
        code, out = _run(capsys, argv + ["--json", "--out-dir", str(tmp_path / d)])
        assert code == 0
        outs.append((out, (tmp_path / d / "template.json").read_bytes(), (tmp_path / d / "instance.json").read_bytes()))
    assert outs[0] == outs[1]
    t = io.load_template(tmp_path / "a" / "template.json")
    inst = io.load_instance(tmp_path / "a" / "instance.json", t)
    assert len(inst.variables) == 5 and len(inst.constraints) == 6


def test_verify_round_trip(files, tmp_path, capsys):
    report = tmp_path / "r.json"
    assert run_cli(["solve", "--template", files["t"], "--instance", files["sat"], "--json",
                    "-o", str(report)]) == 0
    code, doc = _json(capsys, ["verify", "--template", files["t"], "--instance", files["sat"], "--report", str(report)])
    assert code == 0 and doc["status"] == "MATCH"
    tampered = json.loads(report.read_text())
    tampered["decision"] = "UNSAT"
    tampered["status"] = "UNSAT"
    report.write_text(io.dumps(tampered))
    code, doc = _json(capsys, ["verify", "--template", files["t"], "--instance", files["sat"], "--report", str(report)])
    assert code == 1 and doc["status"] == "MISMATCH"


def test_json_reports_are_deterministic(files, capsys):
    argv = ["solve", "--template", files["t"], "--instance", files["sat"], "--json", "--jobs", "1"]
    first = _run(capsys, argv)[1]
    assert _run(capsys, argv)[1] == first
    assert _run(capsys, argv[:-1] + ["4"])[1] == first


def test_exit_codes_for_errors(files, tmp_path, capsys):
    assert run_cli([]) == 2
    assert run_cli(["bogus"]) == 2
    assert run_cli(["solve", "--template", files["t"]]) == 2
    assert run_cli(["solve", "--template", str(tmp_path / "missing.json"), "--instance", files["sat"]]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"variables": 3}')
    assert run_cli(["solve", "--template", files["t"], "--instance", str(bad)]) == 2
    horn = tmp_path / "horn.json"
    cube = itertools.product((0, 1), repeat=3)
    horn_t = RelationalTemplate.build(2, [Relation("horn", 3, {t for t in cube if not (t[0] and t[1]) or t[2]})])
    horn.write_text(io.dumps(horn_t.to_json()))
    inst = tmp_path / "hi.json"
    inst.write_text(io.dumps(CspInstance(["a", "b", "c"], [Constraint("horn", ("a", "b", "c"))], horn_t).to_json()))
    assert run_cli(["solve", "--template", str(horn), "--instance", str(inst)]) == 3
    capsys.readouterr()
