import csv
import io
import json

import pytest

from gcx import __version__
from gcx.cli import main, parse_polytope
from gcx.report import (Check, ConfigError, Report, build_config, clean, emit_report, render)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_spinor_roundtrip_example(capsys):
    code, out, _ = run(capsys, "spinor", "roundtrip", "--d", "4", "--trials", "100", "--seed", "1")
    rep = json.loads(out)
    assert code == 0 and rep["summary"] == "pass"
    assert rep["checks"][0]["residual"] < 1e-9


def test_spinor_purity(capsys):
    code, out, _ = run(capsys, "spinor", "purity", "--trials", "30", "--seed", "2")
    rep = json.loads(out)
    assert code == 0 and rep["checks"][0]["data"]["not_pure"] == 0


def test_weak_nondegeneracy_example(capsys):
    code, out, _ = run(capsys, "lint", "--builtin", "c_counterexample", "--check",
                       "weak-nondegeneracy", "--xi", "1,0,0")
    rep = json.loads(out)
    assert code == 0
    assert rep["checks"][0]["data"]["outcome"] == "unequal"


def test_hull_example(capsys):
    code, out, _ = run(capsys, "moment", "hull", "--builtin", "cp2_fs", "--w", "1,1",
                       "--n", "20000", "--seed", "7")
    rep = json.loads(out)
    assert code == 0
    hull, fixed = rep["checks"]
    assert hull["residual"] < 5e-3
    assert fixed["residual"] < 1e-8


def test_hull_csv_rows_carry_vertices(capsys):
    code, out, _ = run(capsys, "moment", "hull", "--builtin", "cp2_fs", "--n", "2000",
                       "--format", "csv", "--tol", "0.05")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["check", "residual", "tolerance", "verdict", "anchor", "data"]
    assert rows[1][0] == "hull"
    verts = json.loads(rows[1][5])
    assert len(verts) >= 3 and all(len(v) == 2 for v in verts)
    assert '"[[' in out
    assert "\r" not in out


def test_lint_check_list(capsys):
    code, out, _ = run(capsys, "lint", "--builtin", "cp2_fs", "--check", "axioms,integrability")
    assert code == 0
    assert [c["name"] for c in json.loads(out)["checks"]] == ["axioms", "integrability"]


def test_lint_exit_codes(capsys):
    assert run(capsys, "lint", "--builtin", "cp2_fs")[0] == 0
    code, out, _ = run(capsys, "lint", "--builtin", "product_family", "--check", "integrability")
    assert code == 1 and json.loads(out)["summary"] == "fail"
    code, out, _ = run(capsys, "moment", "hull", "--builtin", "r2_rotation")
    assert code == 2 and json.loads(out)["summary"] == "inconclusive"


@pytest.mark.parametrize("argv", [
    ["lint", "--builtin", "nope"],
    ["lint"],
    ["moment", "bogus", "--builtin", "cp2_fs"],
    ["lint", "--builtin", "cp2_fs", "--check", "nothing"],
    ["lint", "--builtin", "r2_rotation", "--w", "1,1"],
    ["lint", "--builtin", "cp2_fs", "--w", "0,1"],
    ["moment", "verify", "--builtin", "cp2_fs", "--xi", "1,2,3"],
    ["cut", "--builtin", "cp2_fs", "--polytope", "1.5,0>=0"],
    ["spinor", "roundtrip", "--d", "3"],
])
def test_config_errors_exit_3(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 3
    assert err


def test_moment_verify_and_levels(capsys):
    code, out, _ = run(capsys, "moment", "verify", "--builtin", "cp2_fs")
    assert code == 0 and {c["name"] for c in json.loads(out)["checks"]} == {"hamiltonian", "eq3"}
    code, out, _ = run(capsys, "moment", "levels", "--builtin", "cp2_fs", "--n", "20000",
                       "--levels", "5", "--seed", "3")
    rep = json.loads(out)
    assert code == 0 and len(rep["checks"][0]["data"]["levels"]) == 5
    code, out, _ = run(capsys, "moment", "levels", "--builtin", "cp2_fs", "--n", "20000",
                       "--level=-0.2,-0.2")
    assert code == 0


def test_moment_hessian(capsys):
    code, out, _ = run(capsys, "moment", "hessian", "--builtin", "cp2_fs", "--xi", "1,2")
    comps = json.loads(out)["checks"][0]["data"]["components"]
    assert code == 0
    assert [(c["index"], c["coindex"]) for c in comps] == [(4, 0), (2, 2), (0, 4)]


def test_cut(capsys):
    code, out, _ = run(capsys, "cut", "--builtin", "cp2_fs", "--polytope", "1,0>=-0.3;0,1>=-0.3",
                       "--n", "2000")
    rep = json.loads(out)
    assert code == 0
    data = rep["checks"][0]["data"]
    assert data["subtori"]["[0, 1]"] == [[1, 0], [0, 1]]


def test_parse_polytope():
    P = parse_polytope("1,0>=-0.3; 0,1>=-0.3", 2)
    assert P.normals == ((1, 0), (0, 1)) and P.offsets == (-0.3, -0.3)
    with pytest.raises(ConfigError):
        parse_polytope("1,0<=2", 2)


def test_deterministic_and_thread_independent(tmp_path, monkeypatch):
    argv = ["moment", "levels", "--builtin", "cp2_fs", "--n", "5000", "--levels", "4",
            "--eps", "0.03", "--seed", "4"]
    outs = []
    for threads in ("1", "1", "4"):
        monkeypatch.setenv("GCX_THREADS", threads)
        path = tmp_path / f"r{len(outs)}.json"
        main(argv + ["--out", str(path)])
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    assert b"wall_time" not in outs[0]


def test_timing_flag_adds_wall_time(capsys):
    code, out, _ = run(capsys, "spinor", "roundtrip", "--trials", "3", "--timing")
    assert "wall_time" in json.loads(out)


def test_atomic_write_leaves_no_temp(tmp_path, capsys):
    path = tmp_path / "report.json"
    assert main(["spinor", "roundtrip", "--trials", "3", "--out", str(path)]) == 0
    assert capsys.readouterr().out == ""
    assert [p.name for p in tmp_path.iterdir()] == ["report.json"]
    raw = path.read_bytes()
    assert raw.endswith(b"\n") and b"\r\n" not in raw


def test_unwritable_path(capsys, tmp_path):
    code, _, err = run(capsys, "spinor", "roundtrip", "--trials", "2", "--out",
                       str(tmp_path / "missing" / "r.json"))
    assert code == 3 and "cannot write" in err


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[gcx]\nbuiltin = cp2_fs\nw = 1,1\nseed = 5\n\n"
                   "[run.hull]\ncommand = moment\naction = hull\nn = 3000\ntol = 0.05\n\n"
                   "[run.axioms]\ncommand = lint\ncheck = axioms\n")
    code, out, _ = run(capsys, "report", str(cfg))
    rep = json.loads(out)
    assert code == 0
    assert [c["name"] for c in rep["checks"]] == ["hull/hull", "hull/fixed-values", "axioms/axioms"]
    assert rep["config"]["runs"]["hull"]["n"] == 3000
    # file defaults for a single command, overridden by flags
    code, out, _ = run(capsys, "lint", "--config", str(cfg), "--check", "axioms", "--seed", "9")
    rep = json.loads(out)
    assert code == 0 and rep["config"]["seed"] == 9 and rep["config"]["builtin"] == "cp2_fs"


def test_config_file_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[gcx]\nbogus = 1\n[run.a]\ncommand = lint\n")
    assert run(capsys, "report", str(cfg))[0] == 3
    cfg.write_text("[gcx]\nbuiltin = cp2_fs\n")
    assert run(capsys, "report", str(cfg))[0] == 3
    assert run(capsys, "report", str(tmp_path / "none.ini"))[0] == 3


def test_report_schema_and_summary():
    rep = Report({"a": 1}, [Check("x", 1e-13, 1e-9, "pass", "anchor")], __version__)
    data = json.loads(render(rep))
    assert list(data) == ["tool", "version", "config", "checks", "summary"]
    assert data["summary"] == "pass"
    rep.checks.append(Check("y", None, None, "inconclusive", "anchor"))
    assert rep.summary == "inconclusive" and rep.exit_code == 2
    rep.checks.append(Check("z", 1.0, 0.1, "fail", "anchor"))
    assert rep.summary == "fail" and rep.exit_code == 1
    assert Report({}, [], __version__).summary == "inconclusive"


def test_clean_numbers():
    out = clean({"a": 0.1 + 0.2, "b": float("inf"), "c": float("nan"), "d": -0.0, "e": (1, 2)})
    assert out == {"a": 0.3, "b": "inf", "c": "nan", "d": 0.0, "e": [1, 2]}


def test_build_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        build_config({"frobnicate": 1}, {})
    with pytest.raises(ConfigError):
        build_config({"n": "many"}, {})


def test_emit_report_csv_without_vertices(tmp_path):
    rep = Report({}, [Check("x", 0.5, 1.0, "pass", "a, b")], __version__)
    path = tmp_path / "r.csv"
    emit_report(rep, str(path), "csv")
    rows = list(csv.reader(path.open(newline="")))
    assert rows[1] == ["x", "0.5", "1", "pass", "a, b", ""]
