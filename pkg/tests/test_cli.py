import json
import shutil

import pytest

from conglab import cli

PROBLEMS = {p.stem: p for p in cli.bundled_problems()}


def run(argv, tmp_path, name="report.json"):
    report = tmp_path / name
    code = cli.main([*argv, "--report", str(report)])
    return code, json.loads(report.read_text())


def write(tmp_path, data, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def load(stem):
    return json.loads(PROBLEMS[stem].read_text())


@pytest.mark.parametrize("stem", ["sys_a", "sys_b", "sys_c", "sys_d", "sys_b_general", "obstruction"])
def test_bundled_problems_pass(stem, tmp_path):
    code, doc = run(["check", str(PROBLEMS[stem])], tmp_path)
    assert code == 0, doc.get("failed") or doc.get("message")
    assert doc["passed"]


def test_corrupted_law_fails(tmp_path):
    code, doc = run(["check", str(PROBLEMS["bad_sys_b_corrupted"])], tmp_path)
    assert code == 1
    assert doc["failed"] == ["u2: first order"]


def test_colliding_velocities_are_a_validation_error(tmp_path):
    code, doc = run(["check", str(PROBLEMS["bad_collision"])], tmp_path)
    assert code == 2
    assert doc["error"] == "HyperbolicityError"
    assert [0.5, 0.5] in doc["points"]


def test_unknown_field_is_rejected_with_its_path(tmp_path):
    data = load("sys_b")
    data["conservation_laws"][0]["extra"] = 1
    code, doc = run(["check", write(tmp_path, data)], tmp_path)
    assert code == 2
    assert doc["path"] == "$.conservation_laws[0]"


def test_wrong_schema_version_is_rejected(tmp_path):
    data = load("sys_b")
    data["schema"] = 2
    code, doc = run(["check", write(tmp_path, data)], tmp_path)
    assert code == 2
    assert doc["path"] == "$.schema"


def test_bad_expression_is_rejected_with_its_path(tmp_path):
    data = load("sys_b")
    data["lambda"][1] = "R1 + Q"
    code, doc = run(["check", write(tmp_path, data)], tmp_path)
    assert code == 2
    assert doc["path"] == "$.lambda[1]"
    assert "'Q'" in doc["message"]


def test_missing_velocities_are_rejected(tmp_path):
    data = load("sys_b")
    del data["lambda"]
    code, doc = run(["check", write(tmp_path, data)], tmp_path)
    assert code == 2 and doc["path"] == "$.lambda"


def test_invalid_json_is_rejected(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    code, _ = run(["check", str(path)], tmp_path)
    assert code == 2


def test_unknown_option_exits_with_two():
    assert cli.main(["check"]) == 2
    assert cli.main(["transform", "x.json", "--kind", "other"]) == 2


def test_reports_are_deterministic(tmp_path, monkeypatch):
    _, first = run(["check", str(PROBLEMS["sys_c"])], tmp_path, "a.json")
    monkeypatch.setenv("CONGLAB_THREADS", "4")
    _, second = run(["check", str(PROBLEMS["sys_c"])], tmp_path, "b.json")
    first.pop("timing")
    second.pop("timing")
    assert first == second


def test_levy_transform_round_trip(tmp_path):
    out = tmp_path / "levy.json"
    code, doc = run(["transform", str(PROBLEMS["sys_b"]), "--kind", "levy", "--alpha", "1", "--law", "0", "--out", str(out)], tmp_path)
    assert code == 0, doc
    new = json.loads(out.read_text())
    assert new["mode"] == "diagonal" and len(new["lambda"]) == 2
    code, doc = run(["check", str(out)], tmp_path, "again.json")
    assert code == 0, doc.get("failed") or doc.get("message")


def test_adjoint_transform_drops_laws_without_flux(tmp_path):
    out = tmp_path / "adj.json"
    code, doc = run(["transform", str(PROBLEMS["sys_b"]), "--kind", "adjoint", "--alpha", "1", "--flow", "quadratic", "--out", str(out)], tmp_path)
    assert code == 0
    assert doc["info"]["dropped_laws"] == ["u3"]
    assert run(["check", str(out)], tmp_path, "again.json")[0] == 0


def test_laplace_output_is_tabulated(tmp_path):
    out = tmp_path / "lap.json"
    code, _ = run(["transform", str(PROBLEMS["sys_c"]), "--kind", "laplace", "--alpha", "1", "--beta", "2", "--out", str(out)], tmp_path)
    assert code == 0
    new = json.loads(out.read_text())
    assert new["lambda_table"]["numeric"] is True
    assert "lambda" not in new
    assert run(["check", str(out)], tmp_path, "again.json")[0] == 0


def test_compose_transform(tmp_path):
    out = tmp_path / "comp.json"
    code, doc = run(["transform", str(PROBLEMS["sys_c"]), "--kind", "compose", "--laws", "h2,h3,h4", "--target", "h1", "--out", str(out)], tmp_path)
    assert code == 0, doc
    assert run(["check", str(out)], tmp_path, "again.json")[0] == 0


def test_alpha_is_one_based(tmp_path):
    code, doc = run(["transform", str(PROBLEMS["sys_b"]), "--kind", "levy", "--alpha", "0"], tmp_path)
    assert code == 2 and doc["path"] == "--alpha"


def test_geometry_conjugate_obj(tmp_path):
    mesh = tmp_path / "conj.obj"
    code, doc = run(["geometry", str(PROBLEMS["sys_b"]), "--what", "conjugate", "--out", str(mesh), "--format", "obj"], tmp_path)
    assert code == 0, doc
    lines = mesh.read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == 441
    assert sum(l.startswith("f ") for l in lines) == 400


@pytest.mark.parametrize("what", ["congruence", "focal", "harmonic", "levy-congruence", "adjoint-planes"])
def test_geometry_commands(what, tmp_path):
    mesh = tmp_path / f"{what}.csv"
    argv = ["geometry", str(PROBLEMS["sys_b"]), "--what", what, "--out", str(mesh), "--alpha", "1", "--law", "u2"]
    code, doc = run(argv, tmp_path)
    assert code == 0, doc.get("failed") or doc.get("message")
    assert mesh.read_text().startswith(("R1,R2", "sheet,R1,R2"))


def test_harmonic_needs_two_components(tmp_path):
    code, doc = run(["geometry", str(PROBLEMS["sys_c"]), "--what", "harmonic"], tmp_path)
    assert code == 2 and doc["path"] == "$.n"


def test_ribaucour_ellipsoid_passes(tmp_path):
    code, doc = run(["ribaucour", str(PROBLEMS["ellipsoid"]), "--check", "both"], tmp_path)
    assert code == 0, doc
    assert {c["group"] for c in doc["checks"]} == {"geometric", "theorem"}


def test_ribaucour_generic_radius_fails(tmp_path):
    code, _ = run(["ribaucour", str(PROBLEMS["bad_ellipsoid_varying"]), "--check", "geometric"], tmp_path)
    assert code == 1


def test_ribaucour_sphere_is_umbilic(tmp_path):
    code, doc = run(["ribaucour", str(PROBLEMS["bad_sphere"])], tmp_path)
    assert code == 2 and doc["error"] == "UmbilicError"


def test_verify_all(tmp_path):
    code, doc = run(["verify-all"], tmp_path)
    assert code == 0
    assert "sys_c.json" in doc["files"]
    assert not any(name.startswith("bad_") for name in doc["files"])


def test_verify_all_reports_worst_exit(tmp_path):
    files = [str(PROBLEMS["sys_a"]), str(PROBLEMS["bad_sys_b_corrupted"])]
    code, doc = run(["verify-all", *files], tmp_path)
    assert code == 1
    assert doc["files"]["bad_sys_b_corrupted.json"]["exit"] == 1


def test_report_goes_to_stdout(capsys):
    assert cli.main(["check", str(PROBLEMS["sys_a"])]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] and doc["command"] == "check"


def test_console_script_is_installed():
    assert shutil.which("conglab") is not None
