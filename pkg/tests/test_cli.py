import hashlib
import json

import pytest

from conftest import PROBLEMS
from starpde import cli
from starpde.elliptic import SolverError


def load(name):
    return json.loads((PROBLEMS / name).read_text())


def write(tmp_path, doc, name="p.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(tmp_path, *args, out="out"):
    return cli.main([*args, "--out", str(tmp_path / out)])


@pytest.mark.parametrize("mode,problem", [
    ("validate", "constant_one.json"),
    ("solve-local-time", "constant_one.json"),
    ("solve-classical", "classical_steady.json"),
    ("certify", "manufactured_cosine.json"),
    ("certify", "classical_steady.json"),
    ("compare", "constant_one.json"),
    ("compare", "manufactured_classical.json"),
])
def test_modes_succeed(tmp_path, mode, problem):
    code = run(tmp_path, "--mode", mode, "--problem", str(PROBLEMS / problem))
    assert code == 0
    status = json.loads((tmp_path / "out" / "status.json").read_text())
    assert status == {"exit": 0, "mode": mode, "reason": ""}


def test_unknown_field_is_config_error(tmp_path, capsys):
    doc = load("constant_one.json")
    doc["bogus"] = 1
    assert run(tmp_path, "--mode", "validate", "--problem", write(tmp_path, doc)) == 2
    assert "exit=2 kind=config" in capsys.readouterr().err


def test_missing_file_and_bad_grid(tmp_path):
    assert run(tmp_path, "--mode", "validate", "--problem", str(tmp_path / "nope.json")) == 2
    assert run(tmp_path, "--mode", "validate", "--problem", str(PROBLEMS / "constant_one.json"), "--nt", "0") == 2


def test_wrong_kind_and_naive_beta_for_classical(tmp_path):
    classical = str(PROBLEMS / "classical_steady.json")
    assert run(tmp_path, "--mode", "solve-local-time", "--problem", classical) == 2
    assert run(tmp_path, "--mode", "solve-classical", "--problem", classical, "--naive-beta") == 2


def test_validation_failure(tmp_path, capsys):
    doc = load("constant_one.json")
    doc["psi"] = 2  # breaks the terminal compatibility with g
    assert run(tmp_path, "--mode", "solve-local-time", "--problem", write(tmp_path, doc)) == 3
    err = capsys.readouterr().err
    assert "exit=3 kind=validation" in err and "terminal compatibility" in err


def test_tampered_norm_fails_certificate(tmp_path):
    doc = load("manufactured_cosine.json")
    doc["norms"] = {"psi_sup": 0.01}
    assert run(tmp_path, "--mode", "certify", "--problem", write(tmp_path, doc), "--nt", "8", "--nx", "8", "--nl", "4") == 4
    cert = json.loads((tmp_path / "out" / "certificate.json").read_text())
    assert cert["passed"] is False


def test_solver_failure_maps_to_5(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise SolverError("singular junction row")
    monkeypatch.setattr(cli.localtime, "run_backward", boom)
    assert run(tmp_path, "--mode", "solve-local-time", "--problem", str(PROBLEMS / "constant_one.json")) == 5
    assert "exit=5 kind=solver reason=singular junction row" in capsys.readouterr().err


def test_output_format_and_manifest(tmp_path):
    args = ("--mode", "solve-local-time", "--problem", str(PROBLEMS / "manufactured_cosine.json"),
            "--nt", "4", "--nx", "4", "--nl", "2")
    assert run(tmp_path, *args) == 0
    root = tmp_path / "out"
    raw = (root / "solution" / "level_0002.csv").read_bytes()
    lines = raw.split(b"\r\n")
    assert lines[0] == b"t,ray,x,u"
    assert b"\n" not in raw.replace(b"\r\n", b"")
    # 17 significant digits round-trip exactly
    u = lines[3].split(b",")[-1].decode()  # t = 0, x = dx: cos(pi/4)
    assert u == f"{float(u):.17g}" and len(u.lstrip("-0.")) >= 16
    manifest = json.loads((root / "manifest.json").read_text())
    assert manifest["unhashed"] == ["metadata.json"]
    for entry in manifest["files"]:
        assert hashlib.sha256((root / entry["path"]).read_bytes()).hexdigest() == entry["sha256"]
    assert {"summary.json", "kirchhoff_residual.csv", "status.json"} <= {e["path"] for e in manifest["files"]}


def test_reruns_are_byte_identical(tmp_path):
    args = ("--mode", "certify", "--problem", str(PROBLEMS / "constant_one.json"), "--nt", "4", "--nx", "6", "--nl", "3")
    assert run(tmp_path, *args, out="a") == 0
    assert run(tmp_path, *args, out="b") == 0
    a, b = tmp_path / "a", tmp_path / "b"
    names = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file() and p.name != "metadata.json")
    assert names == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file() and p.name != "metadata.json")
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_run_config_defaults():
    assert cli.RunConfig("converge", "p.json").resolved_scheme == "centered"
    assert cli.RunConfig("certify", "p.json").resolved_scheme == "upwind"
    with pytest.raises(cli.RunFailure):
        cli.RunConfig("certify", "p.json", slack=-1.0)
