import csv
import io
import json
import math

import pytest

from qcontact.cli import (EXIT_CONFIG, EXIT_EXTREMAL, EXIT_FAIL, EXIT_INTEGRATION, EXIT_OK,
                          _clean, dumps, main)

from conftest import fixture_path


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_simulate_contact_to_stdout(capsys):
    assert main(["simulate", "--builtin", "contact-r3"]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ["t", "q1", "v1", "z1"]
    last = [float(x) for x in rows[-1]]
    assert last[0] == math.pi
    assert max(abs(a - b) for a, b in zip(last[1:], (0.0, -1.0, 0.0))) <= 1e-7


def test_simulate_lagrangian_has_energy_column(tmp_path):
    out = tmp_path / "e1.csv"
    assert main(["simulate", "--builtin", "e1", "--t1", "2", "-o", str(out)]) == EXIT_OK
    rows = _rows(out.read_text())
    assert rows[0][-1] == "E_L"
    assert float(rows[1][-1]) == 1.0


def test_simulate_rk4_and_initial(capsys):
    assert main(["simulate", "--builtin", "two-contact-r4", "--method", "rk4", "--step", "0.5",
                 "--t1", "1", "--initial", "1,2,0,0"]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 1 + 3


def test_simulate_errors(capsys):
    assert main(["simulate", "--config", fixture_path("missing.json")]) == EXIT_CONFIG
    assert main(["simulate", "--builtin", "e1", "--initial", "1,2"]) == EXIT_CONFIG
    assert main(["simulate", "--builtin", "e1", "--t1", "-1"]) == EXIT_CONFIG
    assert main(["simulate", "--config", fixture_path("bad_syntax.json")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert err.count("qcontact: error:") == 4


def test_simulate_blow_up_exit_code(tmp_path, capsys):
    cfg = tmp_path / "blow.json"
    cfg.write_text(json.dumps({"kind": "lagrangian", "n": 1, "qcount": 1,
                               "expressions": {"L": "v1^2/2 + q1^4"},
                               "initial": [1.0, 10.0, 0.0]}))
    assert main(["simulate", "--config", str(cfg), "--t1", "100"]) == EXIT_INTEGRATION


def test_verify_e1_all(capsys):
    assert main(["verify", "--builtin", "e1", "--points", "8"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] is True
    assert report["summary"]["total"] >= 12 and report["summary"]["failed"] == []
    names = {c["name"] for c in report["checks"]}
    assert {"structure.duality", "dynamics.herglotz_along_flow", "noether.corollary_lift",
            "pontryagin.m_law"} <= names
    assert "wall_time" not in report


def test_verify_is_byte_identical(capsys):
    args = ["verify", "--builtin", "two-contact-r4", "--points", "6", "--seed", "3"]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first


def test_verify_broken_fixture_names_failure(capsys):
    code = main(["verify", "--config", fixture_path("broken_structure.json"),
                 "--suite", "structure", "--points", "5"])
    assert code == EXIT_FAIL
    captured = capsys.readouterr()
    report = json.loads(captured.out)
    assert "structure.duality" in report["summary"]["failed"]
    assert "FAIL structure.duality" in captured.err


def test_verify_structure_suite_only(capsys, tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", "--builtin", "two-contact-r4", "--suite", "structure",
                 "--wall-time", "-o", str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["suites"] == ["structure"] and "wall_time" in report
    assert all(c["name"].startswith(("structure.", "geometry.")) for c in report["checks"])


def test_base_tolerance_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("QCONTACT_TOL", "1e-6")
    main(["verify", "--builtin", "contact-r3", "--suite", "structure", "--points", "3"])
    report = json.loads(capsys.readouterr().out)
    assert report["base_tolerance"] == 1e-6
    duality = next(c for c in report["checks"] if c["name"] == "structure.duality")
    assert duality["tolerance"] == 1e-6
    monkeypatch.setenv("QCONTACT_TOL", "abc")
    assert main(["verify", "--builtin", "contact-r3", "--suite", "structure"]) == EXIT_CONFIG


def test_digest_depends_on_flags(capsys):
    main(["verify", "--builtin", "contact-r3", "--suite", "structure", "--points", "3"])
    a = json.loads(capsys.readouterr().out)["config_digest"]
    main(["verify", "--builtin", "contact-r3", "--suite", "structure", "--points", "4"])
    b = json.loads(capsys.readouterr().out)["config_digest"]
    assert a != b and len(a) == 64


def test_pontryagin_e1(capsys, tmp_path):
    out = tmp_path / "adj.csv"
    assert main(["pontryagin", "--builtin", "e1", "-o", str(out)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["M_t0"] == pytest.approx(2 * math.exp(-3), rel=1e-8)
    assert report["transversality"]["mu_t1"] == [1.0, 1.0]
    assert _rows(out.read_text())[0][-1] == "M"


def test_pontryagin_rocket(capsys):
    assert main(["pontryagin", "--builtin", "rocket"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["M_t0"] == pytest.approx(3 * math.exp(-0.0111 * 60), rel=1e-8)


def test_pontryagin_rejects_loose_extremal(capsys):
    code = main(["pontryagin", "--builtin", "e1", "--method", "rk4", "--step", "0.5"])
    assert code == EXIT_EXTREMAL
    assert main(["pontryagin", "--builtin", "contact-r3"]) == EXIT_CONFIG


def test_parse_command(capsys):
    assert main(["parse", "-q1^2 + sin(v1)"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("Binary(+)") and "canonical:" in out
    assert main(["parse", "q1 @ 2"]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert err.splitlines()[-1] == "     ^"


def test_json_cleaning():
    assert _clean({"a": float("nan"), "b": [float("inf"), -float("inf")]}) == {
        "a": "NaN", "b": ["Infinity", "-Infinity"]}
    assert json.loads(dumps({"x": 0.1 + 0.2}))["x"] == 0.1 + 0.2
