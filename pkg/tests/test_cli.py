import json
import subprocess
import sys

import jsonschema
import pytest

from sessionkit.cli import main, report_schema

from conftest import GOLDEN

DEEP = ("exists a:int. forall b:int. exists c:int. forall d:int. exists e:int. "
        "(3*d + 3*e >= 4 && 5*c + 7*d <= -4 && 13*e + 11*b <= -6) || "
        "(5*a + 3*d != -10 && 13*d + 5*e != 13 && 13*d + 3*b >= 16) || "
        "(3*c + 7*d <= -7 && 3*a + 3*c >= -1 && 13*b + 7*d <= -20)")


def run(capsys, monkeypatch, *argv):
    monkeypatch.chdir(GOLDEN)
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("name, extra, code", [
    ("buyer_seller", [], 0),
    ("mutation_title", [], 1),
    ("mutation_price", [], 1),
    ("guessing_game", ["--run"], 0),
])
def test_golden_outputs(capsys, monkeypatch, name, extra, code):
    got, out, _ = run(capsys, monkeypatch, f"{name}.gp", *extra)
    assert got == code
    assert out == (GOLDEN / f"{name}.out").read_text()


def test_missing_file_exits_2(capsys, monkeypatch):
    code, _, err = run(capsys, monkeypatch, "nope.gp")
    assert code == 2 and "cannot read input" in err


def test_parse_error_exits_1_with_position(capsys, monkeypatch, tmp_path):
    bad = tmp_path / "bad.gp"
    bad.write_text("A -> B : k(x:int)[x>]; end\n")
    code, out, _ = run(capsys, monkeypatch, str(bad))
    assert code == 1
    assert f"{bad}:1:21:" in out and out.rstrip().endswith("Verification failed.")


@pytest.mark.parametrize("name, code", [("buyer_seller", 0), ("mutation_title", 1), ("mutation_price", 1)])
def test_json_report_matches_schema_and_text(capsys, monkeypatch, name, code):
    got, out, _ = run(capsys, monkeypatch, f"{name}.gp", "--json")
    doc = json.loads(out)
    jsonschema.validate(doc, report_schema())
    assert got == doc["exitCode"] == code
    text = (GOLDEN / f"{name}.out").read_text()
    for d in doc["diagnostics"]:
        assert d["text"] in text
    assert [p["participant"] for p in doc["projections"]] == ["B1", "S", "B2"]


def test_json_trace(capsys, monkeypatch):
    _, out, _ = run(capsys, monkeypatch, "guessing_game.gp", "--run", "--json")
    doc = json.loads(out)
    jsonschema.validate(doc, report_schema())
    assert len(doc["trace"]) == 33 and doc["stages"]["run"] == "ok"


def test_trace_json_in_text_mode(capsys, monkeypatch):
    _, out, _ = run(capsys, monkeypatch, "buyer_seller.gp", "--run", "--trace-json")
    body = out.split("Trace:\n", 1)[1].rsplit("\n\nVerification", 1)[0]
    assert json.loads(body)[0] == {"step": 1, "participant": "B1", "action": "send", "channel": "s",
                                   "payload": '"The art of computer programming"'}


def test_failed_verification_skips_run_unless_forced(capsys, monkeypatch):
    code, out, _ = run(capsys, monkeypatch, "mutation_price.gp", "--run")
    assert code == 1 and "Trace:" not in out
    code, out, _ = run(capsys, monkeypatch, "mutation_price.gp", "--run", "--force")
    assert code == 1 and "violated by S at b1!" in out


def test_no_assertions_accepts_the_price_mutation(capsys, monkeypatch):
    code, out, _ = run(capsys, monkeypatch, "mutation_price.gp", "--no-assertions", "--run")
    assert code == 0 and "Trace:" in out


def test_binary_mode_flag(capsys, monkeypatch):
    code, out, _ = run(capsys, monkeypatch, "buyer_seller.gp", "--mode", "binary", "--json")
    doc = json.loads(out)
    assert code == 1 and doc["mode"] == "binary"
    assert {d["kind"] for d in doc["diagnostics"]} == {"Compatibility"}


def test_seeded_runs_are_reproducible(capsys, monkeypatch):
    first = run(capsys, monkeypatch, "buyer_seller.gp", "--run", "--seed", "7")
    second = run(capsys, monkeypatch, "buyer_seller.gp", "--run", "--seed", "7")
    assert first == second and first[0] == 0


def test_qe_command(capsys, monkeypatch):
    code, out, _ = run(capsys, monkeypatch, "qe", "exists x:int. y < x && x < z")
    assert code == 0
    assert out.splitlines() == ["y <= z - 2", "eliminated quantifiers: 1, atoms: 1",
                                "satisfiable: true, valid: false"]


def test_qe_budget_exhaustion(capsys, monkeypatch):
    code, _, err = run(capsys, monkeypatch, "qe", DEEP, "--qe-budget", "20000")
    assert code == 1 and "budget" in err


def test_qe_json(capsys, monkeypatch):
    code, out, _ = run(capsys, monkeypatch, "qe", "forall x:int. x >= 0 || x < 0", "--json")
    doc = json.loads(out)
    assert code == 0 and doc["formula"] == "true" and doc["valid"] is True


def test_check_budget_exhaustion_fails_cleanly(capsys, monkeypatch):
    code, out, _ = run(capsys, monkeypatch, "buyer_seller.gp", "--qe-budget", "1")
    assert code == 1 and out.rstrip().endswith("Verification failed.")


def test_keep_going_reports_later_stages(capsys, monkeypatch, tmp_path):
    src = tmp_path / "race.gp"
    src.write_text("A -> B : k(x:int)[-]; C -> B : k(y:int)[-]; end\n")
    code, out, _ = run(capsys, monkeypatch, str(src), "--json")
    assert code == 1 and json.loads(out)["stages"]["projection"] == "skipped"
    code, out, _ = run(capsys, monkeypatch, str(src), "--json", "--keep-going")
    assert code == 1 and json.loads(out)["stages"]["projection"] == "ok"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sessionkit", "check", str(GOLDEN / "buyer_seller.gp")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.rstrip().endswith("Verification succeeded.")
