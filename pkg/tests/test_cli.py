import json
import subprocess
import sys

import numpy as np
import pytest

from holonomy_valuations import cli, groups


def run(args, capsys):
    code = cli.main(args)
    return code, capsys.readouterr()


def test_check_identities_json(capsys):
    code, out = run(["check-identities", "--context", "SU", "--samples", "500"], capsys)
    rep = json.loads(out.out)
    assert code == 0 and rep["passed"]
    names = {c["check"] for c in rep["checks"]}
    assert {"eta_klain_identity", "restriction_lemma_gr3", "g2_algebra_dim"} <= names
    assert all("tolerance" in c for c in rep["checks"])


def test_reports_are_deterministic_apart_from_header(capsys):
    args = ["sample-diagnostics", "--group", "G2", "--samples", "300", "--seed", "4"]
    _, a = run(args, capsys)
    _, b = run(args, capsys)
    a, b = json.loads(a.out), json.loads(b.out)
    a.pop("header"), b.pop("header")
    assert a == b


def test_csv_output_to_file(tmp_path, capsys):
    path = tmp_path / "r.csv"
    code, out = run(["rank-check", "--context", "G2", "--format", "csv", "--output", str(path)], capsys)
    assert code == 0 and out.out == ""
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# rank-check") and lines[1].startswith("check,")


def test_evaluate_with_config(tmp_path, capsys):
    ini = tmp_path / "e.ini"
    ini.write_text("[evaluate]\nbody = config\nvaluations = NU3, MU(3)\n[body]\ndim = 7\naxes = 0,1,2\nlengths = 1,2,3\n")
    code, out = run(["evaluate", "--config", str(ini)], capsys)
    rows = json.loads(out.out)["rows"]
    assert code == 0 and [r["value"] for r in rows] == pytest.approx([6.0, 6.0])
    assert all("std_error" in r for r in rows)


def test_command_taken_from_config(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\ncommand = check-identities\ncontext = G2\nsamples = 100\n")
    code, out = run(["--config", str(ini)], capsys)
    assert code == 0 and json.loads(out.out)["header"]["command"] == "check-identities"


@pytest.mark.parametrize("text", [
    "[run]\nbogus = 1\n",
    "[nosuch]\nx = 1\n",
    "[run]\nseed = abc\n",
    "[run]\nformat = xml\n",
    "not an ini",
])
def test_config_errors_exit_2_without_report(tmp_path, capsys, text):
    ini = tmp_path / "bad.ini"
    ini.write_text(text)
    out = tmp_path / "out.json"
    code, io = run(["check-identities", "--config", str(ini), "--output", str(out)], capsys)
    assert code == 2 and not out.exists() and io.out == ""
    assert "config error" in io.err


def test_unknown_valuation_is_config_error(capsys):
    code, _ = run(["evaluate", "--valuation", "XI(2)"], capsys)
    assert code == 2


def test_failed_check_exits_1(tmp_path, capsys):
    ini = tmp_path / "t.ini"
    ini.write_text("[tolerances]\nidentity = 1e-30\n")
    code, out = run(["check-identities", "--config", str(ini), "--samples", "200"], capsys)
    assert code == 1 and not json.loads(out.out)["passed"]


def test_certification_failure_exits_3(monkeypatch, capsys):
    monkeypatch.setattr(groups, "defects", lambda tag, gs: np.full(len(gs), 1.0))
    code, out = run(["sample-diagnostics", "--group", "G2", "--samples", "10"], capsys)
    assert code == 3 and json.loads(out.out)["checks"][0]["check"] == "certification"


def test_pkf_small(capsys):
    code, out = run(["pkf", "--preset", "associative-coassociative-so7", "--samples", "200",
                     "--n-translation", "100"], capsys)
    rep = json.loads(out.out)
    assert code in (0, 1)
    assert rep["report"]["group_tag"] == "SO7" and rep["report"]["lhs_std_error"] > 0


def test_schema_defaults_cover_all_sections():
    d = cli.defaults()
    assert set(d) == {"run", "tolerances", "pkf", "evaluate", "body"}
    assert d["evaluate"]["valuations"] == ["NU3"]


def test_list_split_keeps_parenthesised_commas():
    assert cli._split_list("MU(3), TASAKI(4,1)") == ["MU(3)", " TASAKI(4,1)"]


def test_console_script_runs():
    r = subprocess.run([sys.executable, "-m", "holonomy_valuations.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
