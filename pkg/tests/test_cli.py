from __future__ import annotations

import json
import re
import subprocess
import sys
from pathlib import Path

import pytest

from heatlab.cli import CATALOGUE, bundled_scenarios, list_checks, load_scenario, main
from heatlab.errors import ScenarioError

FIX = Path(__file__).parent / "fixtures"


def test_list_checks_contents(capsys):
    assert main(["list-checks"]) == 0
    out = capsys.readouterr().out
    for name in ("chapman_kolmogorov", "joint_hoelder", "wave_bound"):
        assert name in out
    # every line names its anchor tag
    assert all("[" in line and "]" in line for line in out.strip().splitlines())
    assert len(out.strip().splitlines()) == len(CATALOGUE)


def test_empty_checks_writes_artifacts(tmp_path):
    assert main(["run", str(FIX / "empty_checks.json"), "--out", str(tmp_path), "--quiet"]) == 0
    assert (tmp_path / "spectrum.csv").exists()
    assert (tmp_path / "kernel_t0.1.csv").exists()
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["checks"] == [] and rep["summary"] == {"pass": 0, "fail": 0, "inconclusive": 0}


def test_negative_control_exits_2(tmp_path, capsys):
    assert main(["run", str(FIX / "negative_control.json"), "--out", str(tmp_path)]) == 2
    out = capsys.readouterr().out
    assert "FAIL" in out and "0.99" in out
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["checks"][0]["verdict"] == "fail"


def _bad(tmp_path, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    return p


def test_json_syntax_error_reports_line(tmp_path, capsys):
    p = _bad(tmp_path, '{\n  "name": "x",\n  "instance": {"kind": "graph"\n}\n')
    assert main(["run", str(p)]) == 4
    err = capsys.readouterr().err
    # unterminated object: the decoder stops at the final line
    assert re.search(re.escape(str(p)) + r":5:\d+: ", err)


def test_schema_error_names_field(tmp_path, capsys):
    doc = {"name": "x", "instance": {"kind": "graph", "file": "g.json"}, "checks": [{"name": "spectrum", "params": {}}], "mesh": {"h": -1}}
    p = _bad(tmp_path, json.dumps(doc))
    assert main(["run", str(p)]) == 4
    assert "field mesh/h" in capsys.readouterr().err


def test_unknown_check_and_kind_mismatch(tmp_path):
    doc = {"name": "x", "instance": {"kind": "wave", "rho": 1.0}, "checks": [{"name": "nope"}]}
    with pytest.raises(ScenarioError, match="checks/0/name"):
        load_scenario(_bad(tmp_path, json.dumps(doc)))
    doc["checks"] = [{"name": "kirchhoff_defect", "params": {}}]
    with pytest.raises(ScenarioError, match="does not apply"):
        load_scenario(_bad(tmp_path, json.dumps(doc)))


def test_missing_file_exit_4(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json")]) == 4


def test_bundled_corpus_validates():
    names = {p.stem for p in bundled_scenarios()}
    assert {"interval_dirichlet", "star_lipschitz", "star_blowup", "gasket_exponents", "wave", "nonauto"} <= names
    for p in bundled_scenarios():
        load_scenario(p)


def test_export_space(capsys):
    assert main(["export-space", str(FIX / "empty_checks.json")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["points"]) == 19 and len(doc["dist"]) == 19 * 19


def test_report_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        main(["run", str(FIX / "negative_control.json"), "--out", str(out), "--quiet"])
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    meta = json.loads((a / "metadata.json").read_text())
    assert "finished_utc" in meta
    assert "finished_utc" not in (a / "report.json").read_text()


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "heatlab.cli", "list-checks"], capture_output=True, text=True)
    assert r.returncode == 0 and "wave_bound" in r.stdout
