import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from truthlab.cli import main

DATA = Path(__file__).resolve().parent.parent / "data"


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_reproduce_routing_phi(capsys):
    code, out = run_cli(capsys, "reproduce", "--bound", "routing-phi", "--epsilon", "1/100")
    rep = json.loads(out)
    assert code == 0 and rep["status"] == "CONFIRMED"
    assert rep["params"] == {"epsilon": "1/100"}
    assert "wall_ms" not in rep


def test_reproduce_yao_bound(capsys):
    code, out = run_cli(capsys, "reproduce", "--bound", "thm4", "--m", "2", "--epsilon", "1/100")
    rep = json.loads(out)
    assert code == 0
    assert rep["computed_value"] == "30001/20200"
    assert set(rep) >= {"bound_id", "params", "computed_value", "paper_bound", "status", "certificate"}


def test_unknown_bound_is_an_error(capsys):
    code, out = run_cli(capsys, "reproduce", "--bound", "nope")
    assert code == 2
    assert json.loads(out)["status"] == "ERROR"


def test_bad_epsilon_is_an_error(capsys):
    code, out = run_cli(capsys, "reproduce", "--bound", "thm2", "--epsilon", "0")
    assert code == 2


def test_check_vcg_and_optimal_rule(capsys):
    code, out = run_cli(capsys, "check", "--mechanism", "minwork-vcg", "--property", "wmon", "--domain", str(DATA / "two_machine_domain.json"))
    rep = json.loads(out)
    assert code == 0 and rep["certificate"] == [] and rep["computed_value"] == "0"
    code, out = run_cli(capsys, "check", "--mechanism", "opt-lex", "--property", "wmon", "--domain", str(DATA / "two_machine_domain.json"))
    rep = json.loads(out)
    assert code == 1 and rep["status"] == "VIOLATED" and rep["certificate"]


@pytest.mark.parametrize("prop", ["smon", "ds", "payments-exist"])
def test_check_vcg_other_properties(capsys, prop):
    code, _ = run_cli(capsys, "check", "--mechanism", "minwork-vcg", "--property", prop, "--domain", str(DATA / "two_machine_domain.json"))
    assert code == 0


def test_check_malformed_file(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, out = run_cli(capsys, "check", "--mechanism", "minwork-vcg", "--property", "wmon", "--domain", str(bad))
    assert code == 2 and json.loads(out)["status"] == "ERROR"
    code, _ = run_cli(capsys, "run", "--mechanism", "minwork-vcg", "--instance", str(tmp_path / "missing.json"))
    assert code == 2


def test_run_examples(capsys):
    code, out = run_cli(capsys, "run", "--mechanism", "nr-randomized", "--instance", str(DATA / "one_task_1_2.json"), "--coins", "0")
    cert = json.loads(out)["certificate"]
    assert code == 0 and cert["assignment"] == [0] and cert["payments"][0] == "8/3"
    code, out = run_cli(capsys, "run", "--mechanism", "minwork-vcg", "--instance", str(DATA / "one_task_1_5.json"))
    assert json.loads(out)["certificate"]["payments"][0] == "5"
    code, out = run_cli(capsys, "run", "--mechanism", "costmin-tree", "--instance", str(DATA / "relay_star.json"))
    assert json.loads(out)["certificate"]["nexthop"] == {"x": "d", "y": "x", "z": "x"}


def test_run_expected_distribution(capsys):
    code, out = run_cli(capsys, "run", "--mechanism", "nr-randomized", "--instance", str(DATA / "one_task_1_2.json"), "--expected")
    assert code == 0 and json.loads(out)["certificate"]


def test_csv_output(capsys):
    code, out = run_cli(capsys, "reproduce", "--bound", "thm2", "--bound", "envy", "--format", "csv", "--omit-timing")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["bound_id", "m", "epsilon", "computed_value", "paper_bound", "status", "wall_ms"]
    assert [r[0] for r in rows[1:]] == ["thm2", "envy"]
    assert all(r[6] == "" for r in rows[1:])
    assert code == 1  # the envy reproduction does not reach its stated gap


def test_output_file_and_determinism(capsys, tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        main(["reproduce", "--bound", "minmax-vcg", "--instances", "50", "--seed", "3", "--output", str(p)])
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert json.loads(paths[0].read_text())["params"]["seed"] == "3"


def test_console_script_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "truthlab.cli", "reproduce", "--bound", "routing-rand"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["status"] == "CONFIRMED"
