import csv
import json
import subprocess
import sys

import pytest

from rbsde.cli import main
from rbsde.config import ConfigParseError, parse_config
from rbsde.io import REPORT_SCHEMA, dumps_report, to_jsonable, validate_report


def write(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def run(tmp_path, doc, out="out"):
    status = main(["run", write(tmp_path, doc), "--out", str(tmp_path / out)])
    return status, tmp_path / out


def report(out):
    data = json.loads((out / "report.json").read_text(encoding="utf-8"))
    validate_report(data)
    return data


def test_solve_counterexample5_rows(tmp_path):
    status, out = run(tmp_path, {"action": "solve", "method": "reflected",
                                 "scenario": {"kind": "counterexample5", "params": {"N": 8}}})
    assert status == 0
    raw = (out / "solution.csv").read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.reader(raw.decode("utf-8").splitlines()))
    assert rows[0] == ["step", "index", "t", "B", "Y", "Z", "K", "L"]
    assert len(rows) - 1 == 45
    assert rows[-1][5] == ""  # no Z at maturity
    rep = report(out)
    assert rep["status"] == "ok" and rep["version"]
    assert rep["config"]["scenario"]["params"] == {"T": 1.0, "N": 8}
    assert rep["checks"]["skorokhod"]["passed"]


def test_sweep_rows_per_level(tmp_path):
    doc = {"action": "penalize-sweep", "schedule": [4, 16, 64],
           "scenario": {"kind": "american_put", "params": {"N": 30}},
           "numerics": {"seed": 3, "n_paths": 512, "workers": 2}}
    status, out = run(tmp_path, doc)
    assert status == 0
    rep = report(out)
    assert [r["penalty"] for r in rep["result"]["convergence"]["rows"]] == [4, 16, 64]
    assert "workers" not in rep["config"]["numerics"]
    lines = (out / "convergence.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[0].startswith("penalty,")


def test_missing_action(tmp_path, capsys):
    status, out = run(tmp_path, {"scenario": {"kind": "american_put"}})
    assert status == 2
    err = json.loads(capsys.readouterr().err)
    assert "action" in err["error"]["message"] and err["error"]["exit_status"] == 2
    validate_report(err)
    assert json.loads((out / "error.json").read_text())["status"] == "error"


@pytest.mark.parametrize("doc", [
    {"action": "fly"},
    {"action": "solve", "scenario": {"kind": "american_put"}},  # no method
    {"action": "solve", "method": "penalized", "scenario": {"kind": "american_put"}},
    {"action": "penalize-sweep", "scenario": {"kind": "american_put"}},
    {"action": "penalize-sweep", "scenario": {"kind": "american_put"}, "schedule": [4]},  # N>cap, no seed
    {"action": "compare", "method": "plain", "scenario": {"kind": "linear_bsde"}},
    {"action": "divergence-probe"},
    {"action": "divergence-probe", "divergence": {"kind": "counterexample7", "N_schedule": [4, 30]}},
    {"action": "solve", "method": "plain", "scenario": {"kind": "linear_bsde"}, "extra": 1},
    {"action": "solve", "method": "plain", "scenario": {"kind": "linear_bsde", "params": {"q": 1}}},
    {"action": "solve", "method": "plain", "scenario": {"kind": "linear_bsde"},
     "numerics": {"root_tol": -1}},
])
def test_parse_errors(doc):
    with pytest.raises(ConfigParseError):
        parse_config(doc)


def test_invalid_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["run", str(path)]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_bad_cli_usage():
    assert main(["frobnicate"]) == 2


def test_precondition_status(tmp_path):
    doc = {"action": "solve", "method": "reflected",
           "scenario": {"kind": "linear_bsde", "params": {"floor": None}}}
    status, out = run(tmp_path, doc)
    assert status == 3
    err = json.loads((out / "error.json").read_text())
    assert err["error"]["type"] == "ConfigurationError"
    validate_report(err)
    doc = {"action": "solve", "method": "plain",
           "scenario": {"kind": "american_put", "params": {"tree": "trinomial"}}}
    assert run(tmp_path, doc, "o2")[0] == 3


def test_solver_failure_status(tmp_path):
    doc = {"action": "solve", "method": "plain",
           "scenario": {"kind": "custom", "params": {"driver": "linear(-1e308, 0, 0)", "xi": "1"}}}
    status, out = run(tmp_path, doc)
    assert status == 4
    assert json.loads((out / "error.json").read_text())["error"]["type"] == "DriverEvaluationError"


def test_check_failure_status(tmp_path):
    doc = {"action": "compare", "method": "reflected",
           "scenario": {"kind": "linear_bsde", "params": {"c": 0.5}},
           "compare_with": {"kind": "linear_bsde", "params": {"c": 0.0}}}
    status, out = run(tmp_path, doc)
    assert status == 5
    rep = report(out)
    assert rep["status"] == "check-failed" and rep["checks"]["comparison"]["n_violations"] > 0
    assert (out / "error.json").exists()


def test_probe_and_norms_actions(tmp_path):
    doc = {"action": "probe-hypotheses", "probe": {"samples": 500},
           "scenario": {"kind": "custom", "params": {"driver": "powerz(0.5, 1, 0.5)"}}}
    status, out = run(tmp_path, doc)
    assert status == 0
    assert set(report(out)["result"]["probes"]) == {"A", "H2", "H3", "Z"}
    doc = {"action": "norms", "method": "reflected", "order": 1.5,
           "scenario": {"kind": "counterexample7", "params": {"N": 6}}}
    status, out = run(tmp_path, doc, "n")
    assert status == 0
    assert report(out)["result"]["norms"]["p"] == 1.5


def test_formats_filter(tmp_path):
    doc = {"action": "solve", "method": "snell", "output": {"formats": ["csv"]},
           "scenario": {"kind": "american_put", "params": {"N": 5}}}
    status, out = run(tmp_path, doc)
    assert status == 0
    assert sorted(p.name for p in out.iterdir()) == ["solution.csv"]


def test_validate_and_scenarios(capsys):
    assert main(["scenarios"]) == 0
    assert "american_put" in capsys.readouterr().out


def test_validate_command(tmp_path, capsys):
    path = write(tmp_path, {"action": "solve", "method": "plain", "scenario": {"kind": "linear_bsde"}})
    assert main(["validate", path]) == 0
    assert json.loads(capsys.readouterr().out)["valid"] is True


def test_console_script(tmp_path):
    path = write(tmp_path, {"action": "solve", "method": "plain",
                            "scenario": {"kind": "linear_bsde", "params": {"N": 3}}})
    proc = subprocess.run([sys.executable, "-m", "rbsde.cli", "run", path, "--out",
                           str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "solution.csv").exists()


def test_jsonable_non_finite():
    import numpy as np

    doc = to_jsonable({"a": np.float64("inf"), "b": [np.nan, -np.inf], "c": np.int64(3)})
    assert doc == {"a": "inf", "b": ["nan", "-inf"], "c": 3}
    text = dumps_report({"x": 0.1 + 0.2})
    assert json.loads(text)["x"] == 0.1 + 0.2 and text.endswith("\n")


def test_schema_rejects_bad_report():
    import jsonschema

    with pytest.raises(jsonschema.ValidationError):
        validate_report({"tool": "rbsde", "status": "ok"})
    assert REPORT_SCHEMA["required"][0] == "tool"
