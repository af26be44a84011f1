import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from coherent_kinetics import __version__
from coherent_kinetics.cli import (
    EXIT_CONFIG,
    EXIT_NUMERIC,
    EXIT_OK,
    compare_operators,
    error_payload,
    exit_code_for,
    main,
)
from coherent_kinetics.errors import DiagnosticFailure, SchemaError, StepTooLarge, UnitError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
COHERENCE = str(CONFIG_DIR / "standard_rp_coherence.json")
STEPWISE = str(CONFIG_DIR / "standard_rp_stepwise.json")
MIXED = str(CONFIG_DIR / "experiment_rp_mixed.json")


@pytest.fixture(autouse=True)
def restore_root_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def stderr_payloads(text):
    return [json.loads(line) for line in text.splitlines() if line.startswith("{")]


def test_simulate_is_byte_identical_across_runs(tmp_path):
    for run_dir in ("first", "second"):
        assert main(["simulate", "--config", COHERENCE, "--output-dir", str(tmp_path / run_dir)]) == EXIT_OK
    first = (tmp_path / "first" / "standard_rp_coherence" / "timeseries.csv").read_bytes()
    second = (tmp_path / "second" / "standard_rp_coherence" / "timeseries.csv").read_bytes()
    assert first == second

    frame = pd.read_csv(tmp_path / "first" / "standard_rp_coherence" / "timeseries.csv")
    assert list(frame.columns[:3]) == ["t", "re_rho_1_1", "im_rho_1_1"]
    assert list(frame.columns[-3:]) == ["trace", "min_eig", "herm_defect"]
    assert len(frame) == 51
    assert (frame["trace"] - 1.0).abs().max() < 1e-12
    assert (tmp_path / "first" / "standard_rp_coherence" / "rates_report.json").exists()
    expected = 0.5 * np.exp(-(1e6 + 1e4) * frame["t"] / 2)
    np.testing.assert_allclose(frame["re_rho_1_3"], expected, atol=1e-12)


def test_zero_rates_give_a_constant_series(tmp_path):
    config = tmp_path / "frozen.json"
    config.write_text(json.dumps({
        "schema_version": 1,
        "graph": {"builtin": "StandardRP"},
        "rates": {"kS": 0, "kT": 0},
        "initial": {"mixture": {"S": 0.4, "T": 0.6}},
        "integration": {"method": "exact", "t_final": 1.0, "samples": 5},
    }))
    assert main(["simulate", "--config", str(config), "--output-dir", str(tmp_path)]) == EXIT_OK
    frame = pd.read_csv(tmp_path / "frozen" / "timeseries.csv")
    assert frame["re_rho_1_1"].tolist() == [0.4] * 5
    assert frame["re_rho_3_3"].tolist() == [0.6] * 5


def test_simulate_writes_every_requested_report(tmp_path):
    assert main(["simulate", "--config", MIXED, "--output-dir", str(tmp_path)]) == EXIT_OK
    target = tmp_path / "experiment_rp_mixed"
    for name in ("timeseries.csv", "rates_report.txt", "rates_report.json", "consistency_report.txt",
                 "consistency_report.json"):
        assert (target / name).exists()
    report = json.loads((target / "consistency_report.json").read_text())
    flagged = [row["operator"] for row in report["operators"] if row["consistent"] is False]
    assert flagged == ["jones_hore", "qw_symmetric_dephasing"]


def test_simulate_in_parallel(tmp_path):
    code = main(["simulate", "--config", COHERENCE, "--config", STEPWISE, "--output-dir", str(tmp_path),
                 "--jobs", "2"])
    assert code == EXIT_OK
    exact = pd.read_csv(tmp_path / "standard_rp_coherence" / "timeseries.csv")
    stepwise = pd.read_csv(tmp_path / "standard_rp_stepwise" / "timeseries.csv")
    assert len(stepwise) == 51
    assert abs(exact["re_rho_1_1"].iloc[-1] - stepwise["re_rho_1_1"].iloc[-1]) < 1e-4


def test_duplicate_scenario_names_are_a_config_error(tmp_path, capsys):
    code = main(["simulate", "--config", COHERENCE, "--config", COHERENCE, "--output-dir", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert stderr_payloads(capsys.readouterr().err)[0]["error"] == "SchemaError"


def test_rates_flags_jones_hore(capsys):
    assert main(["rates", "--ks", "1", "--kt", "0", "--measured", "0.7"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "inconsistent: jones_hore\n" in out


def test_rates_json_report(tmp_path):
    path = tmp_path / "report.json"
    assert main(["rates", "--ks", "2", "--kt", "4", "--output-json", str(path)]) == EXIT_OK
    report = json.loads(path.read_text())
    rates = {row["operator"]: row["st_dephasing_rate"] for row in report["operators"]}
    assert rates["haberkorn"] == pytest.approx(3.0)
    assert rates["jones_hore"] == pytest.approx(6.0)
    assert rates["qw_full"] == pytest.approx(3.0)
    assert report["measured_rate"] is None


def test_unwritable_rates_report_is_reported_as_json(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    target = blocker / "report.json"
    assert main(["rates", "--ks", "1", "--kt", "0", "--output-json", str(target)]) == EXIT_NUMERIC
    payload = stderr_payloads(capsys.readouterr().err)[0]
    assert payload["error"] == "FileExistsError"
    assert payload["source"] == str(target)


def test_compare_operators_drops_verdicts_without_a_measurement():
    frame = compare_operators(2.0, 4.0)
    assert "consistent" not in frame.columns
    assert frame.set_index("operator").loc["jones_hore", "st_dephasing_rate"] == pytest.approx(6.0)
    assert (compare_operators(0.0, 0.0)["st_dephasing_rate"] == 0.0).all()


def test_validate(tmp_path, capsys):
    assert main(["validate", "--config", COHERENCE]) == EXIT_OK
    assert "OK (standard_rp_coherence, 4 sites, 2 edges)" in capsys.readouterr().out

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "graph": {"builtin": "StandardRP"}}))
    assert main(["validate", "--config", str(bad)]) == EXIT_CONFIG
    captured = capsys.readouterr()
    assert f"{bad}: initial: missing" in captured.out
    payload = stderr_payloads(captured.err)[0]
    assert payload["error"] == "SchemaError"
    assert payload["source"] == str(bad)
    assert {"path": "integration", "reason": "missing"} in payload["violations"]


def test_validate_and_simulate_agree_on_the_step_guard(tmp_path, capsys):
    config = tmp_path / "coarse.json"
    config.write_text(json.dumps({
        "schema_version": 1,
        "graph": {"builtin": "StandardRP"},
        "rates": {"kS": 1e6, "kT": 1e4},
        "initial": "S",
        "integration": {"method": "stepwise", "t_final": 1.4e-7, "dt": 1e-7},
    }))
    assert main(["validate", "--config", str(config)]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(config), "--output-dir", str(tmp_path)]) == EXIT_CONFIG
    payloads = stderr_payloads(capsys.readouterr().err)
    assert [p["error"] for p in payloads] == ["SchemaError", "SchemaError"]


def test_syntax_error_exits_with_config_code(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text("{")
    assert main(["simulate", "--config", str(bad), "--output-dir", str(tmp_path)]) == EXIT_CONFIG
    assert stderr_payloads(capsys.readouterr().err)[0]["error"] == "ConfigSyntaxError"


def test_exit_codes():
    assert exit_code_for(SchemaError([("a", "b")])) == EXIT_CONFIG
    assert exit_code_for(UnitError("x")) == EXIT_CONFIG
    assert exit_code_for(StepTooLarge("x")) == EXIT_NUMERIC
    assert exit_code_for(DiagnosticFailure("NegativeEigenvalue: x", sample_index=7)) == EXIT_NUMERIC


def test_error_payload_carries_the_sample_index():
    payload = error_payload(DiagnosticFailure("NegativeEigenvalue: x", sample_index=7), source="demo")
    assert payload == {
        "error": "DiagnosticFailure",
        "message": "sample 7: NegativeEigenvalue: x",
        "sample_index": 7,
        "source": "demo",
    }


def test_argument_validation(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["simulate", "--config", COHERENCE, "--jobs", "0"])
    assert exc_info.value.code == 2
    with pytest.raises(SystemExit):
        main(["rates", "--ks", "-1", "--kt", "0"])


def test_version(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["--version"])
    assert exc_info.value.code == 0
    assert __version__ in capsys.readouterr().out
