import json

from uavcoop.cli import EXIT_CONFIG, EXIT_OK, main
from uavcoop.harness import FIELDS
from uavcoop.scenario import SimParams, generate_scenario, save_scenario


def test_plan_prints_csv(capsys):
    assert main(["plan", "--slots", "2", "--seed", "0"]) == EXIT_OK
    out, err = capsys.readouterr()
    lines = out.splitlines()
    assert lines[0] == ",".join(FIELDS)
    assert len(lines) == 3                 # one block plus the aggregate
    assert "Proposed" in err and "weighted" in err


def test_baseline_json_to_file(tmp_path):
    out = tmp_path / "r.json"
    code = main(["baseline", "--scheme", "b3", "--slots", "2", "--blocks", "1", "--format", "json", "--out", str(out)])
    assert code == EXIT_OK
    rows = json.loads(out.read_text())
    assert {r["scheme"] for r in rows} == {"Hovering"}


def test_sweep_rate_with_dbm(capsys):
    code = main(["sweep-rate", "--values", "400000,800000", "--scheme", "Proposed", "--slots", "2", "--blocks", "1", "--dbm"])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "weighted_total_dbm" in out.splitlines()[0]
    assert len(out.splitlines()) == 1 + 2 * 2


def test_config_errors_exit_1(capsys):
    assert main(["sweep-rate", "--values", "800000,400000"]) == EXIT_CONFIG
    assert main(["plan", "--scheme", "teleport"]) == EXIT_CONFIG
    assert main(["plan", "--uavs", "5", "--bs-antennas", "3"]) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_validate_scenario(tmp_path, capsys):
    path = tmp_path / "s.json"
    save_scenario(generate_scenario(SimParams.with_equal_weights(), 2), path)
    assert main(["validate-scenario", str(path)]) == EXIT_OK
    assert "ok: L=3 K=2" in capsys.readouterr().out
    path.write_text("{")
    assert main(["validate-scenario", str(path)]) == EXIT_CONFIG
