import csv
import json

import pytest
from click.testing import CliRunner

from sourcewatch.cli import main
from sourcewatch.store import ScenarioStore

CASE_STUDY = "src/sourcewatch/data/registry.json"


@pytest.fixture()
def runner():
    return CliRunner()


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert "sourcewatch" in result.output


def test_registry_validate(runner):
    result = runner.invoke(main, ["registry", "validate", CASE_STUDY])
    assert result.exit_code == 0
    assert "ok: version" in result.output
    assert "traffic: 3 sources, standard traffic-sensors" in result.output


def test_registry_validate_rejects_garbage(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": "default", "sources": [{}]}',
                   encoding="utf-8")
    result = runner.invoke(main, ["registry", "validate", str(bad)])
    assert result.exit_code == 1
    assert "error:" in result.output


def test_matrix_show_prints_sums(runner):
    result = runner.invoke(main, [
        "matrix", "show", "--registry", CASE_STUDY,
        "--data-type", "traffic"])
    assert result.exit_code == 0
    assert "SUM data features" in result.output
    assert "SUM source vulnerability" in result.output
    assert "digest:" in result.output


def test_matrix_show_unknown_data_type(runner):
    result = runner.invoke(main, [
        "matrix", "show", "--registry", CASE_STUDY, "--data-type", "x"])
    assert result.exit_code == 1


def test_matrix_export_csv(runner, tmp_path):
    out = tmp_path / "matrix.csv"
    result = runner.invoke(main, [
        "matrix", "export", "--registry", CASE_STUDY,
        "--data-type", "traffic", "--out", str(out)])
    assert result.exit_code == 0
    with open(out, newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 33  # 3 pairs x 11 attributes
    assert {row["category"] for row in rows} \
        == {"data-features", "source-vulnerability"}


def test_store_export_csv(runner, tmp_path):
    directory = tmp_path / "scenario"
    store = ScenarioStore(directory)
    store.append("observation", 1.0, {"source-id": "a", "value": 1,
                                      "data-type": "traffic"})
    store.append("decision", 2.0, {"action": "alarm", "chosen": None,
                                   "data-type": "traffic"})
    store.close()
    out = tmp_path / "dump.csv"
    result = runner.invoke(main, [
        "store", "export", str(directory), "--out", str(out)])
    assert result.exit_code == 0
    assert "wrote 2 records" in result.output
    with open(out, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["seq", "at", "kind", "data-type", "body"]
    assert rows[1][2] == "observation"

    filtered = tmp_path / "decisions.csv"
    result = runner.invoke(main, [
        "store", "export", str(directory), "--out", str(filtered),
        "--kind", "decision"])
    assert "wrote 1 records" in result.output


def test_simulate_run_bundled_flood(runner, tmp_path):
    trace = tmp_path / "trace.json"
    result = runner.invoke(main, [
        "simulate", "run", "flood", "--export-trace", str(trace)])
    assert result.exit_code == 0
    assert "DECISION activate-fallback -> floating-car-data" in result.output
    assert "DECISION activate-fallback -> remote-sensing" in result.output
    assert "final traffic: remote-sensing (active)" in result.output
    doc = json.loads(trace.read_text(encoding="utf-8"))
    assert len(doc["decisions"]) == 2


def test_simulate_assert_flood_passes(runner):
    result = runner.invoke(main, ["simulate", "assert", "flood"])
    assert result.exit_code == 0
    assert result.output.count("PASS") == 2
    assert "2/2 expectations met" in result.output


def test_simulate_assert_fails_on_unmet_expectation(runner, tmp_path):
    with open("src/sourcewatch/data/scripts/flood.json",
              encoding="utf-8") as handle:
        doc = json.load(handle)
    doc["expectations"].append({"action": "alarm"})
    script = tmp_path / "doomed.json"
    script.write_text(json.dumps(doc), encoding="utf-8")
    result = runner.invoke(main, ["simulate", "assert", str(script)])
    assert result.exit_code == 1
    assert "FAIL expectation 3" in result.output
    assert "2/3 expectations met" in result.output


def test_simulate_run_unknown_script(runner):
    result = runner.invoke(main, ["simulate", "run", "no-such-script"])
    assert result.exit_code == 1
    assert "no such script" in result.output


def test_serve_rejects_missing_registry(runner, tmp_path):
    result = runner.invoke(main, [
        "serve", "--registry", CASE_STUDY,
        "--store", str(tmp_path / "store"), "--hysteresis", "-3"])
    assert result.exit_code == 1
    assert "hysteresis" in result.output
